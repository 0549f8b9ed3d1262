#include "gsda/point_cloud.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "gsda/errors.hpp"
#include "random.hpp"

namespace gsda {

namespace {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

bool parse_double(std::string_view token, double& out) {
  // from_chars rejects a leading '+', which some writers emit.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::array<double, 3> parse_xyz(const std::vector<std::string>& tokens,
                                const std::filesystem::path& path, int line_no) {
  if (tokens.size() < 3) {
    throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                       ": expected three coordinates");
  }
  std::array<double, 3> p{};
  for (int k = 0; k < 3; ++k) {
    if (!parse_double(tokens[static_cast<std::size_t>(k)], p[static_cast<std::size_t>(k)]) ||
        !std::isfinite(p[static_cast<std::size_t>(k)])) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                         ": bad coordinate '" +
                                         tokens[static_cast<std::size_t>(k)] + "'");
    }
  }
  return p;
}

Points to_matrix(const std::vector<std::array<double, 3>>& rows) {
  Points m(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < 3; ++k) m(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  }
  return m;
}

std::vector<std::array<double, 3>> read_xyz(std::istream& in, const std::filesystem::path& path) {
  std::vector<std::array<double, 3>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(strip_comment(line));
    if (tokens.empty()) continue;
    rows.push_back(parse_xyz(tokens, path, line_no));
  }
  return rows;
}

// Yields non-empty, comment-stripped lines.
class LineReader {
 public:
  LineReader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      tokens = split_ws(strip_comment(line));
      if (!tokens.empty()) return true;
    }
    return false;
  }

  std::vector<std::string> require() {
    std::vector<std::string> tokens;
    if (!next(tokens)) {
      throw Error(ErrorCode::kParse, path_.string() + ": unexpected end of file");
    }
    return tokens;
  }

  int line_no() const { return line_no_; }

 private:
  std::istream& in_;
  const std::filesystem::path& path_;
  int line_no_ = 0;
};

long parse_count(const std::string& tok, const std::filesystem::path& path) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
    throw Error(ErrorCode::kParse, path.string() + ": bad count '" + tok + "'");
  }
  return v;
}

std::vector<std::array<double, 3>> read_off(std::istream& in, const std::filesystem::path& path) {
  LineReader reader(in, path);
  auto tokens = reader.require();
  // Some writers glue the counts onto the header line ("OFF8 6 0").
  std::string head = tokens.front();
  if (head.rfind("OFF", 0) != 0) {
    throw Error(ErrorCode::kParse, path.string() + ": missing OFF header");
  }
  std::vector<std::string> counts;
  if (head.size() > 3) counts.push_back(head.substr(3));
  counts.insert(counts.end(), tokens.begin() + 1, tokens.end());
  if (counts.empty()) counts = reader.require();
  if (counts.size() < 2) {
    throw Error(ErrorCode::kParse, path.string() + ": bad OFF counts line");
  }
  const long n_vertices = parse_count(counts[0], path);
  std::vector<std::array<double, 3>> rows;
  rows.reserve(static_cast<std::size_t>(n_vertices));
  for (long i = 0; i < n_vertices; ++i) {
    auto t = reader.require();
    rows.push_back(parse_xyz(t, path, reader.line_no()));
  }
  return rows;
}

std::vector<std::array<double, 3>> read_ply(std::istream& in, const std::filesystem::path& path) {
  LineReader reader(in, path);
  auto tokens = reader.require();
  if (tokens.front() != "ply") {
    throw Error(ErrorCode::kParse, path.string() + ": missing ply magic");
  }
  long n_vertices = -1;
  bool in_vertex = false;
  int prop_index = 0;
  std::array<int, 3> xyz_col{-1, -1, -1};
  int n_props = 0;
  bool ascii = false;
  while (true) {
    tokens = reader.require();
    if (tokens[0] == "format") {
      ascii = tokens.size() > 1 && tokens[1] == "ascii";
    } else if (tokens[0] == "element") {
      in_vertex = tokens.size() >= 3 && tokens[1] == "vertex";
      if (in_vertex) n_vertices = parse_count(tokens[2], path);
    } else if (tokens[0] == "property" && in_vertex) {
      const std::string& name = tokens.back();
      if (name == "x") xyz_col[0] = prop_index;
      if (name == "y") xyz_col[1] = prop_index;
      if (name == "z") xyz_col[2] = prop_index;
      ++prop_index;
      n_props = prop_index;
    } else if (tokens[0] == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorCode::kParse, path.string() + ": only ascii PLY is supported");
  if (n_vertices < 0) throw Error(ErrorCode::kParse, path.string() + ": no vertex element");
  for (int c : xyz_col) {
    if (c < 0) throw Error(ErrorCode::kParse, path.string() + ": vertex lacks x/y/z");
  }
  std::vector<std::array<double, 3>> rows;
  rows.reserve(static_cast<std::size_t>(n_vertices));
  for (long i = 0; i < n_vertices; ++i) {
    auto t = reader.require();
    if (static_cast<int>(t.size()) < n_props) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(reader.line_no()) +
                                         ": too few vertex properties");
    }
    rows.push_back(parse_xyz({t[static_cast<std::size_t>(xyz_col[0])],
                              t[static_cast<std::size_t>(xyz_col[1])],
                              t[static_cast<std::size_t>(xyz_col[2])]},
                             path, reader.line_no()));
  }
  return rows;
}

}  // namespace

bool all_finite(const Points& points) { return points.allFinite(); }

CloudFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::kXyz;
  if (ext == ".off") return CloudFormat::kOff;
  if (ext == ".ply") return CloudFormat::kPly;
  throw Error(ErrorCode::kParse, "unknown point cloud extension: " + path.string());
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::array<double, 3>> rows;
  switch (format) {
    case CloudFormat::kXyz: rows = read_xyz(in, path); break;
    case CloudFormat::kOff: rows = read_off(in, path); break;
    case CloudFormat::kPly: rows = read_ply(in, path); break;
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyCloud, path.string() + " has no points");
  PointCloud cloud;
  cloud.points = to_matrix(rows);
  cloud.name = path.stem().string();
  return cloud;
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  return load_point_cloud(path, format_from_path(path));
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto n = cloud.size();
  switch (format) {
    case CloudFormat::kXyz: break;
    case CloudFormat::kOff: out << "OFF\n" << n << " 0 0\n"; break;
    case CloudFormat::kPly:
      out << "ply\nformat ascii 1.0\nelement vertex " << n
          << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
      break;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_double(cloud.points(i, 0)) << ' ' << format_double(cloud.points(i, 1)) << ' '
        << format_double(cloud.points(i, 2)) << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  save_point_cloud(cloud, path, format_from_path(path));
}

PointCloud normalize_unit_ball(const PointCloud& cloud) {
  PointCloud out = cloud;
  const Eigen::RowVector3d centroid = cloud.points.colwise().mean();
  out.points.rowwise() -= centroid;
  const double radius = out.points.rowwise().norm().maxCoeff();
  if (radius > 0.0) {
    out.points /= radius;
  } else {
    out.points.setZero();
  }
  return out;
}

PointCloud sample_points(const PointCloud& cloud, Eigen::Index n, std::uint64_t seed) {
  if (n < 1 || n > cloud.size()) {
    throw Error(ErrorCode::kTooFewPoints, "cannot sample " + std::to_string(n) + " of " +
                                              std::to_string(cloud.size()) + " points");
  }
  auto rng = detail::make_rng({seed, 0x5a4d1eULL});
  auto idx = detail::random_subset(static_cast<int>(cloud.size()), static_cast<int>(n), rng);
  PointCloud out;
  out.label = cloud.label;
  out.name = cloud.name;
  out.points.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) out.points.row(i) = cloud.points.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace gsda
