#include "gsda/report.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "gsda/errors.hpp"

namespace gsda {

namespace {

constexpr const char* kCsvHeader =
    "id,name,true_label,target_label,success,predicted_label,d_norm,d_c,d_h,e_delta,beta_used,"
    "iterations,wall_ms";

double parse_num(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, "bad number '" + s + "' in report CSV");
  }
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, "bad integer '" + s + "' in report CSV");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EvalAggregates aggregate(const std::vector<EvalRow>& rows) {
  EvalAggregates a;
  a.instances = static_cast<int>(rows.size());
  for (const auto& r : rows) {
    if (!r.success) continue;
    ++a.successes;
    a.mean_d_norm += r.distortion.d_norm;
    a.mean_d_c += r.distortion.d_c;
    a.mean_d_h += r.distortion.d_h;
    a.mean_e_delta += r.distortion.e_delta;
  }
  if (a.instances > 0) a.success_rate = static_cast<double>(a.successes) / a.instances;
  if (a.successes > 0) {
    a.mean_d_norm /= a.successes;
    a.mean_d_c /= a.successes;
    a.mean_d_h /= a.successes;
    a.mean_e_delta /= a.successes;
  }
  return a;
}

nlohmann::json to_json(const EvalReport& report, bool include_timing) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json j = {{"id", r.id},
                        {"name", r.name},
                        {"true_label", r.true_label},
                        {"target_label", r.target_label},
                        {"success", r.success},
                        {"predicted_label", r.predicted_label},
                        {"d_norm", r.distortion.d_norm},
                        {"d_c", r.distortion.d_c},
                        {"d_h", r.distortion.d_h},
                        {"e_delta", r.distortion.e_delta},
                        {"beta_used", r.beta_used},
                        {"iterations", r.iterations}};
    if (include_timing) j["wall_ms"] = r.wall_ms;
    rows.push_back(std::move(j));
  }
  const auto& a = report.aggregates;
  return {{"config", report.config},
          {"rows", rows},
          {"aggregates",
           {{"instances", a.instances},
            {"successes", a.successes},
            {"success_rate", a.success_rate},
            {"mean_d_norm", a.mean_d_norm},
            {"mean_d_c", a.mean_d_c},
            {"mean_d_h", a.mean_d_h},
            {"mean_e_delta", a.mean_e_delta}}}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    report.config = j.at("config");
    for (const auto& r : j.at("rows")) {
      EvalRow row;
      row.id = r.at("id").get<int>();
      row.name = r.at("name").get<std::string>();
      row.true_label = r.at("true_label").get<int>();
      row.target_label = r.at("target_label").get<int>();
      row.success = r.at("success").get<bool>();
      row.predicted_label = r.at("predicted_label").get<int>();
      row.distortion.d_norm = r.at("d_norm").get<double>();
      row.distortion.d_c = r.at("d_c").get<double>();
      row.distortion.d_h = r.at("d_h").get<double>();
      row.distortion.e_delta = r.at("e_delta").get<double>();
      row.beta_used = r.at("beta_used").get<double>();
      row.iterations = r.at("iterations").get<int>();
      row.wall_ms = r.value("wall_ms", 0.0);
      report.rows.push_back(std::move(row));
    }
    const auto& a = j.at("aggregates");
    report.aggregates.instances = a.at("instances").get<int>();
    report.aggregates.successes = a.at("successes").get<int>();
    report.aggregates.success_rate = a.at("success_rate").get<double>();
    report.aggregates.mean_d_norm = a.at("mean_d_norm").get<double>();
    report.aggregates.mean_d_c = a.at("mean_d_c").get<double>();
    report.aggregates.mean_d_h = a.at("mean_d_h").get<double>();
    report.aggregates.mean_e_delta = a.at("mean_e_delta").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string deterministic_payload(const EvalReport& report) {
  return to_json(report, /*include_timing=*/false).dump(2);
}

void write_rows_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.id << ',' << r.name << ',' << r.true_label << ',' << r.target_label << ','
        << (r.success ? 1 : 0) << ',' << r.predicted_label << ',' << format_double(r.distortion.d_norm)
        << ',' << format_double(r.distortion.d_c) << ',' << format_double(r.distortion.d_h) << ','
        << format_double(r.distortion.e_delta) << ',' << format_double(r.beta_used) << ','
        << r.iterations << ',' << format_double(r.wall_ms) << '\n';
  }
}

std::vector<EvalRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error(ErrorCode::kParse, "unexpected report CSV header");
  }
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 13) throw Error(ErrorCode::kParse, "report CSV row has wrong arity");
    EvalRow r;
    r.id = parse_int(f[0]);
    r.name = f[1];
    r.true_label = parse_int(f[2]);
    r.target_label = parse_int(f[3]);
    r.success = parse_int(f[4]) != 0;
    r.predicted_label = parse_int(f[5]);
    r.distortion = {parse_num(f[6]), parse_num(f[7]), parse_num(f[8]), parse_num(f[9])};
    r.beta_used = parse_num(f[10]);
    r.iterations = parse_int(f[11]);
    r.wall_ms = parse_num(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace gsda
