#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsda/errors.hpp"
#include "gsda/experiment.hpp"
#include "gsda/metrics.hpp"
#include "gsda/model.hpp"
#include "gsda/point_cloud.hpp"
#include "gsda/shapes.hpp"
#include "gsda/spectral.hpp"
#include "gsda/svg.hpp"

namespace fs = std::filesystem;
using gsda::Error;
using gsda::ErrorCode;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Globals {
  std::uint64_t seed = 0;
  int jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string out_dir = "out";
  std::string format = "json";
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

void write_svg(const fs::path& path, const std::vector<gsda::Series>& series,
               const gsda::ChartOptions& options) {
  auto out = open_out(path);
  gsda::write_line_chart(out, series, options);
}

// Flat list of records printed either as pretty JSON or as a CSV table.
void emit(const Globals& g, const json& records, const fs::path& file_stem) {
  std::ostringstream text;
  if (g.format == "json") {
    text << records.dump(2) << "\n";
  } else {
    const json& first = records.front();
    bool head = true;
    for (auto it = first.begin(); it != first.end(); ++it) {
      text << (head ? "" : ",") << it.key();
      head = false;
    }
    text << "\n";
    for (const auto& r : records) {
      head = true;
      for (auto it = first.begin(); it != first.end(); ++it) {
        const json& v = r.at(it.key());
        text << (head ? "" : ",");
        if (v.is_string()) {
          const auto str = v.get<std::string>();
          text << (str.find(',') == std::string::npos ? str : "\"" + str + "\"");
        } else if (v.is_number_float()) {
          text << gsda::format_double(v.get<double>());
        } else {
          text << v.dump();
        }
        head = false;
      }
      text << "\n";
    }
  }
  std::cout << text.str();
  if (!file_stem.empty()) {
    fs::path file = file_stem;
    file += g.format == "json" ? ".json" : ".csv";
    write_text(file, text.str());
  }
}

gsda::IndexRange parse_band(const std::string& text, Eigen::Index n, const gsda::BandBounds& bounds) {
  if (text == "low") return bounds.low();
  if (text == "mid") return bounds.mid();
  if (text == "high") return bounds.high(n);
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kBadRange, "band must be low, mid, high or a:b, got " + text);
  try {
    const gsda::IndexRange r{std::stol(text.substr(0, colon)), std::stol(text.substr(colon + 1))};
    if (r.begin < 0 || r.end > n || r.begin >= r.end) throw Error(ErrorCode::kBadRange, "band " + text + " outside [0, n)");
    return r;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kBadRange, "cannot parse band " + text);
  }
}

gsda::BandBounds resolve_bounds(Eigen::Index n, Eigen::Index low_end, Eigen::Index mid_end) {
  gsda::BandBounds b = gsda::default_band_bounds(n);
  if (low_end > 0) b.low_end = low_end;
  if (mid_end > 0) b.mid_end = mid_end;
  if (b.low_end > b.mid_end || b.mid_end > n) throw Error(ErrorCode::kBadRange, "band bounds must satisfy low <= mid <= n");
  return b;
}

// ---- gen-data ---------------------------------------------------------------

struct GenArgs {
  int per_class = 50;
  int n_points = 256;
  std::vector<std::string> classes;
  double jitter = 0.01;
  double train_fraction = 0.8;
  bool no_rotate = false;
  double scale_min = 0.8;
  double scale_max = 1.25;
};

void cmd_gen_data(const Globals& g, const GenArgs& a) {
  gsda::DatasetConfig dc;
  dc.per_class = a.per_class;
  dc.n_points = a.n_points;
  dc.seed = g.seed;
  dc.jitter_sigma = a.jitter;
  dc.train_fraction = a.train_fraction;
  dc.augment.rotate_z = !a.no_rotate;
  dc.augment.scale_min = a.scale_min;
  dc.augment.scale_max = a.scale_max;
  if (!a.classes.empty()) {
    dc.classes.clear();
    for (const auto& c : a.classes) dc.classes.push_back(gsda::shape_class_id(c));
  }
  const auto ds = gsda::gen_dataset(dc);
  ensure_dir(g.out_dir);
  const auto manifest = gsda::write_dataset(ds, dc, g.out_dir);
  std::ifstream in(manifest, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  emit(g,
       json::array({{{"manifest", manifest.string()},
                     {"entries", ds.train.size() + ds.test.size()},
                     {"train", ds.train.size()},
                     {"test", ds.test.size()},
                     {"hash", gsda::fnv1a_hex(text)}}}),
       {});
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string model_out;
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::vector<int> point_widths{64, 128, 256};
  std::vector<int> head_hidden{64};
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  const auto train_set = gsda::load_split(a.manifest, "train");
  const auto test_set = gsda::load_split(a.manifest, "test");
  gsda::ModelConfig mc;
  mc.point_widths = a.point_widths;
  mc.head_widths = a.head_hidden;
  mc.head_widths.push_back(gsda::kNumShapeClasses);
  mc.seed = g.seed;
  gsda::Classifier model(mc);
  gsda::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.learning_rate = a.lr;
  tc.weight_decay = a.weight_decay;
  tc.seed = g.seed;
  const auto history = gsda::train(model, train_set, tc, test_set.empty() ? nullptr : &test_set);

  ensure_dir(g.out_dir);
  const fs::path model_path = a.model_out.empty() ? fs::path(g.out_dir) / "model.bin" : fs::path(a.model_out);
  gsda::save_model(model, model_path);

  json rows = json::array();
  gsda::Series loss{"train loss", {}, {}}, train_acc{"train accuracy", {}, {}}, test_acc{"test accuracy", {}, {}};
  for (const auto& e : history.epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"train_accuracy", e.train_accuracy},
                    {"test_accuracy", e.test_accuracy}});
    loss.x.push_back(e.epoch);
    loss.y.push_back(e.train_loss);
    train_acc.x.push_back(e.epoch);
    train_acc.y.push_back(e.train_accuracy);
    test_acc.x.push_back(e.epoch);
    test_acc.y.push_back(e.test_accuracy);
  }
  write_svg(fs::path(g.out_dir) / "train_loss.svg", {loss}, {"Training loss", "epoch", "loss", true});
  write_svg(fs::path(g.out_dir) / "train_accuracy.svg", {train_acc, test_acc},
            {"Accuracy", "epoch", "accuracy", false});
  emit(g, rows, fs::path(g.out_dir) / "history");
  std::cerr << "model written to " << model_path.string() << "\n";
}

// ---- classify ---------------------------------------------------------------

struct ClassifyArgs {
  std::string model;
  std::string manifest;
  std::string split = "test";
  std::vector<std::string> inputs;
};

void cmd_classify(const Globals& g, const ClassifyArgs& a) {
  const auto model = gsda::load_model(a.model);
  std::vector<gsda::PointCloud> clouds;
  if (!a.manifest.empty()) clouds = gsda::load_split(a.manifest, a.split);
  for (const auto& p : a.inputs) {
    auto c = gsda::load_point_cloud(p);
    c.name = p;
    clouds.push_back(std::move(c));
  }
  if (clouds.empty()) throw Error(ErrorCode::kConfig, "nothing to classify: pass --manifest or input files");
  json rows = json::array();
  int labeled = 0, correct = 0;
  for (const auto& c : clouds) {
    const auto pred = model.forward(c.points);
    rows.push_back({{"name", c.name},
                    {"label", c.label ? *c.label : -1},
                    {"predicted", pred.label},
                    {"class", std::string(gsda::shape_class_name(pred.label))},
                    {"confidence", pred.probs(pred.label)}});
    if (c.label) {
      ++labeled;
      correct += pred.label == *c.label;
    }
  }
  ensure_dir(g.out_dir);
  emit(g, rows, fs::path(g.out_dir) / "classify");
  if (labeled > 0) std::cerr << "accuracy " << gsda::format_double(double(correct) / labeled) << " on " << labeled << " labeled clouds\n";
}

// ---- spectrum ---------------------------------------------------------------

struct SpectrumArgs {
  std::string input;
  int k = 10;
  std::vector<std::string> remove_bands;
  std::string perturb_band;
  double delta = 0.2;
  long low_end = 0;
  long mid_end = 0;
  bool normalize = false;
};

std::vector<gsda::Series> magnitude_series(const gsda::SpectralCoeffs& c, const std::string& tag) {
  std::vector<gsda::Series> out;
  const char* axes[] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    gsda::Series s{tag + "|" + axes[a] + "|", {}, {}};
    for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(std::abs(c.values(i, a)));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void cmd_spectrum(const Globals& g, const SpectrumArgs& a) {
  auto cloud = gsda::load_point_cloud(a.input);
  if (a.normalize) cloud = gsda::normalize_unit_ball(cloud);
  const Eigen::Index n = cloud.size();
  const auto basis = gsda::graph_basis(cloud.points, a.k);
  const auto x_hat = gsda::gft(basis, cloud.points);
  const auto bounds = resolve_bounds(n, a.low_end, a.mid_end);

  auto modified = x_hat;
  std::vector<std::string> ops;
  for (const auto& b : a.remove_bands) {
    if (b == "none") continue;
    modified = gsda::band_filter(modified, parse_band(b, n, bounds), gsda::ZeroBand{});
    ops.push_back("remove:" + b);
  }
  if (!a.perturb_band.empty()) {
    modified = gsda::band_filter(modified, parse_band(a.perturb_band, n, bounds), gsda::AddConstant{a.delta});
    ops.push_back("perturb:" + a.perturb_band);
  }
  const gsda::PointCloud rebuilt{gsda::igft(basis, modified), cloud.label, cloud.name};
  const gsda::SpectralCoeffs change{modified.values - x_hat.values};

  const fs::path dir = g.out_dir;
  ensure_dir(dir);
  {
    auto out = open_out(dir / "spectrum.csv");
    gsda::write_spectrum_csv(out, basis, x_hat);
  }
  {
    auto out = open_out(dir / "spectrum_modified.csv");
    gsda::write_spectrum_csv(out, basis, modified);
  }
  gsda::save_point_cloud(rebuilt, dir / "reconstructed.xyz");
  auto series = magnitude_series(x_hat, "input ");
  if (!ops.empty()) {
    for (auto& s : magnitude_series(modified, "modified ")) series.push_back(std::move(s));
  }
  write_svg(dir / "spectrum.svg", series, {"GFT coefficient magnitude", "frequency index", "|coefficient|", true});

  const auto energy = gsda::band_energy(x_hat, bounds);
  const auto energy_out = gsda::band_energy(modified, bounds);
  const double max_err = (rebuilt.points - cloud.points).cwiseAbs().maxCoeff();
  json summary = {{"input", a.input},
                  {"n", n},
                  {"k", a.k},
                  {"low_end", bounds.low_end},
                  {"mid_end", bounds.mid_end},
                  {"operations", ops.empty() ? "none" : ops.front()},
                  {"energy_low", energy.low},
                  {"energy_mid", energy.mid},
                  {"energy_high", energy.high},
                  {"energy_lowest_32", gsda::low_frequency_energy_fraction(x_hat, std::min<Eigen::Index>(32, n))},
                  {"out_energy_low", energy_out.low},
                  {"out_energy_mid", energy_out.mid},
                  {"out_energy_high", energy_out.high},
                  {"e_delta", gsda::spectral_energy_delta(change)},
                  {"max_abs_change", max_err}};
  for (std::size_t i = 1; i < ops.size(); ++i) summary["operations"] = summary["operations"].get<std::string>() + ";" + ops[i];
  emit(g, json::array({summary}), dir / "spectrum_summary");
}

// ---- attack -----------------------------------------------------------------

struct AttackArgs {
  std::string model;
  std::string manifest;
  std::string split = "test";
  int count = 100;
  std::string select = "correct";
  std::string mode = "untargeted";
  std::string baseline = "none";
  std::string band_mask;
  std::string transform = "gft";
  gsda::AttackConfig cfg;
  bool no_trace = false;
};

void cmd_attack(const Globals& g, AttackArgs a) {
  const auto model = gsda::load_model(a.model);
  auto pool = gsda::load_split(a.manifest, a.split);
  std::vector<gsda::PointCloud> clouds;
  if (a.select == "correct") {
    clouds = gsda::select_correct(model, pool, a.count);
  } else {
    pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(a.count, 0))));
    clouds = std::move(pool);
  }
  if (clouds.empty()) throw Error(ErrorCode::kConfig, "no clouds selected for attack");

  a.cfg.mode = a.mode == "targeted" ? gsda::AttackMode::kTargeted : gsda::AttackMode::kUntargeted;
  a.cfg.transform = a.transform == "dct" ? gsda::SpectralTransform::kDct : gsda::SpectralTransform::kGraph;
  a.cfg.record_trace = !a.no_trace;
  if (!a.band_mask.empty()) {
    const Eigen::Index n = clouds.front().size();
    a.cfg.band_mask = parse_band(a.band_mask, n, gsda::default_band_bounds(n));
  }
  const auto method = a.baseline == "xyz" ? gsda::AttackMethod::kXyzBaseline : gsda::AttackMethod::kGsda;
  auto suite = gsda::run_attack_suite(model, clouds, a.cfg, method, g.jobs, g.seed);
  suite.report.config["model"] = a.model;
  suite.report.config["manifest"] = a.manifest;
  suite.report.config["split"] = a.split;
  suite.report.config["select"] = a.select;
  ensure_dir(g.out_dir);
  gsda::write_attack_outputs(suite, g.out_dir);

  if (a.cfg.record_trace) {
    std::vector<gsda::Series> series;
    for (std::size_t i = 0; i < std::min<std::size_t>(suite.results.size(), 4); ++i) {
      gsda::Series s{suite.report.rows[i].name, {}, {}};
      const auto& trace = suite.results[i].loss_trace;
      for (std::size_t t = 0; t < trace.size(); ++t) {
        s.x.push_back(static_cast<double>(t));
        s.y.push_back(trace[t].d_c);
      }
      series.push_back(std::move(s));
    }
    write_svg(fs::path(g.out_dir) / "chamfer_trace.svg", series, {"Chamfer distance per step", "step", "D_c", true});
  }

  const auto& ag = suite.report.aggregates;
  emit(g,
       json::array({{{"method", method == gsda::AttackMethod::kGsda ? "gsda" : "xyz"},
                     {"mode", a.mode},
                     {"instances", ag.instances},
                     {"successes", ag.successes},
                     {"success_rate", ag.success_rate},
                     {"mean_d_norm", ag.mean_d_norm},
                     {"mean_d_c", ag.mean_d_c},
                     {"mean_d_h", ag.mean_d_h},
                     {"mean_e_delta", ag.mean_e_delta}}}),
       {});
}

// ---- defend-eval ------------------------------------------------------------

struct DefendArgs {
  std::string model;
  std::string adv_dir;
  std::string defense = "none";
  int sor_k = 2;
  double sor_alpha = 1.1;
  std::vector<double> sor_drop_ratios;
  std::vector<int> srs_drops{500};
};

void cmd_defend_eval(const Globals& g, const DefendArgs& a) {
  const auto model = gsda::load_model(a.model);
  const auto set = gsda::read_adversarial_set(a.adv_dir);
  std::vector<gsda::DefenseSpec> specs;
  gsda::DefenseSpec base;
  base.seed = g.seed;
  base.sor.k_neighbors = a.sor_k;
  base.sor.alpha = a.sor_alpha;
  if (a.defense == "none") {
    specs.push_back(base);
  } else if (a.defense == "sor") {
    base.kind = gsda::DefenseKind::kSor;
    if (a.sor_drop_ratios.empty()) specs.push_back(base);
    for (double r : a.sor_drop_ratios) {
      auto s = base;
      s.sor.drop_ratio = r;
      specs.push_back(s);
    }
  } else {
    base.kind = gsda::DefenseKind::kSrs;
    for (int d : a.srs_drops) {
      auto s = base;
      s.srs_drop = d;
      specs.push_back(s);
    }
  }
  json rows = json::array();
  gsda::Series sweep{a.defense, {}, {}};
  for (const auto& s : specs) {
    const auto r = gsda::evaluate_defense(model, set, s);
    rows.push_back({{"defense", r.defense},
                    {"parameter", r.parameter},
                    {"instances", r.instances},
                    {"successes", r.successes},
                    {"success_rate", r.success_rate}});
    sweep.x.push_back(r.parameter);
    sweep.y.push_back(r.success_rate);
  }
  ensure_dir(g.out_dir);
  if (specs.size() > 1) {
    write_svg(fs::path(g.out_dir) / "defense_sweep.svg", {sweep}, {"Attack success under defense", "parameter", "success rate", false});
  }
  emit(g, rows, fs::path(g.out_dir) / "defense");
}

// ---- transfer ---------------------------------------------------------------

struct TransferArgs {
  std::vector<std::string> adv_dirs;
  std::vector<std::string> models;
  std::vector<std::string> source_names;
};

void cmd_transfer(const Globals& g, const TransferArgs& a) {
  if (!a.source_names.empty() && a.source_names.size() != a.adv_dirs.size()) {
    throw Error(ErrorCode::kConfig, "--source-name must be given once per --adv-dir");
  }
  std::vector<std::vector<gsda::AdversarialInstance>> sources;
  for (const auto& d : a.adv_dirs) sources.push_back(gsda::read_adversarial_set(d));
  std::vector<gsda::Classifier> models;
  for (const auto& m : a.models) models.push_back(gsda::load_model(m));
  std::vector<const gsda::Classifier*> targets;
  for (const auto& m : models) targets.push_back(&m);
  const auto matrix = gsda::transfer_matrix(sources, targets);

  ensure_dir(g.out_dir);
  auto csv = open_out(fs::path(g.out_dir) / "transfer.csv");
  csv << "source";
  for (const auto& m : a.models) csv << "," << fs::path(m).stem().string();
  csv << "\n";
  json rows = json::array();
  for (Eigen::Index s = 0; s < matrix.rows(); ++s) {
    const auto su = static_cast<std::size_t>(s);
    const std::string name = a.source_names.empty() ? a.adv_dirs[su] : a.source_names[su];
    csv << name;
    for (Eigen::Index t = 0; t < matrix.cols(); ++t) {
      csv << "," << gsda::format_double(matrix(s, t));
      rows.push_back({{"source", name}, {"target", a.models[static_cast<std::size_t>(t)]}, {"misclassification", matrix(s, t)}});
    }
    csv << "\n";
  }
  emit(g, rows, {});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph spectral domain attacks on point cloud classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every stochastic step")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for attack suites")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for outputs")->capture_default_str();
  app.add_option("--format", g.format, "Summary format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate the synthetic shape dataset and manifest");
  c_gen->add_option("--per-class", gen.per_class)->capture_default_str();
  c_gen->add_option("--n-points", gen.n_points)->capture_default_str();
  c_gen->add_option("--classes", gen.classes, "Class names (default: all eight)")->delimiter(',');
  c_gen->add_option("--jitter", gen.jitter)->capture_default_str();
  c_gen->add_option("--train-fraction", gen.train_fraction)->capture_default_str();
  c_gen->add_flag("--no-rotate", gen.no_rotate);
  c_gen->add_option("--scale-min", gen.scale_min)->capture_default_str();
  c_gen->add_option("--scale-max", gen.scale_max)->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the point cloud classifier");
  c_train->add_option("--manifest", tr.manifest)->required();
  c_train->add_option("--model-out", tr.model_out, "Checkpoint path (default <out-dir>/model.bin)");
  c_train->add_option("--epochs", tr.epochs)->capture_default_str();
  c_train->add_option("--batch-size", tr.batch_size)->capture_default_str();
  c_train->add_option("--lr", tr.lr)->capture_default_str();
  c_train->add_option("--weight-decay", tr.weight_decay)->capture_default_str();
  c_train->add_option("--point-widths", tr.point_widths)->delimiter(',');
  c_train->add_option("--head-hidden", tr.head_hidden, "Hidden head widths; the class layer is appended")->delimiter(',');

  ClassifyArgs cl;
  auto* c_cls = app.add_subcommand("classify", "Classify clouds with a trained model");
  c_cls->add_option("--model", cl.model)->required();
  c_cls->add_option("--manifest", cl.manifest);
  c_cls->add_option("--split", cl.split)->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
  c_cls->add_option("inputs", cl.inputs, "Cloud files (.xyz, .off, .ply)");

  SpectrumArgs sp;
  auto* c_sp = app.add_subcommand("spectrum", "Graph spectrum, band removal and band perturbation");
  c_sp->add_option("--input", sp.input)->required();
  c_sp->add_option("--k", sp.k)->capture_default_str();
  c_sp->add_option("--remove-band", sp.remove_bands, "none, low, mid, high or a:b")->delimiter(',');
  c_sp->add_option("--perturb-band", sp.perturb_band, "Band that receives a constant offset");
  c_sp->add_option("--delta", sp.delta, "Offset for --perturb-band")->capture_default_str();
  c_sp->add_option("--low-end", sp.low_end, "First mid-band index (default n/32)");
  c_sp->add_option("--mid-end", sp.mid_end, "First high-band index (default n/4)");
  c_sp->add_flag("--normalize", sp.normalize, "Normalize to the unit ball first");

  AttackArgs at;
  auto* c_at = app.add_subcommand("attack", "Run an attack suite and write reports and adversarial clouds");
  c_at->add_option("--model", at.model)->required();
  c_at->add_option("--manifest", at.manifest)->required();
  c_at->add_option("--split", at.split)->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
  c_at->add_option("--count", at.count)->capture_default_str();
  c_at->add_option("--select", at.select, "Attack only correctly classified clouds, or the first clouds")
      ->check(CLI::IsMember({"correct", "all"}))
      ->capture_default_str();
  c_at->add_option("--mode", at.mode)->check(CLI::IsMember({"untargeted", "targeted"}))->capture_default_str();
  c_at->add_option("--baseline", at.baseline)->check(CLI::IsMember({"none", "xyz"}))->capture_default_str();
  c_at->add_option("--band-mask", at.band_mask, "low, mid, high or a:b");
  c_at->add_option("--transform", at.transform)->check(CLI::IsMember({"gft", "dct"}))->capture_default_str();
  c_at->add_option("--iterations", at.cfg.iterations)->capture_default_str();
  c_at->add_option("--lr", at.cfg.lr)->capture_default_str();
  c_at->add_option("--k", at.cfg.k)->capture_default_str();
  c_at->add_option("--beta-init", at.cfg.beta_init)->capture_default_str();
  c_at->add_option("--binary-steps", at.cfg.binary_search_steps)->capture_default_str();
  c_at->add_option("--w-chamfer", at.cfg.w_chamfer)->capture_default_str();
  c_at->add_option("--w-hausdorff", at.cfg.w_hausdorff)->capture_default_str();
  c_at->add_option("--eps-max", at.cfg.eps_max)->capture_default_str();
  c_at->add_option("--eps-xyz", at.cfg.eps_xyz)->capture_default_str();
  c_at->add_flag("--check-constraint", at.cfg.check_constraint, "Verify the coefficient bound after every step");
  c_at->add_flag("--no-trace", at.no_trace, "Skip the per-step loss trace");

  DefendArgs df;
  auto* c_df = app.add_subcommand("defend-eval", "Attack success after an input defense");
  c_df->add_option("--model", df.model)->required();
  c_df->add_option("--adv-dir", df.adv_dir)->required();
  c_df->add_option("--defense", df.defense)->check(CLI::IsMember({"none", "sor", "srs"}))->capture_default_str();
  c_df->add_option("--sor-k", df.sor_k)->capture_default_str();
  c_df->add_option("--sor-alpha", df.sor_alpha)->capture_default_str();
  c_df->add_option("--sor-drop-ratio", df.sor_drop_ratios, "Ratio list; one row per value")->delimiter(',');
  c_df->add_option("--srs-drop", df.srs_drops, "Drop counts; one row per value")->delimiter(',');

  TransferArgs tf;
  auto* c_tf = app.add_subcommand("transfer", "Transfer matrix of adversarial sets across models");
  c_tf->add_option("--adv-dir", tf.adv_dirs, "Adversarial directory per source (repeatable)")->required();
  c_tf->add_option("--model", tf.models, "Target model checkpoint (repeatable)")->required();
  c_tf->add_option("--source-name", tf.source_names, "Row label per --adv-dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*c_gen) cmd_gen_data(g, gen);
    if (*c_train) cmd_train(g, tr);
    if (*c_cls) cmd_classify(g, cl);
    if (*c_sp) cmd_spectrum(g, sp);
    if (*c_at) cmd_attack(g, at);
    if (*c_df) cmd_defend_eval(g, df);
    if (*c_tf) cmd_transfer(g, tf);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
