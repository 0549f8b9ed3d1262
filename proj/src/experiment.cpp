#include "gsda/experiment.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "gsda/errors.hpp"

namespace gsda {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

fs::path write_dataset(const Dataset& dataset, const DatasetConfig& config, const fs::path& out_dir) {
  make_dirs(out_dir / "clouds");
  nlohmann::json entries = nlohmann::json::array();
  int id = 0;
  for (const auto* split : {&dataset.train, &dataset.test}) {
    const std::string split_name = split == &dataset.train ? "train" : "test";
    for (const auto& cloud : *split) {
      const std::string rel = "clouds/" + cloud.name + ".xyz";
      save_point_cloud(cloud, out_dir / rel, CloudFormat::kXyz);
      entries.push_back({{"id", id++},
                         {"name", cloud.name},
                         {"path", rel},
                         {"label", *cloud.label},
                         {"class_name", std::string(shape_class_name(*cloud.label))},
                         {"split", split_name}});
    }
  }
  nlohmann::json manifest = {{"seed", config.seed},
                             {"per_class", config.per_class},
                             {"n_points", config.n_points},
                             {"jitter_sigma", config.jitter_sigma},
                             {"train_fraction", config.train_fraction},
                             {"classes", config.classes},
                             {"augment",
                              {{"rotate_z", config.augment.rotate_z},
                               {"scale_min", config.augment.scale_min},
                               {"scale_max", config.augment.scale_max}}},
                             {"entries", entries}};
  const fs::path path = out_dir / "manifest.json";
  write_text(path, manifest.dump(2) + "\n");
  return path;
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest_path) {
  const auto j = read_json(manifest_path);
  std::vector<ManifestEntry> out;
  try {
    for (const auto& e : j.at("entries")) {
      out.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                     e.at("path").get<std::string>(), e.at("label").get<int>(),
                     e.at("split").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
  return out;
}

std::vector<PointCloud> load_split(const fs::path& manifest_path, const std::string& split) {
  if (split != "train" && split != "test" && split != "all") {
    throw Error(ErrorCode::kConfig, "split must be train, test or all");
  }
  std::vector<PointCloud> clouds;
  for (const auto& e : read_manifest(manifest_path)) {
    if (split != "all" && e.split != split) continue;
    auto cloud = load_point_cloud(manifest_path.parent_path() / e.path);
    cloud.label = e.label;
    cloud.name = e.name;
    clouds.push_back(std::move(cloud));
  }
  return clouds;
}

int round_robin_target(int true_label, int index, int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorCode::kConfig, "targeted attacks need >= 2 classes");
  const auto others = static_cast<std::uint64_t>(num_classes - 1);
  const auto step = (static_cast<std::uint64_t>(index) + seed) % others;
  return static_cast<int>((static_cast<std::uint64_t>(true_label) + 1 + step) %
                          static_cast<std::uint64_t>(num_classes));
}

std::vector<PointCloud> select_correct(const Classifier& model, const std::vector<PointCloud>& pool,
                                       int count) {
  std::map<int, std::vector<const PointCloud*>> by_class;
  for (const auto& c : pool) {
    if (c.label && model.classify(c.points) == *c.label) by_class[*c.label].push_back(&c);
  }
  std::vector<PointCloud> out;
  for (std::size_t round = 0; static_cast<int>(out.size()) < count; ++round) {
    bool any = false;
    for (auto& [label, members] : by_class) {
      if (round < members.size() && static_cast<int>(out.size()) < count) {
        out.push_back(*members[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

nlohmann::json config_to_json(const AttackConfig& c, AttackMethod method) {
  nlohmann::json j = {
      {"method", method == AttackMethod::kGsda ? "gsda" : "xyz"},
      {"iterations", c.iterations},
      {"lr", c.lr},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"k", c.k},
      {"beta_init", c.beta_init},
      {"binary_search_steps", c.binary_search_steps},
      {"w_chamfer", c.w_chamfer},
      {"w_hausdorff", c.w_hausdorff},
      {"eps_max", c.eps_max},
      {"eps_xyz", c.eps_xyz},
      {"mode", c.mode == AttackMode::kTargeted ? "targeted" : "untargeted"},
      {"transform", c.transform == SpectralTransform::kGraph ? "gft" : "dct"},
  };
  if (c.band_mask) {
    j["band_mask"] = {c.band_mask->begin, c.band_mask->end};
  } else {
    j["band_mask"] = nullptr;
  }
  return j;
}

SuiteOutput run_attack_suite(const Classifier& model, const std::vector<PointCloud>& clouds,
                             const AttackConfig& config, AttackMethod method, int jobs,
                             std::uint64_t seed) {
  config.validate();
  const std::size_t count = clouds.size();
  SuiteOutput out;
  out.report.rows.resize(count);
  out.results.resize(count);

  auto run_one = [&](std::size_t i) {
    const PointCloud& clean = clouds[i];
    AttackConfig cfg = config;
    if (cfg.mode == AttackMode::kTargeted) {
      cfg.target_label = round_robin_target(*clean.label, static_cast<int>(i), model.num_classes(), seed);
    }
    const auto start = std::chrono::steady_clock::now();
    AttackResult result = method == AttackMethod::kGsda ? gsda_attack(model, clean, cfg)
                                                        : xyz_baseline_attack(model, clean, cfg);
    const auto stop = std::chrono::steady_clock::now();

    EvalRow& row = out.report.rows[i];
    row.id = static_cast<int>(i);
    row.name = clean.name;
    row.true_label = *clean.label;
    row.target_label = cfg.mode == AttackMode::kTargeted ? cfg.target_label : -1;
    row.success = result.success;
    row.predicted_label = result.predicted_label;
    row.distortion = result.distortion;
    row.beta_used = result.beta_used;
    row.iterations = result.iterations_run;
    row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    out.results[i] = std::move(result);
  };

  for (const auto& c : clouds) {
    if (!c.label) throw Error(ErrorCode::kConfig, "cloud '" + c.name + "' has no label");
  }
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  out.report.config = config_to_json(config, method);
  out.report.config["seed"] = seed;
  out.report.config["instances"] = count;
  out.report.aggregates = aggregate(out.report.rows);
  return out;
}

void write_attack_outputs(const SuiteOutput& suite, const fs::path& out_dir) {
  make_dirs(out_dir / "adv");
  write_text(out_dir / "report.json", to_json(suite.report).dump(2) + "\n");
  {
    std::ofstream csv(out_dir / "rows.csv", std::ios::trunc);
    if (!csv) throw Error(ErrorCode::kIo, "cannot write rows.csv");
    write_rows_csv(csv, suite.report.rows);
  }
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < suite.results.size(); ++i) {
    const auto& row = suite.report.rows[i];
    const auto& result = suite.results[i];
    const std::string stem = "adv/" + std::to_string(row.id) + "_" + row.name;
    save_point_cloud(result.adversarial, out_dir / (stem + ".xyz"), CloudFormat::kXyz);
    {
      std::ofstream delta(out_dir / (stem + "_delta.csv"), std::ios::trunc);
      if (!delta) throw Error(ErrorCode::kIo, "cannot write delta spectrum");
      delta << "index,delta_x,delta_y,delta_z\n";
      for (Eigen::Index r = 0; r < result.delta.values.rows(); ++r) {
        delta << r << ',' << format_double(result.delta.values(r, 0)) << ','
              << format_double(result.delta.values(r, 1)) << ','
              << format_double(result.delta.values(r, 2)) << '\n';
      }
    }
    entries.push_back({{"id", row.id},
                       {"name", row.name},
                       {"path", stem + ".xyz"},
                       {"true_label", row.true_label},
                       {"target_label", row.target_label},
                       {"success", row.success}});
  }
  write_text(out_dir / "adversarial.json",
             nlohmann::json{{"config", suite.report.config}, {"entries", entries}}.dump(2) + "\n");
}

std::vector<AdversarialInstance> read_adversarial_set(const fs::path& dir) {
  const auto j = read_json(dir / "adversarial.json");
  std::vector<AdversarialInstance> out;
  try {
    for (const auto& e : j.at("entries")) {
      AdversarialInstance inst;
      inst.id = e.at("id").get<int>();
      inst.cloud = load_point_cloud(dir / e.at("path").get<std::string>(), CloudFormat::kXyz);
      inst.cloud.label = e.at("true_label").get<int>();
      inst.cloud.name = e.at("name").get<std::string>();
      inst.target_label = e.at("target_label").get<int>();
      inst.attack_success = e.at("success").get<bool>();
      out.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, (dir / "adversarial.json").string() + ": " + e.what());
  }
  return out;
}

std::string DefenseSpec::describe() const {
  switch (kind) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kSor:
      return sor.drop_ratio ? "sor(drop_ratio=" + format_double(*sor.drop_ratio) + ")"
                            : "sor(k=" + std::to_string(sor.k_neighbors) +
                                  ",alpha=" + format_double(sor.alpha) + ")";
    case DefenseKind::kSrs: return "srs(drop=" + std::to_string(srs_drop) + ")";
  }
  return "unknown";
}

PointCloud apply_defense(const PointCloud& cloud, const DefenseSpec& spec, int instance_id) {
  switch (spec.kind) {
    case DefenseKind::kNone: return cloud;
    case DefenseKind::kSor: return sor_defense(cloud, spec.sor);
    case DefenseKind::kSrs:
      return srs_defense(cloud, spec.srs_drop, spec.seed + static_cast<std::uint64_t>(instance_id));
  }
  return cloud;
}

DefenseRow evaluate_defense(const Classifier& model, const std::vector<AdversarialInstance>& set,
                            const DefenseSpec& spec) {
  DefenseRow row;
  row.defense = spec.describe();
  row.parameter = spec.kind == DefenseKind::kSor ? spec.sor.drop_ratio.value_or(spec.sor.alpha)
                                                 : static_cast<double>(spec.srs_drop);
  row.instances = static_cast<int>(set.size());
  for (const auto& inst : set) {
    const int predicted = model.classify(apply_defense(inst.cloud, spec, inst.id).points);
    row.predictions.push_back(predicted);
    const bool success = inst.target_label >= 0 ? predicted == inst.target_label
                                                : predicted != *inst.cloud.label;
    if (success) ++row.successes;
  }
  if (row.instances > 0) row.success_rate = static_cast<double>(row.successes) / row.instances;
  return row;
}

Eigen::MatrixXd transfer_matrix(const std::vector<std::vector<AdversarialInstance>>& sources,
                                const std::vector<const Classifier*>& targets) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sources.size()),
                                            static_cast<Eigen::Index>(targets.size()));
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (sources[s].empty()) continue;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      int wrong = 0;
      for (const auto& inst : sources[s]) {
        if (targets[t]->classify(inst.cloud.points) != *inst.cloud.label) ++wrong;
      }
      m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) =
          static_cast<double>(wrong) / static_cast<double>(sources[s].size());
    }
  }
  return m;
}

}  // namespace gsda
