#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsda/attack.hpp"
#include "gsda/defense.hpp"
#include "gsda/model.hpp"
#include "gsda/report.hpp"
#include "gsda/shapes.hpp"

namespace gsda {

// ---- dataset manifests -----------------------------------------------------

struct ManifestEntry {
  int id = 0;
  std::string name;
  std::string path;  // relative to the manifest directory
  int label = 0;
  std::string split;  // "train" or "test"
};

/// Writes clouds/<name>.xyz for every instance plus manifest.json.
/// Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const DatasetConfig& config,
                                    const std::filesystem::path& out_dir);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);

/// Loads clouds whose split matches ("all" loads everything).
std::vector<PointCloud> load_split(const std::filesystem::path& manifest_path, const std::string& split);

// ---- attack suites ---------------------------------------------------------

enum class AttackMethod { kGsda, kXyzBaseline };

/// Round-robin over the other classes, offset by the seed.
int round_robin_target(int true_label, int index, int num_classes, std::uint64_t seed);

/// Up to `count` correctly classified clouds, taken round-robin across classes
/// in input order.
std::vector<PointCloud> select_correct(const Classifier& model, const std::vector<PointCloud>& pool,
                                       int count);

struct SuiteOutput {
  EvalReport report;
  std::vector<AttackResult> results;  // aligned with report.rows
};

nlohmann::json config_to_json(const AttackConfig& config, AttackMethod method);

/// Runs one attack per cloud on `jobs` worker threads. Row order follows the
/// input order regardless of completion order.
SuiteOutput run_attack_suite(const Classifier& model, const std::vector<PointCloud>& clouds,
                             const AttackConfig& config, AttackMethod method, int jobs,
                             std::uint64_t seed);

// ---- adversarial sets on disk ----------------------------------------------

struct AdversarialInstance {
  int id = 0;
  PointCloud cloud;  // label = true label
  int target_label = -1;
  bool attack_success = false;
};

/// Writes report.json, rows.csv, adv/<id>.xyz, adv/<id>_delta.csv and
/// adversarial.json into out_dir.
void write_attack_outputs(const SuiteOutput& suite, const std::filesystem::path& out_dir);
std::vector<AdversarialInstance> read_adversarial_set(const std::filesystem::path& dir);

// ---- defenses and transfer -------------------------------------------------

enum class DefenseKind { kNone, kSor, kSrs };

struct DefenseSpec {
  DefenseKind kind = DefenseKind::kNone;
  SorConfig sor;
  int srs_drop = 0;
  std::uint64_t seed = 0;

  std::string describe() const;
};

PointCloud apply_defense(const PointCloud& cloud, const DefenseSpec& spec, int instance_id);

struct DefenseRow {
  std::string defense;
  double parameter = 0.0;
  int instances = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::vector<int> predictions;
};

/// Attack success after classify(defense(adv)): targeted instances succeed on
/// the target label, untargeted ones on any wrong label.
DefenseRow evaluate_defense(const Classifier& model, const std::vector<AdversarialInstance>& set,
                            const DefenseSpec& spec);

/// Misclassification rate of each target model on each source's set.
Eigen::MatrixXd transfer_matrix(const std::vector<std::vector<AdversarialInstance>>& sources,
                                const std::vector<const Classifier*>& targets);

}  // namespace gsda
