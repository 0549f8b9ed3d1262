#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsda/point_cloud.hpp"

namespace gsda {

struct ModelConfig {
  std::vector<int> point_widths{64, 128, 256};
  std::vector<int> head_widths{64, 8};  // last entry is the class count
  std::uint64_t seed = 0;

  int num_classes() const { return head_widths.empty() ? 0 : head_widths.back(); }
  /// Throws Error(kConfig) on empty layer lists or widths < 1.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // in x out
  Eigen::RowVectorXd bias;
};

/// Classification objective. Targeted minimizes -log p_target; untargeted
/// minimizes log p_true, clamped below at log(1e-12).
struct Objective {
  enum class Kind { kTargeted, kUntargeted };
  Kind kind = Kind::kUntargeted;
  int label = 0;

  static Objective targeted(int target) { return {Kind::kTargeted, target}; }
  static Objective untargeted(int true_label) { return {Kind::kUntargeted, true_label}; }
  /// Plain cross-entropy -log p_label, used for training.
  static Objective cross_entropy(int label) { return targeted(label); }

  bool achieved(int predicted) const {
    return kind == Kind::kTargeted ? predicted == label : predicted != label;
  }
};

inline constexpr double kUntargetedProbFloor = 1e-12;

struct Prediction {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  int label = 0;  // argmax of logits, lowest index on ties
};

struct InputGradient {
  double loss = 0.0;
  Prediction prediction;
  Points gradient;  // dLoss/dPoints, n x 3
};

struct TrainConfig;
struct TrainHistory;

/// Mini-PointNet: shared per-point MLP with ReLU, global max-pool, then a
/// fully connected head (ReLU on hidden layers, linear logits).
class Classifier {
 public:
  Classifier() = default;
  /// Deterministic He-uniform weights from config.seed, zero biases.
  explicit Classifier(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  int num_classes() const { return config_.num_classes(); }

  Prediction forward(const Points& points) const;
  int classify(const Points& points) const { return forward(points).label; }

  /// Loss and analytic gradient wrt the input points. The max-pool gradient
  /// goes to the lowest-index argmax row of each feature.
  InputGradient input_gradient(const Points& points, const Objective& objective) const;

  /// Loss plus gradients for every parameter, laid out like parameters().
  double parameter_gradient(const Points& points, const Objective& objective,
                            Eigen::VectorXd& grad_out) const;

  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  const std::vector<DenseLayer>& point_layers() const { return point_layers_; }
  const std::vector<DenseLayer>& head_layers() const { return head_layers_; }
  std::vector<DenseLayer>& point_layers() { return point_layers_; }
  std::vector<DenseLayer>& head_layers() { return head_layers_; }

 private:
  friend TrainHistory train(Classifier&, const std::vector<PointCloud>&, const TrainConfig&,
                            const std::vector<PointCloud>*);

  struct Pass;
  // Per-thread activation buffers, reused so repeated passes do not allocate.
  static Pass& scratch_pass();
  void run_forward(const Points& points, Pass& pass) const;
  double run_backward(const Pass& pass, const Objective& objective, Points* input_grad,
                      Eigen::VectorXd* param_grad) const;

  ModelConfig config_;
  std::vector<DenseLayer> point_layers_;
  std::vector<DenseLayer> head_layers_;
};

/// Loss of a logit vector under an objective (log-softmax, numerically stable).
double objective_loss(const Eigen::VectorXd& logits, const Objective& objective);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = -1.0;  // negative when no test set was given
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::vector<double> step_losses;  // mean batch loss per optimizer step
};

/// Mini-batch Adam on mean cross-entropy with L2 weight decay added to the
/// gradient. Shuffling is seeded from config.seed.
TrainHistory train(Classifier& model, const std::vector<PointCloud>& train_set,
                   const TrainConfig& config, const std::vector<PointCloud>* test_set = nullptr);

double accuracy(const Classifier& model, const std::vector<PointCloud>& clouds);

/// Binary checkpoint: magic "GSDAMODL", u32 version, u32 metadata length,
/// UTF-8 JSON config, u64 parameter count, little-endian float64 payload.
void save_model(const Classifier& model, const std::filesystem::path& path);
Classifier load_model(const std::filesystem::path& path);

}  // namespace gsda
