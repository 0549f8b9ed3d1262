#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsda/metrics.hpp"
#include "gsda/model.hpp"
#include "gsda/point_cloud.hpp"
#include "gsda/spectral.hpp"

namespace gsda {

enum class AttackMode { kUntargeted, kTargeted };

/// Basis the perturbation lives in: graph Fourier (the attack proper) or the
/// 1D DCT over point index order (ablation).
enum class SpectralTransform { kGraph, kDct };

struct AttackConfig {
  int iterations = 500;
  double lr = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int k = 10;
  double beta_init = 10.0;
  int binary_search_steps = 10;
  double w_chamfer = 5.0;
  double w_hausdorff = 0.5;
  double eps_max = 3.0;  // per-frequency ratio bound, eps_min = -eps_max
  AttackMode mode = AttackMode::kUntargeted;
  int target_label = -1;  // used in targeted mode
  std::optional<IndexRange> band_mask;
  SpectralTransform transform = SpectralTransform::kGraph;
  double eps_xyz = 0.05;  // coordinate box for the data-domain baseline
  bool record_trace = true;
  bool check_constraint = false;  // verify the bound after every step

  void validate() const;
};

struct LossTerms {
  double l_class = 0.0;
  double l_reg = 0.0;
  double d_c = 0.0;       // Chamfer distance of the iterate
  bool achieved = false;  // objective met at this iterate
};

struct AttackResult {
  PointCloud adversarial;
  SpectralCoeffs delta;
  bool success = false;
  int predicted_label = -1;
  DistortionReport distortion;
  double beta_used = 0.0;
  int iterations_run = 0;
  std::vector<LossTerms> loss_trace;
};

/// Entrywise clamp of delta into [-eps_max |x_hat|, eps_max |x_hat|]; rows
/// outside band_mask (when given) are zeroed.
SpectralCoeffs project_delta(const SpectralCoeffs& delta, const SpectralCoeffs& x_hat, double eps_max,
                             const std::optional<IndexRange>& band_mask = std::nullopt);

struct AdversarialLoss {
  double total = 0.0;
  LossTerms terms;
  double chamfer = 0.0;
  Prediction prediction;
  Points points;    // the evaluated adversarial cloud
  Points gradient;  // d total / d adv, or d total / d delta for the spectral form
};

/// L_class + beta * (w_chamfer * chamfer + w_hausdorff * hausdorff).
AdversarialLoss adversarial_loss(const Classifier& model, const Points& adv, const Points& clean,
                                 const Objective& objective, double beta, double w_chamfer,
                                 double w_hausdorff);

/// Same loss at P' = clean + U delta, with the gradient pulled back to the
/// spectral variable: U^T dL/dP'.
AdversarialLoss spectral_adversarial_loss(const Classifier& model, const SpectralBasis& basis,
                                          const Points& clean, const SpectralCoeffs& delta,
                                          const Objective& objective, double beta, double w_chamfer,
                                          double w_hausdorff);

/// Objective implied by the config and the clean label.
Objective attack_objective(const AttackConfig& config, int true_label);

/// Spectral-domain attack: basis from the clean cloud, Adam on delta with the
/// ratio projection after every step, binary search over beta. Returns the
/// successful iterate with the lowest Chamfer distance, or the last evaluated
/// iterate when no round succeeded.
AttackResult gsda_attack(const Classifier& model, const PointCloud& clean, const AttackConfig& config);

/// Same loop with a coordinate offset clamped to [-eps_xyz, eps_xyz]. The
/// reported delta is the offset expressed in the clean cloud's graph basis.
AttackResult xyz_baseline_attack(const Classifier& model, const PointCloud& clean,
                                 const AttackConfig& config);

}  // namespace gsda
