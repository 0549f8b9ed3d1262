#include "gsda/attack.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "gsda/errors.hpp"

namespace gsda {

void AttackConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::kConfig, "iterations must be >= 1");
  if (binary_search_steps < 1) throw Error(ErrorCode::kConfig, "binary_search_steps must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorCode::kConfig, "lr must be > 0");
  if (!(eps_max >= 0.0) || !(eps_xyz >= 0.0)) throw Error(ErrorCode::kConfig, "bounds must be >= 0");
  if (w_chamfer < 0.0 || w_hausdorff < 0.0 || beta_init < 0.0) {
    throw Error(ErrorCode::kConfig, "loss weights must be >= 0");
  }
  if (k < 1) throw Error(ErrorCode::kConfig, "K must be >= 1");
  if (band_mask && (band_mask->begin < 0 || band_mask->begin > band_mask->end)) {
    throw Error(ErrorCode::kBadRange, "bad band mask");
  }
}

SpectralCoeffs project_delta(const SpectralCoeffs& delta, const SpectralCoeffs& x_hat, double eps_max,
                             const std::optional<IndexRange>& band_mask) {
  if (delta.values.rows() != x_hat.values.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "delta and coefficients differ in size");
  }
  SpectralCoeffs out;
  const Eigen::MatrixX3d bound = eps_max * x_hat.values.cwiseAbs();
  out.values = delta.values.cwiseMin(bound).cwiseMax(-bound);
  if (band_mask) {
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
      if (!band_mask->contains(i)) out.values.row(i).setZero();
    }
  }
  return out;
}

AdversarialLoss adversarial_loss(const Classifier& model, const Points& adv, const Points& clean,
                                 const Objective& objective, double beta, double w_chamfer,
                                 double w_hausdorff) {
  const auto cls = model.input_gradient(adv, objective);
  const auto nn = nearest_neighbors(adv, clean);
  const double n = static_cast<double>(adv.rows());

  Eigen::Index worst = 0;
  for (Eigen::Index i = 1; i < nn.sq_dist.size(); ++i) {
    if (nn.sq_dist[i] > nn.sq_dist[worst]) worst = i;
  }
  const double cd = nn.sq_dist.sum() / n;
  const double hd = nn.sq_dist[worst];

  AdversarialLoss out;
  out.terms.l_class = cls.loss;
  out.terms.l_reg = w_chamfer * cd + w_hausdorff * hd;
  out.total = out.terms.l_class + beta * out.terms.l_reg;
  out.chamfer = cd;
  out.prediction = cls.prediction;
  out.points = adv;
  out.gradient = cls.gradient;
  if (beta != 0.0) {
    const double c_scale = beta * w_chamfer * 2.0 / n;
    for (Eigen::Index i = 0; i < adv.rows(); ++i) {
      out.gradient.row(i) += c_scale * (adv.row(i) - clean.row(nn.index[static_cast<std::size_t>(i)]));
    }
    out.gradient.row(worst) +=
        beta * w_hausdorff * 2.0 * (adv.row(worst) - clean.row(nn.index[static_cast<std::size_t>(worst)]));
  }
  return out;
}

AdversarialLoss spectral_adversarial_loss(const Classifier& model, const SpectralBasis& basis,
                                          const Points& clean, const SpectralCoeffs& delta,
                                          const Objective& objective, double beta, double w_chamfer,
                                          double w_hausdorff) {
  if (basis.U.rows() != clean.rows() || delta.values.rows() != clean.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "basis, cloud and delta differ in size");
  }
  // U (x_hat + delta) == clean + U delta, and the latter is exact at delta = 0.
  const Points adv = clean + basis.U * delta.values;
  AdversarialLoss out = adversarial_loss(model, adv, clean, objective, beta, w_chamfer, w_hausdorff);
  out.gradient = basis.U.transpose() * out.gradient;
  return out;
}

Objective attack_objective(const AttackConfig& config, int true_label) {
  if (config.mode == AttackMode::kTargeted) {
    if (config.target_label < 0) throw Error(ErrorCode::kConfig, "targeted attack needs a target label");
    if (config.target_label == true_label) {
      throw Error(ErrorCode::kConfig, "target label equals the true label");
    }
    return Objective::targeted(config.target_label);
  }
  return Objective::untargeted(true_label);
}

namespace {

// Loss of one value of the n x 3 optimization variable (spectral delta or
// coordinate offset), with the gradient taken wrt that variable.
using Evaluate = std::function<AdversarialLoss(const Eigen::MatrixX3d&, double beta)>;

struct Iterate {
  Points points;
  Eigen::MatrixX3d variable;
  int predicted = -1;
  double chamfer = std::numeric_limits<double>::infinity();
  double beta = 0.0;
};

struct SearchOutcome {
  std::optional<Iterate> best;
  Iterate last;
  int iterations_run = 0;
  std::vector<LossTerms> trace;
};

SearchOutcome run_search(const Objective& objective, const AttackConfig& config,
                         const Eigen::MatrixX3d& bound, const Evaluate& evaluate) {
  SearchOutcome out;
  const Eigen::Index n = bound.rows();
  if (config.record_trace) {
    out.trace.reserve(static_cast<std::size_t>(config.iterations) *
                      static_cast<std::size_t>(config.binary_search_steps));
  }

  double beta = config.beta_init;
  double beta_lo = 0.0;
  double beta_hi = std::numeric_limits<double>::infinity();

  for (int round = 0; round < config.binary_search_steps; ++round) {
    Eigen::MatrixX3d var = Eigen::MatrixX3d::Zero(n, 3);
    Eigen::MatrixX3d m = Eigen::MatrixX3d::Zero(n, 3);
    Eigen::MatrixX3d v = Eigen::MatrixX3d::Zero(n, 3);
    bool round_success = false;

    for (int it = 1; it <= config.iterations; ++it) {
      AdversarialLoss loss = evaluate(var, beta);
      ++out.iterations_run;
      const int predicted = loss.prediction.label;
      const bool achieved = objective.achieved(predicted);
      if (config.record_trace) {
        out.trace.push_back({loss.terms.l_class, loss.terms.l_reg, loss.chamfer, achieved});
      }

      if (achieved) {
        round_success = true;
        if (!out.best || loss.chamfer < out.best->chamfer) {
          out.best = Iterate{loss.points, var, predicted, loss.chamfer, beta};
        }
      }
      const Eigen::MatrixX3d& grad = loss.gradient;

      m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
      v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad.cwiseAbs2();
      out.last = Iterate{std::move(loss.points), var, predicted, loss.chamfer, beta};
      const double c1 = 1.0 - std::pow(config.adam_beta1, it);
      const double c2 = 1.0 - std::pow(config.adam_beta2, it);
      var.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_eps);
      var = var.cwiseMin(bound).cwiseMax(-bound);

      if (config.check_constraint && ((var.cwiseAbs() - bound).array() > 0.0).any()) {
        throw Error(ErrorCode::kConvergence, "perturbation left its feasible box");
      }
    }

    // Success means the penalty can grow; failure means it must shrink.
    if (round_success) {
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 10.0 : 0.5 * (beta_lo + beta_hi);
    } else {
      beta_hi = beta;
      beta = beta_lo == 0.0 ? beta / 10.0 : 0.5 * (beta_lo + beta_hi);
    }
  }
  return out;
}

AttackResult finish(const PointCloud& clean, SearchOutcome outcome,
                    const std::function<SpectralCoeffs(const Iterate&)>& spectral_delta) {
  AttackResult result;
  result.success = outcome.best.has_value();
  const Iterate& chosen = result.success ? *outcome.best : outcome.last;
  result.adversarial.points = chosen.points;
  result.adversarial.label = clean.label;
  result.adversarial.name = clean.name;
  result.delta = spectral_delta(chosen);
  result.predicted_label = chosen.predicted;
  result.beta_used = chosen.beta;
  result.distortion = distortion(chosen.points, clean.points, result.delta);
  result.iterations_run = outcome.iterations_run;
  result.loss_trace = std::move(outcome.trace);
  return result;
}

int require_label(const Classifier& model, const PointCloud& clean) {
  if (!clean.label) throw Error(ErrorCode::kConfig, "attack needs the clean label");
  if (*clean.label < 0 || *clean.label >= model.num_classes()) {
    throw Error(ErrorCode::kConfig, "clean label out of range");
  }
  return *clean.label;
}

SpectralBasis attack_basis(const Points& clean, const AttackConfig& config) {
  return config.transform == SpectralTransform::kGraph
             ? graph_basis(clean, config.k)
             : dct_basis(clean.rows());
}

}  // namespace

AttackResult gsda_attack(const Classifier& model, const PointCloud& clean, const AttackConfig& config) {
  config.validate();
  const Objective objective = attack_objective(config, require_label(model, clean));
  const SpectralBasis basis = attack_basis(clean.points, config);
  const SpectralCoeffs x_hat = gft(basis, clean.points);

  // Feasible box of the ratio constraint, with masked rows pinned to zero.
  const Eigen::MatrixX3d bound =
      project_delta({x_hat.values.cwiseAbs() * (config.eps_max + 1.0)}, x_hat, config.eps_max,
                    config.band_mask)
          .values;

  auto outcome = run_search(objective, config, bound, [&](const Eigen::MatrixX3d& delta, double beta) {
    return spectral_adversarial_loss(model, basis, clean.points, {delta}, objective, beta,
                                     config.w_chamfer, config.w_hausdorff);
  });
  return finish(clean, std::move(outcome), [](const Iterate& it) { return SpectralCoeffs{it.variable}; });
}

AttackResult xyz_baseline_attack(const Classifier& model, const PointCloud& clean,
                                 const AttackConfig& config) {
  config.validate();
  const Objective objective = attack_objective(config, require_label(model, clean));
  const Eigen::MatrixX3d bound = Eigen::MatrixX3d::Constant(clean.size(), 3, config.eps_xyz);

  auto outcome = run_search(objective, config, bound, [&](const Eigen::MatrixX3d& offset, double beta) {
    return adversarial_loss(model, clean.points + offset, clean.points, objective, beta,
                            config.w_chamfer, config.w_hausdorff);
  });
  const SpectralBasis basis = attack_basis(clean.points, config);
  return finish(clean, std::move(outcome), [&](const Iterate& it) {
    return SpectralCoeffs{basis.U.transpose() * it.variable};
  });
}

}  // namespace gsda
