#pragma once

#include <cstddef>
#include <span>

#include "pprm/types.hpp"

namespace pprm {

enum class EtaMode { fixed, adaptive };

/// How much weight a prediction-powered estimate puts on synthetic labels.
struct EtaPolicy {
  EtaMode mode = EtaMode::adaptive;
  double eta_fixed = 1.0;
  /// Used before the sliding window holds two labeled and two unlabeled points.
  double eta_init = 1.0;
  /// Clipping ceiling; also fixes the normalization constant of the monitor.
  double eta_max = 1.0;
  std::size_t window_L = 60;

  void validate() const;
};

struct RiskEstimate {
  double value = 0.0;
  double eta_used = 0.0;
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
};

/// Mean of the true labeled losses.
RiskEstimate supervised_estimate(const StepBatch& batch);

/// Prediction-powered estimate
///   (eta/N) sum synth_unlabeled + (1/n) sum true - (eta/n) sum synth_labeled.
/// The unlabeled term is 0 when the batch has no unlabeled inputs. With
/// eta == 0 the result is bit-identical to supervised_estimate.
RiskEstimate ppi_estimate(const StepBatch& batch, double eta, double eta_max);

/// Variance-minimizing weight Cov(u, u~) / ((1 + n/N) Var(u~)), clipped to
/// [0, eta_max]. Zero for non-positive covariance or zero variance.
double eta_star(double cov_u_usynth, double var_usynth, std::size_t n, std::size_t N,
                double eta_max);

/// Plug-in eta_star over a window of past data. The caller passes only data
/// strictly before the current step; the labeled pairs are pooled into one
/// flat sample.
double eta_adaptive(std::span<const LabeledLossPair> history_labeled,
                    std::span<const double> history_unlabeled, const EtaPolicy& policy);

/// Affine map [-eta_max, 1 + eta_max] -> [0, 1].
double normalize_loss(double x, double eta_max);

/// Inverse of normalize_loss; defined on all reals so that a lower bound that
/// falls below 0 on the normalized scale maps back consistently.
double denormalize_bound(double y, double eta_max);

/// Unbiased (n - 1) sample moments. Both require at least two points.
double sample_variance(std::span<const double> xs);
double sample_covariance_pairs(std::span<const LabeledLossPair> pairs);

}  // namespace pprm
