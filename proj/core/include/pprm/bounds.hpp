#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pprm/types.hpp"

namespace pprm {

/// Settings of the conjugate-mixture empirical-Bernstein boundary.
///
/// The mixing density over lambda is uniform on (0, lambda_max]. The
/// bracketing rule for the boundary root starts at max(1, V) and doubles at
/// most `max_bracket_doublings` times before giving up.
struct ConfidenceSequenceSpec {
  double delta_T = 0.2;
  double lambda_max = 0.95;
  std::size_t quadrature_nodes = 200;
  double root_tol = 1e-6;
  int max_bracket_doublings = 60;

  void validate() const;
};

/// psi_E(lambda) = -log(1 - lambda) - lambda, for lambda in [0, 1).
double psi_E(double lambda);

/// Precomputed quadrature for one ConfidenceSequenceSpec. Cheap to query,
/// immutable after construction, safe to share between threads.
class MixtureBoundary {
 public:
  explicit MixtureBoundary(const ConfidenceSequenceSpec& spec);

  /// log of  int q(lambda) exp(lambda S - psi_E(lambda) V) dlambda.
  double log_integral(double S, double V) const;

  /// The mixture integral itself; throws NumericError when it overflows.
  double integral(double S, double V) const;

  /// u(V): the crossing of the integral with 1/delta_T, located to within
  /// root_tol and returned from the upper side, so that
  /// integral(u - root_tol, V) < 1/delta_T <= integral(u, V).
  ///
  /// `lower_hint` may carry a previously computed u(V') for some V' <= V;
  /// the boundary is nondecreasing in V, so it is a valid lower bracket.
  double radius(double V, double lower_hint = 0.0) const;

  const ConfidenceSequenceSpec& spec() const { return spec_; }

 private:
  struct Eval {
    double value;  // log integral - log(1/delta_T)
    double slope;  // d/dS of the log integral
  };
  Eval evaluate(double S, double V) const;

  ConfidenceSequenceSpec spec_;
  double log_threshold_;
  std::vector<double> lambda_;
  std::vector<double> log_weight_;
  std::vector<double> psi_;
};

/// Free-function forms. Each call builds its own quadrature; long-running
/// callers should hold a MixtureBoundary instead.
double mixture_integral(double S, double V, const ConfidenceSequenceSpec& spec);
double cm_eb_radius(double V, const ConfidenceSequenceSpec& spec);

/// Running sum of squared one-step prediction errors of values in [0,1],
/// where the prediction for step t is the clipped mean of steps 1..t-1.
struct VarianceProcess {
  double v = 0.0;
  double last_running_mean = 0.5;
  std::int64_t count = 0;
  double running_sum = 0.0;

  static VarianceProcess with_initial_prediction(double z_hat_1);
};

VarianceProcess variance_process_update(const VarianceProcess& vp, double z);

/// sqrt(ln(1/delta) / (2 n)).
double hoeffding_radius(std::size_t n, double delta);

struct BlockwiseValues {
  std::vector<double> values;
  /// Set when some labeled sample was paired with an empty block.
  bool degenerate = false;
};

/// Pairs labeled sample i with the i-th contiguous block of the unlabeled
/// losses (block sizes differ by at most one) and returns
///   z_i = eta0 * mean(block_i) + true_i - eta0 * synth_i.
BlockwiseValues blockwise_ppi_values(std::span<const LabeledLossPair> labeled,
                                     std::span<const double> unlabeled_synth, double eta0);

struct BettingSpec {
  double delta_S = 0.05;
  std::size_t grid_size = 1000;
  double bet_cap = 0.75;
  double variance_floor = 1e-4;

  void validate() const;
};

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Bet sizes for values already scaled to [0,1]: bet i depends only on
/// values before i and never exceeds bet_cap.
std::vector<double> predictable_bets(std::span<const double> unit_values,
                                     const BettingSpec& spec);

/// Upper confidence bound on the mean of i.i.d. values in [lo, hi] by
/// inverting one-sided test-by-betting wealth processes over a grid of
/// candidate means. Miscoverage is at most delta_S.
double betting_upper_bound(std::span<const double> values, ValueRange range,
                           const BettingSpec& spec);

}  // namespace pprm
