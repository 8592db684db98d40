#include "pprm/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pprm/error.hpp"
#include "pprm/quadrature.hpp"

namespace pprm {

void ConfidenceSequenceSpec::validate() const {
  if (!(delta_T > 0.0 && delta_T < 1.0)) throw ParameterError("delta_T must lie in (0,1)");
  if (!(lambda_max > 0.0 && lambda_max < 1.0)) {
    throw ParameterError("lambda_max must lie in (0,1)");
  }
  if (quadrature_nodes < 16) throw ParameterError("quadrature_nodes must be at least 16");
  if (!(root_tol > 0.0)) throw ParameterError("root_tol must be positive");
  if (max_bracket_doublings < 1) throw ParameterError("max_bracket_doublings must be positive");
}

double psi_E(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw ParameterError("psi_E is defined on [0,1), got " + std::to_string(lambda));
  }
  return -std::log1p(-lambda) - lambda;
}

MixtureBoundary::MixtureBoundary(const ConfidenceSequenceSpec& spec) : spec_(spec) {
  spec_.validate();
  log_threshold_ = -std::log(spec_.delta_T);
  const QuadratureRule rule = gauss_legendre(spec_.quadrature_nodes, 0.0, spec_.lambda_max);
  lambda_ = rule.nodes;
  log_weight_.resize(rule.weights.size());
  psi_.resize(rule.nodes.size());
  // Uniform density 1/lambda_max folded into the weights.
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    log_weight_[i] = std::log(rule.weights[i] / spec_.lambda_max);
    psi_[i] = psi_E(rule.nodes[i]);
  }
}

MixtureBoundary::Eval MixtureBoundary::evaluate(double S, double V) const {
  const std::size_t n = lambda_.size();
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    peak = std::max(peak, log_weight_[i] + lambda_[i] * S - psi_[i] * V);
  }
  double mass = 0.0;
  double moment = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(log_weight_[i] + lambda_[i] * S - psi_[i] * V - peak);
    mass += w;
    moment += w * lambda_[i];
  }
  return {peak + std::log(mass) - log_threshold_, moment / mass};
}

double MixtureBoundary::log_integral(double S, double V) const {
  if (!std::isfinite(S) || !std::isfinite(V) || V < 0.0) {
    throw ParameterError("mixture integral needs finite S and V >= 0");
  }
  return evaluate(S, V).value + log_threshold_;
}

double MixtureBoundary::integral(double S, double V) const {
  const double value = std::exp(log_integral(S, V));
  if (!std::isfinite(value)) {
    throw NumericError("mixture integral overflowed at S=" + std::to_string(S));
  }
  return value;
}

double MixtureBoundary::radius(double V, double lower_hint) const {
  if (!std::isfinite(V) || V < 0.0) throw ParameterError("variance process must be >= 0");
  const double tol = spec_.root_tol;

  double lo = 0.0;
  if (lower_hint > 0.0 && std::isfinite(lower_hint) && evaluate(lower_hint, V).value < 0.0) {
    lo = lower_hint;
  }
  double hi = lo > 0.0 ? lo + std::max(1.0, 0.05 * lo) : std::max(1.0, V);
  Eval at_hi = evaluate(hi, V);
  for (int k = 0; at_hi.value < 0.0; ++k) {
    if (k >= spec_.max_bracket_doublings) {
      throw NumericError("could not bracket the boundary for V=" + std::to_string(V));
    }
    lo = hi;
    hi *= 2.0;
    at_hi = evaluate(hi, V);
  }

  // The log integral is convex and increasing in S, so Newton steps taken
  // from the upper end never overshoot the root; bisection covers round-off.
  for (int iter = 0; iter < 400; ++iter) {
    if (hi - lo <= tol) return hi;
    double next = hi - at_hi.value / at_hi.slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (hi - next < 0.5 * tol) {
      const double probe = hi - tol;
      const Eval at_probe = evaluate(probe, V);
      if (at_probe.value < 0.0) return hi;
      hi = probe;
      at_hi = at_probe;
      continue;
    }
    const Eval at_next = evaluate(next, V);
    if (at_next.value >= 0.0) {
      hi = next;
      at_hi = at_next;
    } else {
      lo = next;
    }
  }
  throw NumericError("boundary root search did not converge");
}

double mixture_integral(double S, double V, const ConfidenceSequenceSpec& spec) {
  return MixtureBoundary(spec).integral(S, V);
}

double cm_eb_radius(double V, const ConfidenceSequenceSpec& spec) {
  return MixtureBoundary(spec).radius(V);
}

VarianceProcess VarianceProcess::with_initial_prediction(double z_hat_1) {
  require_unit_interval(z_hat_1, "initial prediction");
  VarianceProcess vp;
  vp.last_running_mean = z_hat_1;
  return vp;
}

VarianceProcess variance_process_update(const VarianceProcess& vp, double z) {
  require_unit_interval(z, "variance process input");
  VarianceProcess next = vp;
  const double err = z - vp.last_running_mean;
  next.v = vp.v + err * err;
  next.count = vp.count + 1;
  next.running_sum = vp.running_sum + z;
  next.last_running_mean =
      std::clamp(next.running_sum / static_cast<double>(next.count), 0.0, 1.0);
  return next;
}

double hoeffding_radius(std::size_t n, double delta) {
  if (n < 1) throw ParameterError("Hoeffding radius needs n >= 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("delta must lie in (0,1]");
  return std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(n)));
}

BlockwiseValues blockwise_ppi_values(std::span<const LabeledLossPair> labeled,
                                     std::span<const double> unlabeled_synth, double eta0) {
  if (labeled.empty()) throw PreconditionError("block-wise values need labeled data");
  if (!(eta0 >= 0.0)) throw ParameterError("eta0 must be nonnegative");
  const std::size_t n = labeled.size();
  const std::size_t N = unlabeled_synth.size();
  const std::size_t base = N / n;
  const std::size_t extra = N % n;

  BlockwiseValues out;
  out.values.reserve(n);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    double block_mean = 0.0;
    if (size == 0) {
      out.degenerate = true;
    } else {
      for (std::size_t j = offset; j < offset + size; ++j) block_mean += unlabeled_synth[j];
      block_mean /= static_cast<double>(size);
    }
    offset += size;
    out.values.push_back(labeled[i].true_loss + eta0 * (block_mean - labeled[i].synth_loss));
  }
  return out;
}

void BettingSpec::validate() const {
  if (!(delta_S > 0.0 && delta_S < 1.0)) throw ParameterError("delta_S must lie in (0,1)");
  if (grid_size < 100) throw ParameterError("betting grid_size must be at least 100");
  if (!(bet_cap > 0.0 && bet_cap < 1.0)) throw ParameterError("bet_cap must lie in (0,1)");
  if (!(variance_floor > 0.0)) throw ParameterError("variance_floor must be positive");
}

std::vector<double> predictable_bets(std::span<const double> unit_values,
                                     const BettingSpec& spec) {
  // lambda_i only sees x_1..x_{i-1}. Running mean and variance start from
  // the uninformative prior (1/2, 1/4).
  const double log_inv_delta = std::log(1.0 / spec.delta_S);
  std::vector<double> bets(unit_values.size());
  double sum = 0.0;
  double sq_err = 0.25;
  double mean_prev = 0.5;
  for (std::size_t i = 0; i < unit_values.size(); ++i) {
    const auto idx = static_cast<double>(i + 1);
    const double var_prev = std::max(spec.variance_floor, sq_err / idx);
    bets[i] = std::min(spec.bet_cap, std::sqrt(2.0 * log_inv_delta / (var_prev * idx)));
    sum += unit_values[i];
    sq_err += (unit_values[i] - mean_prev) * (unit_values[i] - mean_prev);
    mean_prev = (0.5 + sum) / (idx + 1.0);
  }
  return bets;
}

double betting_upper_bound(std::span<const double> values, ValueRange range,
                           const BettingSpec& spec) {
  spec.validate();
  if (!(range.hi > range.lo)) throw ParameterError("value range must have hi > lo");
  if (values.empty()) return range.hi;
  const double width = range.hi - range.lo;

  std::vector<double> x(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v < range.lo - 1e-12 || v > range.hi + 1e-12) {
      throw RangeError("betting input " + std::to_string(v) + " outside its declared range");
    }
    x[i] = std::clamp((v - range.lo) / width, 0.0, 1.0);
  }

  const std::vector<double> bets = predictable_bets(x, spec);

  // Wealth for candidate m multiplies 1 + lambda (m - x); with bet_cap < 1
  // every factor stays >= 1 - bet_cap > 0. Scan from the top: the answer is
  // one grid step above the largest candidate that survives.
  const double threshold = 1.0 / spec.delta_S;
  const std::size_t G = spec.grid_size;
  const double step = 1.0 / static_cast<double>(G - 1);
  for (std::size_t k = G; k-- > 0;) {
    const double m = static_cast<double>(k) * step;
    double wealth = 1.0;
    bool rejected = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      wealth *= 1.0 + bets[i] * (m - x[i]);
      if (wealth >= threshold) {
        rejected = true;
        break;
      }
    }
    if (!rejected) {
      const double upper = k + 1 < G ? static_cast<double>(k + 1) * step : 1.0;
      return range.lo + width * upper;
    }
  }
  return range.lo;
}

}  // namespace pprm
