#include "pprm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pprm/error.hpp"

namespace pprm {

namespace {

// Slack for round-off when an estimate sits exactly on the edge of its range.
constexpr double kRangeSlack = 1e-12;

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

void require_unit_interval(double value, const char* what) {
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    throw RangeError(std::string(what) + " must lie in [0,1], got " + std::to_string(value));
  }
}

void validate_batch(const StepBatch& batch) {
  if (batch.labeled.empty()) {
    throw PreconditionError("step batch must contain at least one labeled pair");
  }
  for (const auto& p : batch.labeled) {
    require_unit_interval(p.true_loss, "true loss");
    require_unit_interval(p.synth_loss, "synthetic loss");
  }
  for (double x : batch.unlabeled_synth) require_unit_interval(x, "unlabeled synthetic loss");
  for (double x : batch.proxies) require_unit_interval(x, "proxy");
  if (!batch.labeled_proxies.empty()) {
    if (batch.labeled_proxies.size() != batch.labeled.size()) {
      throw PreconditionError("labeled proxies must align with labeled pairs");
    }
    for (double x : batch.labeled_proxies) require_unit_interval(x, "labeled proxy");
  }
}

void EtaPolicy::validate() const {
  if (!(eta_max >= 0.0) || !std::isfinite(eta_max)) {
    throw ParameterError("eta_max must be finite and nonnegative");
  }
  if (!(eta_fixed >= 0.0 && eta_fixed <= eta_max)) {
    throw ParameterError("eta_fixed must lie in [0, eta_max]");
  }
  if (!(eta_init >= 0.0 && eta_init <= eta_max)) {
    throw ParameterError("eta_init must lie in [0, eta_max]");
  }
  if (window_L < 1) throw ParameterError("window_L must be at least 1");
}

RiskEstimate supervised_estimate(const StepBatch& batch) {
  validate_batch(batch);
  double sum = 0.0;
  for (const auto& p : batch.labeled) sum += p.true_loss;
  return {sum / static_cast<double>(batch.labeled.size()), 0.0, batch.labeled.size(),
          batch.unlabeled_synth.size()};
}

RiskEstimate ppi_estimate(const StepBatch& batch, double eta, double eta_max) {
  if (!(eta >= 0.0 && eta <= eta_max)) {
    throw ParameterError("eta must lie in [0, eta_max], got " + std::to_string(eta));
  }
  RiskEstimate est = supervised_estimate(batch);

  double synth_labeled = 0.0;
  for (const auto& p : batch.labeled) synth_labeled += p.synth_loss;
  synth_labeled /= static_cast<double>(batch.labeled.size());
  const double synth_unlabeled =
      batch.unlabeled_synth.empty() ? 0.0 : mean_of(batch.unlabeled_synth);

  // Written as mean + eta * (difference) so eta == 0 adds an exact zero.
  est.value = est.value + eta * (synth_unlabeled - synth_labeled);
  est.eta_used = eta;
  return est;
}

double eta_star(double cov_u_usynth, double var_usynth, std::size_t n, std::size_t N,
                double eta_max) {
  if (!(var_usynth > 0.0) || !(cov_u_usynth > 0.0) || N == 0) return 0.0;
  const double ratio = static_cast<double>(n) / static_cast<double>(N);
  const double eta = cov_u_usynth / ((1.0 + ratio) * var_usynth);
  return std::clamp(eta, 0.0, eta_max);
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw PreconditionError("sample variance needs at least two points");
  // Exact zero for constant data; the two-pass sum can leave ~1e-33 behind.
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

double sample_covariance_pairs(std::span<const LabeledLossPair> pairs) {
  if (pairs.size() < 2) throw PreconditionError("sample covariance needs at least two pairs");
  double mu = 0.0;
  double ms = 0.0;
  for (const auto& p : pairs) {
    mu += p.true_loss;
    ms += p.synth_loss;
  }
  const auto n = static_cast<double>(pairs.size());
  mu /= n;
  ms /= n;
  double cs = 0.0;
  for (const auto& p : pairs) cs += (p.true_loss - mu) * (p.synth_loss - ms);
  return cs / (n - 1.0);
}

double eta_adaptive(std::span<const LabeledLossPair> history_labeled,
                    std::span<const double> history_unlabeled, const EtaPolicy& policy) {
  if (history_labeled.size() < 2 || history_unlabeled.size() < 2) {
    return std::clamp(policy.eta_init, 0.0, policy.eta_max);
  }
  const double cov = sample_covariance_pairs(history_labeled);
  const double var = sample_variance(history_unlabeled);
  return eta_star(cov, var, history_labeled.size(), history_unlabeled.size(), policy.eta_max);
}

double normalize_loss(double x, double eta_max) {
  if (!std::isfinite(x) || x < -eta_max - kRangeSlack || x > 1.0 + eta_max + kRangeSlack) {
    throw RangeError("value " + std::to_string(x) + " outside [-eta_max, 1 + eta_max]");
  }
  return std::clamp((x + eta_max) / (1.0 + 2.0 * eta_max), 0.0, 1.0);
}

double denormalize_bound(double y, double eta_max) { return (1.0 + 2.0 * eta_max) * y - eta_max; }

}  // namespace pprm
