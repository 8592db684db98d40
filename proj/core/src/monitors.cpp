#include "pprm/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pprm/error.hpp"

namespace pprm {

void MonitorConfig::validate() const {
  eta_policy.validate();
  cs_spec.validate();
  betting_spec.validate();
  const double total = delta_S() + delta_T();
  if (!(total > 0.0 && total < 1.0)) throw ParameterError("delta_S + delta_T must lie in (0,1)");
  if (!(eps_tol > 0.0)) throw ParameterError("eps_tol must be positive");
  if (!(source_eta >= 0.0)) throw ParameterError("source_eta must be nonnegative");
  require_unit_interval(initial_prediction, "initial prediction");
  if (urm.quantile_grid < 2) throw ParameterError("urm quantile_grid must be at least 2");
  if (!(urm.pfp_share > 0.0 && urm.pfp_share < 1.0)) {
    throw ParameterError("urm pfp_share must lie in (0,1)");
  }
}

SourceData pool_source(std::span<const StepBatch> batches) {
  SourceData out;
  for (const auto& b : batches) {
    validate_batch(b);
    out.labeled.insert(out.labeled.end(), b.labeled.begin(), b.labeled.end());
    out.unlabeled_synth.insert(out.unlabeled_synth.end(), b.unlabeled_synth.begin(),
                               b.unlabeled_synth.end());
    out.labeled_proxies.insert(out.labeled_proxies.end(), b.labeled_proxies.begin(),
                               b.labeled_proxies.end());
  }
  if (!out.labeled_proxies.empty() && out.labeled_proxies.size() != out.labeled.size()) {
    throw PreconditionError("labeled proxies must be present on every source record or none");
  }
  return out;
}

SourceCalibration calibrate_source(const SourceData& source, SourceBoundMethod method,
                                   const MonitorConfig& config) {
  if (source.labeled.empty()) throw CalibrationError("source data has no labeled samples");
  SourceCalibration calib;
  calib.method = method;
  calib.n0 = source.labeled.size();
  calib.N0 = source.unlabeled_synth.size();

  if (method == SourceBoundMethod::hoeffding_labeled_only) {
    double sum = 0.0;
    for (const auto& p : source.labeled) sum += p.true_loss;
    calib.estimate = sum / static_cast<double>(calib.n0);
    calib.upper_bound = calib.estimate + hoeffding_radius(calib.n0, config.delta_S());
    return calib;
  }

  calib.eta0 = config.source_eta;
  const BlockwiseValues z =
      blockwise_ppi_values(source.labeled, source.unlabeled_synth, calib.eta0);
  double sum = 0.0;
  for (double v : z.values) sum += v;
  calib.estimate = sum / static_cast<double>(z.values.size());
  calib.degenerate_blocks = z.degenerate;
  calib.upper_bound =
      betting_upper_bound(z.values, {-calib.eta0, 1.0 + calib.eta0}, config.betting_spec);
  return calib;
}

MonitorState initial_monitor_state(const MonitorConfig& config) {
  MonitorState s;
  s.variance_process = VarianceProcess::with_initial_prediction(config.initial_prediction);
  return s;
}

double normalization_eta_max(MonitorKind kind, const MonitorConfig& config) {
  return kind == MonitorKind::supervised ? 0.0 : config.eta_policy.eta_max;
}

double next_eta(const MonitorState& state, MonitorKind kind, const MonitorConfig& config,
                bool has_unlabeled) {
  if (kind == MonitorKind::supervised || !has_unlabeled) return 0.0;
  const EtaPolicy& policy = config.eta_policy;
  if (policy.mode == EtaMode::fixed) return policy.eta_fixed;

  std::vector<LabeledLossPair> labeled;
  std::vector<double> unlabeled;
  for (const auto& step : state.labeled_window) labeled.insert(labeled.end(), step.begin(), step.end());
  for (const auto& step : state.unlabeled_window) {
    unlabeled.insert(unlabeled.end(), step.begin(), step.end());
  }
  return eta_adaptive(labeled, unlabeled, policy);
}

BoundTrace monitor_step(MonitorState& state, const StepBatch& batch,
                        const SourceCalibration& calib, const MonitorConfig& config,
                        MonitorKind kind, const MixtureBoundary& boundary) {
  if (batch.t != state.t + 1) {
    throw SequencingError("expected step " + std::to_string(state.t + 1) + ", got " +
                          std::to_string(batch.t));
  }
  validate_batch(batch);

  // eta is fixed before the current batch enters the windows.
  const double eta = next_eta(state, kind, config, !batch.unlabeled_synth.empty());
  const double scale = normalization_eta_max(kind, config);
  const RiskEstimate est = ppi_estimate(batch, eta, std::max(scale, eta));
  const double normalized = normalize_loss(est.value, scale);

  state.t = batch.t;
  state.estimate_sum += est.value;
  state.running_estimate = state.estimate_sum / static_cast<double>(state.t);
  state.variance_process = variance_process_update(state.variance_process, normalized);
  state.radius = boundary.radius(state.variance_process.v, state.radius);

  const auto t = static_cast<double>(state.t);
  const double normalized_mean = state.variance_process.running_sum / t;
  state.lower_bound = denormalize_bound(normalized_mean - state.radius / t, scale);
  if (state.lower_bound > calib.upper_bound + config.eps_tol) state.alarm_latched = true;

  const std::size_t window = config.eta_policy.window_L;
  state.eta_history.push_back(eta);
  state.labeled_window.push_back(batch.labeled);
  state.unlabeled_window.push_back(batch.unlabeled_synth);
  while (state.eta_history.size() > window) state.eta_history.pop_front();
  while (state.labeled_window.size() > window) state.labeled_window.pop_front();
  while (state.unlabeled_window.size() > window) state.unlabeled_window.pop_front();

  return {state.t,      est.value, state.running_estimate,   state.lower_bound,
          calib.upper_bound, eta,  state.variance_process.v, state.alarm_latched};
}

RiskMonitor::RiskMonitor(MonitorKind kind, MonitorConfig config, SourceCalibration calib)
    : kind_(kind),
      config_(std::move(config)),
      calib_(calib),
      boundary_(config_.cs_spec),
      state_(initial_monitor_state(config_)) {
  config_.validate();
}

BoundTrace RiskMonitor::step(const StepBatch& batch) {
  return monitor_step(state_, batch, calib_, config_, kind_, boundary_);
}

std::optional<std::int64_t> first_alarm_time(std::span<const BoundTrace> trace) {
  for (const auto& row : trace) {
    if (row.alarm) return row.t;
  }
  return std::nullopt;
}

std::vector<double> threshold_candidates(std::span<const double> values, std::size_t grid) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  const std::size_t n = sorted.size();
  for (std::size_t k = 1; k < grid; ++k) {
    const double level = static_cast<double>(k) / static_cast<double>(grid);
    const auto idx = static_cast<std::size_t>(std::floor(level * static_cast<double>(n - 1)));
    const double a = sorted[idx];
    const auto next = std::upper_bound(sorted.begin() + static_cast<std::ptrdiff_t>(idx),
                                       sorted.end(), a);
    if (next == sorted.end()) continue;
    out.push_back(0.5 * (a + *next));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

UrmCalibration urm_calibrate(std::span<const double> source_proxies,
                             std::span<const double> source_losses,
                             const MonitorConfig& config) {
  if (source_proxies.empty() || source_proxies.size() != source_losses.size()) {
    throw PreconditionError("URM calibration needs equally sized, nonempty proxy and loss lists");
  }
  for (double x : source_proxies) require_unit_interval(x, "source proxy");
  for (double x : source_losses) require_unit_interval(x, "source loss");
  const auto [pmin, pmax] = std::minmax_element(source_proxies.begin(), source_proxies.end());
  if (*pmin == *pmax) throw CalibrationError("source proxies are constant");

  const std::vector<double> taus = threshold_candidates(source_losses, config.urm.quantile_grid);
  const std::vector<double> betas =
      threshold_candidates(source_proxies, config.urm.quantile_grid);
  if (taus.empty()) throw CalibrationError("source losses are constant");

  UrmCalibration best;
  bool found = false;
  const std::size_t n = source_losses.size();
  for (double tau : taus) {
    for (double beta : betas) {
      std::size_t tp = 0;
      std::size_t fp = 0;
      std::size_t fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool flagged = source_proxies[i] > beta;
        const bool harmful = source_losses[i] > tau;
        tp += flagged && harmful;
        fp += flagged && !harmful;
        fn += !flagged && harmful;
      }
      const std::size_t denom = 2 * tp + fp + fn;
      const double f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
      if (!found || f1 > best.f1) {
        found = true;
        best.f1 = f1;
        best.tau = tau;
        best.beta0 = beta;
        best.pfp0 = static_cast<double>(fp) / static_cast<double>(n);
      }
    }
  }
  if (!(best.f1 > 0.0)) throw CalibrationError("no proxy threshold predicts any loss exceedance");

  best.n0 = n;
  const double pfp_delta = config.delta_S() * config.urm.pfp_share;
  const double source_delta = config.delta_S() - pfp_delta;
  best.pfp0_ucb = std::min(1.0, best.pfp0 + hoeffding_radius(n, pfp_delta));
  double sum = 0.0;
  for (double x : source_losses) sum += x;
  best.source_upper_bound = sum / static_cast<double>(n) + hoeffding_radius(n, source_delta);
  return best;
}

UrmState initial_urm_state(const MonitorConfig& config) {
  UrmState s;
  s.variance_process = VarianceProcess::with_initial_prediction(config.initial_prediction);
  return s;
}

BoundTrace urm_step(UrmState& state, std::int64_t t, std::span<const double> proxies,
                    const UrmCalibration& calib, const MonitorConfig& config,
                    const MixtureBoundary& boundary) {
  if (t != state.t + 1) {
    throw SequencingError("expected step " + std::to_string(state.t + 1) + ", got " +
                          std::to_string(t));
  }
  if (proxies.empty()) throw PreconditionError("URM step needs at least one proxy value");
  std::size_t exceed = 0;
  for (double r : proxies) {
    require_unit_interval(r, "proxy");
    exceed += r > calib.beta0;
  }
  const double frac = static_cast<double>(exceed) / static_cast<double>(proxies.size());

  state.t = t;
  state.exceed_sum += frac;
  state.variance_process = variance_process_update(state.variance_process, frac);
  const auto td = static_cast<double>(t);
  state.radius = boundary.radius(state.variance_process.v, state.radius);
  state.lower_bound =
      calib.tau * (state.exceed_sum / td - state.radius / td - calib.pfp0_ucb);
  if (state.lower_bound > calib.source_upper_bound + config.eps_tol) state.alarm_latched = true;

  return {t,   calib.tau * frac, calib.tau * state.exceed_sum / td, state.lower_bound,
          calib.source_upper_bound, 0.0, state.variance_process.v, state.alarm_latched};
}

UnsupervisedMonitor::UnsupervisedMonitor(MonitorConfig config, UrmCalibration calib)
    : config_(std::move(config)),
      calib_(calib),
      boundary_(config_.cs_spec),
      state_(initial_urm_state(config_)) {
  config_.validate();
}

BoundTrace UnsupervisedMonitor::step(const StepBatch& batch) {
  return urm_step(state_, batch.t, batch.proxies, calib_, config_, boundary_);
}

}  // namespace pprm
