#include "pprm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "pprm/error.hpp"

namespace pprm {

namespace {

struct RunResult {
  std::optional<std::int64_t> alarm_time;
  bool coverage_violated = false;
  double median_eta = 0.0;
  std::vector<double> lower_bound;
  std::vector<double> running_estimate;
};

double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  double m = xs[mid];
  if (xs.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

template <typename StepFn>
RunResult run_monitor(std::span<const StepBatch> batches, std::span<const double> true_risk,
                      StepFn&& step, std::vector<BoundTrace>* keep) {
  RunResult result;
  result.lower_bound.reserve(batches.size());
  result.running_estimate.reserve(batches.size());
  std::vector<double> etas;
  etas.reserve(batches.size());
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const BoundTrace row = step(batches[k]);
    if (row.alarm && !result.alarm_time) result.alarm_time = row.t;
    if (row.lower_bound > true_risk[k]) result.coverage_violated = true;
    result.lower_bound.push_back(row.lower_bound);
    result.running_estimate.push_back(row.running_estimate);
    etas.push_back(row.eta_t);
    if (keep) keep->push_back(row);
  }
  result.median_eta = median_of(std::move(etas));
  return result;
}

std::vector<double> true_losses(const SourceData& source) {
  std::vector<double> losses;
  losses.reserve(source.labeled.size());
  for (const auto& p : source.labeled) losses.push_back(p.true_loss);
  return losses;
}

MonitorConfig with_eta_mode(MonitorConfig config, EtaMode mode) {
  config.eta_policy.mode = mode;
  return config;
}

std::vector<RunResult> run_replication(const ExperimentPlan& plan, std::size_t r,
                                       std::span<const double> true_risk,
                                       const TraceSink& sink) {
  DriftScenario scenario = plan.scenario;
  scenario.seed = plan.base_seed + r;
  const SimulatedStream stream = generate_stream(scenario);
  const SimulatedStream source = generate_source(scenario);
  const SourceData source_data = pool_source(source.batches);
  const MonitorConfig& config = plan.config;

  std::optional<SourceCalibration> pp_calib;
  auto prediction_powered_calibration = [&]() -> const SourceCalibration& {
    if (!pp_calib) pp_calib = calibrate_source(source_data, config.source_bound_method, config);
    return *pp_calib;
  };

  std::vector<RunResult> results;
  results.reserve(plan.methods.size());
  for (Method method : plan.methods) {
    std::vector<BoundTrace> trace;
    std::vector<BoundTrace>* keep = sink ? &trace : nullptr;
    switch (method) {
      case Method::SRM: {
        RiskMonitor monitor(
            MonitorKind::supervised, config,
            calibrate_source(source_data, SourceBoundMethod::hoeffding_labeled_only, config));
        results.push_back(run_monitor(
            stream.batches, true_risk, [&](const StepBatch& b) { return monitor.step(b); }, keep));
        break;
      }
      case Method::PPRM_fixed:
      case Method::PPRM_adaptive: {
        const EtaMode mode = method == Method::PPRM_fixed ? EtaMode::fixed : EtaMode::adaptive;
        RiskMonitor monitor(MonitorKind::prediction_powered, with_eta_mode(config, mode),
                            prediction_powered_calibration());
        results.push_back(run_monitor(
            stream.batches, true_risk, [&](const StepBatch& b) { return monitor.step(b); }, keep));
        break;
      }
      case Method::PPRM_ideal: {
        const std::vector<StepBatch> ideal_source = with_true_labels(source);
        const std::vector<StepBatch> ideal_stream = with_true_labels(stream);
        RiskMonitor monitor(
            MonitorKind::prediction_powered, with_eta_mode(config, EtaMode::adaptive),
            calibrate_source(pool_source(ideal_source), config.source_bound_method, config));
        results.push_back(run_monitor(
            ideal_stream, true_risk, [&](const StepBatch& b) { return monitor.step(b); }, keep));
        break;
      }
      case Method::URM: {
        UnsupervisedMonitor monitor(
            config, urm_calibrate(source_data.labeled_proxies, true_losses(source_data), config));
        results.push_back(run_monitor(
            stream.batches, true_risk, [&](const StepBatch& b) { return monitor.step(b); }, keep));
        break;
      }
    }
    if (sink) sink(r, method, trace);
  }
  return results;
}

MethodSummary summarize(Method method, std::size_t column,
                        const std::vector<std::vector<RunResult>>& runs, std::int64_t horizon) {
  MethodSummary s;
  s.method = method;
  s.replications = runs.size();
  const auto steps = static_cast<std::size_t>(horizon);
  s.mean_lower_bound.assign(steps, 0.0);
  s.mean_running_estimate.assign(steps, 0.0);

  std::size_t alarms = 0;
  double uncensored_sum = 0.0;
  double censored_sum = 0.0;
  double censored_sq = 0.0;
  s.min_alarm_time = static_cast<double>(horizon);
  s.max_alarm_time = 0.0;
  std::vector<double> medians;
  for (const auto& rep : runs) {
    const RunResult& run = rep[column];
    s.alarm_times.push_back(run.alarm_time);
    const double time = run.alarm_time ? static_cast<double>(*run.alarm_time)
                                       : static_cast<double>(horizon);
    if (run.alarm_time) {
      ++alarms;
      uncensored_sum += time;
    }
    censored_sum += time;
    censored_sq += time * time;
    s.min_alarm_time = std::min(s.min_alarm_time, time);
    s.max_alarm_time = std::max(s.max_alarm_time, time);
    s.coverage_violations += run.coverage_violated ? 1 : 0;
    medians.push_back(run.median_eta);
    for (std::size_t k = 0; k < steps; ++k) {
      s.mean_lower_bound[k] += run.lower_bound[k];
      s.mean_running_estimate[k] += run.running_estimate[k];
    }
  }
  const auto n = static_cast<double>(runs.size());
  for (std::size_t k = 0; k < steps; ++k) {
    s.mean_lower_bound[k] /= n;
    s.mean_running_estimate[k] /= n;
  }
  s.pfa = static_cast<double>(alarms) / n;
  s.censored = runs.size() - alarms;
  if (alarms > 0) s.mean_alarm_time = uncensored_sum / static_cast<double>(alarms);
  s.mean_alarm_time_censored = censored_sum / n;
  if (runs.size() > 1) {
    const double var = (censored_sq - n * s.mean_alarm_time_censored * s.mean_alarm_time_censored) /
                       (n - 1.0);
    s.se_alarm_time_censored = std::sqrt(std::max(0.0, var) / n);
  }
  s.median_eta = median_of(std::move(medians));
  return s;
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::SRM:
      return "SRM";
    case Method::PPRM_fixed:
      return "PPRM_fixed";
    case Method::PPRM_adaptive:
      return "PPRM_adaptive";
    case Method::URM:
      return "URM";
    case Method::PPRM_ideal:
      return "PPRM_ideal";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::SRM, Method::PPRM_fixed, Method::PPRM_adaptive, Method::URM,
                   Method::PPRM_ideal}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

void ExperimentPlan::validate() const {
  scenario.validate();
  config.validate();
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (methods.empty()) throw ConfigError("experiment needs at least one method");
}

const MethodSummary& ExperimentSummary::at(Method method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw ParameterError("method " + std::string(method_name(method)) + " not in summary");
}

ExperimentSummary run_experiment(const ExperimentPlan& plan, const TraceSink& sink) {
  plan.validate();
  const std::int64_t horizon = plan.scenario.horizon;
  std::vector<double> true_risk(static_cast<std::size_t>(horizon));
  double prefix = 0.0;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    prefix += step_mean(plan.scenario, t);
    true_risk[static_cast<std::size_t>(t - 1)] = prefix / static_cast<double>(t);
  }

  std::vector<std::vector<RunResult>> runs(plan.replications);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t r = next++; r < plan.replications; r = next++) {
      try {
        runs[r] = run_replication(plan, r, true_risk, sink);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = plan.replications;
      }
    }
  };
  std::size_t threads = plan.threads ? plan.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, plan.replications);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentSummary summary;
  summary.horizon = horizon;
  summary.replications = plan.replications;
  summary.base_seed = plan.base_seed;
  for (std::size_t c = 0; c < plan.methods.size(); ++c) {
    summary.methods.push_back(summarize(plan.methods[c], c, runs, horizon));
  }
  return summary;
}

PairedDifference paired_alarm_difference(const MethodSummary& a, const MethodSummary& b,
                                         std::int64_t horizon) {
  if (a.alarm_times.size() != b.alarm_times.size() || a.alarm_times.empty()) {
    throw ParameterError("paired comparison needs summaries over the same replications");
  }
  const auto value = [horizon](const std::optional<std::int64_t>& t) {
    return static_cast<double>(t.value_or(horizon));
  };
  const std::size_t n = a.alarm_times.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += value(a.alarm_times[i]) - value(b.alarm_times[i]);
  PairedDifference d;
  d.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = value(a.alarm_times[i]) - value(b.alarm_times[i]) - d.mean;
      ss += diff * diff;
    }
    d.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return d;
}

std::vector<EtaModeRow> compare_eta_modes(const ExperimentPlan& plan,
                                          std::span<const double> agreement_levels) {
  std::vector<EtaModeRow> rows;
  for (double agreement : agreement_levels) {
    ExperimentPlan p = plan;
    p.scenario.agreement = agreement;
    p.methods = {Method::PPRM_fixed, Method::PPRM_adaptive};
    const ExperimentSummary s = run_experiment(p);
    const MethodSummary& fixed = s.at(Method::PPRM_fixed);
    const MethodSummary& adaptive = s.at(Method::PPRM_adaptive);
    EtaModeRow row;
    row.agreement = agreement;
    row.fixed_mean = fixed.mean_alarm_time_censored;
    row.adaptive_mean = adaptive.mean_alarm_time_censored;
    row.gap = paired_alarm_difference(fixed, adaptive, s.horizon);
    row.fixed_censored = fixed.censored;
    row.adaptive_censored = adaptive.censored;
    row.adaptive_median_eta = adaptive.median_eta;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pprm
