#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pprm/monitors.hpp"
#include "pprm/simulator.hpp"

namespace pprm {

enum class Method { SRM, PPRM_fixed, PPRM_adaptive, URM, PPRM_ideal };

std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);

struct ExperimentPlan {
  DriftScenario scenario;
  std::vector<Method> methods{Method::SRM, Method::PPRM_fixed, Method::PPRM_adaptive,
                              Method::URM, Method::PPRM_ideal};
  std::size_t replications = 100;
  std::uint64_t base_seed = 1;
  MonitorConfig config;
  /// Worker threads; 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;

  void validate() const;
};

struct MethodSummary {
  Method method = Method::SRM;
  std::size_t replications = 0;
  /// Fraction of replications that raised any alarm (the false-alarm rate
  /// when the scenario satisfies the null hypothesis).
  double pfa = 0.0;
  std::size_t censored = 0;
  /// Mean over uncensored runs; absent when every run is censored.
  std::optional<double> mean_alarm_time;
  /// Range over all runs, censored runs counted at the horizon.
  double min_alarm_time = 0.0;
  double max_alarm_time = 0.0;
  /// Mean with censored runs counted at the horizon, and its standard error.
  double mean_alarm_time_censored = 0.0;
  double se_alarm_time_censored = 0.0;
  /// Replications in which the lower bound exceeded the true running risk
  /// at some step.
  std::size_t coverage_violations = 0;
  /// Median over replications of the per-run median eta_t.
  double median_eta = 0.0;
  /// Per-step means across replications.
  std::vector<double> mean_lower_bound;
  std::vector<double> mean_running_estimate;
  /// Per replication, in replication order.
  std::vector<std::optional<std::int64_t>> alarm_times;
};

struct ExperimentSummary {
  std::int64_t horizon = 0;
  std::size_t replications = 0;
  std::uint64_t base_seed = 0;
  std::vector<MethodSummary> methods;

  const MethodSummary& at(Method method) const;
};

/// Called once per (replication, method) with the full trace. May be invoked
/// concurrently from several workers.
using TraceSink =
    std::function<void(std::size_t replication, Method method, std::span<const BoundTrace> trace)>;

/// Replication r uses seed base_seed + r for both the source data and the
/// stream; every method sees the identical data. Results are bitwise
/// reproducible regardless of the thread count.
ExperimentSummary run_experiment(const ExperimentPlan& plan, const TraceSink& sink = {});

/// Paired difference mean(a - b) of alarm times (censored at the horizon)
/// and its standard error.
struct PairedDifference {
  double mean = 0.0;
  double se = 0.0;
};
PairedDifference paired_alarm_difference(const MethodSummary& a, const MethodSummary& b,
                                         std::int64_t horizon);

struct EtaModeRow {
  double agreement = 0.0;
  double fixed_mean = 0.0;
  double adaptive_mean = 0.0;
  /// fixed - adaptive, paired.
  PairedDifference gap;
  std::size_t fixed_censored = 0;
  std::size_t adaptive_censored = 0;
  double adaptive_median_eta = 0.0;
};

/// Runs the fixed- and adaptive-eta monitors at each agreement level on
/// paired streams. Alarm-time means count censored runs at the horizon.
std::vector<EtaModeRow> compare_eta_modes(const ExperimentPlan& plan,
                                          std::span<const double> agreement_levels);

}  // namespace pprm
