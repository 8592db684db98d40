#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "pprm/bounds.hpp"
#include "pprm/estimators.hpp"
#include "pprm/types.hpp"

namespace pprm {

enum class SourceBoundMethod { hoeffding_labeled_only, betting_ppi };

enum class MonitorKind { supervised, prediction_powered };

struct UrmSettings {
  /// Candidate thresholds are taken at quantile levels k / quantile_grid.
  std::size_t quantile_grid = 20;
  /// Fraction of delta_S spent on the false-positive-rate bound; the rest
  /// goes to the source-risk bound.
  double pfp_share = 0.5;
};

struct MonitorConfig {
  double eps_tol = 0.05;
  EtaPolicy eta_policy;
  ConfidenceSequenceSpec cs_spec;  // carries delta_T
  BettingSpec betting_spec;        // carries delta_S
  SourceBoundMethod source_bound_method = SourceBoundMethod::betting_ppi;
  /// eta_0 used for the prediction-powered source estimate.
  double source_eta = 1.0;
  /// Z_hat_1 on the normalized scale.
  double initial_prediction = 0.5;
  UrmSettings urm;

  double delta_S() const { return betting_spec.delta_S; }
  double delta_T() const { return cs_spec.delta_T; }
  void validate() const;
};

/// Pooled calibration data drawn from the source distribution.
struct SourceData {
  std::vector<LabeledLossPair> labeled;
  std::vector<double> unlabeled_synth;
  std::vector<double> labeled_proxies;
};

SourceData pool_source(std::span<const StepBatch> batches);

struct SourceCalibration {
  SourceBoundMethod method = SourceBoundMethod::hoeffding_labeled_only;
  double estimate = 0.0;
  double upper_bound = 1.0;
  std::size_t n0 = 0;
  std::size_t N0 = 0;
  double eta0 = 0.0;
  bool degenerate_blocks = false;
};

/// Upper confidence bound U_0 on the source risk at level 1 - delta_S.
SourceCalibration calibrate_source(const SourceData& source, SourceBoundMethod method,
                                   const MonitorConfig& config);

/// One row of monitor output.
struct BoundTrace {
  std::int64_t t = 0;
  double step_estimate = 0.0;
  double running_estimate = 0.0;
  double lower_bound = 0.0;
  double upper_bound_source = 0.0;
  double eta_t = 0.0;
  double v_t = 0.0;
  bool alarm = false;

  friend bool operator==(const BoundTrace&, const BoundTrace&) = default;
};

struct MonitorState {
  std::int64_t t = 0;
  double running_estimate = 0.0;
  double estimate_sum = 0.0;
  /// Operates on normalized step estimates.
  VarianceProcess variance_process;
  double radius = 0.0;
  double lower_bound = 0.0;
  bool alarm_latched = false;
  std::deque<double> eta_history;
  std::deque<std::vector<LabeledLossPair>> labeled_window;
  std::deque<std::vector<double>> unlabeled_window;
};

/// Fresh state for a monitor with the given configuration.
MonitorState initial_monitor_state(const MonitorConfig& config);

/// The eta a monitor of `kind` would use for its next step, computed from
/// the pre-step windows only.
double next_eta(const MonitorState& state, MonitorKind kind, const MonitorConfig& config,
                bool has_unlabeled);

/// Advances a supervised or prediction-powered monitor by one step and
/// returns the resulting trace row. Throws SequencingError unless
/// batch.t == state.t + 1.
BoundTrace monitor_step(MonitorState& state, const StepBatch& batch,
                        const SourceCalibration& calib, const MonitorConfig& config,
                        MonitorKind kind, const MixtureBoundary& boundary);

/// Normalization half-width used by a monitor: 0 for the supervised monitor
/// (its estimates already lie in [0,1]), eta_max otherwise.
double normalization_eta_max(MonitorKind kind, const MonitorConfig& config);

/// Convenience wrapper owning configuration, calibration and boundary.
class RiskMonitor {
 public:
  RiskMonitor(MonitorKind kind, MonitorConfig config, SourceCalibration calib);

  BoundTrace step(const StepBatch& batch);

  const MonitorState& state() const { return state_; }
  const SourceCalibration& calibration() const { return calib_; }
  MonitorKind kind() const { return kind_; }

 private:
  MonitorKind kind_;
  MonitorConfig config_;
  SourceCalibration calib_;
  MixtureBoundary boundary_;
  MonitorState state_;
};

/// Smallest t whose row carries an alarm.
std::optional<std::int64_t> first_alarm_time(std::span<const BoundTrace> trace);

// Unsupervised (proxy-based) risk monitoring.

struct UrmCalibration {
  double tau = 0.0;
  double beta0 = 0.0;
  double f1 = 0.0;
  double pfp0 = 0.0;
  double pfp0_ucb = 0.0;
  /// Hoeffding upper bound on the source risk from the source losses.
  double source_upper_bound = 1.0;
  std::size_t n0 = 0;
};

/// Chooses the loss threshold tau and proxy threshold beta_0 maximizing the
/// F1 score of {proxy > beta} as a predictor of {loss > tau} on source data.
UrmCalibration urm_calibrate(std::span<const double> source_proxies,
                             std::span<const double> source_losses,
                             const MonitorConfig& config);

/// Candidate thresholds used by urm_calibrate: for each level k / grid,
/// k = 1..grid-1, the midpoint between the order statistic at
/// floor(level * (n - 1)) and the next larger distinct value. Levels whose
/// order statistic is the maximum contribute nothing. Sorted, unique.
std::vector<double> threshold_candidates(std::span<const double> values, std::size_t grid);

struct UrmState {
  std::int64_t t = 0;
  double exceed_sum = 0.0;
  VarianceProcess variance_process;
  double radius = 0.0;
  double lower_bound = 0.0;
  bool alarm_latched = false;
};

UrmState initial_urm_state(const MonitorConfig& config);

BoundTrace urm_step(UrmState& state, std::int64_t t, std::span<const double> proxies,
                    const UrmCalibration& calib, const MonitorConfig& config,
                    const MixtureBoundary& boundary);

class UnsupervisedMonitor {
 public:
  UnsupervisedMonitor(MonitorConfig config, UrmCalibration calib);

  /// Uses batch.proxies only.
  BoundTrace step(const StepBatch& batch);

  const UrmState& state() const { return state_; }
  const UrmCalibration& calibration() const { return calib_; }

 private:
  MonitorConfig config_;
  UrmCalibration calib_;
  MixtureBoundary boundary_;
  UrmState state_;
};

}  // namespace pprm
