#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "pprm/types.hpp"

namespace pprm {

enum class LossModel { bernoulli, bounded_continuous };

/// Per-step mean-loss schedule p_t.
struct Schedule {
  enum class Kind { constant, step, ramp, pulse };

  Kind kind = Kind::constant;
  std::int64_t t0 = 1;
  std::int64_t t1 = 1;
  /// constant: level; step/ramp: value before; pulse: baseline.
  double first = 0.3;
  /// step/ramp: value after; pulse: peak. Unused for constant.
  double second = 0.3;

  static Schedule constant(double p);
  static Schedule step(std::int64_t t0, double before, double after);
  static Schedule ramp(std::int64_t t0, std::int64_t t1, double before, double after);
  static Schedule pulse(std::int64_t t0, std::int64_t t1, double base, double peak);

  double at(std::int64_t t) const;
};

struct DriftScenario {
  LossModel loss_model = LossModel::bernoulli;
  Schedule schedule;
  /// bernoulli: P(synthetic loss == true loss); continuous: correlation rho.
  double agreement = 0.95;
  std::size_t n_per_step = 1;
  std::size_t N_per_step = 15;
  std::int64_t horizon = 1000;
  std::uint64_t seed = 1;

  /// Mean source loss; defaults to the schedule's value at t = 1.
  std::optional<double> source_risk;
  std::size_t source_labeled = 500;
  std::size_t source_unlabeled = 7500;
  /// Proxy = clip01(true loss + proxy_noise * N(0,1)).
  double proxy_noise = 0.25;
  /// Standard deviation of the continuous loss model.
  double noise_scale = 0.15;

  void validate() const;
  double source_mean() const;
};

/// Generated batches plus the true losses of the unlabeled inputs, which
/// real monitors never see; the ideal-monitor baseline uses them.
struct SimulatedStream {
  std::vector<StepBatch> batches;
  std::vector<std::vector<double>> hidden_unlabeled_true;
};

/// Test-time stream: one batch per step t = 1..horizon. Deterministic in the
/// seed. Labeled proxies are drawn but not attached.
SimulatedStream generate_stream(const DriftScenario& scenario);

/// Calibration data from the source distribution: source_labeled records,
/// each holding one labeled pair (with its proxy) and a contiguous share of
/// the source_unlabeled inputs, t = 1..source_labeled.
SimulatedStream generate_source(const DriftScenario& scenario);

/// Copy of `stream` in which every synthetic loss is replaced by the true
/// loss (full label access).
std::vector<StepBatch> with_true_labels(const SimulatedStream& stream);

/// Expected loss at step t under the scenario's loss model.
double step_mean(const DriftScenario& scenario, std::int64_t t);

/// (1/t) * sum_{t' <= t} step_mean(t').
double true_running_risk(const DriftScenario& scenario, std::int64_t t);

}  // namespace pprm
