#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pprm/error.hpp"
#include "pprm/monitors.hpp"
#include "pprm/rng.hpp"
#include "pprm/simulator.hpp"

namespace pprm {
namespace {

StepBatch batch_at(std::int64_t t, std::vector<LabeledLossPair> labeled,
                   std::vector<double> unlabeled) {
  StepBatch b;
  b.t = t;
  b.labeled = std::move(labeled);
  b.unlabeled_synth = std::move(unlabeled);
  return b;
}

SourceCalibration fixed_calibration(double upper) {
  SourceCalibration c;
  c.upper_bound = upper;
  return c;
}

std::vector<StepBatch> simulated(double p, double agreement, std::int64_t horizon,
                                 std::uint64_t seed) {
  DriftScenario s;
  s.schedule = Schedule::constant(p);
  s.agreement = agreement;
  s.horizon = horizon;
  s.seed = seed;
  return generate_stream(s).batches;
}

TEST(MonitorStep, SingleStepHandExample) {
  MonitorConfig config;
  config.eta_policy.mode = EtaMode::adaptive;
  RiskMonitor monitor(MonitorKind::prediction_powered, config, fixed_calibration(0.3));
  const auto row = monitor.step(batch_at(1, {{0.2, 0.3}, {0.4, 0.5}}, {0.1, 0.3, 0.5}));
  EXPECT_EQ(row.t, 1);
  EXPECT_EQ(row.eta_t, 1.0);
  EXPECT_NEAR(row.step_estimate, 0.2, 1e-15);
  EXPECT_NEAR(row.v_t, 0.01, 1e-15);
  EXPECT_NEAR(monitor.state().variance_process.running_sum, 0.4, 1e-15);
  EXPECT_EQ(row.upper_bound_source, 0.3);
  const double u = cm_eb_radius(0.01, config.cs_spec);
  EXPECT_NEAR(row.lower_bound, denormalize_bound(0.4 - u, 1.0), 1e-12);
  EXPECT_FALSE(row.alarm);
}

TEST(MonitorStep, RejectsOutOfOrderSteps) {
  RiskMonitor monitor(MonitorKind::supervised, MonitorConfig{}, fixed_calibration(0.3));
  EXPECT_THROW(monitor.step(batch_at(2, {{0.1, 0.1}}, {})), SequencingError);
  monitor.step(batch_at(1, {{0.1, 0.1}}, {}));
  EXPECT_THROW(monitor.step(batch_at(1, {{0.1, 0.1}}, {})), SequencingError);
  EXPECT_THROW(monitor.step(batch_at(2, {{1.1, 0.1}}, {})), RangeError);
}

TEST(MonitorStep, EmptyUnlabeledDegradesToSupervised) {
  MonitorConfig config;
  config.eta_policy.mode = EtaMode::fixed;
  RiskMonitor monitor(MonitorKind::prediction_powered, config, fixed_calibration(0.3));
  const auto row = monitor.step(batch_at(1, {{0.6, 0.1}}, {}));
  EXPECT_EQ(row.eta_t, 0.0);
  EXPECT_EQ(row.step_estimate, 0.6);
}

TEST(MonitorStep, AlarmLatchesOnceThresholdCrossed) {
  MonitorConfig config;
  config.eps_tol = 0.10;
  RiskMonitor monitor(MonitorKind::supervised, config, fixed_calibration(0.30));
  std::vector<BoundTrace> trace;
  for (std::int64_t t = 1; t <= 1000; ++t) {
    const double loss = t <= 100 ? 1.0 : 0.0;
    trace.push_back(monitor.step(batch_at(t, {{loss, loss}}, {})));
  }
  const auto first = std::find_if(trace.begin(), trace.end(),
                                  [](const BoundTrace& r) { return r.lower_bound > 0.40; });
  ASSERT_NE(first, trace.end());
  EXPECT_EQ(first_alarm_time(trace), first->t);
  for (const auto& row : trace) EXPECT_EQ(row.alarm, row.t >= first->t) << row.t;
  EXPECT_LT(trace.back().lower_bound, 0.40);
}

TEST(MonitorStep, LatchingIsMonotoneOnSimulatedStreams) {
  DriftScenario s;
  s.schedule = Schedule::pulse(100, 300, 0.3, 0.9);
  s.horizon = 600;
  const auto stream = generate_stream(s);
  MonitorConfig config;
  RiskMonitor monitor(MonitorKind::prediction_powered, config, fixed_calibration(0.35));
  bool seen = false;
  for (const auto& b : stream.batches) {
    const auto row = monitor.step(b);
    if (seen) {
      EXPECT_TRUE(row.alarm);
    }
    seen = seen || row.alarm;
  }
  EXPECT_TRUE(seen);
}

TEST(MonitorStep, ZeroEtaPprmMatchesSupervisedPath) {
  const auto stream = simulated(0.4, 0.8, 500, 3);
  MonitorConfig pp;
  pp.eta_policy.mode = EtaMode::fixed;
  pp.eta_policy.eta_fixed = 0.0;
  pp.eta_policy.eta_init = 0.0;
  pp.eta_policy.eta_max = 0.0;
  RiskMonitor a(MonitorKind::prediction_powered, pp, fixed_calibration(0.2));
  RiskMonitor b(MonitorKind::supervised, MonitorConfig{}, fixed_calibration(0.2));
  std::vector<BoundTrace> ta;
  std::vector<BoundTrace> tb;
  for (const auto& batch : stream) {
    ta.push_back(a.step(batch));
    tb.push_back(b.step(batch));
    EXPECT_NEAR(ta.back().lower_bound, tb.back().lower_bound, 1e-12);
    EXPECT_NEAR(ta.back().running_estimate, tb.back().running_estimate, 1e-12);
  }
  EXPECT_EQ(first_alarm_time(ta), first_alarm_time(tb));
}

TEST(MonitorStep, AdaptiveEtaReadsOnlyPastWindow) {
  DriftScenario s;
  s.schedule = Schedule::step(150, 0.3, 0.6);
  s.agreement = 0.7;
  s.horizon = 300;
  const auto stream = generate_stream(s).batches;
  MonitorConfig config;
  config.eta_policy.window_L = 25;
  RiskMonitor monitor(MonitorKind::prediction_powered, config, fixed_calibration(0.3));
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const auto row = monitor.step(stream[k]);
    std::vector<LabeledLossPair> labeled;
    std::vector<double> unlabeled;
    for (std::size_t j = k >= 25 ? k - 25 : 0; j < k; ++j) {
      labeled.insert(labeled.end(), stream[j].labeled.begin(), stream[j].labeled.end());
      unlabeled.insert(unlabeled.end(), stream[j].unlabeled_synth.begin(),
                       stream[j].unlabeled_synth.end());
    }
    EXPECT_EQ(row.eta_t, eta_adaptive(labeled, unlabeled, config.eta_policy)) << k;
  }
  EXPECT_LE(monitor.state().labeled_window.size(), 25u);
  EXPECT_LE(monitor.state().eta_history.size(), 25u);
}

TEST(MonitorStep, LowerBoundFormula) {
  const auto stream = simulated(0.3, 0.9, 50, 4);
  MonitorConfig config;
  config.eta_policy.mode = EtaMode::fixed;
  config.eta_policy.eta_fixed = 0.5;
  MonitorState state = initial_monitor_state(config);
  const MixtureBoundary boundary(config.cs_spec);
  double norm_sum = 0.0;
  for (const auto& b : stream) {
    const auto row = monitor_step(state, b, fixed_calibration(0.3), config,
                                  MonitorKind::prediction_powered, boundary);
    norm_sum += normalize_loss(row.step_estimate, 1.0);
    const double t = static_cast<double>(row.t);
    const double expected = denormalize_bound(norm_sum / t - cm_eb_radius(row.v_t, config.cs_spec) / t, 1.0);
    EXPECT_NEAR(row.lower_bound, expected, 1e-5);
  }
}

TEST(FirstAlarmTime, Examples) {
  std::vector<BoundTrace> trace(10);
  for (int i = 0; i < 10; ++i) trace[i].t = i + 1;
  EXPECT_FALSE(first_alarm_time(trace).has_value());
  for (int i = 6; i < 10; ++i) trace[i].alarm = true;
  EXPECT_EQ(first_alarm_time(trace), 7);
  std::vector<BoundTrace> four(4);
  for (int i = 0; i < 4; ++i) {
    four[i].t = i + 1;
    four[i].alarm = i >= 2;
  }
  EXPECT_EQ(first_alarm_time(four), 3);
}

TEST(CalibrateSource, HoeffdingOnConstantLosses) {
  SourceData source;
  source.labeled.assign(100, {0.1, 0.1});
  const auto c = calibrate_source(source, SourceBoundMethod::hoeffding_labeled_only, {});
  EXPECT_NEAR(c.upper_bound, 0.1 + 0.12238734153404082, 1e-12);
  EXPECT_NEAR(c.estimate, 0.1, 1e-15);
  EXPECT_EQ(c.n0, 100u);
  const auto b = calibrate_source(source, SourceBoundMethod::betting_ppi, {});
  EXPECT_GE(b.upper_bound, 0.1);
  EXPECT_TRUE(b.degenerate_blocks);
}

TEST(CalibrateSource, EmptyLabeledIsCalibrationError) {
  EXPECT_THROW(calibrate_source({}, SourceBoundMethod::betting_ppi, {}), CalibrationError);
}

TEST(CalibrateSource, BothModesConsistentForLargeSamples) {
  DriftScenario s;
  s.schedule = Schedule::constant(0.3);
  s.source_labeled = 20000;
  s.source_unlabeled = 300000;
  const SourceData data = pool_source(generate_source(s).batches);
  for (auto m : {SourceBoundMethod::hoeffding_labeled_only, SourceBoundMethod::betting_ppi}) {
    const auto c = calibrate_source(data, m, {});
    EXPECT_GE(c.upper_bound, c.estimate);
    EXPECT_NEAR(c.upper_bound, 0.3, 0.03);
  }
}

TEST(CalibrateSource, BettingPpiTighterWithPerfectImputation) {
  DriftScenario s;
  s.schedule = Schedule::constant(0.3);
  s.agreement = 1.0;
  std::vector<double> diffs;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    s.seed = seed;
    const SourceData data = pool_source(generate_source(s).batches);
    const auto h = calibrate_source(data, SourceBoundMethod::hoeffding_labeled_only, {});
    const auto b = calibrate_source(data, SourceBoundMethod::betting_ppi, {});
    diffs.push_back(b.upper_bound - h.upper_bound);
  }
  std::nth_element(diffs.begin(), diffs.begin() + 30, diffs.end());
  EXPECT_LE(diffs[30], 0.0);
}

TEST(PoolSource, ConcatenatesInOrder) {
  std::vector<StepBatch> batches{batch_at(1, {{0.1, 0.2}}, {0.3}), batch_at(2, {{0.4, 0.5}}, {})};
  batches[0].labeled_proxies = {0.9};
  batches[1].labeled_proxies = {0.8};
  const SourceData d = pool_source(batches);
  EXPECT_EQ(d.labeled.size(), 2u);
  EXPECT_EQ(d.unlabeled_synth, std::vector<double>{0.3});
  EXPECT_EQ(d.labeled_proxies, (std::vector<double>{0.9, 0.8}));
}

TEST(MonitorConfig, DeltaBudgetValidated) {
  MonitorConfig c;
  c.betting_spec.delta_S = 0.5;
  c.cs_spec.delta_T = 0.6;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.eps_tol = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(ThresholdCandidates, MidpointsAboveQuantiles) {
  const std::vector<double> v{0.0, 0.0, 1.0, 1.0};
  EXPECT_EQ(threshold_candidates(v, 20), std::vector<double>{0.5});
  const std::vector<double> ramp{0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_EQ(threshold_candidates(ramp, 4),
            (std::vector<double>{0.5 * (0.2 + 0.3), 0.5 * (0.3 + 0.4), 0.5 * (0.4 + 0.5)}));
  EXPECT_TRUE(threshold_candidates(std::vector<double>(5, 0.2), 20).empty());
}

TEST(UrmCalibrate, PerfectProxy) {
  Xoshiro256 rng(1);
  std::vector<double> losses;
  for (int i = 0; i < 500; ++i) losses.push_back(rng.uniform());
  const auto c = urm_calibrate(losses, losses, MonitorConfig{});
  EXPECT_EQ(c.f1, 1.0);
  EXPECT_EQ(c.pfp0, 0.0);
  EXPECT_GT(c.pfp0_ucb, 0.0);
  EXPECT_EQ(c.n0, 500u);
}

TEST(UrmCalibrate, IndependentProxyHasFalsePositives) {
  Xoshiro256 rng(2);
  std::vector<double> losses;
  std::vector<double> proxies;
  for (int i = 0; i < 2000; ++i) {
    losses.push_back(rng.bernoulli(0.3) ? 1.0 : 0.0);
    proxies.push_back(rng.uniform());
  }
  const auto c = urm_calibrate(proxies, losses, MonitorConfig{});
  EXPECT_GT(c.pfp0, 0.0);
  // Flagging everything gives F1 = 2p / (1 + p) ~ 0.46 at base rate p = 0.3.
  EXPECT_NEAR(c.f1, 2 * 0.3 / 1.3, 0.05);
}

TEST(UrmCalibrate, AgreesWithBruteForceSearch) {
  Xoshiro256 rng(3);
  std::vector<double> losses;
  std::vector<double> proxies;
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    losses.push_back(u);
    proxies.push_back(std::clamp(u + 0.05 * rng.normal(), 0.0, 1.0));
  }
  // Candidates rebuilt independently: midpoint between the floor(k/20 (n-1))
  // order statistic and the next distinct value.
  auto candidates = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (int k = 1; k < 20; ++k) {
      const auto idx = static_cast<std::size_t>(std::floor(k / 20.0 * (v.size() - 1)));
      std::size_t j = idx;
      while (j < v.size() && v[j] == v[idx]) ++j;
      if (j < v.size()) out.push_back(0.5 * (v[idx] + v[j]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  const auto taus = candidates(losses);
  const auto betas = candidates(proxies);
  const auto best = oracle::best_f1(proxies, losses, taus, betas);
  const auto c = urm_calibrate(proxies, losses, MonitorConfig{});
  EXPECT_EQ(c.tau, best.tau);
  EXPECT_EQ(c.beta0, best.beta);
  EXPECT_NEAR(c.f1, best.f1, 1e-15);
}

TEST(UrmCalibrate, BalancedBinaryLossesPickMedianThreshold) {
  Xoshiro256 rng(4);
  std::vector<double> losses;
  std::vector<double> proxies;
  for (int i = 0; i < 1000; ++i) {
    const double loss = rng.bernoulli(0.5) ? 1.0 : 0.0;
    losses.push_back(loss);
    proxies.push_back(std::clamp(loss + 0.1 * rng.normal(), 0.0, 1.0));
  }
  const auto c = urm_calibrate(proxies, losses, MonitorConfig{});
  EXPECT_EQ(c.tau, 0.5);
  // beta0 is restricted to quantile midpoints, so a few clean separations
  // are missed.
  EXPECT_GT(c.f1, 0.97);
}

TEST(UrmCalibrate, DegenerateInputs) {
  const std::vector<double> constant(50, 0.4);
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(i % 2);
  EXPECT_THROW(urm_calibrate(constant, losses, MonitorConfig{}), CalibrationError);
  EXPECT_THROW(urm_calibrate(losses, constant, MonitorConfig{}), CalibrationError);
  EXPECT_THROW(urm_calibrate({}, {}, MonitorConfig{}), PreconditionError);
}

UrmCalibration urm_calib(double tau, double beta, double pfp_ucb, double upper) {
  UrmCalibration c;
  c.tau = tau;
  c.beta0 = beta;
  c.pfp0_ucb = pfp_ucb;
  c.source_upper_bound = upper;
  return c;
}

TEST(UrmStep, NoExceedanceGivesNonPositiveBound) {
  UnsupervisedMonitor m(MonitorConfig{}, urm_calib(0.5, 0.6, 0.05, 0.3));
  for (std::int64_t t = 1; t <= 50; ++t) {
    StepBatch b = batch_at(t, {{0.0, 0.0}}, {});
    b.proxies = {0.1, 0.6, 0.3};
    const auto row = m.step(b);
    EXPECT_EQ(row.step_estimate, 0.0);
    EXPECT_LE(row.lower_bound, 0.0);
    EXPECT_FALSE(row.alarm);
  }
}

TEST(UrmStep, FullExceedanceConvergesToLimit) {
  MonitorConfig config;
  const auto calib = urm_calib(0.5, 0.6, 0.05, 0.1);
  UrmState state = initial_urm_state(config);
  const MixtureBoundary boundary(config.cs_spec);
  const std::vector<double> proxies{0.9, 0.95, 1.0};
  BoundTrace row;
  for (std::int64_t t = 1; t <= 20000; ++t) {
    row = urm_step(state, t, proxies, calib, config, boundary);
  }
  EXPECT_LT(row.lower_bound, 0.5 * (1.0 - 0.05));
  EXPECT_NEAR(row.lower_bound, 0.5 * (1.0 - 0.05), 2e-3);
  EXPECT_TRUE(row.alarm);
  EXPECT_THROW(urm_step(state, 20000, proxies, calib, config, boundary), SequencingError);
  EXPECT_THROW(urm_step(state, 20001, {}, calib, config, boundary), PreconditionError);
}

TEST(UrmStep, ExceedanceJumpAlarmsLaterThanPprm) {
  // Exceedance probability 0.1 -> 0.9 at t = 200; losses follow the same
  // switch so the prediction-powered monitor sees the matched stream.
  const auto calib = urm_calib(0.5, 0.5, 0.05, 0.1);
  MonitorConfig config;
  std::vector<double> urm_times;
  std::vector<double> pprm_times;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Xoshiro256 rng(seed);
    UnsupervisedMonitor urm(config, calib);
    RiskMonitor pprm(MonitorKind::prediction_powered, config, fixed_calibration(0.1));
    std::optional<std::int64_t> urm_alarm;
    std::optional<std::int64_t> pprm_alarm;
    for (std::int64_t t = 1; t <= 3000 && !(urm_alarm && pprm_alarm); ++t) {
      const double p = t < 200 ? 0.1 : 0.9;
      StepBatch b;
      b.t = t;
      const double loss = rng.bernoulli(p) ? 1.0 : 0.0;
      b.labeled = {{loss, loss}};
      for (int j = 0; j < 15; ++j) {
        const double l = rng.bernoulli(p) ? 1.0 : 0.0;
        b.unlabeled_synth.push_back(l);
        b.proxies.push_back(l > 0.5 ? 0.75 : 0.25);
      }
      if (urm.step(b).alarm && !urm_alarm) urm_alarm = t;
      if (pprm.step(b).alarm && !pprm_alarm) pprm_alarm = t;
    }
    ASSERT_TRUE(urm_alarm.has_value());
    ASSERT_TRUE(pprm_alarm.has_value());
    urm_times.push_back(static_cast<double>(*urm_alarm));
    pprm_times.push_back(static_cast<double>(*pprm_alarm));
  }
  EXPECT_GT(oracle::moments(urm_times).mean, oracle::moments(pprm_times).mean);
}

}  // namespace
}  // namespace pprm
