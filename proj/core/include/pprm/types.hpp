#pragma once

#include <cstdint>
#include <vector>

namespace pprm {

/// Loss of one labeled input under its true label and under the synthetic
/// label produced by the auxiliary predictor.
struct LabeledLossPair {
  double true_loss = 0.0;
  double synth_loss = 0.0;

  friend bool operator==(const LabeledLossPair&, const LabeledLossPair&) = default;
};

/// Everything the monitors observe at one time step.
///
/// `labeled` must hold at least one pair. `unlabeled_synth` holds the
/// synthetic-label losses of the unlabeled inputs and may be empty.
/// `proxies` carries optional loss proxies of the unlabeled inputs (consumed
/// only by the unsupervised monitor); `labeled_proxies` carries proxies of
/// the labeled inputs and is only needed for unsupervised calibration.
struct StepBatch {
  std::int64_t t = 0;
  std::vector<LabeledLossPair> labeled;
  std::vector<double> unlabeled_synth;
  std::vector<double> proxies;
  std::vector<double> labeled_proxies;

  friend bool operator==(const StepBatch&, const StepBatch&) = default;
};

// Throws RangeError if any loss or proxy is non-finite or outside [0,1],
// PreconditionError if `labeled` is empty or labeled_proxies is misaligned.
void validate_batch(const StepBatch& batch);

// Checks a single value against [0,1]; `what` names it in the message.
void require_unit_interval(double value, const char* what);

}  // namespace pprm
