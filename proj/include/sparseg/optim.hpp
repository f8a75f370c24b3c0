#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "sparseg/model.hpp"

namespace sparseg {

struct ScheduleConfig {
  double initial_lr = 5e-4;
  double factor = 0.5;
  int patience = 10;
  double threshold = 1e-4;  ///< relative improvement threshold
  double min_lr = 1e-6;
  int restart_period = 60;  ///< phase 2 only

  void validate() const;
};

/// Plateau / warm-restart learning-rate state machine.
///
/// Epochs are numbered from 1 within a phase and `lr` is the rate used during
/// epoch `epoch + 1`. After each epoch the validation metric (lower is better)
/// is fed to schedule_epoch_end:
///   - improvement (metric < best - threshold*|best|) resets the plateau counter;
///   - otherwise the counter grows, and once it reaches `patience` the rate is
///     multiplied by `factor` (floored at min_lr) and the counter resets;
///   - in phase 2, if the next epoch number is a multiple of restart_period the
///     rate returns to initial_lr and the counter resets. A restart overrides a
///     reduction falling on the same epoch.
struct ScheduleState {
  int phase = 1;
  double lr = 5e-4;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int epoch = 0;  ///< completed epochs within the phase
};

ScheduleState start_schedule(const ScheduleConfig& config, int phase);
ScheduleState schedule_epoch_end(const ScheduleConfig& config, const ScheduleState& state, double val_metric);

/// Learning rates used in epochs 1..n when the given metrics are observed.
std::vector<double> schedule_trace(const ScheduleConfig& config, int phase, const std::vector<double>& metrics);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  GradientSet first_moment;
  GradientSet second_moment;
  std::int64_t step = 0;
};

AdamState make_adam_state(const NetParams& params);

/// Bias-corrected Adam update in place.
void adam_step(NetParams& params, const GradientSet& grads, AdamState& state, double lr,
               const AdamConfig& config = {});

struct SgdState {
  GradientSet velocity;
  double momentum = 0.9;
};

SgdState make_sgd_state(const NetParams& params, double momentum = 0.9);
void sgd_momentum_step(NetParams& params, const GradientSet& grads, SgdState& state, double lr);

}  // namespace sparseg
