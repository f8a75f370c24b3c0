#include "sparseg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sparseg {

void ScheduleConfig::validate() const {
  if (!(initial_lr >= 0.0) || !std::isfinite(initial_lr)) throw std::invalid_argument("initial_lr must be >= 0");
  if (!(factor > 0.0 && factor < 1.0)) throw std::invalid_argument("plateau factor must lie in (0, 1)");
  if (patience < 1) throw std::invalid_argument("plateau patience must be >= 1");
  if (!(threshold >= 0.0)) throw std::invalid_argument("plateau threshold must be >= 0");
  if (!(min_lr >= 0.0) || min_lr > initial_lr) throw std::invalid_argument("min_lr must lie in [0, initial_lr]");
  if (restart_period < 1) throw std::invalid_argument("restart period must be >= 1");
}

ScheduleState start_schedule(const ScheduleConfig& config, int phase) {
  config.validate();
  if (phase != 1 && phase != 2) throw std::invalid_argument("schedule phase must be 1 or 2");
  ScheduleState s;
  s.phase = phase;
  s.lr = config.initial_lr;
  return s;
}

ScheduleState schedule_epoch_end(const ScheduleConfig& config, const ScheduleState& state, double val_metric) {
  if (!std::isfinite(val_metric)) {
    throw std::invalid_argument("schedule_epoch_end: non-finite validation metric");
  }
  ScheduleState next = state;
  next.epoch += 1;

  const bool improved =
      !std::isfinite(state.best) || val_metric < state.best - config.threshold * std::abs(state.best);
  if (improved) {
    next.best = val_metric;
    next.bad_epochs = 0;
  } else {
    next.bad_epochs += 1;
    if (next.bad_epochs >= config.patience) {
      next.lr = std::max(next.lr * config.factor, config.min_lr);
      next.bad_epochs = 0;
    }
  }

  if (next.phase == 2 && (next.epoch + 1) % config.restart_period == 0) {
    next.lr = config.initial_lr;
    next.bad_epochs = 0;
  }
  return next;
}

std::vector<double> schedule_trace(const ScheduleConfig& config, int phase, const std::vector<double>& metrics) {
  std::vector<double> lrs;
  lrs.reserve(metrics.size());
  ScheduleState s = start_schedule(config, phase);
  for (double m : metrics) {
    lrs.push_back(s.lr);
    s = schedule_epoch_end(config, s, m);
  }
  return lrs;
}

AdamState make_adam_state(const NetParams& params) {
  return {GradientSet::zeros_like(params), GradientSet::zeros_like(params), 0};
}

namespace {

void check_update(const NetParams& params, const GradientSet& grads, const GradientSet& state_block) {
  if (!grads.same_layout(params) || !state_block.same_layout(params)) {
    throw std::invalid_argument("optimizer: gradient/state shapes do not match parameters");
  }
  for (const auto& b : grads.blocks) {
    for (double g : b.values) {
      if (!std::isfinite(g)) throw std::invalid_argument("optimizer: non-finite gradient in " + b.name);
    }
  }
}

}  // namespace

void adam_step(NetParams& params, const GradientSet& grads, AdamState& state, double lr, const AdamConfig& config) {
  check_update(params, grads, state.first_moment);
  if (!state.second_moment.same_layout(params)) throw std::invalid_argument("adam: state shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    auto& p = params.blocks[b].values;
    const auto& g = grads.blocks[b].values;
    auto& m = state.first_moment.blocks[b].values;
    auto& v = state.second_moment.blocks[b].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

SgdState make_sgd_state(const NetParams& params, double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd momentum must lie in [0, 1)");
  return {GradientSet::zeros_like(params), momentum};
}

void sgd_momentum_step(NetParams& params, const GradientSet& grads, SgdState& state, double lr) {
  check_update(params, grads, state.velocity);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    auto& p = params.blocks[b].values;
    const auto& g = grads.blocks[b].values;
    auto& vel = state.velocity.blocks[b].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      vel[i] = state.momentum * vel[i] + g[i];
      p[i] -= lr * vel[i];
    }
  }
}

}  // namespace sparseg
