#include "sparseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "sparseg/loss.hpp"
#include "sparseg/metrics.hpp"
#include "sparseg/postproc.hpp"

namespace sparseg {

const char* to_string(Regime r) { return r == Regime::full ? "full" : "partial"; }

Regime parse_regime(const std::string& s) {
  if (s == "full") return Regime::full;
  if (s == "partial") return Regime::partial;
  throw std::invalid_argument("unknown regime '" + s + "' (expected full or partial)");
}

Dims TrainConfig::stride() const {
  return {std::max(1, patch.x / 2), std::max(1, patch.y / 2), std::max(1, patch.z / 2)};
}

void TrainConfig::validate() const {
  if (regime == Regime::partial && !(percentage > 0.0 && percentage < 1.0)) {
    throw std::invalid_argument("partial regime needs a percentage in (0, 1)");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!patch.positive()) throw std::invalid_argument("patch dims must be positive");
  if (epochs_phase1 < 0 || epochs_phase2 < 0) throw std::invalid_argument("epoch counts must be non-negative");
  if (iterations_per_epoch <= 0) throw std::invalid_argument("iterations_per_epoch must be positive");
  schedule.validate();
}

TrainingCase make_training_case(const TrainConfig& config, std::size_t source_index, const LabeledVolume& volume) {
  const StructureExtent extent = compute_extent(volume.mask);
  const int depth = volume.mask.dims().z;
  AnnotationPlan plan;
  if (config.regime == Regime::full) {
    plan = plan_annotation_at(extent, depth, 1.0, extent.z_min);
  } else {
    Rng rng = Rng(config.seed, streams::kPlans).fork(source_index);
    plan = plan_annotation(extent, depth, config.percentage, rng);
  }
  PartialLabel label = build_partial_label(volume.mask, plan, config.borders);
  return {source_index, volume.image, std::move(label), plan};
}

std::string TrainRecord::to_csv() const {
  std::string out = "epoch,phase,lr,train_loss,val_loss,val_dice,checkpoint\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%d,%.9g,%.9g,%.9g,%.9g,%d\n", r.epoch, r.phase, r.lr, r.train_loss,
                  r.val_loss, r.val_dice, r.checkpoint ? 1 : 0);
    out += line;
  }
  return out;
}

StepResult loss_and_gradients(const NetParams& params, const Batch& batch) {
  std::vector<ForwardCache> caches;
  caches.reserve(batch.size());
  std::vector<double> r;
  std::vector<std::uint8_t> t;
  std::vector<std::uint8_t> s;
  r.reserve(batch.voxel_count());
  t.reserve(batch.voxel_count());
  s.reserve(batch.voxel_count());
  for (const auto& p : batch.patches) {
    caches.push_back(forward(params, make_input(p)));
    const auto& probs = caches.back().probabilities;
    r.insert(r.end(), probs.begin(), probs.end());
    t.insert(t.end(), p.target.begin(), p.target.end());
    s.insert(s.end(), p.selection.begin(), p.selection.end());
  }
  LossOutput loss = selective_batch_dice(r, t, s);
  StepResult out{loss.value, GradientSet::zeros_like(params)};
  std::size_t offset = 0;
  for (const auto& cache : caches) {
    const std::size_t n = cache.probabilities.size();
    accumulate_backward(params, cache, std::span<const double>(loss.gradient).subspan(offset, n), out.gradients);
    offset += n;
  }
  return out;
}

TileAccumulator::TileAccumulator(const Dims& dims) : dims_(dims), sum_(dims.count(), 0.0), count_(dims.count(), 0) {}

void TileAccumulator::add(int ox, int oy, int oz, const Dims& tile, std::span<const double> probabilities) {
  if (probabilities.size() != tile.count()) throw std::invalid_argument("tile probability count mismatch");
  if (ox < 0 || oy < 0 || oz < 0 || ox + tile.x > dims_.x || oy + tile.y > dims_.y || oz + tile.z > dims_.z) {
    throw std::invalid_argument("tile outside the volume");
  }
  for (int k = 0; k < tile.z; ++k)
    for (int j = 0; j < tile.y; ++j)
      for (int i = 0; i < tile.x; ++i) {
        const std::size_t dst = dims_.index(ox + i, oy + j, oz + k);
        sum_[dst] += probabilities[tile.index(i, j, k)];
        ++count_[dst];
      }
}

std::vector<double> TileAccumulator::mean() const {
  std::vector<double> out(sum_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (count_[i] == 0) throw std::logic_error("voxel not covered by any tile");
    out[i] = sum_[i] / count_[i];
  }
  return out;
}

std::vector<double> predict_probabilities(const NetParams& params, const Volume3D& volume, const Dims& patch) {
  const Dims& d = volume.dims();
  if (!patch.positive() || patch.x > d.x || patch.y > d.y || patch.z > d.z) {
    throw std::invalid_argument("volume " + to_string(d) + " is smaller than patch " + to_string(patch));
  }
  const Dims& tile = patch;
  const Dims stride{std::max(1, tile.x / 2), std::max(1, tile.y / 2), std::max(1, tile.z / 2)};
  const auto ox = tile_origins(d.x, tile.x, stride.x);
  const auto oy = tile_origins(d.y, tile.y, stride.y);
  const auto oz = tile_origins(d.z, tile.z, stride.z);
  const auto src = volume.voxels();
  TileAccumulator acc(d);
  std::vector<float> crop(tile.count());
  for (int z0 : oz)
    for (int y0 : oy)
      for (int x0 : ox) {
        for (int k = 0; k < tile.z; ++k)
          for (int j = 0; j < tile.y; ++j)
            for (int i = 0; i < tile.x; ++i) crop[tile.index(i, j, k)] = src[d.index(x0 + i, y0 + j, z0 + k)];
        const ForwardCache cache = forward(params, make_inference_input(crop, tile));
        acc.add(x0, y0, z0, tile, cache.probabilities);
      }
  return acc.mean();
}

BinaryMask3D threshold_probabilities(std::span<const double> probabilities, const Dims& dims, const Spacing& spacing) {
  if (probabilities.size() != dims.count()) throw std::invalid_argument("probability count mismatch");
  std::vector<std::uint8_t> out(probabilities.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probabilities[i] > 0.5 ? 1 : 0;
  return BinaryMask3D(dims, spacing, std::move(out));
}

BinaryMask3D predict(const NetParams& params, const Volume3D& volume, const Dims& patch) {
  const auto probs = predict_probabilities(params, volume, patch);
  return postprocess(threshold_probabilities(probs, volume.dims(), volume.spacing()));
}

ValidationResult validate(const NetParams& params, std::span<const LabeledVolume> cases, const Dims& patch) {
  if (cases.empty()) throw std::invalid_argument("validation set is empty");
  std::vector<double> r;
  std::vector<std::uint8_t> t;
  double dice_sum = 0.0;
  for (const auto& c : cases) {
    const auto probs = predict_probabilities(params, c.image, patch);
    const BinaryMask3D pred = postprocess(threshold_probabilities(probs, c.image.dims(), c.image.spacing()));
    dice_sum += dice_score(pred, c.mask);
    r.insert(r.end(), probs.begin(), probs.end());
    const auto m = c.mask.voxels();
    t.insert(t.end(), m.begin(), m.end());
  }
  return {batch_dice(r, t), dice_sum / static_cast<double>(cases.size())};
}

namespace {

std::vector<Patch> pooled_blocks(const TrainConfig& config, const TrainingData& data) {
  std::vector<Patch> blocks;
  for (const auto& c : data.train) {
    auto b = extract_blocks(c.image, c.label, config.patch, config.stride());
    blocks.insert(blocks.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
  }
  if (blocks.empty()) throw std::invalid_argument("no training blocks contain an annotated slice");
  return blocks;
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, const NetParams& params)
      : kind_(kind), adam_(make_adam_state(params)), sgd_(make_sgd_state(params)) {}

  void step(NetParams& params, const GradientSet& grads, double lr) {
    if (kind_ == OptimizerKind::adam) {
      adam_step(params, grads, adam_, lr);
    } else {
      sgd_momentum_step(params, grads, sgd_, lr);
    }
  }

 private:
  OptimizerKind kind_;
  AdamState adam_;
  SgdState sgd_;
};

PhaseResult run_phase(const TrainConfig& config, const TrainingData& data, int phase, NetParams params,
                      std::optional<double> best_dice, std::uint64_t batch_stream) {
  PhaseResult result;
  result.best = params;
  result.best_val_dice = best_dice;
  const int epochs = phase == 1 ? config.epochs_phase1 : config.epochs_phase2;
  if (epochs == 0) return result;

  const std::vector<Patch> blocks = pooled_blocks(config, data);
  Rng rng(config.seed, batch_stream);
  Optimizer opt(config.optimizer, params);
  ScheduleState sched = start_schedule(config.schedule, phase);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const double lr = sched.lr;
    double loss_sum = 0.0;
    for (int it = 1; it <= config.iterations_per_epoch; ++it) {
      const Batch batch = sample_batch(blocks, config.batch_size, rng);
      StepResult step = loss_and_gradients(params, batch);
      if (!std::isfinite(step.loss)) {
        throw std::runtime_error("non-finite training loss in phase " + std::to_string(phase) + ", epoch " +
                                 std::to_string(epoch) + ", iteration " + std::to_string(it));
      }
      opt.step(params, step.gradients, lr);
      loss_sum += step.loss;
    }
    const ValidationResult val = validate(params, data.validation, config.patch);
    if (!std::isfinite(val.loss)) {
      throw std::runtime_error("non-finite validation loss in phase " + std::to_string(phase) + ", epoch " +
                               std::to_string(epoch));
    }
    EpochRow row{epoch, phase, lr, loss_sum / config.iterations_per_epoch, val.loss, val.dice, false};
    if (!result.best_val_dice || val.dice > *result.best_val_dice) {
      result.best = params;
      result.best_val_dice = val.dice;
      result.best_epoch = epoch;
      row.checkpoint = true;
    }
    result.record.rows.push_back(row);
    sched = schedule_epoch_end(config.schedule, sched, val.loss);
  }
  return result;
}

}  // namespace

PhaseResult train_phase1(const TrainConfig& config, const TrainingData& data) {
  config.validate();
  Rng init_rng(config.seed, streams::kInit);
  return run_phase(config, data, 1, init_params(init_rng), std::nullopt, streams::kBatchesPhase1);
}

PhaseResult train_phase2(const TrainConfig& config, const TrainingData& data, const PhaseResult& phase1) {
  config.validate();
  check_architecture(phase1.best);
  return run_phase(config, data, 2, phase1.best, phase1.best_val_dice, streams::kBatchesPhase2);
}

}  // namespace sparseg
