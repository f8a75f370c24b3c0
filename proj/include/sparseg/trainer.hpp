#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparseg/annotation.hpp"
#include "sparseg/model.hpp"
#include "sparseg/optim.hpp"
#include "sparseg/phantom.hpp"
#include "sparseg/sampling.hpp"

namespace sparseg {

enum class Regime { full, partial };
enum class OptimizerKind { adam, sgd_momentum };

const char* to_string(Regime r);
Regime parse_regime(const std::string& s);

struct TrainConfig {
  Regime regime = Regime::partial;
  double percentage = 0.2;  ///< ignored (treated as 1.0) for the full regime
  bool borders = true;      ///< border slices count as annotated-empty
  std::size_t batch_size = 8;
  Dims patch{24, 24, 16};
  int epochs_phase1 = 40;
  int epochs_phase2 = 40;
  int iterations_per_epoch = 16;
  ScheduleConfig schedule;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 7;

  double effective_percentage() const { return regime == Regime::full ? 1.0 : percentage; }
  /// Half the patch on every axis (at least 1).
  Dims stride() const;
  void validate() const;
};

struct TrainingCase {
  std::size_t source_index = 0;  ///< dataset index; seeds the annotation plan
  Volume3D image;
  PartialLabel label;
  AnnotationPlan plan;
};

struct TrainingData {
  std::vector<TrainingCase> train;
  std::vector<LabeledVolume> validation;  ///< always fully labelled
};

/// Annotation plan for each training case: full regime annotates the whole
/// extent; partial draws a window from Rng(seed, kPlans).fork(source index).
TrainingCase make_training_case(const TrainConfig& config, std::size_t source_index, const LabeledVolume& volume);

struct EpochRow {
  int epoch = 0;
  int phase = 1;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_dice = 0.0;
  bool checkpoint = false;
};

struct TrainRecord {
  std::vector<EpochRow> rows;

  std::string to_csv() const;
};

struct PhaseResult {
  NetParams best;
  std::optional<double> best_val_dice;  ///< empty when no epoch ran
  int best_epoch = 0;                   ///< 0 means the starting weights
  TrainRecord record;
};

/// Plateau-scheduled training from fresh weights; returns the best-validation checkpoint.
PhaseResult train_phase1(const TrainConfig& config, const TrainingData& data);
/// Fine-tuning with warm restarts, starting bit-for-bit from phase1.best. Falls
/// back to the phase-1 checkpoint when no phase-2 epoch beats its validation Dice.
PhaseResult train_phase2(const TrainConfig& config, const TrainingData& data, const PhaseResult& phase1);

/// One optimizer step's worth of loss and gradients on a batch.
struct StepResult {
  double loss = 0.0;
  GradientSet gradients;
};
StepResult loss_and_gradients(const NetParams& params, const Batch& batch);

/// Averages overlapping tile probabilities.
class TileAccumulator {
 public:
  explicit TileAccumulator(const Dims& dims);
  void add(int ox, int oy, int oz, const Dims& tile, std::span<const double> probabilities);
  /// Throws if any voxel was never covered.
  std::vector<double> mean() const;

 private:
  Dims dims_;
  std::vector<double> sum_;
  std::vector<std::uint32_t> count_;
};

/// Sliding-window probabilities (stride = half patch, mask channel all ones).
std::vector<double> predict_probabilities(const NetParams& params, const Volume3D& volume, const Dims& patch);
/// Strict > 0.5; ties go to background.
BinaryMask3D threshold_probabilities(std::span<const double> probabilities, const Dims& dims, const Spacing& spacing);
/// Thresholded, hole-filled, largest-component prediction.
BinaryMask3D predict(const NetParams& params, const Volume3D& volume, const Dims& patch);

struct ValidationResult {
  double loss = 0.0;  ///< batch Dice loss over all validation voxels jointly
  double dice = 0.0;  ///< mean post-processed Dice over cases
};
ValidationResult validate(const NetParams& params, std::span<const LabeledVolume> cases, const Dims& patch);

}  // namespace sparseg
