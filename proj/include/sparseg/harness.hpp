#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparseg/config.hpp"
#include "sparseg/trainer.hpp"

namespace sparseg {

/// One arm of the comparison. Borders only matter for the partial regime.
struct Scenario {
  Regime regime = Regime::partial;
  bool borders = true;
  bool finetune = false;

  /// "full", "full-ft", "partial-wo", "partial-wo-ft", "partial-w", "partial-w-ft".
  std::string name() const;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario parse_scenario(const std::string& name);
std::vector<std::string> all_scenario_names();
/// Scenarios named in the config (all six when the list is empty), in canonical order.
std::vector<Scenario> selected_scenarios(const ExperimentConfig& config);

struct CaseRow {
  std::uint64_t seed = 0;
  std::string scenario;
  std::size_t case_index = 0;
  double dice = 0.0;
  std::optional<double> hausdorff_mm;
  std::optional<double> assd2d_mm;
};

/// group is "seed:<n>" for one seed over its test cases, "pooled" for every test
/// case of every seed, or "across-seeds" for statistics of the per-seed means.
struct AggregateRow {
  std::string group;
  std::string scenario;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  ///< population STD
  double min = 0.0;
  double max = 0.0;
};

/// Annotated-slice bookkeeping for one seed.
struct EffortRecord {
  std::uint64_t seed = 0;
  int partial_slices = 0;  ///< window slices over the partial arm
  int full_slices = 0;     ///< extent slices over the full arm
  int tolerance = 0;       ///< allowed |difference|, train_partial / 2
  std::vector<std::size_t> full_cases;
};

struct ExperimentReport {
  std::vector<CaseRow> cases;
  std::vector<AggregateRow> aggregates;
  std::vector<EffortRecord> effort;
  std::map<std::string, std::string> errors;  ///< "seed:<n>/<scenario>" -> message
  int training_runs = 0;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};
/// Population statistics; n = 0 for an empty input.
Summary summarize(const std::vector<double>& values);

/// Case indices (out of lengths.size()) for the full arm: random k-subsets from
/// `rng` until the summed extent lengths are within tolerance of target. Throws
/// std::runtime_error if 1000 draws all fail. Result is sorted.
std::vector<std::size_t> choose_full_subset(const std::vector<int>& lengths, std::size_t k, int target, int tolerance,
                                            Rng rng);

/// Runs every selected scenario for every seed and writes cases.csv,
/// aggregate.csv, report.svg and manifest.json into config.out_dir. A failing
/// scenario is recorded in `errors` and the sweep continues.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::vector<AggregateRow> compute_aggregates(const std::vector<CaseRow>& cases);

std::string cases_to_csv(const std::vector<CaseRow>& cases);
std::vector<CaseRow> cases_from_csv(const std::string& text);
std::string aggregates_to_csv(const std::vector<AggregateRow>& rows);
/// Three panels (Dice, Hausdorff, 2D ASSD); one bar per scenario showing the
/// pooled mean, STD whisker and min-max range.
std::string render_svg(const std::vector<AggregateRow>& rows);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a64_hex(const std::string& bytes);
/// Shortest decimal that round-trips to the same double.
std::string format_real(double v);

}  // namespace sparseg
