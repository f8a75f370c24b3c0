#include "sparseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <stdexcept>

#include "sparseg/config.hpp"
#include "sparseg/harness.hpp"
#include "sparseg/metrics.hpp"
#include "sparseg/mvol.hpp"
#include "sparseg/postproc.hpp"

namespace sparseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text);
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::vector<LabeledVolume> load_pairs(const std::vector<fs::path>& images, const std::vector<fs::path>& masks,
                                      const char* what) {
  if (images.size() != masks.size()) {
    throw std::invalid_argument(std::string(what) + ": image and mask lists differ in length");
  }
  std::vector<LabeledVolume> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Volume3D image = read_volume(images[i]);
    BinaryMask3D mask = read_mask(masks[i]);
    require_same_dims(image.dims(), mask.dims(), what);
    out.push_back({std::move(image), std::move(mask)});
  }
  return out;
}

int cmd_gen_data(const fs::path& config_path, const std::optional<fs::path>& out_opt,
                 const std::optional<std::uint64_t>& seed_opt, std::ostream& out) {
  ExperimentConfig c = load_config(config_path);
  if (out_opt) c.out_dir = *out_opt;
  const std::uint64_t seed = seed_opt ? *seed_opt : c.train.seed;
  c.phantom.validate();
  fs::create_directories(c.out_dir);
  const Rng rng(seed, streams::kDataset);
  const std::size_t total = c.train_partial + c.validation + c.test;
  ordered_json ds;
  ds["seed"] = seed;
  ds["phantom"] = {{"dims", {c.phantom.dims.x, c.phantom.dims.y, c.phantom.dims.z}},
                   {"spacing", {c.phantom.spacing.sx, c.phantom.spacing.sy, c.phantom.spacing.sz}},
                   {"lobes_min", c.phantom.lobes_min},
                   {"lobes_max", c.phantom.lobes_max},
                   {"size_min", c.phantom.size_min},
                   {"size_max", c.phantom.size_max},
                   {"contrast", c.phantom.contrast},
                   {"noise_sigma", c.phantom.noise_sigma},
                   {"texture_amplitude", c.phantom.texture_amplitude}};
  const char* const splits[] = {"train", "val", "test"};
  for (const char* s : splits) {
    ds[std::string(s) + "_images"] = ordered_json::array();
    ds[std::string(s) + "_masks"] = ordered_json::array();
  }
  for (std::size_t i = 0; i < total; ++i) {
    const char* split = i < c.train_partial ? "train" : (i < c.train_partial + c.validation ? "val" : "test");
    char stem[64];
    std::snprintf(stem, sizeof stem, "case_%03zu", i);
    const LabeledVolume v = generate_case(c.phantom, rng, i);
    const std::string image = std::string(stem) + "_img.mvol";
    const std::string mask = std::string(stem) + "_seg.mvol";
    write_mvol(v.image, c.out_dir / image);
    write_mvol(v.mask, c.out_dir / mask);
    ds[std::string(split) + "_images"].push_back(image);
    ds[std::string(split) + "_masks"].push_back(mask);
  }
  write_text(c.out_dir / "dataset.json", ds.dump(2) + "\n");
  out << "wrote " << total << " cases to " << c.out_dir.string() << "\n";
  return 0;
}

int cmd_plan(const fs::path& mask_path, double percentage, std::uint64_t seed, std::size_t index,
             const std::optional<int>& center, bool no_borders, const std::optional<fs::path>& out_path,
             std::ostream& out) {
  const BinaryMask3D gt = read_mask(mask_path);
  const StructureExtent extent = compute_extent(gt);
  const int depth = gt.dims().z;
  AnnotationPlan plan;
  if (center) {
    plan = plan_annotation_at(extent, depth, percentage, *center);
  } else {
    Rng rng = Rng(seed, streams::kPlans).fork(index);
    plan = plan_annotation(extent, depth, percentage, rng);
  }
  const PartialLabel label = build_partial_label(gt, plan, !no_borders);
  ordered_json j;
  j["z_min"] = extent.z_min;
  j["z_max"] = extent.z_max;
  j["window"] = {plan.window_lo, plan.window_hi};
  j["percentage"] = percentage;
  if (center) {
    j["center"] = *center;
  } else {
    j["seed"] = seed;
    j["index"] = index;
  }
  j["depth"] = depth;
  j["window_slices"] = plan.window_length();
  j["annotated_slices"] = label.annotated_slice_count();
  j["cost"] = annotation_cost(plan);
  j["interior_gaps"] = has_interior_gaps(gt, extent);
  out << j.dump() << "\n";
  if (out_path) {
    std::vector<std::uint8_t> sel(gt.dims().count(), 0);
    const std::size_t slice = gt.dims().slice_count();
    for (int z = 0; z < depth; ++z) {
      if (!label.annotated(z)) continue;
      std::fill_n(sel.begin() + static_cast<std::ptrdiff_t>(z * slice), slice, 1);
    }
    write_mvol(BinaryMask3D(gt.dims(), gt.spacing(), std::move(sel)), *out_path);
  }
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir, const std::optional<std::uint64_t>& seed_opt,
              std::ostream& out) {
  ExperimentConfig c = load_config(config_path);
  if (seed_opt) c.train.seed = *seed_opt;
  const TrainConfig& tc = c.train;
  tc.validate();
  if (c.data.train_images.empty()) throw std::invalid_argument("config lists no train_images");
  if (c.data.val_images.empty()) throw std::invalid_argument("config lists no val_images");
  const auto train = load_pairs(c.data.train_images, c.data.train_masks, "training data");
  TrainingData data;
  data.validation = load_pairs(c.data.val_images, c.data.val_masks, "validation data");
  for (std::size_t i = 0; i < train.size(); ++i) data.train.push_back(make_training_case(tc, i, train[i]));

  const PhaseResult p1 = train_phase1(tc, data);
  const PhaseResult p2 = train_phase2(tc, data, p1);
  fs::create_directories(out_dir);
  TrainRecord record = p1.record;
  record.rows.insert(record.rows.end(), p2.record.rows.begin(), p2.record.rows.end());
  write_text(out_dir / "record.csv", record.to_csv());
  write_checkpoint({p1.best, p1.best_epoch, p1.best_val_dice}, out_dir / "best_phase1.ckpt");
  write_checkpoint({p2.best, p2.best_epoch, p2.best_val_dice}, out_dir / "best_phase2.ckpt");

  const ValidationResult final_val = validate(p2.best, data.validation, tc.patch);
  int slices = 0;
  for (const auto& tcase : data.train) slices += annotation_cost(tcase.plan);
  ordered_json summary;
  summary["seed"] = tc.seed;
  summary["config"] = config_to_json(c);
  summary["annotated_slices"] = slices;
  summary["phase1"] = {{"best_epoch", p1.best_epoch}, {"best_val_dice", optional_json(p1.best_val_dice)}};
  summary["phase2"] = {{"best_epoch", p2.best_epoch}, {"best_val_dice", optional_json(p2.best_val_dice)}};
  summary["final"] = {{"val_dice", final_val.dice}, {"val_loss", final_val.loss}};
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  out << "best validation Dice " << final_val.dice << "; outputs in " << out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& pred_path, const fs::path& gt_path, bool postproc, std::ostream& out) {
  BinaryMask3D pred = read_mask(pred_path);
  const BinaryMask3D gt = read_mask(gt_path);
  if (postproc) pred = postprocess(pred);
  const MetricReport m = evaluate(pred, gt);
  ordered_json j;
  j["dice"] = m.dice;
  j["hausdorff_mm"] = optional_json(m.hausdorff_mm);
  j["assd2d_mm"] = optional_json(m.assd2d_mm);
  out << j.dump() << "\n";
  return 0;
}

int cmd_experiment(const fs::path& config_path, const std::optional<fs::path>& out_opt,
                   const std::optional<std::uint64_t>& seed_opt, std::ostream& out, std::ostream& err) {
  ExperimentConfig c = load_config(config_path);
  if (out_opt) c.out_dir = *out_opt;
  if (seed_opt) c.seeds = {*seed_opt};
  const ExperimentReport report = run_experiment(c);
  for (const auto& [key, msg] : report.errors) err << "scenario " << key << " failed: " << msg << "\n";
  for (const auto& row : report.aggregates) {
    if (row.group != "across-seeds" || row.metric != "dice") continue;
    out << row.scenario << ": mean Dice " << row.mean << " (across-seed STD " << row.std << ")\n";
  }
  out << "report written to " << c.out_dir.string() << "\n";
  return report.errors.empty() ? 0 : 1;
}

int cmd_report(const fs::path& in_dir, const std::optional<fs::path>& out_opt, std::ostream& out) {
  const fs::path out_dir = out_opt ? *out_opt : in_dir;
  const auto bytes = read_file_bytes(in_dir / "cases.csv");
  const auto rows = compute_aggregates(cases_from_csv(bytes));
  fs::create_directories(out_dir);
  write_text(out_dir / "aggregate.csv", aggregates_to_csv(rows));
  write_text(out_dir / "report.svg", render_svg(rows));
  out << "wrote aggregate.csv and report.svg to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Partial-annotation volumetric segmentation toolkit", "sparseg"};
  app.require_subcommand(1);

  fs::path config, out_dir, mask, pred, gt, in_dir;
  std::optional<fs::path> out_opt;
  std::optional<std::uint64_t> seed_opt;
  double percentage = 0.2;
  std::uint64_t plan_seed = 1;
  std::size_t plan_index = 0;
  std::optional<int> center;
  bool no_borders = false;
  bool postproc = false;

  auto* gen = app.add_subcommand("gen-data", "Write synthetic phantom cases and a dataset.json");
  gen->add_option("--config", config, "Config file")->required();
  gen->add_option("--out", out_opt, "Output directory");
  gen->add_option("--seed", seed_opt, "Dataset seed");

  auto* plan = app.add_subcommand("plan", "Show the annotation plan for a ground-truth mask");
  plan->add_option("--mask", mask, "Ground-truth mask (.mvol)")->required();
  plan->add_option("--percentage", percentage, "Fraction of the extent to annotate")->capture_default_str();
  plan->add_option("--seed", plan_seed, "Plan seed")->capture_default_str();
  plan->add_option("--index", plan_index, "Case index (selects the plan stream)")->capture_default_str();
  plan->add_option("--center", center, "Window centre slice instead of a random draw");
  plan->add_flag("--no-borders", no_borders, "Do not treat border slices as annotated");
  plan->add_option("--out", out_opt, "Write the slice selection mask here");

  auto* train = app.add_subcommand("train", "Two-phase training from a config");
  train->add_option("--config", config, "Config file")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed_opt, "Override the config seed");

  auto* eval = app.add_subcommand("eval", "Dice, Hausdorff and 2D ASSD of a prediction");
  eval->add_option("--pred", pred, "Predicted mask (.mvol)")->required();
  eval->add_option("--gt", gt, "Ground-truth mask (.mvol)")->required();
  eval->add_flag("--postproc", postproc, "Fill holes and keep the largest component first");

  auto* exp = app.add_subcommand("experiment", "Full vs partial comparison over seeds");
  exp->add_option("--config", config, "Config file")->required();
  exp->add_option("--out", out_opt, "Output directory");
  exp->add_option("--seed", seed_opt, "Run this single seed only");

  auto* rep = app.add_subcommand("report", "Recompute aggregate.csv and report.svg from cases.csv");
  rep->add_option("--in", in_dir, "Directory holding cases.csv")->required();
  rep->add_option("--out", out_opt, "Output directory (default: --in)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "sparseg: error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config, out_opt, seed_opt, out);
    if (plan->parsed()) return cmd_plan(mask, percentage, plan_seed, plan_index, center, no_borders, out_opt, out);
    if (train->parsed()) return cmd_train(config, out_dir, seed_opt, out);
    if (eval->parsed()) return cmd_eval(pred, gt, postproc, out);
    if (exp->parsed()) return cmd_experiment(config, out_opt, seed_opt, out, err);
    if (rep->parsed()) return cmd_report(in_dir, out_opt, out);
  } catch (const std::exception& e) {
    err << "sparseg: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace sparseg
