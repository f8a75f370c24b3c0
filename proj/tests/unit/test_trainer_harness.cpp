#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sparseg/cli.hpp"
#include "sparseg/harness.hpp"
#include "sparseg/mvol.hpp"
#include "sparseg/trainer.hpp"

using namespace sparseg;
namespace fs = std::filesystem;

namespace {

PhantomSpec small_phantom() {
  PhantomSpec spec;
  spec.dims = {24, 24, 16};
  return spec;
}

TrainConfig small_train() {
  TrainConfig t;
  t.patch = {16, 16, 8};
  t.batch_size = 2;
  t.epochs_phase1 = 2;
  t.epochs_phase2 = 2;
  t.iterations_per_epoch = 2;
  t.percentage = 0.5;
  return t;
}

TrainingData small_data(const TrainConfig& t, std::size_t n_train = 3, std::size_t n_val = 2) {
  const auto cases = generate_dataset(small_phantom(), n_train + n_val, Rng(11, streams::kDataset));
  TrainingData data;
  for (std::size_t i = 0; i < n_train; ++i) data.train.push_back(make_training_case(t, i, cases[i]));
  for (std::size_t i = n_train; i < cases.size(); ++i) data.validation.push_back(cases[i]);
  return data;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sparseg_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.phantom = small_phantom();
  c.train = small_train();
  c.train.epochs_phase1 = 1;
  c.train.epochs_phase2 = 1;
  c.train_partial = 4;
  c.validation = 1;
  c.test = 3;
  c.seeds = {7};
  c.scenarios = {"full"};
  c.out_dir = out;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("zero epochs return the initial weights") {
    TrainConfig t = small_train();
    t.epochs_phase1 = 0;
    const auto data = small_data(t);
    const auto r = train_phase1(t, data);
    Rng init(t.seed, streams::kInit);
    CHECK(r.best == init_params(init));
    CHECK_FALSE(r.best_val_dice.has_value());
    CHECK(r.best_epoch == 0);
    CHECK(r.record.rows.empty());
  }

  TEST_CASE("training is deterministic and phase two restarts from the checkpoint") {
    const TrainConfig t = small_train();
    const auto data = small_data(t);
    const auto a = train_phase1(t, data);
    const auto b = train_phase1(t, data);
    CHECK(a.best == b.best);
    CHECK(a.record.to_csv() == b.record.to_csv());
    REQUIRE(a.record.rows.size() == 2);
    REQUIRE(a.best_val_dice.has_value());
    CHECK(a.record.rows[0].checkpoint);

    const auto p2 = train_phase2(t, data, a);
    REQUIRE(p2.record.rows.size() == 2);
    CHECK(p2.record.rows[0].phase == 2);
    CHECK(p2.record.rows[0].lr == t.schedule.initial_lr);
    REQUIRE(p2.best_val_dice.has_value());
    CHECK(*p2.best_val_dice >= *a.best_val_dice);
    bool improved = false;
    for (const auto& row : p2.record.rows) improved = improved || row.checkpoint;
    if (!improved) {
      CHECK(p2.best == a.best);
      CHECK(*p2.best_val_dice == *a.best_val_dice);
    }

    TrainConfig none = t;
    none.epochs_phase2 = 0;
    const auto fallback = train_phase2(none, data, a);
    CHECK(fallback.best == a.best);
    CHECK(fallback.best_val_dice == a.best_val_dice);
  }

  TEST_CASE("record csv") {
    TrainRecord r;
    r.rows.push_back({1, 1, 5e-4, 0.25, -0.5, 0.75, true});
    CHECK(r.to_csv() == "epoch,phase,lr,train_loss,val_loss,val_dice,checkpoint\n1,1,0.0005,0.25,-0.5,0.75,1\n");
  }

  TEST_CASE("tile accumulator averages overlaps") {
    TileAccumulator acc({3, 1, 1});
    const std::vector<double> left{0.4, 0.4}, right{0.8, 0.8};
    acc.add(0, 0, 0, {2, 1, 1}, left);
    CHECK_THROWS_AS(acc.mean(), std::logic_error);
    acc.add(1, 0, 0, {2, 1, 1}, right);
    const auto m = acc.mean();
    CHECK(m[0] == doctest::Approx(0.4));
    CHECK(m[1] == doctest::Approx(0.6));
    CHECK(m[2] == doctest::Approx(0.8));
    CHECK_THROWS_AS(acc.add(2, 0, 0, {2, 1, 1}, right), std::invalid_argument);
  }

  TEST_CASE("a constant one-half network predicts nothing") {
    const auto lv = generate_case(small_phantom(), Rng(3, streams::kDataset), 0);
    const auto probs = predict_probabilities(zero_params(), lv.image, {16, 16, 8});
    for (double p : probs) CHECK(p == 0.5);
    CHECK(predict(zero_params(), lv.image, {16, 16, 8}).empty());
    CHECK_THROWS_AS(predict(zero_params(), lv.image, {32, 16, 8}), std::invalid_argument);
  }

  TEST_CASE("a few Adam steps lower the batch loss") {
    const TrainConfig t = small_train();
    const auto data = small_data(t);
    std::vector<Patch> blocks;
    for (const auto& c : data.train) {
      auto b = extract_blocks(c.image, c.label, t.patch, t.stride());
      blocks.insert(blocks.end(), b.begin(), b.end());
    }
    for (std::uint64_t seed : {1, 2, 3}) {
      Rng rng(seed, 99);
      const Batch batch = sample_batch(blocks, 4, rng, false);
      Rng init(seed, streams::kInit);
      NetParams params = init_params(init);
      AdamState state = make_adam_state(params);
      const double first = loss_and_gradients(params, batch).loss;
      for (int step = 0; step < 5; ++step) {
        const auto r = loss_and_gradients(params, batch);
        adam_step(params, r.gradients, state, 1e-2);
      }
      CHECK(loss_and_gradients(params, batch).loss < first);
    }
  }

  TEST_CASE("validation loss of a perfect-agreement case") {
    const TrainConfig t = small_train();
    const auto data = small_data(t);
    const auto v = validate(zero_params(), data.validation, t.patch);
    CHECK(v.dice == 0.0);
    CHECK(v.loss < 0.0);
    CHECK(v.loss > -1.0);
  }

  TEST_CASE("config validation") {
    TrainConfig t = small_train();
    t.percentage = 1.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t.regime = Regime::full;
    CHECK_NOTHROW(t.validate());
    CHECK(t.effective_percentage() == 1.0);
    CHECK(t.stride() == Dims{8, 8, 4});
    CHECK_THROWS_AS(parse_regime("half"), std::invalid_argument);
  }
}

TEST_SUITE("harness") {
  TEST_CASE("scenario names") {
    const auto names = all_scenario_names();
    REQUIRE(names.size() == 6);
    for (const auto& n : names) CHECK(parse_scenario(n).name() == n);
    CHECK(parse_scenario("partial-wo-ft") == Scenario{Regime::partial, false, true});
    CHECK_THROWS_AS(parse_scenario("partial"), std::invalid_argument);
  }

  TEST_CASE("summary statistics") {
    const auto s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.n == 4);
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
    CHECK(summarize({}).n == 0);
  }

  TEST_CASE("full subset meets the effort tolerance") {
    const std::vector<int> lengths{10, 12, 30, 8, 9, 11};
    const auto pick = choose_full_subset(lengths, 2, 20, 1, Rng(1, 1));
    REQUIRE(pick.size() == 2);
    CHECK(pick[0] < pick[1]);
    CHECK(std::abs(lengths[pick[0]] + lengths[pick[1]] - 20) <= 1);
    CHECK(pick == choose_full_subset(lengths, 2, 20, 1, Rng(1, 1)));
    CHECK_THROWS_AS(choose_full_subset(lengths, 2, 100, 0, Rng(1, 1)), std::runtime_error);
  }

  TEST_CASE("cases csv round trip") {
    std::vector<CaseRow> rows{{1, "full", 0, 0.9123456789, 3.5, 1.0 / 3.0}, {2, "partial-w", 4, 0.0, {}, {}}};
    const std::string csv = cases_to_csv(rows);
    CHECK(csv.rfind("seed,scenario,case,dice,hausdorff_mm,assd2d_mm\n", 0) == 0);
    CHECK(csv.find("2,partial-w,4,0,,\n") != std::string::npos);
    const auto back = cases_from_csv(csv);
    REQUIRE(back.size() == 2);
    CHECK(back[0].dice == rows[0].dice);
    CHECK(*back[0].assd2d_mm == *rows[0].assd2d_mm);
    CHECK_FALSE(back[1].hausdorff_mm.has_value());
    CHECK(cases_to_csv(back) == csv);
    CHECK(format_real(0.1) == "0.1");
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
  }

  TEST_CASE("aggregates skip undefined distances") {
    std::vector<CaseRow> rows{{1, "full", 0, 0.5, 2.0, {}}, {1, "full", 1, 1.0, {}, {}}, {2, "full", 0, 0.75, 4.0, 1.0}};
    const auto agg = compute_aggregates(rows);
    auto find = [&](const std::string& g, const std::string& m) {
      for (const auto& a : agg)
        if (a.group == g && a.metric == m) return a;
      FAIL("missing aggregate " << g << " " << m);
      return AggregateRow{};
    };
    CHECK(find("seed:1", "dice").mean == 0.75);
    CHECK(find("seed:1", "hausdorff_mm").n == 1);
    CHECK(find("pooled", "dice").n == 3);
    CHECK(find("across-seeds", "dice").n == 2);
    CHECK(find("across-seeds", "dice").mean == 0.75);
    CHECK(find("pooled", "assd2d_mm").n == 1);
  }

  TEST_CASE("single-scenario experiment is reproducible") {
    const fs::path a = scratch("exp_a"), b = scratch("exp_b");
    const auto ra = run_experiment(tiny_experiment(a));
    const auto rb = run_experiment(tiny_experiment(b));
    CHECK(ra.errors.empty());
    CHECK(ra.training_runs == 1);
    CHECK(ra.cases.size() == 3);
    REQUIRE(ra.effort.size() == 1);
    CHECK(std::abs(ra.effort[0].partial_slices - ra.effort[0].full_slices) <= ra.effort[0].tolerance);
    CHECK(ra.effort[0].full_cases.size() == 2);
    for (const char* f : {"cases.csv", "aggregate.csv", "report.svg"}) CHECK(slurp(a / f) == slurp(b / f));
    CHECK(aggregates_to_csv(compute_aggregates(cases_from_csv(slurp(a / "cases.csv")))) == slurp(a / "aggregate.csv"));
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("training_runs") == 1);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(run_cli({"plan", "--help"}).code == 0);
    const auto missing = run_cli({"train", "--out", "x"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--config") != std::string::npos);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"plan", "--mask", "/nonexistent.mvol"}).code == 1);
  }

  TEST_CASE("gen-data, plan, eval and report") {
    const fs::path dir = scratch("cli");
    nlohmann::json cfg = {{"dims", {24, 24, 16}}, {"train_partial", 2}, {"percentage", 0.5}, {"validation", 1},
                          {"test", 1}};
    std::ofstream(dir / "cfg.json") << cfg.dump();
    REQUIRE(run_cli({"gen-data", "--config", (dir / "cfg.json").string(), "--out", (dir / "data").string()}).code ==
            0);
    const fs::path seg = dir / "data" / "case_000_seg.mvol";
    REQUIRE(fs::exists(seg));
    REQUIRE(fs::exists(dir / "data" / "dataset.json"));

    const auto plan = run_cli({"plan", "--mask", seg.string(), "--percentage", "0.2", "--out",
                               (dir / "sel.mvol").string()});
    REQUIRE(plan.code == 0);
    const auto pj = nlohmann::json::parse(plan.out);
    CHECK(pj.at("window").size() == 2);
    CHECK(pj.at("cost") == pj.at("window_slices"));
    CHECK(fs::exists(dir / "sel.mvol"));
    CHECK(plan.out == run_cli({"plan", "--mask", seg.string(), "--percentage", "0.2"}).out);

    const auto ev = run_cli({"eval", "--pred", seg.string(), "--gt", seg.string(), "--postproc"});
    REQUIRE(ev.code == 0);
    const auto ej = nlohmann::json::parse(ev.out);
    CHECK(ej.at("dice") == 1.0);
    CHECK(ej.at("hausdorff_mm") == 0.0);

    fs::create_directories(dir / "rep");
    std::ofstream(dir / "rep" / "cases.csv") << cases_to_csv({{1, "full", 0, 0.5, 1.0, 2.0}});
    REQUIRE(run_cli({"report", "--in", (dir / "rep").string()}).code == 0);
    CHECK(fs::exists(dir / "rep" / "aggregate.csv"));
    CHECK(fs::exists(dir / "rep" / "report.svg"));
    fs::remove_all(dir);
  }
}
