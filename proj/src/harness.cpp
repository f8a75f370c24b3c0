#include "sparseg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sparseg/metrics.hpp"
#include "sparseg/mvol.hpp"

namespace sparseg {

namespace fs = std::filesystem;

namespace {

const Scenario kCanonical[] = {
    {Regime::full, true, false},     {Regime::full, true, true},     {Regime::partial, false, false},
    {Regime::partial, false, true},  {Regime::partial, true, false}, {Regime::partial, true, true},
};

const char* const kMetrics[] = {"dice", "hausdorff_mm", "assd2d_mm"};

std::optional<double> metric_of(const CaseRow& r, const std::string& metric) {
  if (metric == "dice") return r.dice;
  if (metric == "hausdorff_mm") return r.hausdorff_mm;
  return r.assd2d_mm;
}

int scenario_rank(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (kCanonical[i].name() == name) return i;
  return 6;
}

std::string seed_key(std::uint64_t seed) { return "seed:" + std::to_string(seed); }

std::size_t thread_count(std::size_t fallback) {
  const char* env = std::getenv("SPARSEG_THREADS");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw std::invalid_argument("SPARSEG_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

struct SeedData {
  std::uint64_t seed = 0;
  std::vector<LabeledVolume> train;  // partial arm; the full arm is a subset
  std::vector<LabeledVolume> validation;
  std::vector<LabeledVolume> test;
  EffortRecord effort;
};

SeedData make_seed_data(const ExperimentConfig& config, std::uint64_t seed) {
  const std::size_t m = config.train_partial;
  const Rng rng(seed, streams::kDataset);
  SeedData sd;
  sd.seed = seed;
  for (std::size_t i = 0; i < m + config.validation + config.test; ++i) {
    LabeledVolume v = generate_case(config.phantom, rng, i);
    if (i < m) {
      sd.train.push_back(std::move(v));
    } else if (i < m + config.validation) {
      sd.validation.push_back(std::move(v));
    } else {
      sd.test.push_back(std::move(v));
    }
  }

  TrainConfig partial = config.train;
  partial.regime = Regime::partial;
  partial.seed = seed;
  std::vector<int> lengths;
  int partial_total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const StructureExtent extent = compute_extent(sd.train[i].mask);
    lengths.push_back(extent.length());
    Rng plan_rng = Rng(seed, streams::kPlans).fork(i);
    const int depth = sd.train[i].mask.dims().z;
    partial_total += annotation_cost(plan_annotation(extent, depth, partial.percentage, plan_rng));
  }
  const int tolerance = static_cast<int>(m / 2);
  sd.effort.seed = seed;
  sd.effort.partial_slices = partial_total;
  sd.effort.tolerance = tolerance;
  sd.effort.full_cases =
      choose_full_subset(lengths, config.train_full(), partial_total, tolerance, Rng(seed, streams::kFullSubset));
  for (std::size_t i : sd.effort.full_cases) sd.effort.full_slices += lengths[i];
  if (std::abs(sd.effort.full_slices - sd.effort.partial_slices) > tolerance) {
    throw std::logic_error("equal-effort bookkeeping violated for seed " + std::to_string(seed));
  }
  return sd;
}

// One phase-1 run plus the optional phase-2 run that continues from it.
struct Unit {
  std::size_t seed_index = 0;
  Regime regime = Regime::partial;
  bool borders = true;
  bool evaluate_phase1 = false;
  bool evaluate_phase2 = false;
};

struct UnitOutcome {
  std::map<std::string, std::vector<CaseRow>> rows;
  std::map<std::string, std::string> errors;
};

std::vector<CaseRow> evaluate_test(const NetParams& params, const SeedData& sd, const std::string& scenario,
                                   const Dims& patch) {
  std::vector<CaseRow> rows;
  for (std::size_t i = 0; i < sd.test.size(); ++i) {
    const BinaryMask3D pred = predict(params, sd.test[i].image, patch);
    const MetricReport m = evaluate(pred, sd.test[i].mask);
    rows.push_back({sd.seed, scenario, i, m.dice, m.hausdorff_mm, m.assd2d_mm});
  }
  return rows;
}

UnitOutcome run_unit(const ExperimentConfig& config, const SeedData& sd, const Unit& unit) {
  UnitOutcome out;
  const Scenario no_ft{unit.regime, unit.borders, false};
  const Scenario ft{unit.regime, unit.borders, true};
  auto fail = [&](const std::string& what) {
    if (unit.evaluate_phase1) out.errors[no_ft.name()] = what;
    if (unit.evaluate_phase2) out.errors[ft.name()] = what;
  };
  try {
    TrainConfig tc = config.train;
    tc.regime = unit.regime;
    tc.borders = unit.borders;
    tc.seed = sd.seed;
    TrainingData data;
    data.validation = sd.validation;
    if (unit.regime == Regime::full) {
      for (std::size_t i : sd.effort.full_cases) data.train.push_back(make_training_case(tc, i, sd.train[i]));
    } else {
      for (std::size_t i = 0; i < sd.train.size(); ++i) data.train.push_back(make_training_case(tc, i, sd.train[i]));
    }
    const PhaseResult p1 = train_phase1(tc, data);
    if (unit.evaluate_phase1) out.rows[no_ft.name()] = evaluate_test(p1.best, sd, no_ft.name(), tc.patch);
    if (unit.evaluate_phase2) {
      try {
        const PhaseResult p2 = train_phase2(tc, data, p1);
        out.rows[ft.name()] = evaluate_test(p2.best, sd, ft.name(), tc.patch);
      } catch (const std::exception& e) {
        out.errors[ft.name()] = e.what();
      }
    }
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string Scenario::name() const {
  std::string n = regime == Regime::full ? "full" : (borders ? "partial-w" : "partial-wo");
  return finetune ? n + "-ft" : n;
}

Scenario parse_scenario(const std::string& name) {
  for (const auto& s : kCanonical)
    if (s.name() == name) return s;
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::vector<std::string> all_scenario_names() {
  std::vector<std::string> out;
  for (const auto& s : kCanonical) out.push_back(s.name());
  return out;
}

std::vector<Scenario> selected_scenarios(const ExperimentConfig& config) {
  if (config.scenarios.empty()) return {std::begin(kCanonical), std::end(kCanonical)};
  std::vector<Scenario> out;
  for (const auto& s : kCanonical) {
    if (std::find(config.scenarios.begin(), config.scenarios.end(), s.name()) != config.scenarios.end()) {
      out.push_back(s);
    }
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  s.min = values.front();
  s.max = values.front();
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

std::vector<std::size_t> choose_full_subset(const std::vector<int>& lengths, std::size_t k, int target, int tolerance,
                                            Rng rng) {
  if (k == 0 || k > lengths.size()) throw std::invalid_argument("full-arm size must be in [1, case count]");
  std::vector<std::size_t> idx(lengths.size());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    int total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(rng.next_int(static_cast<std::int64_t>(i),
                                                           static_cast<std::int64_t>(idx.size()) - 1));
      std::swap(idx[i], idx[j]);
      total += lengths[idx[i]];
    }
    if (std::abs(total - target) <= tolerance) {
      std::vector<std::size_t> out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(out.begin(), out.end());
      return out;
    }
  }
  throw std::runtime_error("no full-arm subset matches the partial-arm slice budget");
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::vector<Scenario> scenarios = selected_scenarios(config);

  std::vector<SeedData> seeds;
  for (std::uint64_t seed : config.seeds) seeds.push_back(make_seed_data(config, seed));

  std::vector<Unit> units;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    for (const auto& s : scenarios) {
      auto it = std::find_if(units.begin(), units.end(), [&](const Unit& u) {
        return u.seed_index == si && u.regime == s.regime && (s.regime == Regime::full || u.borders == s.borders);
      });
      if (it == units.end()) {
        units.push_back({si, s.regime, s.borders, false, false});
        it = units.end() - 1;
      }
      (s.finetune ? it->evaluate_phase2 : it->evaluate_phase1) = true;
    }
  }

  std::vector<UnitOutcome> outcomes(units.size());
  const std::size_t workers = std::min(thread_count(scenarios.size()), units.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t u = next++; u < units.size(); u = next++) {
      outcomes[u] = run_unit(config, seeds[units[u].seed_index], units[u]);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  ExperimentReport report;
  report.training_runs = static_cast<int>(units.size());
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    report.effort.push_back(seeds[si].effort);
    for (const auto& s : scenarios) {
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].seed_index != si) continue;
        const auto rows = outcomes[u].rows.find(s.name());
        if (rows != outcomes[u].rows.end()) {
          report.cases.insert(report.cases.end(), rows->second.begin(), rows->second.end());
        }
        const auto err = outcomes[u].errors.find(s.name());
        if (err != outcomes[u].errors.end()) report.errors[seed_key(seeds[si].seed) + "/" + s.name()] = err->second;
      }
    }
  }

  // aggregates come from the CSV text so that `report` reproduces them exactly
  const std::string cases_csv = cases_to_csv(report.cases);
  report.aggregates = compute_aggregates(cases_from_csv(cases_csv));
  const std::string aggregate_csv = aggregates_to_csv(report.aggregates);
  const std::string svg = render_svg(report.aggregates);

  fs::create_directories(config.out_dir);
  write_text(config.out_dir / "cases.csv", cases_csv);
  write_text(config.out_dir / "aggregate.csv", aggregate_csv);
  write_text(config.out_dir / "report.svg", svg);

  nlohmann::ordered_json manifest;
  manifest["config"] = config_to_json(config);
  manifest["training_runs"] = report.training_runs;
  auto& effort = manifest["effort"] = nlohmann::ordered_json::array();
  for (const auto& e : report.effort) {
    effort.push_back({{"seed", e.seed},
                      {"partial_slices", e.partial_slices},
                      {"full_slices", e.full_slices},
                      {"tolerance", e.tolerance},
                      {"full_cases", e.full_cases}});
  }
  manifest["errors"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.errors) manifest["errors"][k] = v;
  manifest["artifacts"] = {{"cases.csv", fnv1a64_hex(cases_csv)},
                           {"aggregate.csv", fnv1a64_hex(aggregate_csv)},
                           {"report.svg", fnv1a64_hex(svg)}};
  write_text(config.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

std::vector<AggregateRow> compute_aggregates(const std::vector<CaseRow>& cases) {
  std::vector<std::string> scenario_order;
  std::vector<std::uint64_t> seed_order;
  for (const auto& c : cases) {
    if (std::find(scenario_order.begin(), scenario_order.end(), c.scenario) == scenario_order.end()) {
      scenario_order.push_back(c.scenario);
    }
    if (std::find(seed_order.begin(), seed_order.end(), c.seed) == seed_order.end()) seed_order.push_back(c.seed);
  }
  std::stable_sort(scenario_order.begin(), scenario_order.end(),
                   [](const std::string& a, const std::string& b) { return scenario_rank(a) < scenario_rank(b); });

  std::vector<AggregateRow> out;
  auto push = [&](const std::string& group, const std::string& scenario, const std::string& metric,
                  const std::vector<double>& values) {
    if (values.empty()) return;
    const Summary s = summarize(values);
    out.push_back({group, scenario, metric, s.n, s.mean, s.std, s.min, s.max});
  };
  for (const auto& scenario : scenario_order) {
    for (const char* metric : kMetrics) {
      std::vector<double> pooled;
      std::vector<double> seed_means;
      for (std::uint64_t seed : seed_order) {
        std::vector<double> values;
        for (const auto& c : cases) {
          if (c.seed != seed || c.scenario != scenario) continue;
          if (const auto v = metric_of(c, metric)) values.push_back(*v);
        }
        if (values.empty()) continue;
        push(seed_key(seed), scenario, metric, values);
        seed_means.push_back(out.back().mean);
        pooled.insert(pooled.end(), values.begin(), values.end());
      }
      push("pooled", scenario, metric, pooled);
      push("across-seeds", scenario, metric, seed_means);
    }
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string cases_to_csv(const std::vector<CaseRow>& cases) {
  std::string out = "seed,scenario,case,dice,hausdorff_mm,assd2d_mm\n";
  for (const auto& c : cases) {
    out += std::to_string(c.seed) + "," + c.scenario + "," + std::to_string(c.case_index) + "," + format_real(c.dice) +
           "," + (c.hausdorff_mm ? format_real(*c.hausdorff_mm) : "") + "," +
           (c.assd2d_mm ? format_real(*c.assd2d_mm) : "") + "\n";
  }
  return out;
}

std::vector<CaseRow> cases_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "seed,scenario,case,dice,hausdorff_mm,assd2d_mm") {
    throw std::invalid_argument("cases.csv: unexpected header");
  }
  std::vector<CaseRow> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw std::invalid_argument("cases.csv line " + std::to_string(line_no) + ": expected 6 fields");
    try {
      CaseRow r;
      r.seed = std::stoull(f[0]);
      r.scenario = f[1];
      r.case_index = std::stoull(f[2]);
      r.dice = parse_real(f[3]);
      if (!f[4].empty()) r.hausdorff_mm = parse_real(f[4]);
      if (!f[5].empty()) r.assd2d_mm = parse_real(f[5]);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::invalid_argument("cases.csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string aggregates_to_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "group,scenario,metric,n,mean,std,min,max\n";
  for (const auto& r : rows) {
    out += r.group + "," + r.scenario + "," + r.metric + "," + std::to_string(r.n) + "," + format_real(r.mean) + "," +
           format_real(r.std) + "," + format_real(r.min) + "," + format_real(r.max) + "\n";
  }
  return out;
}

std::string render_svg(const std::vector<AggregateRow>& rows) {
  static const char* const kColors[] = {"#4c72b0", "#8172b2", "#dd8452", "#c44e52", "#55a868", "#2a9d8f", "#7f7f7f"};
  static const char* const kTitles[] = {"Dice", "Hausdorff (mm)", "2D ASSD (mm)"};
  const double panel_w = 320.0, panel_h = 300.0, left = 50.0, top = 40.0, bottom = 90.0;
  const double width = 3 * panel_w + 20.0, height = top + panel_h + bottom;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(width) << "\" height=\"" << fixed2(height)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int p = 0; p < 3; ++p) {
    std::vector<const AggregateRow*> bars;
    for (const auto& r : rows)
      if (r.group == "pooled" && r.metric == kMetrics[p]) bars.push_back(&r);
    double y_max = p == 0 ? 1.0 : 0.0;
    if (p != 0) {
      for (const auto* b : bars) y_max = std::max(y_max, b->max);
      y_max = y_max > 0.0 ? std::ceil(y_max * 1.1) : 1.0;
    }
    const double x0 = p * panel_w + left;
    const double plot_w = panel_w - left - 10.0;
    auto y_of = [&](double v) { return top + panel_h - std::clamp(v / y_max, 0.0, 1.0) * panel_h; };

    s << "<g>\n<text x=\"" << fixed2(x0 + plot_w / 2) << "\" y=\"" << fixed2(top - 16)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << kTitles[p] << "</text>\n";
    s << "<line x1=\"" << fixed2(x0) << "\" y1=\"" << fixed2(top) << "\" x2=\"" << fixed2(x0) << "\" y2=\""
      << fixed2(top + panel_h) << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << fixed2(x0) << "\" y1=\"" << fixed2(top + panel_h) << "\" x2=\"" << fixed2(x0 + plot_w)
      << "\" y2=\"" << fixed2(top + panel_h) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = y_max * t / 4.0;
      s << "<text x=\"" << fixed2(x0 - 4) << "\" y=\"" << fixed2(y_of(v) + 4) << "\" text-anchor=\"end\">" << fixed2(v)
        << "</text>\n";
    }
    const double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
      const AggregateRow& b = *bars[i];
      const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
      const double bw = slot * 0.5;
      const char* color = kColors[std::min(scenario_rank(b.scenario), 6)];
      s << "<rect x=\"" << fixed2(cx - bw / 2) << "\" y=\"" << fixed2(y_of(b.mean)) << "\" width=\"" << fixed2(bw)
        << "\" height=\"" << fixed2(top + panel_h - y_of(b.mean)) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.35\"/>\n";
      s << "<rect x=\"" << fixed2(cx + bw / 2 + 2) << "\" y=\"" << fixed2(y_of(b.max)) << "\" width=\"4\" height=\""
        << fixed2(y_of(b.min) - y_of(b.max)) << "\" fill=\"#b0b0b0\"/>\n";
      s << "<rect x=\"" << fixed2(cx - 3) << "\" y=\"" << fixed2(y_of(b.mean + b.std)) << "\" width=\"6\" height=\""
        << fixed2(y_of(b.mean - b.std) - y_of(b.mean + b.std)) << "\" fill=\"" << color << "\"/>\n";
      s << "<line x1=\"" << fixed2(cx - bw / 2) << "\" y1=\"" << fixed2(y_of(b.mean)) << "\" x2=\""
        << fixed2(cx + bw / 2) << "\" y2=\"" << fixed2(y_of(b.mean)) << "\" stroke=\"black\"/>\n";
      s << "<text transform=\"translate(" << fixed2(cx) << "," << fixed2(top + panel_h + 8)
        << ") rotate(45)\" text-anchor=\"start\">" << b.scenario << "</text>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sparseg
