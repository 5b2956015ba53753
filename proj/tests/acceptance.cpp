// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
// Usage: mitd_acceptance [work-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mitd/calibration.hpp"
#include "mitd/cli.hpp"
#include "mitd/search.hpp"
#include "mitd/table_model.hpp"
#include "mitd/transducer.hpp"

namespace fs = std::filesystem;
using namespace mitd;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Runs a CLI command in-process; throws with its stderr on failure.
std::string cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != kExitOk) {
    std::string cmd;
    for (const auto& a : args) cmd += a + ' ';
    throw std::runtime_error("mitd " + cmd + "exited " + std::to_string(code) + ": " + err.str());
  }
  return out.str();
}

DecodeConfig config(Strategy s, std::size_t k = 1) {
  DecodeConfig c;
  c.strategy = s;
  c.beam_width = k;
  return c;
}

// ---------------------------------------------------------------------------
// Criteria 1-3: random table models.

void random_model_criteria() {
  const auto t0 = Clock::now();
  std::size_t c1_bad = 0, c2_bad = 0, c3_bad = 0, beam64_checked = 0;
  double worst_gap = 0.0;
  std::string first_failure;
  auto note = [&](std::size_t& counter, const std::string& what) {
    if (counter++ == 0 && first_failure.empty()) first_failure = what;
  };

  std::vector<DecodeResult> exact_results;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const std::size_t v = 2 + seed % 2, depth = 1 + seed % 5;
    const TableModel m = sample_random_model(seed, v, depth);
    const DecodeResult exact = dijkstra_decode(m, {}, config(Strategy::exact));
    const DecodeResult brute = brute_force_argmax(m, {}, default_max_len(0));
    worst_gap = std::max(worst_gap, std::abs(exact.score - brute.score));
    if (exact.y_star != brute.y_star || std::abs(exact.score - brute.score) > 1e-9) {
      note(c1_bad, "seed " + std::to_string(seed) + " exact != brute force");
    }
    exact_results.push_back(exact);
  }
  const double c1_seconds = since(t0);
  report(1, c1_bad == 0 && c1_seconds < 30.0,
         "exact == brute force on " + std::to_string(500 - c1_bad) + "/500 models, max |gap| " +
             fmt("%.3g", worst_gap) + ", " + fmt("%.2f", c1_seconds) + " s (limit 30 s)" +
             (first_failure.empty() ? "" : "; " + first_failure));

  first_failure.clear();
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const std::size_t v = 2 + seed % 2, depth = 1 + seed % 5;
    const TableModel m = sample_random_model(seed, v, depth);
    const DecodeResult& exact = exact_results[seed];
    const DecodeResult greedy = greedy_decode(m, {}, config(Strategy::greedy));
    const DecodeResult beam1 = beam_decode(m, {}, config(Strategy::beam, 1));
    if (greedy.y_star != beam1.y_star || greedy.score != beam1.score) {
      note(c2_bad, "seed " + std::to_string(seed) + " greedy != beam(1)");
    }
    for (std::size_t k : {1u, 2u, 5u}) {
      const DecodeResult beam = beam_decode(m, {}, config(Strategy::beam, k));
      if (beam.score > exact.score + 1e-9) {
        note(c2_bad, "seed " + std::to_string(seed) + " beam(" + std::to_string(k) +
                         ") beats exact");
      }
    }
    if (v == 2 && depth <= 3) {
      ++beam64_checked;
      const DecodeResult beam64 = beam_decode(m, {}, config(Strategy::beam, 64));
      if (beam64.y_star != exact.y_star || std::abs(beam64.score - exact.score) > 1e-9) {
        note(c2_bad, "seed " + std::to_string(seed) + " beam(64) != exact");
      }
    }
  }
  report(2, c2_bad == 0,
         "greedy == beam(1), beam(1,2,5) <= exact on 500 models; beam(64) == exact on " +
             std::to_string(beam64_checked) + " depth<=3 |V|=2 models; violations " +
             std::to_string(c2_bad) + (first_failure.empty() ? "" : "; " + first_failure));

  first_failure.clear();
  std::size_t smaller_queue = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const std::size_t v = 2 + seed % 2, depth = 1 + seed % 5;
    const TableModel m = sample_random_model(seed, v, depth);
    const DecodeResult& plain = exact_results[seed];
    const DecodeResult beam5 = beam_decode(m, {}, config(Strategy::beam, 5));
    DecodeConfig c = config(Strategy::exact);
    c.lower_bound = LowerBound{beam5.score, beam5.y_star};
    const DecodeResult pruned = dijkstra_decode(m, {}, c);
    if (pruned.y_star != plain.y_star || pruned.score != plain.score) {
      note(c3_bad, "seed " + std::to_string(seed) + " pruned result differs");
    }
    if (pruned.stats.nodes_expanded > plain.stats.nodes_expanded) {
      note(c3_bad, "seed " + std::to_string(seed) + " pruning expanded more nodes");
    }
    if (pruned.stats.max_queue < plain.stats.max_queue) ++smaller_queue;
  }
  report(3, c3_bad == 0,
         "pruned == unpruned on 500 models, nodes expanded never larger, peak queue smaller on " +
             std::to_string(smaller_queue) + " models; violations " + std::to_string(c3_bad) +
             (first_failure.empty() ? "" : "; " + first_failure));
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient check.

void gradient_criterion() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    Hyperparameters h;
    h.embed_dim = 4 + rng() % 6;
    h.hidden_dim = 6 + rng() % 8;
    h.seed = 100 + draw;
    const std::size_t vocab = kNumReserved + 3 + rng() % 8;
    const ModelParameters p = init_params(h, vocab);
    EncodedSample s;
    s.x.resize(2 + rng() % 6);
    s.y.resize(1 + rng() % 6);
    for (auto& v : s.x) v = static_cast<SymbolId>(kNumReserved + rng() % (vocab - kNumReserved));
    for (auto& v : s.y) v = static_cast<SymbolId>(kNumReserved + rng() % (vocab - kNumReserved));
    const GradientCheck c = check_gradients(p, s, 1e-5, 200, draw);
    worst = std::max(worst, c.max_relative_error);
    coords += c.coordinates;
  }
  report(4, worst < 1e-4,
         "max relative error " + fmt("%.3g", worst) + " over 10 draws (" +
             std::to_string(coords) + " coordinates, eps 1e-5, limit 1e-4)");
}

// ---------------------------------------------------------------------------
// Criteria 5-10: the synthetic-language pipeline.

const std::vector<std::size_t> kSizes{50, 500, 5000};
const std::vector<int> kSeeds{1, 2, 3};
const std::string kMainStrategies = "greedy,beam:1,beam:10,beam:100,exact";

struct PipelineRun {
  fs::path dir;
  double main_dev_accuracy = 0.0;
  double main_seconds = 0.0;  // train + decode of the main model
  RecordSet main_records;
  std::vector<CurvePoint> curve;
  std::vector<fs::path> models, predictions;
  fs::path report_csv, curve_csv;
};

std::string run_name(int seed, std::size_t size) {
  return "s" + std::to_string(seed) + "_n" + std::to_string(size);
}

double parse_dev_accuracy(const std::string& train_out) {
  const std::string key = "dev accuracy ";
  const auto pos = train_out.rfind(key);
  if (pos == std::string::npos) throw std::runtime_error("no dev accuracy in train output");
  return std::stod(train_out.substr(pos + key.size()));
}

PipelineRun run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  PipelineRun run;
  run.dir = dir;
  std::vector<std::string> records_files;
  for (int seed : kSeeds) {
    const fs::path data = dir / ("data_s" + std::to_string(seed));
    cli({"synth", "--out", data.string(), "--seed", std::to_string(seed), "--train-count",
         "5000", "--dev-count", "500", "--test-count", "500"});
    // Smaller training sets are prefixes of the full one; dev and test are shared.
    std::istringstream full(slurp(data / "train.tsv"));
    std::vector<std::string> lines;
    for (std::string line; std::getline(full, line);) lines.push_back(line);
    for (std::size_t size : kSizes) {
      const std::string name = run_name(seed, size);
      const fs::path train_file = data / ("train_" + std::to_string(size) + ".tsv");
      {
        std::ofstream out(train_file, std::ios::binary);
        for (std::size_t i = 0; i < size; ++i) out << lines.at(i) << '\n';
      }
      const bool main = seed == kSeeds.front() && size == 5000;
      const auto t0 = Clock::now();
      const fs::path model = dir / (name + ".model");
      const std::string train_out =
          cli({"train", "--train", train_file.string(), "--dev", (data / "dev.tsv").string(),
               "--model", model.string(), "--seed", std::to_string(seed)});
      const fs::path records = dir / (name + ".records.tsv");
      const fs::path predictions = dir / (name + ".predictions.tsv");
      cli({"decode", "--model", model.string(), "--test", (data / "test.tsv").string(), "--out",
           records.string(), "--predictions", predictions.string(), "--strategies",
           main ? kMainStrategies : "greedy", "--dataset", name, "--train-size",
           std::to_string(size)});
      std::cout << "  trained and decoded " << name << " in " << fmt("%.1f", since(t0))
                << " s\n"
                << std::flush;
      if (main) {
        run.main_seconds = since(t0);
        run.main_dev_accuracy = parse_dev_accuracy(train_out);
        std::ifstream in(records);
        run.main_records = read_records(in, records.string());
      }
      run.models.push_back(model);
      run.predictions.push_back(predictions);
      records_files.push_back(records.string());
    }
  }
  run.report_csv = dir / "report.csv";
  cli({"analyze", "--records", (dir / (run_name(kSeeds.front(), 5000) + ".records.tsv")).string(),
       "--report", run.report_csv.string()});
  run.curve_csv = dir / "curve.csv";
  std::vector<std::string> analyze{"analyze", "--report", (dir / "report_all.csv").string(),
                                   "--curve", run.curve_csv.string()};
  for (const auto& f : records_files) {
    analyze.push_back("--records");
    analyze.push_back(f);
  }
  cli(analyze);
  cli({"plot", "--curve", run.curve_csv.string(), "--out", (dir / "curve.svg").string()});
  std::ifstream curve_in(run.curve_csv);
  run.curve = read_curve(curve_in);
  return run;
}

// Column `name` of the "all" row for `strategy` in a report CSV.
double report_value(const fs::path& csv, const std::string& strategy, const std::string& name) {
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    return out;
  };
  const auto header = split(line);
  const auto col = std::find(header.begin(), header.end(), name) - header.begin();
  while (std::getline(in, line)) {
    const auto f = split(line);
    if (f.size() == header.size() && f[0] == strategy && f[1] == "all") {
      return std::stod(f.at(static_cast<std::size_t>(col)));
    }
  }
  throw std::runtime_error("no " + strategy + " row in " + csv.string());
}

// Drops one comma- or tab-separated column by header name.
std::string drop_column(const std::string& text, const std::string& name, char sep) {
  std::istringstream in(text);
  std::string out, line;
  std::ptrdiff_t col = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      out += line + '\n';
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, sep);) f.push_back(x);
    if (col < 0) col = std::find(f.begin(), f.end(), name) - f.begin();
    if (col < static_cast<std::ptrdiff_t>(f.size())) f.erase(f.begin() + col);
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? std::string(1, sep) : "") + f[i];
    out += '\n';
  }
  return out;
}

void pipeline_criteria(const fs::path& work) {
  std::cout << "pipeline run A\n" << std::flush;
  const PipelineRun a = run_pipeline(work / "run_a");
  const auto& recs = a.main_records.records;

  // Criterion 5.
  const double acc1 = exact_match_accuracy(recs, "beam:1");
  const double acc100 = exact_match_accuracy(recs, "beam:100");
  const double err_greedy = search_error_rate(recs, "greedy");
  const double err1 = search_error_rate(recs, "beam:1");
  const double err10 = search_error_rate(recs, "beam:10");
  const double err100 = search_error_rate(recs, "beam:100");
  const bool c5 = a.main_dev_accuracy >= 0.95 && std::abs(acc1 - acc100) <= 0.005 &&
                  err_greedy <= 0.01 && err1 <= 0.01 && err10 == 0.0 && err100 == 0.0 &&
                  a.main_seconds <= 900.0;
  report(5, c5,
         "dev greedy accuracy " + fmt("%.4f", a.main_dev_accuracy) + "; test accuracy k=1 " +
             fmt("%.4f", acc1) + " k=100 " + fmt("%.4f", acc100) + "; search error greedy " +
             fmt("%.4f", err_greedy) + " k=1 " + fmt("%.4f", err1) + " k=10 " +
             fmt("%.4f", err10) + " k=100 " + fmt("%.4f", err100) + "; train+decode " +
             fmt("%.0f", a.main_seconds) + " s");

  // Criterion 6.
  const double empty_rate = empty_optimum_rate(recs);
  std::size_t failed = 0;
  for (const auto& r : recs) failed += r.results.at("exact").failed ? 1 : 0;
  report(6, empty_rate == 0.0 && failed == 0,
         "empty optimum rate " + fmt("%.4f", empty_rate) + " over " +
             std::to_string(recs.size()) + " test samples (" + std::to_string(failed) +
             " failed exact searches)");

  // Criterion 7.
  bool c7 = a.curve.size() == kSizes.size();
  std::string points;
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    points += (i ? ", " : "") + std::to_string(a.curve[i].train_size) + ": " +
              fmt("%.3f", a.curve[i].mean_empty_log_prob) + " (" +
              std::to_string(a.curve[i].runs) + " runs)";
    if (a.curve[i].runs != kSeeds.size()) c7 = false;
    if (i > 0 && !(a.curve[i - 1].mean_empty_log_prob > a.curve[i].mean_empty_log_prob)) {
      c7 = false;
    }
  }
  report(7, c7, "mean empty-string log-prob by train size " + points);

  // Criterion 8.
  const ProbabilitySummary s = probability_summary(recs, "exact");
  const double gap = s.mean_chosen - s.mean_empty;
  report(8, gap >= 3.0,
         "mean log p(optimum) " + fmt("%.4f", s.mean_chosen) + ", mean log p(empty) " +
             fmt("%.4f", s.mean_empty) + " (" + std::to_string(s.empty_neg_inf) +
             " -inf excluded), gap " + fmt("%.3f", gap) + " nats");

  // Criterion 9.
  const double t_greedy = report_value(a.report_csv, "greedy", "mean_seconds");
  const double t_exact = report_value(a.report_csv, "exact", "mean_seconds");
  const double ratio = t_exact / t_greedy;
  report(9, std::isfinite(ratio) && ratio <= 10.0,
         "analyze mean seconds greedy " + fmt("%.6f", t_greedy) + ", exact " +
             fmt("%.6f", t_exact) + ", ratio " + fmt("%.2f", ratio) + " (limit 10)");

  // Criterion 10.
  std::cout << "pipeline run B\n" << std::flush;
  const PipelineRun b = run_pipeline(work / "run_b");
  std::vector<std::string> diffs;
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    if (slurp(a.models[i]) != slurp(b.models[i])) diffs.push_back(a.models[i].filename());
    if (slurp(a.predictions[i]) != slurp(b.predictions[i])) {
      diffs.push_back(a.predictions[i].filename());
    }
    fs::path ra = a.models[i], rb = b.models[i];
    ra.replace_extension(".records.tsv");
    rb.replace_extension(".records.tsv");
    if (drop_column(slurp(ra), "seconds", '\t') != drop_column(slurp(rb), "seconds", '\t')) {
      diffs.push_back(ra.filename());
    }
  }
  for (const char* f : {"report.csv", "report_all.csv"}) {
    if (drop_column(slurp(a.dir / f), "mean_seconds", ',') !=
        drop_column(slurp(b.dir / f), "mean_seconds", ',')) {
      diffs.push_back(f);
    }
  }
  for (const char* f : {"curve.csv", "curve.svg"}) {
    if (slurp(a.dir / f) != slurp(b.dir / f)) diffs.push_back(f);
  }
  std::string listed;
  for (const auto& d : diffs) listed += " " + d;
  report(10, diffs.empty(),
         std::to_string(a.models.size()) + " model files, predictions, records, report CSVs " +
             "(timing excluded), curve and plot compared across two runs; differing:" +
             (diffs.empty() ? std::string(" none") : listed));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work =
      argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mitd_acceptance";
  const auto t0 = Clock::now();
  try {
    random_model_criteria();
    gradient_criterion();
    pipeline_criteria(work);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::size_t failed = 0;
  for (const auto& v : verdicts) failed += v.pass ? 0 : 1;
  std::printf("%zu/%zu criteria passed in %.0f s\n", verdicts.size() - failed, verdicts.size(),
              since(t0));
  return failed == 0 && verdicts.size() == 10 ? 0 : 1;
}
