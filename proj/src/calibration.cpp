#include "mitd/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

std::string format_double(double v, const char* fmt = "%.17g") {
  if (v == kNegInf) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "-inf") return kNegInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "bad number '" + s + "'");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

const StrategyOutcome& outcome(const PredictionRecord& r, const std::string& strategy) {
  auto it = r.results.find(strategy);
  if (it == r.results.end()) {
    throw DataError("sample " + r.sample_id + " has no result for strategy " + strategy);
  }
  return it->second;
}

void require_nonempty(std::span<const PredictionRecord> records) {
  if (records.empty()) throw DataError("no prediction records");
}

constexpr const char* kRecordsHeader =
    "sample_id\tstrategy\ty_hat\tscore\tseconds\tnodes\tempty_logprob\tgold\tstatus";

}  // namespace

std::string StrategySpec::name() const {
  switch (strategy) {
    case Strategy::greedy:
      return "greedy";
    case Strategy::beam:
      return "beam:" + std::to_string(beam_width);
    case Strategy::exact:
      return kExactStrategy;
    case Strategy::brute_force:
      return "brute_force";
  }
  return "?";
}

StrategySpec StrategySpec::parse(const std::string& text) {
  if (text == "greedy") return {Strategy::greedy, 1};
  if (text == "exact" || text == "dijkstra") return {Strategy::exact, 1};
  if (text == "brute_force") return {Strategy::brute_force, 1};
  if (text.rfind("beam:", 0) == 0) {
    const std::string k = text.substr(5);
    if (k.empty() || k.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("bad beam width in '" + text + "'");
    }
    const std::size_t width = std::stoul(k);
    if (width < 1) throw std::invalid_argument("beam width must be >= 1");
    return {Strategy::beam, width};
  }
  throw std::invalid_argument("unknown strategy '" + text + "'");
}

std::vector<StrategySpec> parse_strategy_list(const std::string& text) {
  std::vector<StrategySpec> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    StrategySpec spec = StrategySpec::parse(item);
    if (std::find(out.begin(), out.end(), spec) != out.end()) {
      throw std::invalid_argument("duplicate strategy '" + item + "'");
    }
    out.push_back(spec);
  }
  if (out.empty()) throw std::invalid_argument("no strategies given");
  return out;
}

SymbolCodec vocabulary_codec(const Vocabulary& vocab) {
  return SymbolCodec{
      [&vocab](const RawSample& s) { return encode_sample(vocab, s).x; },
      [&vocab](std::span<const SymbolId> y) { return vocab.spell(y); }};
}

SymbolCodec table_codec(const TableModel& model) {
  return SymbolCodec{[](const RawSample&) { return Sequence{}; },
                     [&model](std::span<const SymbolId> y) {
                       std::string out;
                       for (SymbolId s : y) out += model.symbol_names().at(s);
                       return out;
                     }};
}

RecordSet decode_records(const SequenceModel& model, const SymbolCodec& codec,
                         std::span<const RawSample> samples, const DecodeOptions& options) {
  RecordSet set;
  for (const auto& s : options.strategies) set.strategies.push_back(s.name());
  set.records.resize(samples.size());

  auto decode_one = [&](std::size_t index) {
    const Sequence x = codec.source(samples[index]);
    PredictionRecord& rec = set.records[index];
    rec.sample_id = std::to_string(index);
    rec.gold = samples[index].target;
    rec.empty_log_prob = empty_string_log_prob(model, x);
    for (const StrategySpec& spec : options.strategies) {
      DecodeConfig cfg;
      cfg.strategy = spec.strategy;
      cfg.beam_width = spec.beam_width;
      cfg.max_len = options.max_len;
      cfg.queue_capacity = options.queue_capacity;
      StrategyOutcome out;
      double extra_seconds = 0.0;
      if (spec.strategy == Strategy::exact && options.lower_bound_beam) {
        DecodeConfig bound_cfg = cfg;
        bound_cfg.strategy = Strategy::beam;
        bound_cfg.beam_width = *options.lower_bound_beam;
        const DecodeResult bound = beam_decode(model, x, bound_cfg);
        cfg.lower_bound = LowerBound{bound.score, bound.y_star};
        extra_seconds = bound.stats.seconds;
      }
      try {
        const DecodeResult r = decode(model, x, cfg);
        out.y_hat = codec.spell(r.y_star);
        out.score = r.score;
        out.seconds = r.stats.seconds + extra_seconds;
        out.nodes = r.stats.nodes_expanded;
      } catch (const QueueCapacityError& e) {
        out.failed = true;
        if (e.best_so_far()) {
          out.y_hat = codec.spell(e.best_so_far()->y_star);
          out.score = e.best_so_far()->score;
          out.seconds = e.best_so_far()->stats.seconds + extra_seconds;
          out.nodes = e.best_so_far()->stats.nodes_expanded;
        }
      }
      rec.results[spec.name()] = std::move(out);
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, samples.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) decode_one(i);
    return set;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < samples.size(); i = next++) decode_one(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = samples.size();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return set;
}

void write_records(const RecordSet& set, std::ostream& out) {
  out << "# dataset=" << set.dataset;
  if (set.train_size) out << "\ttrain_size=" << *set.train_size;
  out << '\n' << kRecordsHeader << '\n';
  for (const auto& rec : set.records) {
    for (const auto& name : set.strategies) {
      const StrategyOutcome& o = outcome(rec, name);
      out << rec.sample_id << '\t' << name << '\t' << o.y_hat << '\t' << format_double(o.score)
          << '\t' << format_double(o.seconds, "%.9f") << '\t' << o.nodes << '\t'
          << format_double(rec.empty_log_prob) << '\t' << rec.gold << '\t'
          << (o.failed ? "capacity" : "ok") << '\n';
    }
  }
}

RecordSet read_records(std::istream& in, const std::string& source_name) {
  RecordSet set;
  set.dataset = source_name;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::string, std::size_t> index_of;
  std::map<std::string, std::set<std::string>> ids_by_strategy;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& field : split_tabs(line.substr(1))) {
        std::string f = field;
        f.erase(0, f.find_first_not_of(' '));
        const auto eq = f.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = f.substr(0, eq), val = f.substr(eq + 1);
        if (key == "dataset" && !val.empty()) set.dataset = val;
        if (key == "train_size") set.train_size = std::stoul(val);
      }
      continue;
    }
    if (!have_header) {
      if (line != kRecordsHeader) throw ParseError(line_no, source_name + ": unexpected header");
      have_header = true;
      continue;
    }
    const auto f = split_tabs(line);
    if (f.size() != 9) throw ParseError(line_no, source_name + ": expected 9 fields");
    const std::string& id = f[0];
    const std::string& strategy = f[1];
    auto [it, inserted] = index_of.emplace(id, set.records.size());
    if (inserted) {
      PredictionRecord rec;
      rec.sample_id = id;
      rec.gold = f[7];
      rec.empty_log_prob = parse_double(f[6], line_no);
      set.records.push_back(std::move(rec));
    }
    PredictionRecord& rec = set.records[it->second];
    if (rec.gold != f[7]) throw ParseError(line_no, "gold differs between rows of sample " + id);
    StrategyOutcome o;
    o.y_hat = f[2];
    o.score = parse_double(f[3], line_no);
    o.seconds = parse_double(f[4], line_no);
    o.nodes = std::stoul(f[5]);
    if (f[8] != "ok" && f[8] != "capacity") throw ParseError(line_no, "bad status " + f[8]);
    o.failed = f[8] == "capacity";
    if (!rec.results.emplace(strategy, std::move(o)).second) {
      throw ParseError(line_no, "duplicate row for sample " + id + ", " + strategy);
    }
    if (std::find(set.strategies.begin(), set.strategies.end(), strategy) == set.strategies.end()) {
      set.strategies.push_back(strategy);
    }
    ids_by_strategy[strategy].insert(id);
  }
  if (set.records.empty()) throw DataError(source_name + ": no prediction records");
  for (const auto& [strategy, ids] : ids_by_strategy) {
    if (ids.size() != set.records.size()) {
      throw DataError(source_name + ": strategy " + strategy +
                      " covers a different sample set than the others");
    }
  }
  return set;
}

double exact_match_accuracy(std::span<const PredictionRecord> records,
                            const std::string& strategy) {
  require_nonempty(records);
  std::size_t hits = 0;
  for (const auto& r : records) hits += outcome(r, strategy).y_hat == r.gold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double search_error_rate(std::span<const PredictionRecord> records,
                         const std::string& strategy, double tolerance) {
  require_nonempty(records);
  std::size_t errors = 0, counted = 0;
  for (const auto& r : records) {
    const StrategyOutcome& exact = outcome(r, kExactStrategy);
    if (exact.failed) continue;
    const StrategyOutcome& o = outcome(r, strategy);
    ++counted;
    if (exact.score - o.score > tolerance) ++errors;
  }
  return counted ? static_cast<double>(errors) / static_cast<double>(counted) : 0.0;
}

double empty_optimum_rate(std::span<const PredictionRecord> records) {
  return empty_output_rate(records, kExactStrategy);
}

double empty_output_rate(std::span<const PredictionRecord> records,
                         const std::string& strategy) {
  require_nonempty(records);
  std::size_t empty = 0;
  for (const auto& r : records) empty += outcome(r, strategy).y_hat.empty() ? 1 : 0;
  return static_cast<double>(empty) / static_cast<double>(records.size());
}

ProbabilitySummary probability_summary(std::span<const PredictionRecord> records,
                                       const std::string& strategy) {
  require_nonempty(records);
  ProbabilitySummary s;
  double chosen = 0.0, empty = 0.0;
  std::size_t n_chosen = 0, n_empty = 0;
  for (const auto& r : records) {
    const LogProb score = outcome(r, strategy).score;
    if (score == kNegInf) {
      ++s.chosen_neg_inf;
    } else {
      chosen += score;
      ++n_chosen;
    }
    if (r.empty_log_prob == kNegInf) {
      ++s.empty_neg_inf;
    } else {
      empty += r.empty_log_prob;
      ++n_empty;
    }
  }
  s.mean_chosen = n_chosen ? chosen / static_cast<double>(n_chosen) : kNegInf;
  s.mean_empty = n_empty ? empty / static_cast<double>(n_empty) : kNegInf;
  return s;
}

double timing_summary(std::span<const PredictionRecord> records, const std::string& strategy) {
  require_nonempty(records);
  double total = 0.0;
  for (const auto& r : records) total += outcome(r, strategy).seconds;
  return total / static_cast<double>(records.size());
}

std::vector<CurvePoint> size_vs_empty_curve(std::span<const RecordSet> runs) {
  std::map<std::size_t, std::pair<double, std::size_t>> by_size;
  for (const auto& run : runs) {
    if (!run.train_size) throw DataError("run " + run.dataset + " has no train size");
    require_nonempty(run.records);
    double total = 0.0;
    std::size_t finite = 0;
    for (const auto& r : run.records) {
      if (r.empty_log_prob == kNegInf) continue;
      total += r.empty_log_prob;
      ++finite;
    }
    const double mean = finite ? total / static_cast<double>(finite) : kNegInf;
    auto& [sum, count] = by_size[*run.train_size];
    sum += mean;
    ++count;
  }
  if (by_size.size() < 2) throw DataError("need runs at two or more train sizes");
  std::vector<CurvePoint> out;
  for (const auto& [size, acc] : by_size) {
    out.push_back(CurvePoint{size, acc.first / static_cast<double>(acc.second), acc.second});
  }
  return out;
}

void write_curve(std::span<const CurvePoint> curve, std::ostream& out) {
  out << "train_size,mean_empty_logprob,runs\n";
  for (const auto& p : curve) {
    out << p.train_size << ',' << format_double(p.mean_empty_log_prob) << ',' << p.runs << '\n';
  }
}

std::vector<CurvePoint> read_curve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("train_size,mean_empty_logprob", 0) != 0) {
    throw DataError("curve file: expected header train_size,mean_empty_logprob[,runs]");
  }
  std::vector<CurvePoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string size, mean, runs;
    std::getline(row, size, ',');
    std::getline(row, mean, ',');
    std::getline(row, runs, ',');
    if (size.empty() || mean.empty()) throw ParseError(line_no, "expected size,mean");
    CurvePoint p;
    p.train_size = std::stoul(size);
    p.mean_empty_log_prob = parse_double(mean, line_no);
    p.runs = runs.empty() ? 1 : std::stoul(runs);
    out.push_back(p);
  }
  return out;
}

namespace {

struct DatasetMetrics {
  std::size_t samples = 0;
  double accuracy = 0.0;
  std::optional<double> search_error;
  std::optional<double> mean_log_prob;
  std::size_t neg_inf = 0;
  std::optional<double> mean_empty;
  double empty_rate = 0.0;
  double seconds = 0.0;
  std::size_t failures = 0;
};

DatasetMetrics metrics_for(const RecordSet& set, const std::string& strategy) {
  DatasetMetrics m;
  m.samples = set.records.size();
  m.accuracy = exact_match_accuracy(set.records, strategy);
  const bool has_exact = std::find(set.strategies.begin(), set.strategies.end(),
                                   kExactStrategy) != set.strategies.end();
  if (has_exact) m.search_error = search_error_rate(set.records, strategy);
  const ProbabilitySummary p = probability_summary(set.records, strategy);
  if (p.mean_chosen != kNegInf) m.mean_log_prob = p.mean_chosen;
  if (p.mean_empty != kNegInf) m.mean_empty = p.mean_empty;
  m.neg_inf = p.chosen_neg_inf;
  m.empty_rate = empty_output_rate(set.records, strategy);
  m.seconds = timing_summary(set.records, strategy);
  for (const auto& r : set.records) m.failures += outcome(r, strategy).failed ? 1 : 0;
  return m;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

ReportRow aggregate(const std::string& strategy, const std::string& cls,
                    const std::vector<DatasetMetrics>& ms) {
  ReportRow row;
  row.strategy = strategy;
  row.resource_class = cls;
  row.datasets = ms.size();
  std::vector<std::optional<double>> acc, err, lp, empty, rate, secs;
  for (const auto& m : ms) {
    row.samples += m.samples;
    row.neg_inf_count += m.neg_inf;
    row.failures += m.failures;
    acc.push_back(m.accuracy);
    err.push_back(m.search_error);
    lp.push_back(m.mean_log_prob);
    empty.push_back(m.mean_empty);
    rate.push_back(m.empty_rate);
    secs.push_back(m.seconds);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.accuracy = mean_of(acc).value_or(nan);
  row.search_error_rate = mean_of(err).value_or(nan);
  row.mean_log_prob = mean_of(lp).value_or(kNegInf);
  row.mean_empty_log_prob = mean_of(empty).value_or(kNegInf);
  row.empty_output_rate = mean_of(rate).value_or(nan);
  row.mean_seconds = mean_of(secs).value_or(nan);
  return row;
}

std::string cell(double v) {
  if (std::isnan(v)) return "";
  return format_double(v, "%.6f");
}

}  // namespace

CalibrationReport build_report(std::span<const RecordSet> sets) {
  if (sets.empty()) throw DataError("no record sets to analyze");
  std::vector<std::string> strategies;
  for (const auto& set : sets) {
    if (set.records.empty()) throw DataError(set.dataset + ": no prediction records");
    for (const auto& s : set.strategies) {
      if (std::find(strategies.begin(), strategies.end(), s) == strategies.end()) {
        strategies.push_back(s);
      }
    }
  }
  CalibrationReport report;
  const ResourceClass classes[] = {ResourceClass::low, ResourceClass::mid, ResourceClass::high};
  for (const auto& strategy : strategies) {
    std::vector<DatasetMetrics> all;
    std::map<ResourceClass, std::vector<DatasetMetrics>> by_class;
    for (const auto& set : sets) {
      if (std::find(set.strategies.begin(), set.strategies.end(), strategy) ==
          set.strategies.end()) {
        continue;
      }
      DatasetMetrics m = metrics_for(set, strategy);
      if (set.train_size) by_class[classify_resource(*set.train_size)].push_back(m);
      all.push_back(std::move(m));
    }
    report.rows.push_back(aggregate(strategy, "all", all));
    for (ResourceClass rc : classes) {
      auto it = by_class.find(rc);
      if (it != by_class.end()) report.rows.push_back(aggregate(strategy, to_string(rc), it->second));
    }
  }
  return report;
}

void CalibrationReport::write_csv(std::ostream& out) const {
  out << "strategy,resource_class,datasets,samples,accuracy,search_error_rate,mean_logprob,"
         "neg_inf_count,mean_empty_logprob,empty_output_rate,mean_seconds,failures\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.resource_class << ',' << r.datasets << ',' << r.samples << ','
        << cell(r.accuracy) << ',' << cell(r.search_error_rate) << ',' << cell(r.mean_log_prob)
        << ',' << r.neg_inf_count << ',' << cell(r.mean_empty_log_prob) << ','
        << cell(r.empty_output_rate) << ',' << format_double(r.mean_seconds, "%.9f") << ','
        << r.failures << '\n';
  }
}

std::string CalibrationReport::to_text() const {
  const std::vector<std::string> header = {"strategy", "class",  "n",      "accuracy",
                                           "search_err", "logprob", "empty_lp", "empty_rate",
                                           "seconds", "failed"};
  std::vector<std::vector<std::string>> table{header};
  auto pct = [](double v) { return std::isnan(v) ? std::string("-") : format_double(100.0 * v, "%.2f%%"); };
  for (const auto& r : rows) {
    table.push_back({r.strategy, r.resource_class, std::to_string(r.samples), pct(r.accuracy),
                     pct(r.search_error_rate), format_double(r.mean_log_prob, "%.3f"),
                     format_double(r.mean_empty_log_prob, "%.3f"), pct(r.empty_output_rate),
                     format_double(r.mean_seconds, "%.6f"), std::to_string(r.failures)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "  " : "") << row[c];
      if (c + 1 < row.size()) out << std::string(width[c] - row[c].size(), ' ');
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mitd
