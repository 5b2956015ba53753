#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitd/corpus.hpp"
#include "mitd/search.hpp"
#include "mitd/table_model.hpp"

namespace mitd {

// A decoding strategy as named on the command line and in records:
// "greedy", "beam:K" or "exact".
struct StrategySpec {
  Strategy strategy = Strategy::greedy;
  std::size_t beam_width = 1;

  std::string name() const;
  static StrategySpec parse(const std::string& text);  // throws std::invalid_argument
  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

std::vector<StrategySpec> parse_strategy_list(const std::string& text);

inline constexpr const char* kExactStrategy = "exact";

struct StrategyOutcome {
  std::string y_hat;  // spelled output
  LogProb score = kNegInf;
  double seconds = 0.0;
  std::size_t nodes = 0;
  bool failed = false;  // exact search hit its queue capacity
};

struct PredictionRecord {
  std::string sample_id;
  std::string gold;
  LogProb empty_log_prob = kNegInf;
  std::map<std::string, StrategyOutcome> results;  // keyed by strategy name
};

// All records decoded from one model on one dataset.
struct RecordSet {
  std::string dataset;
  std::optional<std::size_t> train_size;
  std::vector<std::string> strategies;  // in decode order
  std::vector<PredictionRecord> records;
};

struct DecodeOptions {
  std::vector<StrategySpec> strategies;
  std::optional<std::size_t> max_len;
  std::optional<std::size_t> lower_bound_beam;  // exact search bound from beam:K
  std::optional<std::size_t> queue_capacity;
  std::size_t threads = 1;
};

// Maps samples to model inputs and model outputs back to text.
struct SymbolCodec {
  std::function<Sequence(const RawSample&)> source;
  std::function<std::string(std::span<const SymbolId>)> spell;
};

SymbolCodec vocabulary_codec(const Vocabulary& vocab);
// Table models ignore the source; outputs spell as concatenated symbol names.
SymbolCodec table_codec(const TableModel& model);

// Decodes every sample with every strategy. Rows keep input order whatever
// the thread count.
RecordSet decode_records(const SequenceModel& model, const SymbolCodec& codec,
                         std::span<const RawSample> samples, const DecodeOptions& options);

// Records TSV: optional "# dataset=... train_size=..." line, a header, then one
// row per (sample, strategy).
void write_records(const RecordSet& set, std::ostream& out);
RecordSet read_records(std::istream& in, const std::string& source_name);

double exact_match_accuracy(std::span<const PredictionRecord> records,
                            const std::string& strategy);

// Fraction of records where score(exact) - score(strategy) > tolerance.
// Records whose exact search failed are skipped.
double search_error_rate(std::span<const PredictionRecord> records,
                         const std::string& strategy, double tolerance = 1e-9);

double empty_optimum_rate(std::span<const PredictionRecord> records);

// Fraction of records where the strategy's output is the empty string.
double empty_output_rate(std::span<const PredictionRecord> records,
                         const std::string& strategy);

struct ProbabilitySummary {
  double mean_chosen = 0.0;  // over finite scores only
  double mean_empty = 0.0;
  std::size_t chosen_neg_inf = 0;
  std::size_t empty_neg_inf = 0;
};
ProbabilitySummary probability_summary(std::span<const PredictionRecord> records,
                                       const std::string& strategy);

double timing_summary(std::span<const PredictionRecord> records, const std::string& strategy);

struct CurvePoint {
  std::size_t train_size = 0;
  double mean_empty_log_prob = 0.0;
  std::size_t runs = 0;
};

// One point per distinct train size (runs sharing a size are averaged),
// sorted by size. Needs at least two distinct sizes.
std::vector<CurvePoint> size_vs_empty_curve(std::span<const RecordSet> runs);

void write_curve(std::span<const CurvePoint> curve, std::ostream& out);
std::vector<CurvePoint> read_curve(std::istream& in);

struct ReportRow {
  std::string strategy;
  std::string resource_class;  // "all", "low", "mid" or "high"
  std::size_t datasets = 0;
  std::size_t samples = 0;
  double accuracy = 0.0;
  double search_error_rate = 0.0;
  double mean_log_prob = 0.0;
  std::size_t neg_inf_count = 0;
  double mean_empty_log_prob = 0.0;
  double empty_output_rate = 0.0;
  double mean_seconds = 0.0;
  std::size_t failures = 0;
};

struct CalibrationReport {
  std::vector<ReportRow> rows;

  void write_csv(std::ostream& out) const;
  std::string to_text() const;
};

// Macro-averages each metric over datasets: per resource class and overall.
CalibrationReport build_report(std::span<const RecordSet> sets);

}  // namespace mitd
