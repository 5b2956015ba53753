#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "mitd/model.hpp"

namespace mitd {

enum class Strategy { greedy, beam, exact, brute_force };

// A known complete hypothesis used to prune exact search.
struct LowerBound {
  LogProb score = kNegInf;
  std::optional<Sequence> hypothesis;
};

struct DecodeConfig {
  Strategy strategy = Strategy::greedy;
  std::size_t beam_width = 1;
  std::optional<std::size_t> max_len;  // default: 2|x| + 5
  std::optional<LowerBound> lower_bound;
  std::optional<std::size_t> queue_capacity;
};

struct SearchStats {
  std::size_t nodes_expanded = 0;
  std::size_t max_queue = 0;
  double seconds = 0.0;
};

struct DecodeResult {
  Sequence y_star;
  LogProb score = kNegInf;
  SearchStats stats;
};

// Exact search outgrew its queue capacity. Carries the best complete
// hypothesis pushed so far, if any.
class QueueCapacityError : public std::runtime_error {
 public:
  QueueCapacityError(std::size_t capacity, std::optional<DecodeResult> best)
      : std::runtime_error("search queue exceeded capacity " + std::to_string(capacity)),
        best_(std::move(best)) {}
  const std::optional<DecodeResult>& best_so_far() const { return best_; }

 private:
  std::optional<DecodeResult> best_;
};

// Exact search pruned every hypothesis and had no fallback.
class SearchExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t default_max_len(std::size_t source_len);
std::size_t effective_max_len(const DecodeConfig& cfg, std::size_t source_len);

// Total order on hypotheses used by every strategy: higher score, then
// shorter prefix, then complete before incomplete, then lexicographically
// smaller symbol ids. Returns true when (a) ranks strictly ahead of (b).
bool ranks_ahead(LogProb score_a, const Sequence& a, bool complete_a, LogProb score_b,
                 const Sequence& b, bool complete_b);

// Argmax at each step; ties go to EOS, then to the lowest symbol id.
DecodeResult greedy_decode(const SequenceModel& m, std::span<const SymbolId> x,
                           const DecodeConfig& cfg);

// Keeps the top k of all one-symbol extensions (EOS completions included)
// each step; completed hypotheses leave the beam. No length normalization.
DecodeResult beam_decode(const SequenceModel& m, std::span<const SymbolId> x,
                         const DecodeConfig& cfg);

// Best-first search; the first complete hypothesis popped is the global
// optimum because scores never increase with length.
DecodeResult dijkstra_decode(const SequenceModel& m, std::span<const SymbolId> x,
                             const DecodeConfig& cfg);

inline constexpr std::size_t kBruteForceLimit = 1'000'000;

// Scores every sequence of length <= max_len from scratch. Throws
// std::length_error beyond kBruteForceLimit sequences.
DecodeResult brute_force_argmax(const SequenceModel& m, std::span<const SymbolId> x,
                                std::size_t max_len);

DecodeResult decode(const SequenceModel& m, std::span<const SymbolId> x,
                    const DecodeConfig& cfg);

}  // namespace mitd
