#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "mitd/corpus.hpp"

namespace mitd {

// Natural-log probability in [-inf, 0]; -inf encodes zero probability.
using LogProb = double;

inline constexpr LogProb kNegInf = -std::numeric_limits<double>::infinity();

// log p(. | x, prefix) over every output symbol, EOS included.
class ConditionalDistribution {
 public:
  ConditionalDistribution() = default;
  explicit ConditionalDistribution(std::vector<LogProb> log_probs)
      : log_probs_(std::move(log_probs)) {}

  std::size_t size() const { return log_probs_.size(); }
  LogProb operator[](SymbolId id) const { return log_probs_[id]; }
  std::span<const LogProb> values() const { return log_probs_; }

  // log sum exp over all entries; 0 for a normalized distribution.
  double log_total() const;

  friend bool operator==(const ConditionalDistribution&,
                         const ConditionalDistribution&) = default;

 private:
  std::vector<LogProb> log_probs_;
};

// Opaque per-prefix decoder state. Immutable; shared between hypotheses.
class DecoderState {
 public:
  virtual ~DecoderState() = default;
  virtual const ConditionalDistribution& next() const = 0;
};

using StatePtr = std::shared_ptr<const DecoderState>;

// A locally normalized model p(y | x) = prod_t p(y_t | x, y_<t), y_0 = BOS.
// Implementations must be immutable after construction so that concurrent
// decodes over one model are safe.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  // Number of entries in each conditional distribution.
  virtual std::size_t num_outputs() const = 0;
  virtual SymbolId eos() const = 0;

  // State after consuming BOS; next() is p(y_1 | x).
  virtual StatePtr start(std::span<const SymbolId> x) const = 0;
  // State after appending `symbol` (never EOS) to the prefix of `state`.
  virtual StatePtr advance(const DecoderState& state, SymbolId symbol) const = 0;
};

// Throws std::out_of_range for symbols outside the output space and
// std::invalid_argument if the prefix contains EOS.
ConditionalDistribution next_log_probs(const SequenceModel& m,
                                       std::span<const SymbolId> x,
                                       std::span<const SymbolId> prefix);

// sum_t log p(y_t | x, y_<t) + log p(EOS | x, y).
LogProb sequence_log_prob(const SequenceModel& m, std::span<const SymbolId> x,
                          std::span<const SymbolId> y);

LogProb empty_string_log_prob(const SequenceModel& m, std::span<const SymbolId> x);

// Numerically stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v);

}  // namespace mitd
