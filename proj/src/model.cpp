#include "mitd/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mitd {

double log_sum_exp(std::span<const double> v) {
  double hi = kNegInf;
  for (double x : v) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

double ConditionalDistribution::log_total() const { return log_sum_exp(log_probs_); }

namespace {

void check_symbol(const SequenceModel& m, SymbolId s) {
  if (s >= m.num_outputs()) {
    throw std::out_of_range("symbol id " + std::to_string(s) + " outside output space of " +
                            std::to_string(m.num_outputs()));
  }
  if (s == m.eos()) throw std::invalid_argument("EOS inside a prefix");
}

}  // namespace

ConditionalDistribution next_log_probs(const SequenceModel& m,
                                       std::span<const SymbolId> x,
                                       std::span<const SymbolId> prefix) {
  StatePtr state = m.start(x);
  for (SymbolId s : prefix) {
    check_symbol(m, s);
    state = m.advance(*state, s);
  }
  return state->next();
}

LogProb sequence_log_prob(const SequenceModel& m, std::span<const SymbolId> x,
                          std::span<const SymbolId> y) {
  StatePtr state = m.start(x);
  LogProb total = 0.0;
  for (SymbolId s : y) {
    check_symbol(m, s);
    total += state->next()[s];
    if (total == kNegInf) return kNegInf;
    state = m.advance(*state, s);
  }
  return total + state->next()[m.eos()];
}

LogProb empty_string_log_prob(const SequenceModel& m, std::span<const SymbolId> x) {
  return m.start(x)->next()[m.eos()];
}

}  // namespace mitd
