#pragma once

// Test-side reference computations. These read table rows directly in the
// probability domain and share no code with the library's scoring or search.

#include <cmath>
#include <cstddef>
#include <vector>

#include "mitd/table_model.hpp"

namespace mitd::oracle {

// p(symbol | prefix) straight from the table; rows that are absent or at the
// depth bound put all mass on EOS.
inline double row_prob(const TableModel& m, const Sequence& prefix, SymbolId symbol) {
  const SymbolId eos = static_cast<SymbolId>(m.vocab_size());
  if (prefix.size() < m.depth_bound()) {
    auto it = m.rows().find(prefix);
    if (it != m.rows().end()) return it->second[symbol];
  }
  return symbol == eos ? 1.0 : 0.0;
}

// p(y EOS), as a plain product.
inline double sequence_prob(const TableModel& m, const Sequence& y) {
  double p = 1.0;
  Sequence prefix;
  for (SymbolId s : y) {
    p *= row_prob(m, prefix, s);
    prefix.push_back(s);
  }
  return p * row_prob(m, prefix, static_cast<SymbolId>(m.vocab_size()));
}

// Every sequence over the model's non-EOS symbols with length <= max_len,
// shortest first, lexicographic within a length.
inline std::vector<Sequence> all_sequences(std::size_t vocab_size, std::size_t max_len) {
  std::vector<Sequence> out{Sequence{}};
  std::size_t layer_begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t layer_end = out.size();
    for (std::size_t i = layer_begin; i < layer_end; ++i) {
      for (SymbolId s = 0; s < vocab_size; ++s) {
        Sequence next = out[i];
        next.push_back(s);
        out.push_back(std::move(next));
      }
    }
    layer_begin = layer_end;
  }
  return out;
}

struct Best {
  Sequence y;
  double log_prob = -INFINITY;
};

// Highest-probability sequence; the first one found wins ties, which is the
// shorter-then-lexicographic order of all_sequences.
inline Best argmax(const TableModel& m, std::size_t max_len) {
  Best best;
  bool have = false;
  for (const Sequence& y : all_sequences(m.vocab_size(), max_len)) {
    const double lp = std::log(sequence_prob(m, y));
    if (!have || lp > best.log_prob) {
      best = Best{y, lp};
      have = true;
    }
  }
  return best;
}

}  // namespace mitd::oracle
