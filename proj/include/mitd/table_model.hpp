#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mitd/model.hpp"

namespace mitd {

// Explicit next-symbol table used as a ground-truth model in tests.
//
// Symbols are 0..n-1 and EOS is n. Every prefix shorter than the depth
// bound may carry a row; prefixes without a row, and every prefix at or
// beyond the depth bound, put all mass on EOS.
class TableModel final : public SequenceModel {
 public:
  // Probability rows keyed by prefix; each row has n + 1 entries (EOS last).
  using Rows = std::map<Sequence, std::vector<double>>;

  // Throws DataError naming the prefix of any row that does not sum to 1
  // within 1e-9 or that lies at or beyond the depth bound.
  TableModel(std::vector<std::string> symbol_names, std::size_t depth_bound, Rows rows);

  std::size_t num_outputs() const override { return names_.size() + 1; }
  SymbolId eos() const override { return static_cast<SymbolId>(names_.size()); }
  StatePtr start(std::span<const SymbolId> x) const override;
  StatePtr advance(const DecoderState& state, SymbolId symbol) const override;

  std::size_t vocab_size() const { return names_.size(); }
  std::size_t depth_bound() const { return depth_bound_; }
  const Rows& rows() const { return rows_; }
  const std::vector<std::string>& symbol_names() const { return names_; }
  std::string prefix_name(const Sequence& prefix) const;

  // `table v1` text format.
  void write(std::ostream& out) const;
  static TableModel read(std::istream& in);

  friend bool operator==(const TableModel& a, const TableModel& b) {
    return a.names_ == b.names_ && a.depth_bound_ == b.depth_bound_ && a.rows_ == b.rows_;
  }

 private:
  const ConditionalDistribution& lookup(const Sequence& prefix) const;

  std::vector<std::string> names_;
  std::size_t depth_bound_;
  Rows rows_;
  std::map<Sequence, ConditionalDistribution> log_rows_;
  ConditionalDistribution forced_eos_;
};

TableModel make_table_model(std::vector<std::string> symbol_names, std::size_t depth_bound,
                            TableModel::Rows rows);

// Every prefix up to the depth bound gets independent uniform (0,1] weights,
// normalized. Deterministic in the seed.
TableModel sample_random_model(std::uint64_t seed, std::size_t vocab_size,
                               std::size_t depth_bound);

// Deterministic model spelling `word`: each step puts all mass on the next
// symbol, then on EOS.
TableModel make_one_hot_model(std::size_t vocab_size, const Sequence& word);

// The three-row model over {a, b} with depth bound 2:
//   p(.|BOS) = (a .55, b .35, EOS .10)
//   p(.|a)   = (a .5,  b .3,  EOS .2)
//   p(.|b)   = (a .05, b .05, EOS .9)
TableModel make_toy1_model();

}  // namespace mitd
