#include "mitd/table_model.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

class TableState final : public DecoderState {
 public:
  TableState(Sequence prefix, const ConditionalDistribution* dist)
      : prefix_(std::move(prefix)), dist_(dist) {}
  const ConditionalDistribution& next() const override { return *dist_; }
  const Sequence& prefix() const { return prefix_; }

 private:
  Sequence prefix_;
  const ConditionalDistribution* dist_;
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

}  // namespace

TableModel::TableModel(std::vector<std::string> symbol_names, std::size_t depth_bound,
                       Rows rows)
    : names_(std::move(symbol_names)), depth_bound_(depth_bound), rows_(std::move(rows)) {
  if (names_.empty()) throw DataError("table model needs at least one symbol");
  for (const auto& name : names_) {
    if (name.empty() || name == "EOS" ||
        name.find_first_of(" \t\n:,") != std::string::npos) {
      throw DataError("invalid table symbol name '" + name + "'");
    }
  }
  const std::size_t n = num_outputs();
  std::vector<double> eos_row(n, kNegInf);
  eos_row[eos()] = 0.0;
  forced_eos_ = ConditionalDistribution(std::move(eos_row));

  for (const auto& [prefix, probs] : rows_) {
    if (prefix.size() >= depth_bound_) {
      throw DataError("row '" + prefix_name(prefix) + "' lies beyond depth bound " +
                      std::to_string(depth_bound_));
    }
    for (SymbolId s : prefix) {
      if (s >= names_.size()) throw DataError("row prefix uses an unknown symbol");
    }
    if (probs.size() != n) {
      throw DataError("row '" + prefix_name(prefix) + "' has " +
                      std::to_string(probs.size()) + " entries, expected " +
                      std::to_string(n));
    }
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("row '" + prefix_name(prefix) + "' has a probability outside [0,1]");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      std::ostringstream msg;
      msg << "row '" << prefix_name(prefix) << "' sums to " << std::setprecision(12) << total;
      throw DataError(msg.str());
    }
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) logs[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
    log_rows_.emplace(prefix, ConditionalDistribution(std::move(logs)));
  }
}

std::string TableModel::prefix_name(const Sequence& prefix) const {
  if (prefix.empty()) return "BOS";
  std::string out;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i) out += ' ';
    out += prefix[i] < names_.size() ? names_[prefix[i]] : std::to_string(prefix[i]);
  }
  return out;
}

const ConditionalDistribution& TableModel::lookup(const Sequence& prefix) const {
  if (prefix.size() >= depth_bound_) return forced_eos_;
  auto it = log_rows_.find(prefix);
  return it == log_rows_.end() ? forced_eos_ : it->second;
}

StatePtr TableModel::start(std::span<const SymbolId>) const {
  return std::make_shared<TableState>(Sequence{}, &lookup({}));
}

StatePtr TableModel::advance(const DecoderState& state, SymbolId symbol) const {
  const auto& parent = static_cast<const TableState&>(state);
  Sequence prefix = parent.prefix();
  prefix.push_back(symbol);
  const ConditionalDistribution* dist = &lookup(prefix);
  return std::make_shared<TableState>(std::move(prefix), dist);
}

void TableModel::write(std::ostream& out) const {
  out << "table v1\n";
  out << "symbols";
  for (const auto& name : names_) out << '\t' << name;
  out << "\ndepth\t" << depth_bound_ << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& [prefix, probs] : rows_) {
    for (std::size_t i = 0; i < prefix.size(); ++i) out << (i ? " " : "") << names_[prefix[i]];
    out << '\t';
    for (std::size_t s = 0; s < probs.size(); ++s) {
      if (s) out << ',';
      out << (s == eos() ? std::string("EOS") : names_[s]) << ':' << probs[s];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

TableModel TableModel::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "table v1") {
    throw DataError("table model: expected header 'table v1'");
  }
  if (!std::getline(in, line)) throw ParseError(2, "missing symbols line");
  auto head = split_ws(line);
  if (head.empty() || head[0] != "symbols") throw ParseError(2, "expected 'symbols'");
  std::vector<std::string> names(head.begin() + 1, head.end());
  if (!std::getline(in, line)) throw ParseError(3, "missing depth line");
  auto depth_fields = split_ws(line);
  if (depth_fields.size() != 2 || depth_fields[0] != "depth") {
    throw ParseError(3, "expected 'depth N'");
  }
  const std::size_t depth = std::stoul(depth_fields[1]);

  auto symbol_id = [&](const std::string& name, std::size_t line_no) -> SymbolId {
    if (name == "EOS") return static_cast<SymbolId>(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<SymbolId>(i);
    }
    throw ParseError(line_no, "unknown symbol '" + name + "'");
  };

  Rows rows;
  std::size_t line_no = 3;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected prefix<TAB>entries");
    Sequence prefix;
    for (const auto& tok : split_ws(line.substr(0, tab))) {
      prefix.push_back(symbol_id(tok, line_no));
    }
    std::vector<double> probs(names.size() + 1, 0.0);
    std::istringstream entries(line.substr(tab + 1));
    for (std::string entry; std::getline(entries, entry, ',');) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) throw ParseError(line_no, "expected symbol:prob");
      probs[symbol_id(entry.substr(0, colon), line_no)] = std::stod(entry.substr(colon + 1));
    }
    if (!rows.emplace(prefix, std::move(probs)).second) {
      throw ParseError(line_no, "duplicate row");
    }
  }
  return TableModel(std::move(names), depth, std::move(rows));
}

TableModel make_table_model(std::vector<std::string> symbol_names, std::size_t depth_bound,
                            TableModel::Rows rows) {
  return TableModel(std::move(symbol_names), depth_bound, std::move(rows));
}

TableModel sample_random_model(std::uint64_t seed, std::size_t vocab_size,
                               std::size_t depth_bound) {
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  if (depth_bound < 1) throw std::invalid_argument("depth_bound must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::string> names;
  for (std::size_t i = 0; i < vocab_size; ++i) names.push_back("s" + std::to_string(i));

  TableModel::Rows rows;
  std::vector<Sequence> frontier{{}};
  for (std::size_t depth = 0; depth < depth_bound; ++depth) {
    std::vector<Sequence> next_frontier;
    for (const Sequence& prefix : frontier) {
      std::vector<double> w(vocab_size + 1);
      double total = 0.0;
      for (double& x : w) {
        x = 1.0 - unit(rng);  // (0, 1]
        total += x;
      }
      for (double& x : w) x /= total;
      rows.emplace(prefix, std::move(w));
      for (SymbolId s = 0; s < vocab_size; ++s) {
        Sequence child = prefix;
        child.push_back(s);
        next_frontier.push_back(std::move(child));
      }
    }
    frontier = std::move(next_frontier);
  }
  return TableModel(std::move(names), depth_bound, std::move(rows));
}

TableModel make_one_hot_model(std::size_t vocab_size, const Sequence& word) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < vocab_size; ++i) names.push_back("s" + std::to_string(i));
  TableModel::Rows rows;
  Sequence prefix;
  for (std::size_t t = 0; t <= word.size(); ++t) {
    std::vector<double> p(vocab_size + 1, 0.0);
    p[t < word.size() ? word[t] : vocab_size] = 1.0;
    rows.emplace(prefix, std::move(p));
    if (t < word.size()) prefix.push_back(word[t]);
  }
  return TableModel(std::move(names), word.size() + 1, std::move(rows));
}

TableModel make_toy1_model() {
  TableModel::Rows rows;
  rows[{}] = {0.55, 0.35, 0.10};
  rows[{0}] = {0.5, 0.3, 0.2};
  rows[{1}] = {0.05, 0.05, 0.9};
  return TableModel({"a", "b"}, 2, std::move(rows));
}

}  // namespace mitd
