#include "mitd/search.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <vector>

namespace mitd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Hypothesis {
  Sequence prefix;
  LogProb score = 0.0;
  bool complete = false;
  StatePtr state;  // null once complete, or until materialized
  StatePtr parent = nullptr;  // set while state is pending
};

bool ahead(const Hypothesis& a, const Hypothesis& b) {
  return ranks_ahead(a.score, a.prefix, a.complete, b.score, b.prefix, b.complete);
}

// priority_queue keeps the element that ranks first on top.
struct RanksBehind {
  bool operator()(const Hypothesis& a, const Hypothesis& b) const { return ahead(b, a); }
};

Hypothesis root(const SequenceModel& m, std::span<const SymbolId> x) {
  return Hypothesis{{}, 0.0, false, m.start(x)};
}

Hypothesis complete_with_eos(const SequenceModel& m, const Hypothesis& h) {
  return Hypothesis{h.prefix, h.score + h.state->next()[m.eos()], true, nullptr};
}

Hypothesis extend(const SequenceModel& m, const Hypothesis& h, SymbolId s, LogProb score) {
  Hypothesis child{h.prefix, score, false, m.advance(*h.state, s)};
  child.prefix.push_back(s);
  return child;
}

DecodeResult to_result(Hypothesis h, const SearchStats& stats) {
  return DecodeResult{std::move(h.prefix), h.score, stats};
}

}  // namespace

std::size_t default_max_len(std::size_t source_len) { return 2 * source_len + 5; }

std::size_t effective_max_len(const DecodeConfig& cfg, std::size_t source_len) {
  return cfg.max_len.value_or(default_max_len(source_len));
}

bool ranks_ahead(LogProb score_a, const Sequence& a, bool complete_a, LogProb score_b,
                 const Sequence& b, bool complete_b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.size() != b.size()) return a.size() < b.size();
  if (complete_a != complete_b) return complete_a;
  return a < b;
}

DecodeResult greedy_decode(const SequenceModel& m, std::span<const SymbolId> x,
                           const DecodeConfig& cfg) {
  const auto start = Clock::now();
  const std::size_t max_len = effective_max_len(cfg, x.size());
  const SymbolId eos = m.eos();
  SearchStats stats;
  stats.max_queue = 1;

  Hypothesis h = root(m, x);
  while (true) {
    const ConditionalDistribution& next = h.state->next();
    ++stats.nodes_expanded;
    if (h.prefix.size() >= max_len) break;
    SymbolId best = eos;
    for (SymbolId s = 0; s < next.size(); ++s) {
      if (s != eos && next[s] > next[best]) best = s;
    }
    if (best == eos) break;
    h = extend(m, h, best, h.score + next[best]);
  }
  Hypothesis done = complete_with_eos(m, h);
  stats.seconds = seconds_since(start);
  return to_result(std::move(done), stats);
}

DecodeResult beam_decode(const SequenceModel& m, std::span<const SymbolId> x,
                         const DecodeConfig& cfg) {
  if (cfg.beam_width < 1) throw std::invalid_argument("beam width must be >= 1");
  const auto start = Clock::now();
  const std::size_t k = cfg.beam_width;
  const std::size_t max_len = effective_max_len(cfg, x.size());
  const SymbolId eos = m.eos();
  SearchStats stats;

  std::vector<Hypothesis> beam{root(m, x)};
  std::optional<Hypothesis> best_complete;
  auto offer_complete = [&](Hypothesis h) {
    if (!best_complete || ahead(h, *best_complete)) best_complete = std::move(h);
  };

  struct Candidate {
    std::size_t parent;
    SymbolId symbol;
    LogProb score;
    const Sequence* prefix;
  };
  auto candidate_ahead = [&](const Candidate& a, const Candidate& b) {
    // An EOS completion is one symbol shorter than its sibling extensions.
    const bool a_eos = a.symbol == eos, b_eos = b.symbol == eos;
    if (a.score != b.score) return a.score > b.score;
    const std::size_t la = a.prefix->size() + (a_eos ? 0 : 1);
    const std::size_t lb = b.prefix->size() + (b_eos ? 0 : 1);
    if (la != lb) return la < lb;
    if (a_eos != b_eos) return a_eos;
    if (*a.prefix != *b.prefix) return *a.prefix < *b.prefix;
    return a.symbol < b.symbol;
  };

  while (!beam.empty()) {
    stats.max_queue = std::max(stats.max_queue, beam.size());
    if (beam.front().prefix.size() >= max_len) {
      for (const Hypothesis& h : beam) offer_complete(complete_with_eos(m, h));
      stats.nodes_expanded += beam.size();
      break;
    }
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      const ConditionalDistribution& next = beam[i].state->next();
      ++stats.nodes_expanded;
      for (SymbolId s = 0; s < next.size(); ++s) {
        const LogProb score = beam[i].score + next[s];
        if (score == kNegInf) continue;
        candidates.push_back(Candidate{i, s, score, &beam[i].prefix});
      }
    }
    const std::size_t keep = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                      candidate_ahead);
    std::vector<Hypothesis> next_beam;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = candidates[c];
      const Hypothesis& parent = beam[cand.parent];
      if (cand.symbol == eos) {
        offer_complete(Hypothesis{parent.prefix, cand.score, true, nullptr});
      } else {
        next_beam.push_back(extend(m, parent, cand.symbol, cand.score));
      }
    }
    beam = std::move(next_beam);
    if (best_complete && !beam.empty() && best_complete->score >= beam.front().score) break;
  }
  stats.seconds = seconds_since(start);
  // Every reachable prefix has a finite-probability continuation, so the
  // pool is non-empty here.
  return to_result(std::move(*best_complete), stats);
}

DecodeResult dijkstra_decode(const SequenceModel& m, std::span<const SymbolId> x,
                             const DecodeConfig& cfg) {
  const auto start = Clock::now();
  const std::size_t max_len = effective_max_len(cfg, x.size());
  const SymbolId eos = m.eos();
  const LogProb bound = cfg.lower_bound ? cfg.lower_bound->score : kNegInf;
  SearchStats stats;

  // Children hold their parent's state and are advanced only when popped.
  std::priority_queue<Hypothesis, std::vector<Hypothesis>, RanksBehind> queue;
  std::optional<Hypothesis> best_complete;

  auto push = [&](Hypothesis h) {
    if (h.score == kNegInf || h.score < bound) return;
    if (h.prefix.size() > max_len) return;
    if (h.complete && (!best_complete || ahead(h, *best_complete))) best_complete = h;
    if (cfg.queue_capacity && queue.size() >= *cfg.queue_capacity) {
      stats.seconds = seconds_since(start);
      std::optional<DecodeResult> best;
      if (best_complete) best = DecodeResult{best_complete->prefix, best_complete->score, stats};
      throw QueueCapacityError(*cfg.queue_capacity, std::move(best));
    }
    queue.push(std::move(h));
    stats.max_queue = std::max(stats.max_queue, queue.size());
  };

  push(root(m, x));
  while (!queue.empty()) {
    Hypothesis h = queue.top();
    queue.pop();
    if (h.complete) {
      stats.seconds = seconds_since(start);
      return to_result(std::move(h), stats);
    }
    if (!h.state) {
      h.state = m.advance(*h.parent, h.prefix.back());
      h.parent.reset();
    }
    ++stats.nodes_expanded;
    const ConditionalDistribution& next = h.state->next();
    push(complete_with_eos(m, h));
    if (h.prefix.size() < max_len) {
      for (SymbolId s = 0; s < next.size(); ++s) {
        if (s == eos) continue;
        const LogProb score = h.score + next[s];
        if (score == kNegInf || score < bound) continue;
        Hypothesis child{h.prefix, score, false, nullptr, h.state};
        child.prefix.push_back(s);
        push(std::move(child));
      }
    }
  }
  stats.seconds = seconds_since(start);
  if (cfg.lower_bound && cfg.lower_bound->hypothesis) {
    return DecodeResult{*cfg.lower_bound->hypothesis, cfg.lower_bound->score, stats};
  }
  throw SearchExhaustedError("exact search pruned every hypothesis");
}

DecodeResult brute_force_argmax(const SequenceModel& m, std::span<const SymbolId> x,
                                std::size_t max_len) {
  const auto start = Clock::now();
  const SymbolId eos = m.eos();
  std::vector<SymbolId> alphabet;
  for (SymbolId s = 0; s < m.num_outputs(); ++s) {
    if (s != eos) alphabet.push_back(s);
  }
  std::size_t total = 0, layer = 1;
  for (std::size_t len = 0; len <= max_len; ++len) {
    total += layer;
    if (total > kBruteForceLimit) {
      throw std::length_error("brute force would enumerate more than " +
                              std::to_string(kBruteForceLimit) + " hypotheses");
    }
    if (len < max_len) {
      if (!alphabet.empty() && layer > kBruteForceLimit / alphabet.size()) {
        throw std::length_error("brute force enumeration too large");
      }
      layer *= alphabet.size();
    }
  }

  SearchStats stats;
  Sequence best;
  LogProb best_score = kNegInf;
  bool have_best = false;
  const std::size_t n = alphabet.size();
  Sequence y;
  std::size_t count = 1;
  for (std::size_t len = 0; len <= max_len; ++len, count *= n) {
    y.resize(len);
    for (std::size_t index = 0; index < count; ++index) {
      std::size_t rest = index;
      for (std::size_t pos = len; pos-- > 0;) {
        y[pos] = alphabet[rest % n];
        rest /= n;
      }
      const LogProb score = sequence_log_prob(m, x, y);
      ++stats.nodes_expanded;
      if (!have_best || ranks_ahead(score, y, true, best_score, best, true)) {
        best = y;
        best_score = score;
        have_best = true;
      }
    }
  }
  stats.max_queue = 1;
  stats.seconds = seconds_since(start);
  return DecodeResult{std::move(best), best_score, stats};
}

DecodeResult decode(const SequenceModel& m, std::span<const SymbolId> x,
                    const DecodeConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::greedy:
      return greedy_decode(m, x, cfg);
    case Strategy::beam:
      return beam_decode(m, x, cfg);
    case Strategy::exact:
      return dijkstra_decode(m, x, cfg);
    case Strategy::brute_force:
      return brute_force_argmax(m, x, effective_max_len(cfg, x.size()));
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace mitd
