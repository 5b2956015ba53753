#include "mitd/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

constexpr std::string_view kLetters = "aeiounskmtdrlpbgfvhz";

bool is_vowel(char c) { return std::string_view("aeiou").find(c) != std::string_view::npos; }

std::string plural(const std::string& stem) {
  std::string out = stem;
  if (!out.empty() && is_vowel(out.back())) out.pop_back();
  return out + "en";
}

std::string front_first_back_vowel(const std::string& stem) {
  std::string out = stem;
  for (char& c : out) {
    if (c == 'a' || c == 'o') {
      c = 'e';
      break;
    }
    if (c == 'u') {
      c = 'i';
      break;
    }
  }
  return out;
}

std::string join(std::span<const std::string> msd) {
  std::string out;
  for (std::size_t i = 0; i < msd.size(); ++i) {
    if (i) out += ';';
    out += msd[i];
  }
  return out;
}

}  // namespace

std::string synth_alphabet(std::size_t size) {
  if (size < kMinSynthAlphabet || size > kMaxSynthAlphabet) {
    throw std::invalid_argument("alphabet size must be in [" +
                                std::to_string(kMinSynthAlphabet) + ", " +
                                std::to_string(kMaxSynthAlphabet) + "]");
  }
  return std::string(kLetters.substr(0, size));
}

const std::vector<std::vector<std::string>>& synth_msds() {
  static const std::vector<std::vector<std::string>> msds = {
      {"N", "SG"}, {"N", "PL"}, {"N", "GEN", "SG"}, {"N", "GEN", "PL"}, {"N", "DIM"}};
  return msds;
}

std::string apply_synth_rule(const std::string& lemma, std::span<const std::string> msd) {
  const std::string key = join(msd);
  if (key == "N;SG") return lemma;
  if (key == "N;PL") return plural(lemma);
  if (key == "N;GEN;SG") return lemma + "s";
  if (key == "N;GEN;PL") return plural(front_first_back_vowel(lemma));
  if (key == "N;DIM") return lemma + "ki";
  throw std::invalid_argument("no synthetic rule for " + key);
}

SynthCorpus generate_synth(const SynthSpec& spec) {
  const std::string alphabet = synth_alphabet(spec.alphabet_size);
  if (spec.min_lemma_len < 1 || spec.min_lemma_len > spec.max_lemma_len) {
    throw std::invalid_argument("invalid lemma length range");
  }
  if (spec.train_count < 1 || spec.dev_count < 1 || spec.test_count < 1) {
    throw std::invalid_argument("sample counts must be >= 1");
  }
  const std::size_t needed = spec.train_count + spec.dev_count + spec.test_count;
  double capacity = 0.0;
  for (std::size_t len = spec.min_lemma_len; len <= spec.max_lemma_len; ++len) {
    capacity += std::pow(static_cast<double>(alphabet.size()), static_cast<double>(len));
  }
  if (static_cast<double>(needed) > capacity / 2.0) {
    throw std::invalid_argument("alphabet too small for " + std::to_string(needed) +
                                " distinct lemmas");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> length(spec.min_lemma_len, spec.max_lemma_len);
  std::uniform_int_distribution<std::size_t> letter(0, alphabet.size() - 1);
  std::uniform_int_distribution<std::size_t> bundle(0, synth_msds().size() - 1);
  std::unordered_set<std::string> seen;

  auto draw = [&](std::size_t count, std::vector<RawSample>& out) {
    while (out.size() < count) {
      std::string lemma(length(rng), ' ');
      for (char& c : lemma) c = alphabet[letter(rng)];
      if (!seen.insert(lemma).second) continue;
      const auto& msd = synth_msds()[bundle(rng)];
      out.push_back(RawSample{lemma, apply_synth_rule(lemma, msd), msd});
    }
  };
  SynthCorpus corpus;
  draw(spec.train_count, corpus.train);
  draw(spec.dev_count, corpus.dev);
  draw(spec.test_count, corpus.test);
  return corpus;
}

std::string to_unimorph(std::span<const RawSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += s.lemma;
    out += '\t';
    out += s.target;
    out += '\t';
    out += join(s.msd);
    out += '\n';
  }
  return out;
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::vector<RawSample>& samples) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << to_unimorph(samples);
  };
  write("train.tsv", corpus.train);
  write("dev.tsv", corpus.dev);
  write("test.tsv", corpus.test);
}

}  // namespace mitd
