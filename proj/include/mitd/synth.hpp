#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mitd/corpus.hpp"

namespace mitd {

// A toy inflectional language with a known deterministic rule per MSD.
struct SynthSpec {
  std::size_t alphabet_size = 12;
  std::size_t min_lemma_len = 3;
  std::size_t max_lemma_len = 8;
  std::size_t train_count = 5000;
  std::size_t dev_count = 500;
  std::size_t test_count = 500;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  std::vector<RawSample> train, dev, test;
};

inline constexpr std::size_t kMinSynthAlphabet = 8;
inline constexpr std::size_t kMaxSynthAlphabet = 20;

// First `size` letters of the synthetic alphabet (vowels first).
std::string synth_alphabet(std::size_t size);

// Feature bundles the generator draws from, e.g. {"N", "PL"}.
const std::vector<std::vector<std::string>>& synth_msds();

// The inflection rule: plural drops a final vowel and adds "en", genitive
// singular adds "s", genitive plural fronts the first back vowel before
// pluralizing, diminutive adds "ki", singular is the identity.
// Throws std::invalid_argument for an unknown bundle.
std::string apply_synth_rule(const std::string& lemma, std::span<const std::string> msd);

// Each sample pairs a fresh lemma with a random bundle, so lemmas never repeat
// across splits. Throws std::invalid_argument if the alphabet cannot supply
// enough distinct lemmas.
SynthCorpus generate_synth(const SynthSpec& spec);

std::string to_unimorph(std::span<const RawSample> samples);

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace mitd
