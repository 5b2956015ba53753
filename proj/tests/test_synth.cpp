#include <gtest/gtest.h>

#include <set>

#include "mitd/synth.hpp"

namespace mitd {
namespace {

// Independent restatement of the synthetic grammar, written from its
// description rather than from the generator.
std::string expected_form(const std::string& lemma, const std::string& msd) {
  const std::string vowels = "aeiou";
  auto pl = [&](std::string s) {
    if (!s.empty() && vowels.find(s.back()) != std::string::npos) s.erase(s.size() - 1);
    return s + "en";
  };
  if (msd == "N;SG") return lemma;
  if (msd == "N;PL") return pl(lemma);
  if (msd == "N;GEN;SG") return lemma + "s";
  if (msd == "N;DIM") return lemma + "ki";
  if (msd == "N;GEN;PL") {
    std::string s = lemma;
    const auto pos = s.find_first_of("aou");
    if (pos != std::string::npos) s[pos] = s[pos] == 'u' ? 'i' : 'e';
    return pl(s);
  }
  ADD_FAILURE() << "unexpected bundle " << msd;
  return {};
}

std::string joined(const std::vector<std::string>& msd) {
  std::string out;
  for (const auto& f : msd) out += (out.empty() ? "" : ";") + f;
  return out;
}

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.train_count = 400;
  s.dev_count = 100;
  s.test_count = 100;
  return s;
}

TEST(Synth, SameSeedSameBytes) {
  const SynthCorpus a = generate_synth(small_spec(3));
  const SynthCorpus b = generate_synth(small_spec(3));
  EXPECT_EQ(to_unimorph(a.train), to_unimorph(b.train));
  EXPECT_EQ(to_unimorph(a.dev), to_unimorph(b.dev));
  EXPECT_EQ(to_unimorph(a.test), to_unimorph(b.test));
  const SynthCorpus c = generate_synth(small_spec(4));
  EXPECT_NE(to_unimorph(a.train), to_unimorph(c.train));
}

TEST(Synth, CountsAndDisjointSplits) {
  const SynthCorpus c = generate_synth(small_spec(5));
  EXPECT_EQ(c.train.size(), 400u);
  EXPECT_EQ(c.dev.size(), 100u);
  EXPECT_EQ(c.test.size(), 100u);
  std::set<std::pair<std::string, std::string>> train_pairs;
  std::set<std::string> train_lemmas;
  for (const auto& s : c.train) {
    train_pairs.emplace(s.lemma, joined(s.msd));
    train_lemmas.insert(s.lemma);
  }
  for (const auto* split : {&c.dev, &c.test}) {
    for (const auto& s : *split) {
      EXPECT_EQ(train_pairs.count({s.lemma, joined(s.msd)}), 0u);
      EXPECT_EQ(train_lemmas.count(s.lemma), 0u);
    }
  }
}

TEST(Synth, EveryTargetFollowsTheRule) {
  const SynthCorpus c = generate_synth(small_spec(6));
  std::set<std::string> bundles;
  for (const auto* split : {&c.train, &c.dev, &c.test}) {
    for (const auto& s : *split) {
      EXPECT_EQ(s.target, expected_form(s.lemma, joined(s.msd))) << s.lemma;
      EXPECT_GE(s.lemma.size(), 3u);
      EXPECT_LE(s.lemma.size(), 8u);
      bundles.insert(joined(s.msd));
    }
  }
  EXPECT_EQ(bundles.size(), 5u);
}

TEST(Synth, RuleExamples) {
  const std::vector<std::string> pl{"N", "PL"}, gpl{"N", "GEN", "PL"}, dim{"N", "DIM"};
  EXPECT_EQ(apply_synth_rule("kata", pl), "katen");
  EXPECT_EQ(apply_synth_rule("kat", pl), "katen");
  EXPECT_EQ(apply_synth_rule("kato", gpl), "keten");
  EXPECT_EQ(apply_synth_rule("sumi", gpl), "simen");
  EXPECT_EQ(apply_synth_rule("sem", gpl), "semen");
  EXPECT_EQ(apply_synth_rule("sem", dim), "semki");
  const std::vector<std::string> bad{"V", "PST"};
  EXPECT_THROW(apply_synth_rule("sem", bad), std::invalid_argument);
}

TEST(Synth, ImpossibleSpecsAreRejected) {
  SynthSpec s = small_spec(1);
  s.alphabet_size = 8;
  s.min_lemma_len = 1;
  s.max_lemma_len = 1;
  EXPECT_THROW(generate_synth(s), std::invalid_argument);
  s = small_spec(1);
  s.alphabet_size = 40;
  EXPECT_THROW(generate_synth(s), std::invalid_argument);
  s = small_spec(1);
  s.min_lemma_len = 5;
  s.max_lemma_len = 4;
  EXPECT_THROW(generate_synth(s), std::invalid_argument);
  s = small_spec(1);
  s.dev_count = 0;
  EXPECT_THROW(generate_synth(s), std::invalid_argument);
}

TEST(Synth, AlphabetStartsWithVowels) {
  EXPECT_EQ(synth_alphabet(8), "aeiounsk");
  EXPECT_EQ(synth_alphabet(20).size(), 20u);
}

}  // namespace
}  // namespace mitd
