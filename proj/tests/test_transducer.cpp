#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mitd/errors.hpp"
#include "mitd/search.hpp"
#include "mitd/synth.hpp"
#include "mitd/transducer.hpp"

namespace mitd {
namespace {

namespace fs = std::filesystem;

Hyperparameters small_hyper(std::uint64_t seed = 1) {
  Hyperparameters h;
  h.embed_dim = 8;
  h.hidden_dim = 12;
  h.seed = seed;
  return h;
}

// A random sample over a vocabulary of `vocab_size` symbols (reserved ids
// excluded), with a few tags at the end of x.
EncodedSample random_sample(std::mt19937_64& rng, std::size_t vocab_size) {
  auto symbol = [&] {
    return static_cast<SymbolId>(kNumReserved + rng() % (vocab_size - kNumReserved));
  };
  EncodedSample s;
  s.x.resize(2 + rng() % 5);
  s.y.resize(1 + rng() % 5);
  for (auto& v : s.x) v = symbol();
  for (auto& v : s.y) v = symbol();
  return s;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("mitd_test_" + name);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TEST(Hyperparameters, Validation) {
  Hyperparameters h;
  EXPECT_NO_THROW(h.validate());
  h.hidden_dim = 0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h = Hyperparameters{};
  h.learning_rate = 0.0;
  EXPECT_THROW(h.validate(), std::invalid_argument);
}

TEST(InitParams, DeterministicBoundedZeroBiases) {
  const Hyperparameters h = small_hyper(3);
  const ModelParameters a = init_params(h, 10);
  EXPECT_TRUE(a == init_params(h, 10));
  EXPECT_FALSE(a == init_params(small_hyper(4), 10));
  for (const ParamBlock& b : param_blocks(a)) {
    const auto values = b.values();
    if (b.is_bias) {
      for (double v : values) EXPECT_EQ(v, 0.0) << b.name;
      continue;
    }
    const double r = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
    double largest = 0.0;
    for (double v : values) {
      EXPECT_LE(std::abs(v), r) << b.name;
      largest = std::max(largest, std::abs(v));
    }
    EXPECT_GT(largest, 0.5 * r) << b.name;
  }
}

TEST(InitParams, Shapes) {
  const ModelParameters p = init_params(small_hyper(), 10);
  EXPECT_EQ(p.vocab_size(), 10u);
  EXPECT_EQ(p.embed_dim(), 8u);
  EXPECT_EQ(p.hidden_dim(), 12u);
  EXPECT_EQ(p.decoder.w_z.cols(), 8 + 2 * 12);
  EXPECT_EQ(p.attention.cols(), 24);
  EXPECT_EQ(p.output.cols(), 36);
}

TEST(ForwardLoss, ZeroWeightsGiveLogVocab) {
  const std::size_t vocab = 9;
  const ModelParameters p = ModelParameters::zeros(vocab, 4, 5);
  std::mt19937_64 rng(1);
  std::vector<EncodedSample> batch{random_sample(rng, vocab), random_sample(rng, vocab)};
  const LossResult r = forward_loss(p, batch);
  EXPECT_NEAR(r.loss, std::log(static_cast<double>(vocab)), 1e-12);
  for (const auto& steps : r.step_log_probs) {
    for (double lp : steps) EXPECT_NEAR(lp, -std::log(static_cast<double>(vocab)), 1e-12);
  }
}

TEST(ForwardLoss, SingleCharacterHandExample) {
  // Vocabulary {a} plus the four reserved symbols; uniform over 5 outputs.
  const ModelParameters p = ModelParameters::zeros(5, 3, 2);
  const std::vector<EncodedSample> batch{EncodedSample{{4}, {4}, 0}};
  const LossResult r = forward_loss(p, batch);
  EXPECT_NEAR(r.loss, 2.0 * std::log(5.0) / 2.0, 1e-12);
  ASSERT_EQ(r.step_log_probs[0].size(), 2u);
}

TEST(ForwardLoss, DuplicatedBatchIsInvariant) {
  const ModelParameters p = init_params(small_hyper(), 9);
  std::mt19937_64 rng(2);
  const EncodedSample s = random_sample(rng, 9);
  const std::vector<EncodedSample> one{s}, two{s, s};
  EXPECT_NEAR(forward_loss(p, one).loss, forward_loss(p, two).loss, 1e-12);
  double l1 = 0.0, l2 = 0.0;
  const ModelParameters g1 = gradients(p, one, &l1);
  const ModelParameters g2 = gradients(p, two, &l2);
  EXPECT_NEAR(l1, l2, 1e-12);
  const auto b1 = param_blocks(g1);
  const auto b2 = param_blocks(g2);
  for (std::size_t k = 0; k < b1.size(); ++k) {
    const auto v1 = b1[k].values();
    const auto v2 = b2[k].values();
    for (std::size_t i = 0; i < v1.size(); ++i) EXPECT_NEAR(v1[i], v2[i], 1e-12) << b1[k].name;
  }
}

TEST(ForwardLoss, MixedLengthsMatchPerSampleLosses) {
  // Batched padding must not leak: the batch loss is the token-weighted mean.
  const ModelParameters p = init_params(small_hyper(5), 9);
  std::mt19937_64 rng(9);
  std::vector<EncodedSample> batch;
  double nll = 0.0;
  std::size_t tokens = 0;
  for (int i = 0; i < 4; ++i) {
    batch.push_back(random_sample(rng, 9));
    const std::vector<EncodedSample> single{batch.back()};
    const std::size_t t = batch.back().y.size() + 1;
    nll += forward_loss(p, single).loss * static_cast<double>(t);
    tokens += t;
  }
  EXPECT_NEAR(forward_loss(p, batch).loss, nll / static_cast<double>(tokens), 1e-12);
}

TEST(ForwardLoss, MatchesUnbatchedReference) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 5; ++i) {
    const ModelParameters p = init_params(small_hyper(20 + i), 9);
    const EncodedSample s = random_sample(rng, 9);
    const std::vector<EncodedSample> batch{s};
    EXPECT_NEAR(forward_loss(p, batch).loss, reference_loss(p, s), 1e-12);
  }
  const EncodedSample no_source{{}, {5, 6}, 0};
  const ModelParameters p = init_params(small_hyper(3), 9);
  const std::vector<EncodedSample> batch{no_source};
  EXPECT_NEAR(forward_loss(p, batch).loss, reference_loss(p, no_source), 1e-12);
}

TEST(ForwardLoss, NonFiniteParametersDiverge) {
  ModelParameters p = init_params(small_hyper(), 9);
  p.output(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::mt19937_64 rng(3);
  const std::vector<EncodedSample> batch{random_sample(rng, 9)};
  EXPECT_THROW(forward_loss(p, batch), DivergenceError);
}

TEST(ForwardLoss, MatchesDecoderScores) {
  const ModelParameters p = init_params(small_hyper(6), 9);
  const Transducer model(p);
  std::mt19937_64 rng(4);
  const EncodedSample s = random_sample(rng, 9);
  const std::vector<EncodedSample> batch{s};
  const LossResult r = forward_loss(p, batch);
  double total = 0.0;
  for (double lp : r.step_log_probs[0]) total += lp;
  EXPECT_NEAR(total, sequence_log_prob(model, s.x, s.y), 1e-10);
}

TEST(Gradients, UnusedTargetEmbeddingIsExactlyZero) {
  const std::size_t vocab = 10;
  const ModelParameters p = init_params(small_hyper(), vocab);
  const std::vector<EncodedSample> batch{EncodedSample{{4, 5, 6}, {4, 5}, 0}};
  const ModelParameters g = gradients(p, batch, nullptr);
  for (Eigen::Index sym = 6; sym < static_cast<Eigen::Index>(vocab); ++sym) {
    EXPECT_TRUE((g.target_embed.col(sym).array() == 0.0).all()) << "symbol " << sym;
  }
  for (Eigen::Index sym = 7; sym < static_cast<Eigen::Index>(vocab); ++sym) {
    EXPECT_TRUE((g.source_embed.col(sym).array() == 0.0).all()) << "symbol " << sym;
  }
  EXPECT_FALSE((g.target_embed.col(4).array() == 0.0).all());
}

TEST(Gradients, UnusedCoordinatesAtZeroAreZeroBothWays) {
  const std::size_t vocab = 8;
  const ModelParameters p = ModelParameters::zeros(vocab, 4, 5);
  const std::vector<EncodedSample> batch{EncodedSample{{4}, {4}, 0}};
  const ModelParameters g = gradients(p, batch, nullptr);
  ModelParameters plus = p, minus = p;
  plus.target_embed(0, 7) += 1e-5;
  minus.target_embed(0, 7) -= 1e-5;
  const double numeric = (forward_loss(plus, batch).loss - forward_loss(minus, batch).loss) / 2e-5;
  EXPECT_EQ(numeric, 0.0);
  EXPECT_EQ(g.target_embed(0, 7), 0.0);
}

TEST(Gradients, FiniteDifferenceCheckOnRandomDraws) {
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    std::mt19937_64 rng(100 + draw);
    const std::size_t vocab = 6 + rng() % 6;
    const ModelParameters p = init_params(small_hyper(draw + 1), vocab);
    const EncodedSample s = random_sample(rng, vocab);
    const GradientCheck c = check_gradients(p, s, 1e-5, 200, draw);
    EXPECT_GE(c.coordinates, 200u);
    EXPECT_LT(c.max_relative_error, 1e-4) << "draw " << draw;
  }
}

TEST(Gradients, LargeEpsilonIsLessAccurate) {
  std::mt19937_64 rng(7);
  const ModelParameters p = init_params(small_hyper(7), 9);
  const EncodedSample s = random_sample(rng, 9);
  const double coarse = check_gradients(p, s, 1e-2, 200, 1).max_relative_error;
  const double fine = check_gradients(p, s, 1e-5, 200, 1).max_relative_error;
  EXPECT_GT(coarse, fine);
}

TEST(Transducer, ConditionalsAreNormalized) {
  const ModelParameters p = init_params(small_hyper(8), 9);
  const Transducer model(p);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) {
    const EncodedSample s = random_sample(rng, 9);
    StatePtr state = model.start(s.x);
    EXPECT_LE(std::abs(state->next().log_total()), 1e-6);
    for (SymbolId sym : s.y) {
      state = model.advance(*state, sym);
      EXPECT_LE(std::abs(state->next().log_total()), 1e-6);
    }
  }
}

TEST(Transducer, ExactSearchMatchesBruteForce) {
  const ModelParameters p = init_params(small_hyper(9), 7);
  const Transducer model(p);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 5; ++i) {
    const EncodedSample s = random_sample(rng, 7);
    DecodeConfig cfg;
    cfg.strategy = Strategy::exact;
    cfg.max_len = 4;
    const DecodeResult exact = dijkstra_decode(model, s.x, cfg);
    const DecodeResult brute = brute_force_argmax(model, s.x, 4);
    EXPECT_EQ(exact.y_star, brute.y_star);
    EXPECT_LE(std::abs(exact.score - brute.score), 1e-9);
  }
}

TEST(ModelFile, SaveLoadSaveIsByteIdentical) {
  const Hyperparameters h = small_hyper(11);
  const Vocabulary v = build_vocabulary(parse_unimorph("abc\tabd\tN;PL\n"));
  const ModelParameters p = init_params(h, v.size());
  const fs::path first = temp_file("first.bin"), second = temp_file("second.bin");
  save_model(p, h, v, first);
  const SavedModel loaded = load_model(first);
  EXPECT_TRUE(loaded.params == p);
  EXPECT_EQ(loaded.hyper, h);
  EXPECT_EQ(loaded.vocab, v);
  save_model(loaded.params, loaded.hyper, loaded.vocab, second);
  EXPECT_EQ(slurp(first), slurp(second));

  const std::vector<EncodedSample> batch{encode_sample(v, RawSample{"abc", "abd", {"N", "PL"}})};
  EXPECT_EQ(forward_loss(p, batch).loss, forward_loss(loaded.params, batch).loss);
  fs::remove(first);
  fs::remove(second);
}

TEST(ModelFile, DistinctErrors) {
  const Hyperparameters h = small_hyper();
  const Vocabulary v = build_vocabulary(parse_unimorph("ab\tab\tN\n"));
  const fs::path path = temp_file("errors.bin");
  save_model(init_params(h, v.size()), h, v, path);
  const std::string good = slurp(path);
  auto kind_of = [&](const std::string& bytes) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    try {
      load_model(path);
    } catch (const ModelFileError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "expected a model file error";
    return ModelFileError::Kind::version;
  };
  EXPECT_EQ(kind_of("mitd0" + good.substr(5)), ModelFileError::Kind::version);
  EXPECT_EQ(kind_of(good.substr(0, good.size() - 3)), ModelFileError::Kind::truncated);
  EXPECT_EQ(kind_of(good + "x"), ModelFileError::Kind::shape);
  std::string bad_shape = good;
  const auto pos = bad_shape.find("attention\t12\t24");
  ASSERT_NE(pos, std::string::npos);
  bad_shape.replace(pos, 15, "attention\t12\t25");
  EXPECT_EQ(kind_of(bad_shape), ModelFileError::Kind::shape);
  fs::remove(path);
}

TEST(ModelFile, MissingFileIsDataError) {
  EXPECT_THROW(load_model(temp_file("does_not_exist.bin")), DataError);
}

class TinyTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthSpec spec;
    spec.train_count = 200;
    spec.dev_count = 40;
    spec.test_count = 1;
    corpus_ = new SynthCorpus(generate_synth(spec));
    vocab_ = new Vocabulary(build_vocabulary(corpus_->train));
    train_ = new std::vector<EncodedSample>(encode_samples(*vocab_, corpus_->train));
    dev_ = new std::vector<EncodedSample>(encode_samples(*vocab_, corpus_->dev));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete vocab_;
    delete train_;
    delete dev_;
  }
  static Hyperparameters hyper() {
    Hyperparameters h;
    h.embed_dim = 12;
    h.hidden_dim = 16;
    h.learning_rate = 5e-3;
    h.max_epochs = 4;
    h.patience = 10;
    return h;
  }
  static TrainData data() { return TrainData{*train_, *dev_, vocab_->size()}; }

  static SynthCorpus* corpus_;
  static Vocabulary* vocab_;
  static std::vector<EncodedSample>* train_;
  static std::vector<EncodedSample>* dev_;
};

SynthCorpus* TinyTraining::corpus_ = nullptr;
Vocabulary* TinyTraining::vocab_ = nullptr;
std::vector<EncodedSample>* TinyTraining::train_ = nullptr;
std::vector<EncodedSample>* TinyTraining::dev_ = nullptr;

TEST_F(TinyTraining, DeterministicAndLossDecreases) {
  std::size_t callbacks = 0;
  const TrainResult a = train(data(), hyper(), [&](std::size_t, double, double) { ++callbacks; });
  const TrainResult b = train(data(), hyper(), {});
  EXPECT_EQ(callbacks, a.report.train_loss.size());
  EXPECT_EQ(a.report.train_loss, b.report.train_loss);
  EXPECT_EQ(a.report.dev_accuracy, b.report.dev_accuracy);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.report.to_text(false), b.report.to_text(false));
  ASSERT_EQ(a.report.train_loss.size(), 4u);
  EXPECT_GT(a.report.train_loss.front(), a.report.train_loss.back());
}

TEST_F(TinyTraining, SelectedEpochIsEarliestArgmax) {
  const TrainResult r = train(data(), hyper(), {});
  const auto& acc = r.report.dev_accuracy;
  const auto best = std::max_element(acc.begin(), acc.end());
  EXPECT_EQ(r.report.selected_epoch, static_cast<std::size_t>(best - acc.begin()) + 1);
  EXPECT_EQ(r.report.best_dev_accuracy(), *best);
  EXPECT_EQ(greedy_accuracy(Transducer(r.params), *dev_), *best);
}

TEST_F(TinyTraining, EarlyStoppingHonoursPatience) {
  Hyperparameters h = hyper();
  h.max_epochs = 30;
  h.patience = 1;
  h.learning_rate = 1e-9;
  const TrainResult r = train(data(), h, {});
  // Accuracy cannot improve at this learning rate, so training stops after
  // one epoch without improvement.
  EXPECT_EQ(r.report.selected_epoch, 1u);
  EXPECT_EQ(r.report.train_loss.size(), 2u);
}

TEST_F(TinyTraining, RejectsEmptySets) {
  const std::vector<EncodedSample> none;
  EXPECT_THROW(train(TrainData{none, *dev_, vocab_->size()}, hyper(), {}), std::invalid_argument);
  EXPECT_THROW(train(TrainData{*train_, none, vocab_->size()}, hyper(), {}),
               std::invalid_argument);
}

TEST(TrainReport, TextLayout) {
  TrainReport r;
  r.train_loss = {2.0, 1.0};
  r.dev_accuracy = {0.5, 0.75};
  r.selected_epoch = 2;
  r.wall_seconds = 1.5;
  EXPECT_EQ(r.to_text(false),
            "epoch\ttrain_loss\tdev_accuracy\n1\t2\t0.5\n2\t1\t0.75\nselected_epoch\t2\n"
            "best_dev_accuracy\t0.75\n");
  EXPECT_NE(r.to_text(true).find("wall_seconds\t1.5"), std::string::npos);
}

}  // namespace
}  // namespace mitd
