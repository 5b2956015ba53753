#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mitd/corpus.hpp"
#include "mitd/model.hpp"

namespace mitd {

struct Hyperparameters {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 128;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate() const;
  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

struct GruWeights {
  Eigen::MatrixXd w_z, w_r, w_h;  // hidden x input
  Eigen::MatrixXd u_z, u_r, u_h;  // hidden x hidden
  Eigen::VectorXd b_z, b_r, b_h;
};

// All trainable weights. Embedding tables hold one column per symbol.
struct ModelParameters {
  Eigen::MatrixXd source_embed;  // embed x |V|
  Eigen::MatrixXd target_embed;  // embed x |V|
  GruWeights encoder_fwd;        // input = embed
  GruWeights encoder_bwd;
  GruWeights decoder;            // input = embed + 2 hidden
  Eigen::MatrixXd attention;     // hidden x 2 hidden
  Eigen::MatrixXd output;        // |V| x 3 hidden
  Eigen::VectorXd output_bias;   // |V|

  std::size_t vocab_size() const { return static_cast<std::size_t>(output.rows()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(source_embed.rows()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(attention.rows()); }

  // Same shapes, all zero.
  static ModelParameters zeros(std::size_t vocab_size, std::size_t embed_dim,
                               std::size_t hidden_dim);
  ModelParameters zeros_like() const { return zeros(vocab_size(), embed_dim(), hidden_dim()); }

  std::size_t num_values() const;
  bool all_finite() const;

  friend bool operator==(const ModelParameters& a, const ModelParameters& b);
};

// One named weight block, viewed as a column-major matrix.
struct ParamBlock {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool is_bias;

  std::span<double> values() const {
    return {data, static_cast<std::size_t>(rows * cols)};
  }
};

// Blocks in a fixed order; the order defines the model-file layout.
std::vector<ParamBlock> param_blocks(ModelParameters& p);
std::vector<ParamBlock> param_blocks(const ModelParameters& p);  // data is read-only

ModelParameters init_params(const Hyperparameters& h, std::size_t vocab_size);

struct LossResult {
  double loss = 0.0;  // mean negative log-likelihood per target token
  std::vector<std::vector<LogProb>> step_log_probs;  // per sample, per step (EOS last)
};

// Teacher-forced loss. Throws DivergenceError on non-finite activations.
LossResult forward_loss(const ModelParameters& p, std::span<const EncodedSample> batch);

// Exact gradient of the mean loss (unclipped), plus the loss itself.
ModelParameters gradients(const ModelParameters& p, std::span<const EncodedSample> batch,
                          double* loss = nullptr);

// The loss of one sample, evaluated unbatched in extended precision.
double reference_loss(const ModelParameters& p, const EncodedSample& sample);

// Max relative error between analytic and central-difference gradients over
// a fixed pseudo-random subset of coordinates. The differences are taken on
// the extended-precision loss, so rounding does not swamp small gradients.
struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};
GradientCheck check_gradients(const ModelParameters& p, const EncodedSample& sample,
                              double epsilon = 1e-5, std::size_t min_coordinates = 200,
                              std::uint64_t seed = 0);

// Decoder over trained parameters. Conditionals span the whole vocabulary;
// EOS is the vocabulary's reserved EOS id.
class Transducer final : public SequenceModel {
 public:
  explicit Transducer(std::shared_ptr<const ModelParameters> params);
  explicit Transducer(ModelParameters params)
      : Transducer(std::make_shared<const ModelParameters>(std::move(params))) {}

  std::size_t num_outputs() const override { return params_->vocab_size(); }
  SymbolId eos() const override { return kEos; }
  StatePtr start(std::span<const SymbolId> x) const override;
  StatePtr advance(const DecoderState& state, SymbolId symbol) const override;

  const ModelParameters& params() const { return *params_; }

 private:
  std::shared_ptr<const ModelParameters> params_;
};

struct TrainReport {
  std::vector<double> train_loss;    // mean per-token NLL, per epoch
  std::vector<double> dev_accuracy;  // greedy exact match, per epoch
  std::size_t selected_epoch = 0;    // 1-based
  double wall_seconds = 0.0;

  double best_dev_accuracy() const;
  // Plain-text report; `include_timing` false drops the wall-clock line.
  std::string to_text(bool include_timing = true) const;
};

struct TrainData {
  std::span<const EncodedSample> train;
  std::span<const EncodedSample> dev;
  std::size_t vocab_size = 0;
};

struct TrainResult {
  ModelParameters params;
  TrainReport report;
};

// Called after every epoch with (epoch, loss, dev accuracy).
using EpochCallback = std::function<void(std::size_t, double, double)>;

TrainResult train(const TrainData& data, const Hyperparameters& h,
                  const EpochCallback& on_epoch = {});

// Greedy exact-match accuracy of `model` on `samples`.
double greedy_accuracy(const SequenceModel& model, std::span<const EncodedSample> samples);

class ModelFileError : public std::runtime_error {
 public:
  enum class Kind { version, truncated, shape };
  ModelFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct SavedModel {
  ModelParameters params;
  Hyperparameters hyper;
  Vocabulary vocab;
};

inline constexpr std::string_view kModelMagic = "mitd1";

void save_model(const ModelParameters& p, const Hyperparameters& h, const Vocabulary& v,
                const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace mitd
