#include <algorithm>
#include <cmath>
#include <random>

#include "mitd/transducer.hpp"

namespace mitd {

namespace {

GruWeights gru_zeros(Eigen::Index hidden, Eigen::Index input) {
  GruWeights g;
  g.w_z = g.w_r = g.w_h = Eigen::MatrixXd::Zero(hidden, input);
  g.u_z = g.u_r = g.u_h = Eigen::MatrixXd::Zero(hidden, hidden);
  g.b_z = g.b_r = g.b_h = Eigen::VectorXd::Zero(hidden);
  return g;
}

template <typename Params, typename Fn>
void for_each_block(Params& p, Fn&& fn) {
  auto gru = [&](auto& g, const std::string& prefix) {
    fn(prefix + ".w_z", g.w_z, false);
    fn(prefix + ".w_r", g.w_r, false);
    fn(prefix + ".w_h", g.w_h, false);
    fn(prefix + ".u_z", g.u_z, false);
    fn(prefix + ".u_r", g.u_r, false);
    fn(prefix + ".u_h", g.u_h, false);
    fn(prefix + ".b_z", g.b_z, true);
    fn(prefix + ".b_r", g.b_r, true);
    fn(prefix + ".b_h", g.b_h, true);
  };
  fn(std::string("source_embed"), p.source_embed, false);
  fn(std::string("target_embed"), p.target_embed, false);
  gru(p.encoder_fwd, "encoder_fwd");
  gru(p.encoder_bwd, "encoder_bwd");
  gru(p.decoder, "decoder");
  fn(std::string("attention"), p.attention, false);
  fn(std::string("output"), p.output, false);
  fn(std::string("output_bias"), p.output_bias, true);
}

}  // namespace

void Hyperparameters::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("dimensions must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("grad_clip_norm must be > 0");
}

ModelParameters ModelParameters::zeros(std::size_t vocab_size, std::size_t embed_dim,
                                       std::size_t hidden_dim) {
  const auto v = static_cast<Eigen::Index>(vocab_size);
  const auto e = static_cast<Eigen::Index>(embed_dim);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  ModelParameters p;
  p.source_embed = Eigen::MatrixXd::Zero(e, v);
  p.target_embed = Eigen::MatrixXd::Zero(e, v);
  p.encoder_fwd = gru_zeros(h, e);
  p.encoder_bwd = gru_zeros(h, e);
  p.decoder = gru_zeros(h, e + 2 * h);
  p.attention = Eigen::MatrixXd::Zero(h, 2 * h);
  p.output = Eigen::MatrixXd::Zero(v, 3 * h);
  p.output_bias = Eigen::VectorXd::Zero(v);
  return p;
}

std::vector<ParamBlock> param_blocks(ModelParameters& p) {
  std::vector<ParamBlock> out;
  for_each_block(p, [&](const std::string& name, auto& m, bool bias) {
    out.push_back(ParamBlock{name, m.data(), m.rows(), m.cols(), bias});
  });
  return out;
}

std::vector<ParamBlock> param_blocks(const ModelParameters& p) {
  return param_blocks(const_cast<ModelParameters&>(p));
}

std::size_t ModelParameters::num_values() const {
  std::size_t n = 0;
  for (const auto& b : param_blocks(*this)) n += b.values().size();
  return n;
}

bool ModelParameters::all_finite() const {
  for (const auto& b : param_blocks(*this)) {
    for (double v : b.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool operator==(const ModelParameters& a, const ModelParameters& b) {
  auto ba = param_blocks(a);
  auto bb = param_blocks(b);
  if (ba.size() != bb.size()) return false;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba[i].rows != bb[i].rows || ba[i].cols != bb[i].cols) return false;
    auto va = ba[i].values();
    auto vb = bb[i].values();
    if (!std::equal(va.begin(), va.end(), vb.begin())) return false;
  }
  return true;
}

ModelParameters init_params(const Hyperparameters& h, std::size_t vocab_size) {
  h.validate();
  if (vocab_size < kNumReserved) throw std::invalid_argument("vocabulary too small");
  ModelParameters p = ModelParameters::zeros(vocab_size, h.embed_dim, h.hidden_dim);
  std::mt19937_64 rng(h.seed);
  for (auto& block : param_blocks(p)) {
    if (block.is_bias) continue;
    const double r = std::sqrt(6.0 / static_cast<double>(block.rows + block.cols));
    std::uniform_real_distribution<double> dist(-r, r);
    for (double& v : block.values()) v = dist(rng);
  }
  return p;
}

}  // namespace mitd
