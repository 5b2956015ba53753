// Unbatched extended-precision evaluation of the training loss. It follows
// the model equations one sample at a time and serves as the finite-
// difference reference for gradient checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "mitd/transducer.hpp"

namespace mitd {

namespace {

using Real = long double;
using XMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using XVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct XGru {
  XMatrix w_z, w_r, w_h, u_z, u_r, u_h;
  XVector b_z, b_r, b_h;
};

struct XParams {
  XMatrix source_embed, target_embed;
  XGru encoder_fwd, encoder_bwd, decoder;
  XMatrix attention, output;
  XVector output_bias;
};

XGru widen(const GruWeights& g) {
  return XGru{g.w_z.cast<Real>(), g.w_r.cast<Real>(), g.w_h.cast<Real>(),
              g.u_z.cast<Real>(), g.u_r.cast<Real>(), g.u_h.cast<Real>(),
              g.b_z.cast<Real>(), g.b_r.cast<Real>(), g.b_h.cast<Real>()};
}

XParams widen(const ModelParameters& p) {
  return XParams{p.source_embed.cast<Real>(), p.target_embed.cast<Real>(),
                 widen(p.encoder_fwd),        widen(p.encoder_bwd),
                 widen(p.decoder),            p.attention.cast<Real>(),
                 p.output.cast<Real>(),       p.output_bias.cast<Real>()};
}

// Raw storage of each block, in param_blocks order.
std::vector<std::span<Real>> blocks(XParams& p) {
  std::vector<std::span<Real>> out;
  auto add = [&](auto& m) { out.emplace_back(m.data(), static_cast<std::size_t>(m.size())); };
  add(p.source_embed);
  add(p.target_embed);
  for (XGru* g : {&p.encoder_fwd, &p.encoder_bwd, &p.decoder}) {
    add(g->w_z);
    add(g->w_r);
    add(g->w_h);
    add(g->u_z);
    add(g->u_r);
    add(g->u_h);
    add(g->b_z);
    add(g->b_r);
    add(g->b_h);
  }
  add(p.attention);
  add(p.output);
  add(p.output_bias);
  return out;
}

XVector logistic(const XVector& a) {
  return a.unaryExpr([](Real v) { return Real(1) / (Real(1) + std::exp(-v)); });
}

XVector gru_step(const XGru& w, const XVector& x, const XVector& h) {
  const XVector z = logistic(w.w_z * x + w.u_z * h + w.b_z);
  const XVector r = logistic(w.w_r * x + w.u_r * h + w.b_r);
  const XVector cand =
      (w.w_h * x + w.u_h * r.cwiseProduct(h) + w.b_h).unaryExpr([](Real v) { return std::tanh(v); });
  return (XVector::Ones(z.size()) - z).cwiseProduct(h) + z.cwiseProduct(cand);
}

Real sample_loss(const XParams& p, const EncodedSample& s) {
  const Eigen::Index hidden = p.attention.rows();
  const Eigen::Index len = static_cast<Eigen::Index>(s.x.size());
  XMatrix states(2 * hidden, len);
  XVector h = XVector::Zero(hidden);
  for (Eigen::Index i = 0; i < len; ++i) {
    h = gru_step(p.encoder_fwd, p.source_embed.col(s.x[i]), h);
    states.col(i).head(hidden) = h;
  }
  h = XVector::Zero(hidden);
  for (Eigen::Index i = len; i-- > 0;) {
    h = gru_step(p.encoder_bwd, p.source_embed.col(s.x[i]), h);
    states.col(i).tail(hidden) = h;
  }

  XVector g = XVector::Zero(hidden);
  XVector context = XVector::Zero(2 * hidden);
  Real nll = 0;
  for (std::size_t t = 0; t <= s.y.size(); ++t) {
    const SymbolId input = t == 0 ? kBos : s.y[t - 1];
    const SymbolId gold = t < s.y.size() ? s.y[t] : kEos;
    XVector u(p.target_embed.rows() + 2 * hidden);
    u << p.target_embed.col(input), context;
    g = gru_step(p.decoder, u, g);
    context = XVector::Zero(2 * hidden);
    if (len > 0) {
      XVector scores(len);
      for (Eigen::Index i = 0; i < len; ++i) scores[i] = g.dot(p.attention * states.col(i));
      const Real top = scores.maxCoeff();
      XVector alpha = (scores.array() - top).exp().matrix();
      alpha /= alpha.sum();
      context = states * alpha;
    }
    XVector q(3 * hidden);
    q << g, context;
    const XVector logits = p.output * q + p.output_bias;
    const Real top = logits.maxCoeff();
    const Real lse = top + std::log((logits.array() - top).exp().sum());
    nll += lse - logits[gold];
  }
  return nll / static_cast<Real>(s.y.size() + 1);
}

}  // namespace

double reference_loss(const ModelParameters& p, const EncodedSample& sample) {
  return static_cast<double>(sample_loss(widen(p), sample));
}

GradientCheck check_gradients(const ModelParameters& p, const EncodedSample& sample,
                              double epsilon, std::size_t min_coordinates,
                              std::uint64_t seed) {
  const ModelParameters analytic = gradients(p, std::span<const EncodedSample>(&sample, 1));
  const auto grad_blocks = param_blocks(analytic);
  XParams probe = widen(p);
  auto probe_blocks = blocks(probe);

  // Every block contributes, so small bias blocks are not skipped by chance.
  std::size_t total = 0;
  for (const auto& b : probe_blocks) total += b.size();
  std::mt19937_64 rng(seed);
  GradientCheck result;
  const Real eps = epsilon;
  for (std::size_t k = 0; k < probe_blocks.size(); ++k) {
    const std::span<Real> values = probe_blocks[k];
    const auto grads = grad_blocks[k].values();
    const std::size_t share =
        std::max<std::size_t>(4, (min_coordinates * values.size() + total - 1) / total);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    for (std::size_t j = 0; j < std::min(share, values.size()); ++j) {
      const std::size_t idx = share >= values.size() ? j : pick(rng);
      const Real saved = values[idx];
      values[idx] = saved + eps;
      const Real up = sample_loss(probe, sample);
      values[idx] = saved - eps;
      const Real down = sample_loss(probe, sample);
      values[idx] = saved;
      const double numeric = static_cast<double>((up - down) / (2 * eps));
      const double a = grads[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_relative_error =
          std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace mitd
