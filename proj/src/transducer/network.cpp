#include "network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mitd/errors.hpp"

namespace mitd {

namespace detail {

namespace {

Eigen::ArrayXXd sigmoid(const Matrix& a) { return 1.0 / (1.0 + (-a.array()).exp()); }

}  // namespace

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw DivergenceError(std::string("non-finite values in ") + what);
}

Matrix gru_forward(const GruWeights& w, const Matrix& x, const Matrix& h_prev,
                   const RowVector& mask, GruCache* cache) {
  Matrix z = sigmoid((w.w_z * x + w.u_z * h_prev).colwise() + w.b_z);
  Matrix r = sigmoid((w.w_r * x + w.u_r * h_prev).colwise() + w.b_r);
  Matrix rh = r.cwiseProduct(h_prev);
  Matrix n = ((w.w_h * x + w.u_h * rh).colwise() + w.b_h).array().tanh();
  Matrix h = h_prev + z.cwiseProduct(n - h_prev);
  if (mask.size() > 0) {
    for (Eigen::Index b = 0; b < h.cols(); ++b) {
      if (mask[b] == 0.0) h.col(b) = h_prev.col(b);
    }
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->rh = std::move(rh);
    cache->mask = mask;
  }
  return h;
}

void gru_backward(const GruWeights& w, const GruCache& c, const Matrix& dh_out,
                  GruWeights& grad, Matrix& dx, Matrix& dh_prev) {
  Matrix dh_new = dh_out;
  dh_prev = Matrix::Zero(dh_out.rows(), dh_out.cols());
  if (c.mask.size() > 0) {
    for (Eigen::Index b = 0; b < dh_out.cols(); ++b) {
      if (c.mask[b] == 0.0) {
        dh_prev.col(b) = dh_out.col(b);
        dh_new.col(b).setZero();
      }
    }
  }
  // h_new = h_prev + z * (n - h_prev)
  dh_prev.array() += dh_new.array() * (1.0 - c.z.array());
  const Matrix dz = dh_new.cwiseProduct(c.n - c.h_prev);
  const Matrix dn = dh_new.cwiseProduct(c.z);
  const Matrix da_h = (dn.array() * (1.0 - c.n.array().square())).matrix();
  grad.w_h.noalias() += da_h * c.x.transpose();
  grad.u_h.noalias() += da_h * c.rh.transpose();
  grad.b_h += da_h.rowwise().sum();
  const Matrix drh = w.u_h.transpose() * da_h;
  dh_prev += drh.cwiseProduct(c.r);
  const Matrix da_r = (drh.array() * c.h_prev.array() * c.r.array() * (1.0 - c.r.array())).matrix();
  const Matrix da_z = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
  grad.w_r.noalias() += da_r * c.x.transpose();
  grad.u_r.noalias() += da_r * c.h_prev.transpose();
  grad.b_r += da_r.rowwise().sum();
  grad.w_z.noalias() += da_z * c.x.transpose();
  grad.u_z.noalias() += da_z * c.h_prev.transpose();
  grad.b_z += da_z.rowwise().sum();
  dx.noalias() = w.w_h.transpose() * da_h;
  dx.noalias() += w.w_r.transpose() * da_r;
  dx.noalias() += w.w_z.transpose() * da_z;
  dh_prev.noalias() += w.u_r.transpose() * da_r;
  dh_prev.noalias() += w.u_z.transpose() * da_z;
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const double hi = logits.col(b).maxCoeff();
    const double lse = hi + std::log((logits.col(b).array() - hi).exp().sum());
    out.col(b) = logits.col(b).array() - lse;
  }
  return out;
}

Matrix gather(const Matrix& table, const std::vector<SymbolId>& ids) {
  Matrix out(table.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t b = 0; b < ids.size(); ++b) out.col(static_cast<Eigen::Index>(b)) = table.col(ids[b]);
  return out;
}

Eigen::VectorXd attend(const Memory& memory, const Eigen::VectorXd& query,
                       Eigen::VectorXd* weights) {
  const Eigen::Index len = memory.states.cols();
  if (len == 0) {
    if (weights) weights->resize(0);
    return Eigen::VectorXd::Zero(memory.states.rows());
  }
  Eigen::VectorXd scores = memory.projected.transpose() * query;
  const double hi = scores.maxCoeff();
  Eigen::VectorXd alpha = (scores.array() - hi).exp();
  alpha /= alpha.sum();
  Eigen::VectorXd context = memory.states * alpha;
  if (weights) *weights = std::move(alpha);
  return context;
}

// Padded column-major view of a batch.
struct BatchLayout {
  Eigen::Index batch = 0;
  std::size_t src_max = 0;
  std::size_t tgt_max = 0;
  std::vector<std::size_t> src_len, tgt_len;  // tgt_len counts the EOS step
  std::vector<std::vector<SymbolId>> src_ids;  // [position][b]
  std::vector<std::vector<SymbolId>> dec_in;   // [step][b]
  std::vector<std::vector<SymbolId>> gold;     // [step][b]
  std::vector<RowVector> src_mask, tgt_mask;
  std::size_t tokens = 0;
};

BatchLayout make_layout(std::span<const EncodedSample> batch, std::size_t vocab) {
  BatchLayout l;
  l.batch = static_cast<Eigen::Index>(batch.size());
  for (const auto& s : batch) {
    for (SymbolId id : s.x) {
      if (id >= vocab) throw std::out_of_range("source symbol outside vocabulary");
    }
    for (SymbolId id : s.y) {
      if (id >= vocab) throw std::out_of_range("target symbol outside vocabulary");
    }
    l.src_len.push_back(s.x.size());
    l.tgt_len.push_back(s.y.size() + 1);
    l.src_max = std::max(l.src_max, s.x.size());
    l.tgt_max = std::max(l.tgt_max, s.y.size() + 1);
    l.tokens += s.y.size() + 1;
  }
  l.src_ids.assign(l.src_max, std::vector<SymbolId>(batch.size(), kPad));
  l.src_mask.assign(l.src_max, RowVector::Zero(l.batch));
  l.dec_in.assign(l.tgt_max, std::vector<SymbolId>(batch.size(), kPad));
  l.gold.assign(l.tgt_max, std::vector<SymbolId>(batch.size(), kPad));
  l.tgt_mask.assign(l.tgt_max, RowVector::Zero(l.batch));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = batch[b];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      l.src_ids[i][b] = s.x[i];
      l.src_mask[i][static_cast<Eigen::Index>(b)] = 1.0;
    }
    for (std::size_t t = 0; t <= s.y.size(); ++t) {
      l.dec_in[t][b] = t == 0 ? kBos : s.y[t - 1];
      l.gold[t][b] = t < s.y.size() ? s.y[t] : kEos;
      l.tgt_mask[t][static_cast<Eigen::Index>(b)] = 1.0;
    }
  }
  return l;
}

struct EncoderTape {
  std::vector<GruCache> fwd, bwd;  // per position
  std::vector<Matrix> states;      // per position, 2H x B
  std::vector<Matrix> projected;   // per position, H x B
};

void encode_batch(const ModelParameters& p, const BatchLayout& l, EncoderTape& tape,
                  bool keep_cache) {
  const Eigen::Index hidden = static_cast<Eigen::Index>(p.hidden_dim());
  const std::size_t len = l.src_max;
  tape.fwd.resize(keep_cache ? len : 0);
  tape.bwd.resize(keep_cache ? len : 0);
  tape.states.assign(len, Matrix(2 * hidden, l.batch));
  tape.projected.resize(len);
  Matrix h = Matrix::Zero(hidden, l.batch);
  for (std::size_t i = 0; i < len; ++i) {
    h = gru_forward(p.encoder_fwd, gather(p.source_embed, l.src_ids[i]), h, l.src_mask[i],
                    keep_cache ? &tape.fwd[i] : nullptr);
    tape.states[i].topRows(hidden) = h;
  }
  h.setZero();
  for (std::size_t i = len; i-- > 0;) {
    h = gru_forward(p.encoder_bwd, gather(p.source_embed, l.src_ids[i]), h, l.src_mask[i],
                    keep_cache ? &tape.bwd[i] : nullptr);
    tape.states[i].bottomRows(hidden) = h;
  }
  for (std::size_t i = 0; i < len; ++i) {
    check_finite(tape.states[i], "encoder states");
    tape.projected[i] = p.attention * tape.states[i];
  }
}

Memory encode_single(const ModelParameters& p, std::span<const SymbolId> x) {
  EncodedSample s;
  s.x.assign(x.begin(), x.end());
  const BatchLayout l = make_layout(std::span<const EncodedSample>(&s, 1), p.vocab_size());
  EncoderTape tape;
  encode_batch(p, l, tape, false);
  const Eigen::Index hidden = static_cast<Eigen::Index>(p.hidden_dim());
  Memory m;
  m.states.resize(2 * hidden, static_cast<Eigen::Index>(x.size()));
  m.projected.resize(hidden, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.states.col(static_cast<Eigen::Index>(i)) = tape.states[i].col(0);
    m.projected.col(static_cast<Eigen::Index>(i)) = tape.projected[i].col(0);
  }
  return m;
}

namespace {

struct DecoderTape {
  std::vector<GruCache> gru;    // per step
  std::vector<Matrix> hidden;   // g_t, H x B
  std::vector<Matrix> alpha;    // src_max x B
  std::vector<Matrix> context;  // c_t, 2H x B
  std::vector<Matrix> query;    // [g_t; c_t], 3H x B
  std::vector<Matrix> log_probs;  // V x B
};

struct ForwardTape {
  BatchLayout layout;
  EncoderTape encoder;
  DecoderTape decoder;
  double nll = 0.0;
};

void run_forward(const ModelParameters& p, std::span<const EncodedSample> batch,
                 ForwardTape& tape, bool keep_cache) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  tape.layout = make_layout(batch, p.vocab_size());
  const BatchLayout& l = tape.layout;
  encode_batch(p, l, tape.encoder, keep_cache);

  const Eigen::Index hidden = static_cast<Eigen::Index>(p.hidden_dim());
  const Eigen::Index embed = static_cast<Eigen::Index>(p.embed_dim());
  auto& d = tape.decoder;
  d.gru.resize(keep_cache ? l.tgt_max : 0);
  d.hidden.resize(l.tgt_max);
  d.alpha.resize(l.tgt_max);
  d.context.resize(l.tgt_max);
  d.query.resize(l.tgt_max);
  d.log_probs.resize(l.tgt_max);

  Matrix g = Matrix::Zero(hidden, l.batch);
  Matrix c = Matrix::Zero(2 * hidden, l.batch);
  tape.nll = 0.0;
  for (std::size_t t = 0; t < l.tgt_max; ++t) {
    Matrix u(embed + 2 * hidden, l.batch);
    u.topRows(embed) = gather(p.target_embed, l.dec_in[t]);
    u.bottomRows(2 * hidden) = c;
    g = gru_forward(p.decoder, u, g, l.tgt_mask[t], keep_cache ? &d.gru[t] : nullptr);
    check_finite(g, "decoder state");

    Matrix alpha = Matrix::Zero(static_cast<Eigen::Index>(l.src_max), l.batch);
    Matrix next_c = Matrix::Zero(2 * hidden, l.batch);
    for (Eigen::Index b = 0; b < l.batch; ++b) {
      const std::size_t len = l.src_len[static_cast<std::size_t>(b)];
      if (len == 0) continue;
      Eigen::VectorXd scores(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        scores[static_cast<Eigen::Index>(i)] = g.col(b).dot(tape.encoder.projected[i].col(b));
      }
      const double hi = scores.maxCoeff();
      Eigen::VectorXd a = (scores.array() - hi).exp();
      a /= a.sum();
      for (std::size_t i = 0; i < len; ++i) {
        const double w = a[static_cast<Eigen::Index>(i)];
        alpha(static_cast<Eigen::Index>(i), b) = w;
        next_c.col(b) += w * tape.encoder.states[i].col(b);
      }
    }
    c = std::move(next_c);

    Matrix q(3 * hidden, l.batch);
    q.topRows(hidden) = g;
    q.bottomRows(2 * hidden) = c;
    Matrix logits = (p.output * q).colwise() + p.output_bias;
    check_finite(logits, "output logits");
    Matrix lp = log_softmax(logits);
    for (Eigen::Index b = 0; b < l.batch; ++b) {
      if (l.tgt_mask[t][b] != 0.0) tape.nll -= lp(l.gold[t][static_cast<std::size_t>(b)], b);
    }
    d.hidden[t] = g;
    d.alpha[t] = std::move(alpha);
    d.context[t] = c;
    d.query[t] = std::move(q);
    d.log_probs[t] = std::move(lp);
  }
  if (!std::isfinite(tape.nll)) throw DivergenceError("non-finite loss");
}

void scatter_add(Matrix& table, const std::vector<SymbolId>& ids, const Matrix& grads,
                 const RowVector& mask) {
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (mask[static_cast<Eigen::Index>(b)] != 0.0) {
      table.col(ids[b]) += grads.col(static_cast<Eigen::Index>(b));
    }
  }
}

}  // namespace

}  // namespace detail

using detail::Matrix;

LossResult forward_loss(const ModelParameters& p, std::span<const EncodedSample> batch) {
  detail::ForwardTape tape;
  detail::run_forward(p, batch, tape, false);
  LossResult out;
  out.loss = tape.nll / static_cast<double>(tape.layout.tokens);
  out.step_log_probs.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 0; t < tape.layout.tgt_len[b]; ++t) {
      out.step_log_probs[b].push_back(
          tape.decoder.log_probs[t](tape.layout.gold[t][b], static_cast<Eigen::Index>(b)));
    }
  }
  return out;
}

ModelParameters gradients(const ModelParameters& p, std::span<const EncodedSample> batch,
                          double* loss) {
  using namespace detail;
  ForwardTape tape;
  run_forward(p, batch, tape, true);
  const BatchLayout& l = tape.layout;
  const double scale = 1.0 / static_cast<double>(l.tokens);
  if (loss) *loss = tape.nll * scale;

  ModelParameters grad = p.zeros_like();
  const Eigen::Index hidden = static_cast<Eigen::Index>(p.hidden_dim());
  const Eigen::Index embed = static_cast<Eigen::Index>(p.embed_dim());
  const auto& enc = tape.encoder;
  const auto& dec = tape.decoder;

  std::vector<Matrix> d_states(l.src_max, Matrix::Zero(2 * hidden, l.batch));
  std::vector<Matrix> d_projected(l.src_max, Matrix::Zero(hidden, l.batch));
  Matrix dg_carry = Matrix::Zero(hidden, l.batch);
  Matrix dc_carry = Matrix::Zero(2 * hidden, l.batch);
  Matrix du, dg_prev;

  for (std::size_t t = l.tgt_max; t-- > 0;) {
    // d loss / d logits = softmax - onehot, on live columns only.
    Matrix dlogits = dec.log_probs[t].array().exp();
    for (Eigen::Index b = 0; b < l.batch; ++b) {
      if (l.tgt_mask[t][b] == 0.0) {
        dlogits.col(b).setZero();
      } else {
        dlogits(l.gold[t][static_cast<std::size_t>(b)], b) -= 1.0;
      }
    }
    dlogits *= scale;
    grad.output.noalias() += dlogits * dec.query[t].transpose();
    grad.output_bias += dlogits.rowwise().sum();
    const Matrix dq = p.output.transpose() * dlogits;
    Matrix dg = dq.topRows(hidden) + dg_carry;
    const Matrix dc = dq.bottomRows(2 * hidden) + dc_carry;

    const Matrix& g = dec.hidden[t];
    for (Eigen::Index b = 0; b < l.batch; ++b) {
      const std::size_t len = l.src_len[static_cast<std::size_t>(b)];
      if (len == 0) continue;
      Eigen::VectorXd dalpha(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        dalpha[static_cast<Eigen::Index>(i)] = dc.col(b).dot(enc.states[i].col(b));
      }
      double weighted = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        weighted += dec.alpha[t](static_cast<Eigen::Index>(i), b) * dalpha[static_cast<Eigen::Index>(i)];
      }
      for (std::size_t i = 0; i < len; ++i) {
        const double a = dec.alpha[t](static_cast<Eigen::Index>(i), b);
        const double de = a * (dalpha[static_cast<Eigen::Index>(i)] - weighted);
        dg.col(b) += de * enc.projected[i].col(b);
        d_projected[i].col(b) += de * g.col(b);
        d_states[i].col(b) += a * dc.col(b);
      }
    }

    du.resize(embed + 2 * hidden, l.batch);
    gru_backward(p.decoder, dec.gru[t], dg, grad.decoder, du, dg_prev);
    dg_carry = dg_prev;
    dc_carry = du.bottomRows(2 * hidden);
    scatter_add(grad.target_embed, l.dec_in[t], du.topRows(embed), l.tgt_mask[t]);
  }

  for (std::size_t i = 0; i < l.src_max; ++i) {
    grad.attention.noalias() += d_projected[i] * enc.states[i].transpose();
    d_states[i].noalias() += p.attention.transpose() * d_projected[i];
  }

  Matrix dh = Matrix::Zero(hidden, l.batch);
  Matrix dx;
  for (std::size_t i = l.src_max; i-- > 0;) {
    dh += d_states[i].topRows(hidden);
    gru_backward(p.encoder_fwd, enc.fwd[i], dh, grad.encoder_fwd, dx, dg_prev);
    dh = dg_prev;
    scatter_add(grad.source_embed, l.src_ids[i], dx, l.src_mask[i]);
  }
  dh.setZero();
  for (std::size_t i = 0; i < l.src_max; ++i) {
    dh += d_states[i].bottomRows(hidden);
    gru_backward(p.encoder_bwd, enc.bwd[i], dh, grad.encoder_bwd, dx, dg_prev);
    dh = dg_prev;
    scatter_add(grad.source_embed, l.src_ids[i], dx, l.src_mask[i]);
  }
  return grad;
}

}  // namespace mitd
