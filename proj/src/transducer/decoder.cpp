#include "network.hpp"

namespace mitd {

namespace {

using detail::Matrix;

class TransducerState final : public DecoderState {
 public:
  TransducerState(std::shared_ptr<const detail::Memory> memory, Eigen::VectorXd hidden,
                  Eigen::VectorXd context, ConditionalDistribution next)
      : memory_(std::move(memory)),
        hidden_(std::move(hidden)),
        context_(std::move(context)),
        next_(std::move(next)) {}

  const ConditionalDistribution& next() const override { return next_; }
  const std::shared_ptr<const detail::Memory>& memory() const { return memory_; }
  const Eigen::VectorXd& hidden() const { return hidden_; }
  const Eigen::VectorXd& context() const { return context_; }

 private:
  std::shared_ptr<const detail::Memory> memory_;
  Eigen::VectorXd hidden_;
  Eigen::VectorXd context_;
  ConditionalDistribution next_;
};

StatePtr step(const ModelParameters& p, std::shared_ptr<const detail::Memory> memory,
              const Eigen::VectorXd& hidden, const Eigen::VectorXd& context, SymbolId input) {
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden_dim());
  const Eigen::Index e = static_cast<Eigen::Index>(p.embed_dim());
  Matrix u(e + 2 * h, 1);
  u.topRows(e) = p.target_embed.col(input);
  u.bottomRows(2 * h) = context;
  Matrix g = detail::gru_forward(p.decoder, u, hidden, {}, nullptr);
  detail::check_finite(g, "decoder state");
  Eigen::VectorXd query = g.col(0);
  Eigen::VectorXd next_context = detail::attend(*memory, query, nullptr);
  Matrix q(3 * h, 1);
  q.topRows(h) = query;
  q.bottomRows(2 * h) = next_context;
  Matrix logits = (p.output * q).colwise() + p.output_bias;
  detail::check_finite(logits, "output logits");
  const Matrix lp = detail::log_softmax(logits);
  std::vector<LogProb> values(lp.data(), lp.data() + lp.size());
  return std::make_shared<TransducerState>(std::move(memory), std::move(query),
                                           std::move(next_context),
                                           ConditionalDistribution(std::move(values)));
}

}  // namespace

Transducer::Transducer(std::shared_ptr<const ModelParameters> params)
    : params_(std::move(params)) {
  if (!params_) throw std::invalid_argument("null parameters");
}

StatePtr Transducer::start(std::span<const SymbolId> x) const {
  auto memory = std::make_shared<const detail::Memory>(detail::encode_single(*params_, x));
  const Eigen::Index h = static_cast<Eigen::Index>(params_->hidden_dim());
  return step(*params_, std::move(memory), Eigen::VectorXd::Zero(h),
              Eigen::VectorXd::Zero(2 * h), kBos);
}

StatePtr Transducer::advance(const DecoderState& state, SymbolId symbol) const {
  if (symbol >= num_outputs()) throw std::out_of_range("symbol outside vocabulary");
  const auto& s = static_cast<const TransducerState&>(state);
  return step(*params_, s.memory(), s.hidden(), s.context(), symbol);
}

}  // namespace mitd
