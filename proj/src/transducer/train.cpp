#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mitd/errors.hpp"
#include "mitd/search.hpp"
#include "network.hpp"

namespace mitd {

namespace {

struct AdamState {
  ModelParameters m, v;
  std::size_t step = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double global_norm(const ModelParameters& g) {
  double sq = 0.0;
  for (const auto& b : param_blocks(g)) {
    for (double x : b.values()) sq += x * x;
  }
  return std::sqrt(sq);
}

void adam_update(ModelParameters& p, ModelParameters& g, AdamState& s, double lr,
                 double clip) {
  const double norm = global_norm(g);
  const double factor = norm > clip ? clip / norm : 1.0;
  ++s.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.step));
  auto pb = param_blocks(p);
  auto gb = param_blocks(g);
  auto mb = param_blocks(s.m);
  auto vb = param_blocks(s.v);
  for (std::size_t k = 0; k < pb.size(); ++k) {
    auto pv = pb[k].values();
    auto gv = gb[k].values();
    auto mv = mb[k].values();
    auto vv = vb[k].values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double grad = gv[i] * factor;
      mv[i] = kBeta1 * mv[i] + (1.0 - kBeta1) * grad;
      vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * grad * grad;
      pv[i] -= lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + kAdamEps);
    }
  }
}

}  // namespace

double greedy_accuracy(const SequenceModel& model, std::span<const EncodedSample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  DecodeConfig cfg;
  for (const auto& s : samples) {
    if (greedy_decode(model, s.x, cfg).y_star == s.y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double TrainReport::best_dev_accuracy() const {
  if (selected_epoch == 0 || selected_epoch > dev_accuracy.size()) return 0.0;
  return dev_accuracy[selected_epoch - 1];
}

std::string TrainReport::to_text(bool include_timing) const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch\ttrain_loss\tdev_accuracy\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << e + 1 << '\t' << train_loss[e] << '\t' << dev_accuracy[e] << '\n';
  }
  out << "selected_epoch\t" << selected_epoch << '\n';
  out << "best_dev_accuracy\t" << best_dev_accuracy() << '\n';
  if (include_timing) out << "wall_seconds\t" << wall_seconds << '\n';
  return out.str();
}

TrainResult train(const TrainData& data, const Hyperparameters& h,
                  const EpochCallback& on_epoch) {
  h.validate();
  if (data.train.empty()) throw std::invalid_argument("training set is empty");
  if (data.dev.empty()) throw std::invalid_argument("dev set is empty");
  const auto start = std::chrono::steady_clock::now();

  ModelParameters params = init_params(h, data.vocab_size);
  AdamState adam{params.zeros_like(), params.zeros_like(), 0};
  TrainResult result{params, {}};
  double best_accuracy = -1.0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(h.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<EncodedSample> batch;

  for (std::size_t epoch = 1; epoch <= h.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t first = 0, index = 0; first < order.size(); first += h.batch_size, ++index) {
      batch.clear();
      std::size_t batch_tokens = 0;
      for (std::size_t j = first; j < std::min(first + h.batch_size, order.size()); ++j) {
        batch.push_back(data.train[order[j]]);
        batch_tokens += batch.back().y.size() + 1;
      }
      double loss = 0.0;
      ModelParameters grad;
      try {
        grad = gradients(params, batch, &loss);
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(index) + ": " + e.what());
      }
      nll += loss * static_cast<double>(batch_tokens);
      tokens += batch_tokens;
      adam_update(params, grad, adam, h.learning_rate, h.grad_clip_norm);
    }
    if (!params.all_finite()) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": parameters diverged");
    }
    const double epoch_loss = nll / static_cast<double>(tokens);
    const double accuracy = greedy_accuracy(Transducer(params), data.dev);
    result.report.train_loss.push_back(epoch_loss);
    result.report.dev_accuracy.push_back(accuracy);
    if (on_epoch) on_epoch(epoch, epoch_loss, accuracy);
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      result.params = params;
      result.report.selected_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= h.patience) {
      break;
    }
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace mitd
