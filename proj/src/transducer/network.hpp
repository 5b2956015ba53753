#pragma once

// Internal building blocks shared by training and incremental decoding.

#include <Eigen/Dense>

#include <vector>

#include "mitd/transducer.hpp"

namespace mitd::detail {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Everything the backward pass needs from one batched GRU step.
struct GruCache {
  Matrix x, h_prev, z, r, n, rh;
  RowVector mask;  // 1 = column advances, 0 = column carries h_prev
};

// Columns are batch entries. An empty mask means "all columns advance".
Matrix gru_forward(const GruWeights& w, const Matrix& x, const Matrix& h_prev,
                   const RowVector& mask, GruCache* cache);

// Accumulates weight gradients into `grad`; writes input and previous-hidden
// gradients.
void gru_backward(const GruWeights& w, const GruCache& cache, const Matrix& dh_out,
                  GruWeights& grad, Matrix& dx, Matrix& dh_prev);

// Column-wise log-softmax.
Matrix log_softmax(const Matrix& logits);

// Gathers embedding columns.
Matrix gather(const Matrix& table, const std::vector<SymbolId>& ids);

// Encoder outputs for a single source sequence: one column per position.
struct Memory {
  Matrix states;     // 2 hidden x L
  Matrix projected;  // hidden x L, attention * states
};

Memory encode_single(const ModelParameters& p, std::span<const SymbolId> x);

// Attention over one memory; returns context (2 hidden) and fills weights.
Eigen::VectorXd attend(const Memory& memory, const Eigen::VectorXd& query,
                       Eigen::VectorXd* weights);

void check_finite(const Matrix& m, const char* what);

}  // namespace mitd::detail
