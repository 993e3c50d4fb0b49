#pragma once

#include <functional>
#include <random>
#include <vector>

#include "kge/tensor.hpp"

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written in the most literal style possible
// (scalar loops, no shared code with src/) so that agreement is meaningful.
namespace oracle {

using kge::Index;
using kge::Matrix;

// Triple-loop matrix product.
Matrix matmul_naive(const Matrix& a, const Matrix& b);

double rel_err(double analytic, double numeric);

struct FdReport {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int worst_input = -1;
};

// Central finite differences of a scalar function against analytic gradients,
// element by element. f is called with tape recording suspended.
FdReport check_gradients(const std::function<double(const std::vector<Matrix>&)>& f,
                         std::vector<Matrix> inputs, const std::vector<Matrix>& analytic,
                         double step = 1e-5);

// Reference Adam trajectory for one scalar parameter given a fixed gradient
// sequence. Returns the parameter value after each step.
std::vector<double> adam_scalar_trajectory(double x0, const std::vector<double>& grads,
                                           double lr, double beta1, double beta2, double eps);

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0);

// Naive one-layer propagation: per-entity gathering of incident edges,
// per-edge attention scores, an explicit softmax, then the chosen aggregator
// on row vectors, optionally wrapped in the residual + identity transform
// with the interpolated matrix formed explicitly.
struct NaiveEdge {
  long dst, src, rel;
};

enum class NaiveAgg { Gcn, Sage, Bi, Gin };

struct NaiveLayerParams {
  Matrix attn_w;   // same row-vector storage convention as the library
  Matrix rel_emb;  // includes inverse-direction rows
  Matrix w;        // gcn / sage
  Matrix w1, w2;   // bi-interaction
  Matrix fc1_w, fc1_b, fc2_w, fc2_b;  // gin
  double gin_eps = 0.0;
  bool residual = false;
  Matrix res_w;
  double alpha = 0.0;
  double beta = 0.0;
  Matrix h0;
};

Matrix naive_propagation_layer(long n_entities, const std::vector<NaiveEdge>& edges,
                               const Matrix& h, NaiveAgg kind, const NaiveLayerParams& p);

}  // namespace oracle
