#pragma once

#include <random>
#include <vector>

#include "kge/tensor.hpp"

namespace kge {

// Differentiable operations over Tensor. Each op validates shapes up front,
// computes its value eagerly, and registers a pull-back on the active tape
// when any input requires gradients.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double c);
// Broadcast multiply by a 1x1 tensor (keeps the scalar differentiable).
Tensor mul_scalar(const Tensor& x, const Tensor& s);
// Adds a 1xC row vector to every row of x.
Tensor add_rowwise(const Tensor& x, const Tensor& row);
// Scales row i of x by w(i, 0); w is Nx1.
Tensor scale_rows(const Tensor& x, const Tensor& w);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor softmax_rows(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// Numerically stable log(1 + exp(x)).
Tensor softplus(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Per-row sum, result is Nx1.
Tensor sum_rows(const Tensor& x);

Tensor concat_cols(const std::vector<Tensor>& parts);

// Gathers rows of x by index; duplicate indices are allowed and their
// gradients accumulate.
Tensor rows(const Tensor& x, const std::vector<Index>& idx);
// Adds row j of x into row idx[j] of an out_rows-tall zero matrix.
Tensor scatter_sum_rows(const Tensor& x, const std::vector<Index>& idx, Index out_rows);

// Inverted dropout: keeps each element with probability 1-p and rescales by
// 1/(1-p) so the expectation is unchanged. p == 0 is the identity.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

enum class Activation { Sigmoid, Tanh, LeakyRelu, SoftmaxLastAxis };

Tensor activate(const Tensor& x, Activation kind);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }

}  // namespace kge
