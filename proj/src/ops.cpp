#include "kge/ops.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace kge {

namespace {

std::string shape_of(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " +
                         shape_of(b));
  }
}

detail::NodePtr make_out(Matrix v, bool rg) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(v);
  n->requires_grad = rg;
  return n;
}

bool want_grad(std::initializer_list<const Tensor*> ins) {
  if (!Tape::active().recording()) return false;
  for (const Tensor* t : ins) {
    if (t->requires_grad()) return true;
  }
  return false;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_of(a) + " * " + shape_of(b));
  }
  bool rg = want_grad({&a, &b});
  auto out = make_out(a.value() * b.value(), rg);
  if (rg) {
    auto an = a.node(), bn = b.node();
    Tape::active().record({an, bn}, out, [an, bn](detail::Node& o) {
      if (an->requires_grad) an->accumulate(o.grad * bn->value.transpose());
      if (bn->requires_grad) bn->accumulate(an->value.transpose() * o.grad);
    });
  }
  return Tensor::wrap(out);
}

Tensor transpose(const Tensor& x) {
  bool rg = want_grad({&x});
  auto out = make_out(x.value().transpose(), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      xn->accumulate(o.grad.transpose());
    });
  }
  return Tensor::wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  bool rg = want_grad({&a, &b});
  auto out = make_out(a.value() + b.value(), rg);
  if (rg) {
    auto an = a.node(), bn = b.node();
    Tape::active().record({an, bn}, out, [an, bn](detail::Node& o) {
      if (an->requires_grad) an->accumulate(o.grad);
      if (bn->requires_grad) bn->accumulate(o.grad);
    });
  }
  return Tensor::wrap(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  bool rg = want_grad({&a, &b});
  auto out = make_out(a.value() - b.value(), rg);
  if (rg) {
    auto an = a.node(), bn = b.node();
    Tape::active().record({an, bn}, out, [an, bn](detail::Node& o) {
      if (an->requires_grad) an->accumulate(o.grad);
      if (bn->requires_grad) bn->accumulate(-o.grad);
    });
  }
  return Tensor::wrap(out);
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape("hadamard", a, b);
  bool rg = want_grad({&a, &b});
  auto out = make_out((a.value().array() * b.value().array()).matrix(), rg);
  if (rg) {
    auto an = a.node(), bn = b.node();
    Tape::active().record({an, bn}, out, [an, bn](detail::Node& o) {
      if (an->requires_grad) an->accumulate((o.grad.array() * bn->value.array()).matrix());
      if (bn->requires_grad) bn->accumulate((o.grad.array() * an->value.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor divide(const Tensor& a, const Tensor& b) {
  check_same_shape("divide", a, b);
  bool rg = want_grad({&a, &b});
  auto out = make_out((a.value().array() / b.value().array()).matrix(), rg);
  if (rg) {
    auto an = a.node(), bn = b.node();
    Tape::active().record({an, bn}, out, [an, bn](detail::Node& o) {
      if (an->requires_grad) an->accumulate((o.grad.array() / bn->value.array()).matrix());
      if (bn->requires_grad) {
        bn->accumulate((-o.grad.array() * an->value.array() / bn->value.array().square()).matrix());
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor scale(const Tensor& x, double c) {
  bool rg = want_grad({&x});
  auto out = make_out(x.value() * c, rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn, c](detail::Node& o) {
      xn->accumulate(o.grad * c);
    });
  }
  return Tensor::wrap(out);
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError("mul_scalar: multiplier must be 1x1, got " + shape_of(s));
  }
  bool rg = want_grad({&x, &s});
  auto out = make_out(x.value() * s.value()(0, 0), rg);
  if (rg) {
    auto xn = x.node(), sn = s.node();
    Tape::active().record({xn, sn}, out, [xn, sn](detail::Node& o) {
      if (xn->requires_grad) xn->accumulate(o.grad * sn->value(0, 0));
      if (sn->requires_grad) {
        Matrix g(1, 1);
        g(0, 0) = (o.grad.array() * xn->value.array()).sum();
        sn->accumulate(g);
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor add_rowwise(const Tensor& x, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw DimensionError("add_rowwise: expected 1x" + std::to_string(x.cols()) + " row, got " +
                         shape_of(row));
  }
  bool rg = want_grad({&x, &row});
  Matrix v = x.value();
  v.rowwise() += row.value().row(0);
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node(), rn = row.node();
    Tape::active().record({xn, rn}, out, [xn, rn](detail::Node& o) {
      if (xn->requires_grad) xn->accumulate(o.grad);
      if (rn->requires_grad) rn->accumulate(o.grad.colwise().sum());
    });
  }
  return Tensor::wrap(out);
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  if (w.cols() != 1 || w.rows() != x.rows()) {
    throw DimensionError("scale_rows: expected " + std::to_string(x.rows()) +
                         "x1 weights, got " + shape_of(w));
  }
  bool rg = want_grad({&x, &w});
  Matrix v = x.value().array().colwise() * w.value().col(0).array();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node(), wn = w.node();
    Tape::active().record({xn, wn}, out, [xn, wn](detail::Node& o) {
      if (xn->requires_grad) {
        xn->accumulate((o.grad.array().colwise() * wn->value.col(0).array()).matrix());
      }
      if (wn->requires_grad) {
        wn->accumulate((o.grad.array() * xn->value.array()).rowwise().sum().matrix());
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor sigmoid(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    detail::NodePtr on = out;
    Tape::active().record({xn}, out, [xn, on](detail::Node& o) {
      xn->accumulate((o.grad.array() * on->value.array() * (1.0 - on->value.array())).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor tanh(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().array().tanh();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    detail::NodePtr on = out;
    Tape::active().record({xn}, out, [xn, on](detail::Node& o) {
      xn->accumulate((o.grad.array() * (1.0 - on->value.array().square())).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor leaky_relu(const Tensor& x, double slope) {
  bool rg = want_grad({&x});
  Matrix v = x.value().unaryExpr([slope](double t) { return t >= 0.0 ? t : slope * t; });
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn, slope](detail::Node& o) {
      Matrix mask = xn->value.unaryExpr([slope](double t) { return t >= 0.0 ? 1.0 : slope; });
      xn->accumulate((o.grad.array() * mask.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor softmax_rows(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd shifted = x.value().row(r).array() - x.value().row(r).maxCoeff();
    Eigen::ArrayXd e = shifted.exp();
    v.row(r) = (e / e.sum()).matrix().transpose();
  }
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    detail::NodePtr on = out;
    Tape::active().record({xn}, out, [xn, on](detail::Node& o) {
      Matrix g(on->value.rows(), on->value.cols());
      for (Index r = 0; r < g.rows(); ++r) {
        double dot = o.grad.row(r).dot(on->value.row(r));
        g.row(r) = (on->value.row(r).array() * (o.grad.row(r).array() - dot)).matrix();
      }
      xn->accumulate(g);
    });
  }
  return Tensor::wrap(out);
}

Tensor exp(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().array().exp();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    detail::NodePtr on = out;
    Tape::active().record({xn}, out, [xn, on](detail::Node& o) {
      xn->accumulate((o.grad.array() * on->value.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor log(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().array().log();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      xn->accumulate((o.grad.array() / xn->value.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor softplus(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().unaryExpr([](double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  });
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      Matrix s = xn->value.unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
      xn->accumulate((o.grad.array() * s.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  bool rg = want_grad({&x});
  Matrix v = x.value().array().max(lo).min(hi);
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn, lo, hi](detail::Node& o) {
      Matrix mask = xn->value.unaryExpr(
          [lo, hi](double t) { return (t >= lo && t <= hi) ? 1.0 : 0.0; });
      xn->accumulate((o.grad.array() * mask.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor square(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().array().square();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      xn->accumulate((2.0 * o.grad.array() * xn->value.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor sum(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v(1, 1);
  v(0, 0) = x.value().sum();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      xn->accumulate(Matrix::Constant(xn->value.rows(), xn->value.cols(), o.grad(0, 0)));
    });
  }
  return Tensor::wrap(out);
}

Tensor mean(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v(1, 1);
  v(0, 0) = x.value().mean();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      double n = static_cast<double>(xn->value.size());
      xn->accumulate(Matrix::Constant(xn->value.rows(), xn->value.cols(), o.grad(0, 0) / n));
    });
  }
  return Tensor::wrap(out);
}

Tensor sum_rows(const Tensor& x) {
  bool rg = want_grad({&x});
  Matrix v = x.value().rowwise().sum();
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn](detail::Node& o) {
      xn->accumulate(o.grad * Matrix::Ones(1, xn->value.cols()));
    });
  }
  return Tensor::wrap(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no tensors given");
  Index rows = parts.front().rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row counts differ (" + std::to_string(rows) + " vs " +
                           std::to_string(p.rows()) + ")");
    }
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Index at = 0;
  for (const Tensor& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  bool rg = false;
  if (Tape::active().recording()) {
    for (const Tensor& p : parts) rg = rg || p.requires_grad();
  }
  auto out = make_out(std::move(v), rg);
  if (rg) {
    std::vector<detail::NodePtr> ins;
    ins.reserve(parts.size());
    for (const Tensor& p : parts) ins.push_back(p.node());
    auto ins_copy = ins;
    Tape::active().record(std::move(ins), out, [ins_copy](detail::Node& o) {
      Index at = 0;
      for (const auto& n : ins_copy) {
        if (n->requires_grad) n->accumulate(o.grad.middleCols(at, n->value.cols()));
        at += n->value.cols();
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor rows(const Tensor& x, const std::vector<Index>& idx) {
  if (idx.empty()) throw ContractError("rows: empty index list");
  for (Index i : idx) {
    if (i < 0 || i >= x.rows()) {
      throw DimensionError("rows: index " + std::to_string(i) + " out of range [0, " +
                           std::to_string(x.rows()) + ")");
    }
  }
  Matrix v(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) v.row(static_cast<Index>(j)) = x.value().row(idx[j]);
  bool rg = want_grad({&x});
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    auto idx_copy = idx;
    Tape::active().record({xn}, out, [xn, idx_copy](detail::Node& o) {
      Matrix g = Matrix::Zero(xn->value.rows(), xn->value.cols());
      for (std::size_t j = 0; j < idx_copy.size(); ++j) {
        g.row(idx_copy[j]) += o.grad.row(static_cast<Index>(j));
      }
      xn->accumulate(g);
    });
  }
  return Tensor::wrap(out);
}

Tensor scatter_sum_rows(const Tensor& x, const std::vector<Index>& idx, Index out_rows) {
  if (static_cast<Index>(idx.size()) != x.rows()) {
    throw DimensionError("scatter_sum_rows: " + std::to_string(idx.size()) + " indices for " +
                         std::to_string(x.rows()) + " rows");
  }
  if (out_rows < 1) throw DimensionError("scatter_sum_rows: output must have positive rows");
  for (Index i : idx) {
    if (i < 0 || i >= out_rows) {
      throw DimensionError("scatter_sum_rows: index " + std::to_string(i) + " out of range [0, " +
                           std::to_string(out_rows) + ")");
    }
  }
  Matrix v = Matrix::Zero(out_rows, x.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) v.row(idx[j]) += x.value().row(static_cast<Index>(j));
  bool rg = want_grad({&x});
  auto out = make_out(std::move(v), rg);
  if (rg) {
    auto xn = x.node();
    auto idx_copy = idx;
    Tape::active().record({xn}, out, [xn, idx_copy](detail::Node& o) {
      Matrix g(xn->value.rows(), xn->value.cols());
      for (std::size_t j = 0; j < idx_copy.size(); ++j) {
        g.row(static_cast<Index>(j)) = o.grad.row(idx_copy[j]);
      }
      xn->accumulate(g);
    });
  }
  return Tensor::wrap(out);
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
  if (p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(x.rows(), x.cols());
  double inv = 1.0 / (1.0 - p);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) mask(r, c) = keep(rng) ? inv : 0.0;
  }
  bool rg = want_grad({&x});
  auto out = make_out((x.value().array() * mask.array()).matrix(), rg);
  if (rg) {
    auto xn = x.node();
    Tape::active().record({xn}, out, [xn, mask](detail::Node& o) {
      xn->accumulate((o.grad.array() * mask.array()).matrix());
    });
  }
  return Tensor::wrap(out);
}

Tensor activate(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return tanh(x);
    case Activation::LeakyRelu: return leaky_relu(x);
    case Activation::SoftmaxLastAxis: return softmax_rows(x);
  }
  throw ContractError("activate: unknown activation");
}

}  // namespace kge
