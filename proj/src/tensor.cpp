#include "kge/tensor.hpp"

#include <utility>

namespace kge {

namespace detail {

void Node::accumulate(const Matrix& g) {
  if (!grad_set) {
    grad = g;
    grad_set = true;
  } else {
    grad += g;
  }
}

}  // namespace detail

Tensor::Tensor(Matrix value, bool requires_grad) {
  if (value.rows() < 1 || value.cols() < 1) {
    throw DimensionError("tensor dimensions must be positive, got " +
                         std::to_string(value.rows()) + "x" + std::to_string(value.cols()));
  }
  n_ = std::make_shared<detail::Node>();
  n_->value = std::move(value);
  n_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::constant(Index rows, Index cols, double v, bool requires_grad) {
  return Tensor(Matrix::Constant(rows, cols, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return constant(1, 1, v, requires_grad);
}

Tensor Tensor::wrap(detail::NodePtr n) {
  Tensor t;
  t.n_ = std::move(n);
  return t;
}

const Matrix& Tensor::value() const {
  if (!n_) throw ContractError("use of default-constructed tensor");
  return n_->value;
}

Matrix& Tensor::raw_value() {
  if (!n_) throw ContractError("use of default-constructed tensor");
  return n_->value;
}

bool Tensor::requires_grad() const {
  return n_ && n_->requires_grad;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ContractError("item() needs a 1x1 tensor, got " + std::to_string(rows()) + "x" +
                        std::to_string(cols()));
  }
  return value()(0, 0);
}

const detail::NodePtr& Tensor::node() const {
  if (!n_) throw ContractError("use of default-constructed tensor");
  return n_;
}

bool GradientMap::contains(const Tensor& t) const {
  return grads_.count(t.node().get()) > 0;
}

const Matrix& GradientMap::at(const Tensor& t) const {
  auto it = grads_.find(t.node().get());
  if (it == grads_.end()) {
    throw ContractError("no gradient recorded for this tensor");
  }
  return it->second;
}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::clear() { ops_.clear(); }

void Tape::record(std::vector<detail::NodePtr> inputs, detail::NodePtr out,
                  std::function<void(detail::Node&)> pull) {
  ops_.push_back(Op{std::move(inputs), std::move(out), std::move(pull)});
}

Tape::Pause::Pause() { ++Tape::active().pause_depth_; }
Tape::Pause::~Pause() { --Tape::active().pause_depth_; }

GradientMap backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward requires a 1x1 loss tensor");
  }
  Tape& tape = Tape::active();
  if (tape.ops_.empty()) {
    throw ContractError("backward called on an empty tape; run a forward pass first");
  }

  loss.node()->grad = Matrix::Ones(1, 1);
  loss.node()->grad_set = true;

  for (auto it = tape.ops_.rbegin(); it != tape.ops_.rend(); ++it) {
    if (it->out->grad_set) {
      it->pull(*it->out);
    }
  }

  GradientMap grads;
  auto harvest = [&grads](const detail::NodePtr& n) {
    if (n->requires_grad && n->grad_set) {
      grads.insert(n.get(), std::move(n->grad));
    }
    n->grad = Matrix();
    n->grad_set = false;
  };
  for (auto& op : tape.ops_) {
    for (auto& in : op.inputs) harvest(in);
    harvest(op.out);
  }
  if (loss.node()->grad_set) harvest(loss.node());

  tape.clear();
  return grads;
}

}  // namespace kge
