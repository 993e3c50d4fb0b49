#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "kge/errors.hpp"

namespace kge {

// Row-major so checkpoints can be written as flat row-major blobs without a
// transpose on either side.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool grad_set = false;

  void accumulate(const Matrix& g);
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

// Value-semantic handle to a node in the computation graph. Rank is always 2;
// scalars are 1x1. Copying a Tensor aliases the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor constant(Index rows, Index cols, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor wrap(detail::NodePtr n);

  bool defined() const { return n_ != nullptr; }
  const Matrix& value() const;
  // Direct write access to a leaf's storage, for initialisation only.
  Matrix& raw_value();
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  double item() const;

  const detail::NodePtr& node() const;

 private:
  detail::NodePtr n_;
};

// Gradients produced by one backward pass, keyed by parameter identity.
class GradientMap {
 public:
  bool contains(const Tensor& t) const;
  const Matrix& at(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

  void insert(const detail::Node* n, Matrix g) { grads_[n] = std::move(g); }

 private:
  std::unordered_map<const detail::Node*, Matrix> grads_;
};

// Thread-local record of operations in execution order. Operations append
// themselves while recording is enabled; backward() replays them in reverse.
class Tape {
 public:
  static Tape& active();

  bool recording() const { return pause_depth_ == 0; }
  std::size_t size() const { return ops_.size(); }
  void clear();

  void record(std::vector<detail::NodePtr> inputs, detail::NodePtr out,
              std::function<void(detail::Node&)> pull);

  // RAII guard that suspends recording, for evaluation passes.
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;
  };

 private:
  struct Op {
    std::vector<detail::NodePtr> inputs;
    detail::NodePtr out;
    std::function<void(detail::Node&)> pull;
  };

  std::vector<Op> ops_;
  int pause_depth_ = 0;

  friend GradientMap backward(const Tensor& loss);
};

// Reverse pass from a 1x1 loss over the active tape. Returns gradients for
// every node that requires them, then resets the tape, so a fresh forward
// pass is needed before calling it again.
GradientMap backward(const Tensor& loss);

}  // namespace kge
