#pragma once

#include <map>
#include <string>
#include <vector>

#include "kge/tensor.hpp"

namespace kge {

// A trainable tensor with a stable name. Names key optimiser moments and
// checkpoint entries, so they must be unique within one model.
struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  struct Moments {
    Matrix m;
    Matrix v;
  };
  std::map<std::string, Moments> moments;
};

// One Adam update with bias correction. Parameters are rebound to fresh leaf
// tensors holding the updated values, so the previous forward graph is left
// untouched. Parameters without an entry in grads get a zero gradient (their
// moments still decay). Throws TrainingError naming the parameter if its
// gradient or updated value is non-finite.
void adam_step(std::vector<NamedParam>& params, const GradientMap& grads, AdamState& state);

}  // namespace kge
