#include "kge/adam.hpp"

#include <cmath>

namespace kge {

void adam_step(std::vector<NamedParam>& params, const GradientMap& grads, AdamState& state) {
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (NamedParam& p : params) {
    if (p.tensor == nullptr || !p.tensor->defined()) {
      throw ContractError("adam_step: parameter '" + p.name + "' is unbound");
    }
    const Matrix& value = p.tensor->value();
    Matrix g;
    if (grads.contains(*p.tensor)) {
      g = grads.at(*p.tensor);
      if (g.rows() != value.rows() || g.cols() != value.cols()) {
        throw DimensionError("adam_step: gradient shape mismatch for '" + p.name + "'");
      }
      if (!g.allFinite()) {
        throw TrainingError("non-finite gradient for parameter '" + p.name + "'");
      }
    } else {
      g = Matrix::Zero(value.rows(), value.cols());
    }

    auto [it, inserted] = state.moments.try_emplace(p.name);
    AdamState::Moments& mo = it->second;
    if (inserted) {
      mo.m = Matrix::Zero(value.rows(), value.cols());
      mo.v = Matrix::Zero(value.rows(), value.cols());
    } else if (mo.m.rows() != value.rows() || mo.m.cols() != value.cols()) {
      throw DimensionError("adam_step: stale moment shape for '" + p.name + "'");
    }

    mo.m = state.beta1 * mo.m + (1.0 - state.beta1) * g;
    mo.v = (state.beta2 * mo.v.array() + (1.0 - state.beta2) * g.array().square()).matrix();

    Matrix m_hat = mo.m / bc1;
    Matrix v_hat = mo.v / bc2;
    Matrix updated =
        value.array() - state.lr * m_hat.array() / (v_hat.array().sqrt() + state.epsilon);
    if (!updated.allFinite()) {
      throw TrainingError("non-finite value for parameter '" + p.name + "' after update");
    }
    *p.tensor = Tensor(std::move(updated), true);
  }
}

}  // namespace kge
