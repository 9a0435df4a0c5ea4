#include "bprnn/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

std::vector<Tensor2D*> trainable_tensors(Model& model) {
  std::vector<Tensor2D*> out;
  for (auto& p : model.layers) {
    out.push_back(&p.W);
    out.push_back(&p.U);
    out.push_back(&p.b);
  }
  out.push_back(&model.head.V);
  out.push_back(&model.head.c);
  return out;
}

std::vector<const Tensor2D*> trainable_tensors(const Model& model) {
  std::vector<const Tensor2D*> out;
  for (const auto& p : model.layers) {
    out.push_back(&p.W);
    out.push_back(&p.U);
    out.push_back(&p.b);
  }
  out.push_back(&model.head.V);
  out.push_back(&model.head.c);
  return out;
}

std::vector<const Tensor2D*> gradient_tensors(const Gradients& grads) {
  std::vector<const Tensor2D*> out;
  for (const auto& p : grads.layers) {
    out.push_back(&p.W);
    out.push_back(&p.U);
    out.push_back(&p.b);
  }
  out.push_back(&grads.V);
  out.push_back(&grads.c);
  return out;
}

AdamState make_adam_state(const Model& model, double beta1, double beta2, double epsilon) {
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  for (const Tensor2D* p : trainable_tensors(model)) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_update(const std::vector<Tensor2D*>& params, const std::vector<const Tensor2D*>& grads,
                 AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ParameterError(fmt::format("adam: learning rate must be positive, got {}", lr));
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ParameterError(fmt::format("adam: {} parameters, {} gradients, {} moment slots",
                                     params.size(), grads.size(), state.m.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(*grads[k]) || !params[k]->same_shape(state.m[k])) {
      throw ParameterError(fmt::format("adam: tensor {} shape {} vs gradient {}", k,
                                       params[k]->shape_string(), grads[k]->shape_string()));
    }
  }

  state.step += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k]->values();
    const auto g = grads[k]->values();
    auto m = state.m[k].values();
    auto v = state.v[k].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_update(Model& model, const Gradients& grads, AdamState& state, double lr) {
  adam_update(trainable_tensors(model), gradient_tensors(grads), state, lr);
}

}  // namespace bprnn
