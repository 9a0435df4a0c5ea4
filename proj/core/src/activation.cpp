#include "bprnn/activation.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "bprnn/errors.hpp"
#include "bprnn/stats.hpp"

namespace bprnn {

ActivationSpec ActivationSpec::relu(bool bipolar) {
  ActivationSpec s;
  s.base = ActivationBase::ReLU;
  s.bipolar = bipolar;
  return s;
}

ActivationSpec ActivationSpec::leaky_relu(double slope, bool bipolar) {
  ActivationSpec s;
  s.base = ActivationBase::LeakyReLU;
  s.leaky_slope = slope;
  s.bipolar = bipolar;
  return s;
}

ActivationSpec ActivationSpec::elu(double alpha, bool bipolar) {
  ActivationSpec s;
  s.base = ActivationBase::ELU;
  s.elu_alpha = alpha;
  s.bipolar = bipolar;
  return s;
}

ActivationSpec ActivationSpec::selu(bool bipolar) {
  ActivationSpec s;
  s.base = ActivationBase::SELU;
  s.elu_alpha = kSeluAlpha;
  s.selu_lambda = kSeluLambda;
  s.bipolar = bipolar;
  return s;
}

ActivationSpec ActivationSpec::parse(std::string_view name) {
  bool bipolar = false;
  std::string_view base = name;
  // "belu" / "brelu" / "blrelu" / "bselu"
  if (base.size() > 1 && base.front() == 'b') {
    bipolar = true;
    base.remove_prefix(1);
  }
  if (base == "relu") return relu(bipolar);
  if (base == "lrelu") return leaky_relu(0.01, bipolar);
  if (base == "elu") return elu(1.0, bipolar);
  if (base == "selu") return selu(bipolar);
  throw ParameterError(fmt::format("unknown activation '{}'", name));
}

std::string ActivationSpec::name() const {
  std::string out = bipolar ? "b" : "";
  switch (base) {
    case ActivationBase::ReLU: return out + "relu";
    case ActivationBase::LeakyReLU: return out + "lrelu";
    case ActivationBase::ELU: return out + "elu";
    case ActivationBase::SELU: return out + "selu";
  }
  return out;
}

void ActivationSpec::validate() const {
  if (!(leaky_slope >= 0.0 && leaky_slope <= 1.0)) {
    throw ParameterError(fmt::format("leaky slope {} outside [0, 1]", leaky_slope));
  }
  if (!(elu_alpha > 0.0) || !std::isfinite(elu_alpha)) {
    throw ParameterError(fmt::format("elu alpha must be positive, got {}", elu_alpha));
  }
  if (!(selu_lambda > 0.0) || !std::isfinite(selu_lambda)) {
    throw ParameterError(fmt::format("selu lambda must be positive, got {}", selu_lambda));
  }
}

double base_value(const ActivationSpec& spec, double x) noexcept {
  switch (spec.base) {
    case ActivationBase::ReLU: return x > 0.0 ? x : 0.0;
    case ActivationBase::LeakyReLU: return x > 0.0 ? x : spec.leaky_slope * x;
    case ActivationBase::ELU: return x > 0.0 ? x : spec.elu_alpha * std::expm1(x);
    case ActivationBase::SELU:
      return spec.selu_lambda * (x > 0.0 ? x : spec.elu_alpha * std::expm1(x));
  }
  return x;
}

double base_derivative(const ActivationSpec& spec, double x, bool left_at_zero) noexcept {
  const bool positive = x > 0.0 || (x == 0.0 && !left_at_zero);
  switch (spec.base) {
    case ActivationBase::ReLU: return positive ? 1.0 : 0.0;
    case ActivationBase::LeakyReLU: return positive ? 1.0 : spec.leaky_slope;
    case ActivationBase::ELU: return positive ? 1.0 : spec.elu_alpha * std::exp(x);
    case ActivationBase::SELU:
      return spec.selu_lambda * (positive ? 1.0 : spec.elu_alpha * std::exp(x));
  }
  return 1.0;
}

double activate(const ActivationSpec& spec, double x, std::size_t feature) noexcept {
  if (spec.bipolar && (feature % 2) != 0) return -base_value(spec, -x);
  return base_value(spec, x);
}

double activate_derivative(const ActivationSpec& spec, double x, std::size_t feature) noexcept {
  // d/dx[-f(-x)] = f'(-x); at x = 0 the right-hand limit of that is f'(0-).
  // Odd rows mirror the even convention: d/dx[-f(-x)] = f'(-x), with f'(0)
  // taken from the right as on even rows.
  if (spec.bipolar && (feature % 2) != 0) return base_derivative(spec, -x);
  return base_derivative(spec, x);
}

void apply_inplace(const ActivationSpec& spec, Tensor2D& x) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    if (spec.bipolar && (r % 2) != 0) {
      for (double& v : row) v = -base_value(spec, -v);
    } else {
      for (double& v : row) v = base_value(spec, v);
    }
  }
}

void multiply_by_derivative(const ActivationSpec& spec, const Tensor2D& pre, Tensor2D& grad) {
  if (!pre.same_shape(grad)) {
    throw ShapeError(fmt::format("activation derivative: {} vs {}", pre.shape_string(),
                                 grad.shape_string()));
  }
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    const auto in = pre.row(r);
    auto g = grad.row(r);
    if (spec.bipolar && (r % 2) != 0) {
      for (std::size_t c = 0; c < in.size(); ++c) g[c] *= base_derivative(spec, -in[c]);
    } else {
      for (std::size_t c = 0; c < in.size(); ++c) g[c] *= base_derivative(spec, in[c]);
    }
  }
}

Tensor2D apply(const ActivationSpec& spec, const Tensor2D& x) {
  spec.validate();
  require_finite(x, "activation input");
  Tensor2D out = x;
  apply_inplace(spec, out);
  require_finite(out, "activation output");
  return out;
}

Tensor2D derivative(const ActivationSpec& spec, const Tensor2D& x) {
  spec.validate();
  require_finite(x, "activation derivative input");
  Tensor2D out(x.rows(), x.cols(), 1.0);
  multiply_by_derivative(spec, x, out);
  return out;
}

double mean_shift_probe(const ActivationSpec& spec, double input_mean, std::size_t n, Rng& rng) {
  if (n < 2 || n % 2 != 0) {
    throw ParameterError(fmt::format("mean_shift_probe: n must be even and >= 2, got {}", n));
  }
  spec.validate();
  // Streamed: n can be large and the samples are not needed afterwards.
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += activate(spec, input_mean + rng.normal(), i);
  return sum / static_cast<double>(n);
}

}  // namespace bprnn
