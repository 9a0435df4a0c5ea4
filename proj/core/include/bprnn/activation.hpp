#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "bprnn/random.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

enum class ActivationBase { ReLU, LeakyReLU, ELU, SELU };

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

// A ReLU-family function plus the bipolar flag.
//
// With `bipolar` set, feature index i of every sample uses f(x) when i is even
// and -f(-x) when i is odd. Features are tensor rows, so parity restarts for
// every sample (column) and does not depend on batch layout.
struct ActivationSpec {
  ActivationBase base = ActivationBase::ReLU;
  double leaky_slope = 0.01;
  double elu_alpha = 1.0;  // ELU alpha, also the SELU alpha
  double selu_lambda = kSeluLambda;
  bool bipolar = false;

  static ActivationSpec relu(bool bipolar = false);
  static ActivationSpec leaky_relu(double slope = 0.01, bool bipolar = false);
  static ActivationSpec elu(double alpha = 1.0, bool bipolar = false);
  static ActivationSpec selu(bool bipolar = false);

  // Short names: relu, lrelu, elu, selu, with a "b" prefix for bipolar
  // (brelu, blrelu, belu, bselu). Uses the default constants.
  static ActivationSpec parse(std::string_view name);
  [[nodiscard]] std::string name() const;

  void validate() const;

  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

// Base function and its derivative on scalars. `left_at_zero` selects the
// left-hand derivative at exactly 0; otherwise the right-hand one is used.
double base_value(const ActivationSpec& spec, double x) noexcept;
double base_derivative(const ActivationSpec& spec, double x, bool left_at_zero = false) noexcept;

// Elementwise value / derivative for a feature with the given index.
double activate(const ActivationSpec& spec, double x, std::size_t feature) noexcept;
double activate_derivative(const ActivationSpec& spec, double x, std::size_t feature) noexcept;

Tensor2D apply(const ActivationSpec& spec, const Tensor2D& x);
Tensor2D derivative(const ActivationSpec& spec, const Tensor2D& x);

// In-place variants for the RNN hot path (no finiteness check).
void apply_inplace(const ActivationSpec& spec, Tensor2D& x);
// grad *= f'(pre), elementwise.
void multiply_by_derivative(const ActivationSpec& spec, const Tensor2D& pre, Tensor2D& grad);

// Draws x ~ N(input_mean, 1) of even length n, applies `spec` and returns the
// mean of the output.
double mean_shift_probe(const ActivationSpec& spec, double input_mean, std::size_t n, Rng& rng);

}  // namespace bprnn
