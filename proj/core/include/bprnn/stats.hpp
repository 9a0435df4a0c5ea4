#pragma once

#include <span>

#include "bprnn/tensor.hpp"

namespace bprnn {

// Arithmetic mean; needs at least one value.
double mean(std::span<const double> values);
double mean(const Tensor2D& x);

// Unbiased sample variance (divides by n - 1); needs at least two values.
double variance(std::span<const double> values);
double variance(const Tensor2D& x);

}  // namespace bprnn
