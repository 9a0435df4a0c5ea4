#include "bprnn/stats.hpp"

#include "bprnn/errors.hpp"

namespace bprnn {

double mean(std::span<const double> values) {
  if (values.empty()) throw ParameterError("mean: empty input");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double mean(const Tensor2D& x) { return mean(x.values()); }

double variance(std::span<const double> values) {
  if (values.size() < 2) throw ParameterError("variance: need at least two values");
  const double m = mean(values);
  double sum = 0.0;
  for (double v : values) {
    const double d = v - m;
    sum += d * d;
  }
  return sum / static_cast<double>(values.size() - 1);
}

double variance(const Tensor2D& x) { return variance(x.values()); }

}  // namespace bprnn
