#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "bprnn/activation.hpp"
#include "bprnn/random.hpp"
#include "bprnn/stack.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

struct LsuvConfig {
  double target_variance = 1.0;
  double tolerance = 0.02;
  std::size_t max_iterations = 50;
  std::size_t probe_batch = 256;
  // Measure the variance of f(W h + U x + b) before the skip term is added,
  // instead of the full layer output.
  bool measure_before_skip = false;
  // Standard: multiply W and U by sqrt(target / v).
  // SkipCompensated: multiply by sqrt((target - v0) / (v - v0)), where v0 is
  // the variance with W = U = 0 (the skip and bias contribution alone). With
  // v0 = 0, i.e. every layer without a skip, this is the standard update.
  enum class Update { Standard, SkipCompensated };
  Update update = Update::SkipCompensated;

  void validate() const;

  friend bool operator==(const LsuvConfig&, const LsuvConfig&) = default;
};

struct LsuvLayerReport {
  std::size_t layer_index = 0;  // 1-based
  std::size_t iterations = 0;   // number of rescalings applied
  double final_variance = 0.0;
  double w_scale = 1.0;  // cumulative factor applied to W
  double u_scale = 1.0;  // cumulative factor applied to U (always equals w_scale)
};

// Recurrent LSUV. Walks the layers bottom-up; each layer sees N(0, 1)
// synthetic recurrent input and the outputs of the already initialized
// layers below (layer 1 sees N(0, 1) embedding samples). W and U are
// rescaled together (see LsuvConfig::Update) until the output variance v is
// within tolerance. Biases are left untouched.
//
// Throws DegenerateLayerError on zero variance and InitializationError when
// max_iterations is exhausted.
std::vector<LsuvLayerReport> lsuv_init_stack(Model& model, const LsuvConfig& cfg, Rng& rng);

// Single map x -> f(W x): rescales W until var(f(W x)) is within tolerance of
// the target. Returns the number of rescalings.
std::size_t lsuv_single_layer(const ActivationSpec& activation, Tensor2D& W, const Tensor2D& x,
                              const LsuvConfig& cfg);

// W' = W sqrt(2 gamma), U' = U sqrt(2 (1 - gamma)); gamma = 0.5 is the identity.
std::pair<Tensor2D, Tensor2D> gamma_rebalance(const Tensor2D& W, const Tensor2D& U, double gamma);
void gamma_rebalance(Model& model, double gamma);

// CSV: layer_index,iterations,final_variance,w_scale,u_scale
void write_lsuv_report_csv(std::ostream& out, const std::vector<LsuvLayerReport>& reports);

}  // namespace bprnn
