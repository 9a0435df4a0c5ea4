#include "bprnn/lsuv.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "bprnn/errors.hpp"
#include "bprnn/stats.hpp"

namespace bprnn {

namespace {

struct LayerOutput {
  Tensor2D h;       // full layer output, skip included
  double variance;  // the variance LSUV steers
};

// f(scale * base + b) [+ skip]; base = W h_rec + U x for the unscaled weights.
LayerOutput evaluate_layer(const ActivationSpec& f, const Tensor2D& base, double scale,
                           const Tensor2D& bias, const Tensor2D* skip, double skip_scale,
                           bool measure_before_skip) {
  Tensor2D h(base.rows(), base.cols());
  if (!bias.empty()) kernels::add_column_broadcast(h, bias);
  kernels::axpy(h, base, scale);
  apply_inplace(f, h);
  double v = 0.0;
  if (measure_before_skip || skip == nullptr) v = variance(h);
  if (skip != nullptr) {
    kernels::axpy(h, *skip, skip_scale);
    if (!measure_before_skip) v = variance(h);
  }
  return {std::move(h), v};
}

double rescale_factor(const LsuvConfig& cfg, double v, double v0) {
  if (cfg.update == LsuvConfig::Update::SkipCompensated && v0 > 0.0 &&
      v0 < cfg.target_variance && v > v0) {
    return std::sqrt((cfg.target_variance - v0) / (v - v0));
  }
  return std::sqrt(cfg.target_variance / v);
}

void check_measured(double v, std::size_t layer) {
  if (!std::isfinite(v)) {
    throw InitializationError(
        fmt::format("lsuv: layer {} produced non-finite variance", layer), layer, v);
  }
  if (v <= 0.0) {
    throw DegenerateLayerError(fmt::format("lsuv: layer {} output has zero variance", layer),
                               layer, v);
  }
}

}  // namespace

void LsuvConfig::validate() const {
  if (!(target_variance > 0.0) || !(tolerance > 0.0) || !(tolerance < target_variance)) {
    throw ParameterError(fmt::format("lsuv: need 0 < tolerance ({}) < target_variance ({})",
                                     tolerance, target_variance));
  }
  if (max_iterations < 1) throw ParameterError("lsuv: max_iterations must be >= 1");
  if (probe_batch < 2) throw ParameterError("lsuv: probe_batch must be >= 2");
}

std::vector<LsuvLayerReport> lsuv_init_stack(Model& model, const LsuvConfig& cfg, Rng& rng) {
  cfg.validate();
  model.validate();
  const StackConfig& stack = model.config;
  const std::size_t batch = cfg.probe_batch;

  // outputs[j] = v_j on the probe batch; outputs[0] is the embedding sample.
  std::vector<Tensor2D> outputs;
  outputs.reserve(stack.depth + 1);
  outputs.push_back(sample_gaussian(rng, stack.embedding_dim, batch, 0.0, 1.0));

  std::vector<LsuvLayerReport> reports;
  for (std::size_t i = 1; i <= stack.depth; ++i) {
    LayerParams& p = model.layer(i);
    const Tensor2D recurrent = sample_gaussian(rng, stack.width, batch, 0.0, 1.0);
    const Tensor2D& input = outputs[i - 1];
    const Tensor2D* skip = stack.has_skip(i) ? &outputs[i - stack.skip_period] : nullptr;

    Tensor2D base(stack.width, batch);
    kernels::gemm_accumulate(base, p.W, Transpose::No, recurrent, Transpose::No);
    kernels::gemm_accumulate(base, p.U, Transpose::No, input, Transpose::No);

    LsuvLayerReport report;
    report.layer_index = i;
    double scale = 1.0;
    const double floor_variance = evaluate_layer(stack.activation, base, 0.0, p.b, skip,
                                                 stack.skip_scale, cfg.measure_before_skip)
                                      .variance;
    LayerOutput out = evaluate_layer(stack.activation, base, scale, p.b, skip, stack.skip_scale,
                                     cfg.measure_before_skip);
    check_measured(out.variance, i);
    while (std::abs(out.variance - cfg.target_variance) > cfg.tolerance) {
      if (report.iterations == cfg.max_iterations) {
        throw InitializationError(
            fmt::format("lsuv: layer {} did not converge after {} iterations (variance {})", i,
                        cfg.max_iterations, out.variance),
            i, out.variance);
      }
      scale *= rescale_factor(cfg, out.variance, floor_variance);
      ++report.iterations;
      out = evaluate_layer(stack.activation, base, scale, p.b, skip, stack.skip_scale,
                           cfg.measure_before_skip);
      check_measured(out.variance, i);
    }

    if (report.iterations > 0) {
      for (double& w : p.W.values()) w *= scale;
      for (double& u : p.U.values()) u *= scale;
      // Re-measure with the rescaled weights so the report and the activations
      // passed upward come from the stored parameters.
      Tensor2D rescaled(stack.width, batch);
      kernels::gemm_accumulate(rescaled, p.W, Transpose::No, recurrent, Transpose::No);
      kernels::gemm_accumulate(rescaled, p.U, Transpose::No, input, Transpose::No);
      out = evaluate_layer(stack.activation, rescaled, 1.0, p.b, skip, stack.skip_scale,
                           cfg.measure_before_skip);
      check_measured(out.variance, i);
    }
    report.final_variance = out.variance;
    report.w_scale = scale;
    report.u_scale = scale;
    reports.push_back(report);
    outputs.push_back(std::move(out.h));
  }
  return reports;
}

std::size_t lsuv_single_layer(const ActivationSpec& activation, Tensor2D& W, const Tensor2D& x,
                              const LsuvConfig& cfg) {
  cfg.validate();
  const Tensor2D base = matmul(W, x);
  const Tensor2D no_bias;
  double scale = 1.0;
  std::size_t iterations = 0;
  LayerOutput out = evaluate_layer(activation, base, scale, no_bias, nullptr, 0.0, false);
  check_measured(out.variance, 1);
  while (std::abs(out.variance - cfg.target_variance) > cfg.tolerance) {
    if (iterations == cfg.max_iterations) {
      throw InitializationError(
          fmt::format("lsuv: map did not converge after {} iterations (variance {})",
                      cfg.max_iterations, out.variance),
          1, out.variance);
    }
    scale *= std::sqrt(cfg.target_variance / out.variance);
    ++iterations;
    out = evaluate_layer(activation, base, scale, no_bias, nullptr, 0.0, false);
    check_measured(out.variance, 1);
  }
  if (iterations > 0) {
    for (double& w : W.values()) w *= scale;
  }
  return iterations;
}

std::pair<Tensor2D, Tensor2D> gamma_rebalance(const Tensor2D& W, const Tensor2D& U, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ParameterError(fmt::format("gamma_rebalance: gamma {} outside [0, 1]", gamma));
  }
  if (gamma == 0.5) return {W, U};
  return {scale(W, std::sqrt(2.0 * gamma)), scale(U, std::sqrt(2.0 * (1.0 - gamma)))};
}

void gamma_rebalance(Model& model, double gamma) {
  for (auto& p : model.layers) {
    auto [w, u] = gamma_rebalance(p.W, p.U, gamma);
    p.W = std::move(w);
    p.U = std::move(u);
  }
}

void write_lsuv_report_csv(std::ostream& out, const std::vector<LsuvLayerReport>& reports) {
  out << "layer_index,iterations,final_variance,w_scale,u_scale\n";
  for (const auto& r : reports) {
    out << fmt::format("{},{},{},{},{}\n", r.layer_index, r.iterations, r.final_variance,
                       r.w_scale, r.u_scale);
  }
}

}  // namespace bprnn
