#include "bprnn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "bprnn/errors.hpp"
#include "bprnn/random.hpp"
#include "bprnn/stats.hpp"

namespace bprnn {

void DynamicsConfig::validate() const {
  if (width < 2 || width % 2 != 0) {
    throw ParameterError(fmt::format("dynamics: width must be even and >= 2, got {}", width));
  }
  if (iterations < 1) throw ParameterError("dynamics: iterations must be >= 1");
  if (runs < 1) throw ParameterError("dynamics: runs must be >= 1");
  activation.validate();
  lsuv.validate();
}

MapTrace iterate_map(const ActivationSpec& activation, const Tensor2D& W, const Tensor2D& x1,
                     std::size_t iterations) {
  if (W.rows() != W.cols() || W.cols() != x1.rows()) {
    throw ShapeError(fmt::format("iterate_map: W {} and x {} do not match", W.shape_string(),
                                 x1.shape_string()));
  }
  MapTrace trace;
  Tensor2D x = x1;
  for (std::size_t k = 1; k <= iterations; ++k) {
    if (k > 1) {
      Tensor2D next(x.rows(), x.cols());
      kernels::gemm_accumulate(next, W, Transpose::No, x, Transpose::No);
      apply_inplace(activation, next);
      x = std::move(next);
    }
    const double m = mean(x);
    const double v = variance(x);
    if (!all_finite(x.values()) || !std::isfinite(m) || !std::isfinite(v)) {
      trace.diverged = true;
      trace.diverged_at = k;
      break;
    }
    trace.means.push_back(m);
    trace.variances.push_back(v);
  }
  return trace;
}

namespace {

MapTrace single_run(const DynamicsConfig& cfg, std::size_t run) {
  Rng rng = Rng(cfg.seed).split(run);
  const Tensor2D x1 = sample_gaussian(rng, cfg.width, 1, 0.0, 1.0);
  Tensor2D W =
      sample_gaussian(rng, cfg.width, cfg.width, 0.0, 1.0 / std::sqrt(double(cfg.width)));
  lsuv_single_layer(cfg.activation, W, x1, cfg.lsuv);
  return iterate_map(cfg.activation, W, x1, cfg.iterations);
}

}  // namespace

DynamicsResult run_dynamics(const DynamicsConfig& cfg) {
  cfg.validate();
  std::vector<MapTrace> traces(cfg.runs);
  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, cfg.runs);
  if (workers == 1) {
    for (std::size_t r = 0; r < cfg.runs; ++r) traces[r] = single_run(cfg, r);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < cfg.runs; r += workers) traces[r] = single_run(cfg, r);
      });
    }
  }

  DynamicsResult result;
  for (const auto& t : traces) result.diverged_runs += t.diverged ? 1 : 0;
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    DynamicsRow row;
    row.iteration = k + 1;
    // Summed in run order so the result does not depend on scheduling.
    for (const auto& t : traces) {
      if (k < t.means.size()) {
        row.mean_avg += t.means[k];
        row.var_avg += t.variances[k];
        ++row.runs;
      }
    }
    if (row.runs == 0) {
      result.truncated = true;
      break;
    }
    row.mean_avg /= static_cast<double>(row.runs);
    row.var_avg /= static_cast<double>(row.runs);
    result.rows.push_back(row);
  }
  return result;
}

void write_dynamics_csv(std::ostream& out, const DynamicsResult& result) {
  out << "iteration,mean_avg,var_avg\n";
  for (const auto& r : result.rows) {
    out << fmt::format("{},{},{}\n", r.iteration, r.mean_avg, r.var_avg);
  }
}

}  // namespace bprnn
