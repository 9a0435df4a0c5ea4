#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bprnn/activation.hpp"
#include "bprnn/lsuv.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

// Iterates x_{k+1} = f(W x_k) with a single W per run.
struct DynamicsConfig {
  std::size_t width = 128;
  std::size_t iterations = 48;
  std::size_t runs = 50;
  ActivationSpec activation = ActivationSpec::relu(true);
  std::uint64_t seed = 42;
  LsuvConfig lsuv;  // sets the scale of W so var(f(W x_1)) ~ 1
  std::size_t threads = 1;

  void validate() const;
};

// mean / variance of x_1 .. x_n for one run. A run that overflows stops at
// the first non-finite iterate.
struct MapTrace {
  std::vector<double> means;
  std::vector<double> variances;
  bool diverged = false;
  std::size_t diverged_at = 0;  // 1-based iteration of the first non-finite iterate
};

MapTrace iterate_map(const ActivationSpec& activation, const Tensor2D& W, const Tensor2D& x1,
                     std::size_t iterations);

struct DynamicsRow {
  std::size_t iteration = 0;  // 1-based; iteration 1 is the raw N(0, 1) draw
  double mean_avg = 0.0;
  double var_avg = 0.0;
  std::size_t runs = 0;  // runs still finite at this iteration
};

struct DynamicsResult {
  std::vector<DynamicsRow> rows;
  std::size_t diverged_runs = 0;
  bool truncated = false;  // every run diverged before the last iteration
};

// Per run r (child generator r of the seed): x_1 ~ N(0, 1), W ~ N(0, 1/width)
// rescaled by single-layer LSUV on x_1, then iterate. Averages across runs are
// identical whatever the thread count.
DynamicsResult run_dynamics(const DynamicsConfig& cfg);

// CSV: iteration,mean_avg,var_avg
void write_dynamics_csv(std::ostream& out, const DynamicsResult& result);

}  // namespace bprnn
