#include "bprnn/stack.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

std::size_t StackConfig::block_last(std::size_t block) const noexcept {
  return std::min((block + 1) * skip_period, depth);
}

void StackConfig::validate() const {
  if (depth == 0 || width == 0 || embedding_dim == 0 || vocab_size == 0) {
    throw ParameterError(fmt::format(
        "stack: depth, width, embedding_dim and vocab_size must be positive "
        "(got {}, {}, {}, {})",
        depth, width, embedding_dim, vocab_size));
  }
  if (skip_period == 0) throw ParameterError("stack: skip_period must be positive");
  if (!(skip_scale > 0.0 && skip_scale <= 1.0)) {
    throw ParameterError(fmt::format("stack: skip_scale {} outside (0, 1]", skip_scale));
  }
  if (has_skip(skip_period) && skip_period <= depth && embedding_dim != width) {
    throw ParameterError(
        fmt::format("stack: the skip into layer {} reads the embedding, so embedding_dim ({}) "
                    "must equal width ({})",
                    skip_period, embedding_dim, width));
  }
  activation.validate();
}

void Model::validate() const {
  config.validate();
  if (layers.size() != config.depth) {
    throw ShapeError(
        fmt::format("model has {} layers, config says {}", layers.size(), config.depth));
  }
  const std::size_t h = config.width;
  for (std::size_t i = 1; i <= config.depth; ++i) {
    const auto& p = layer(i);
    const std::size_t in = config.input_dim(i);
    if (p.W.rows() != h || p.W.cols() != h || p.U.rows() != h || p.U.cols() != in ||
        p.b.rows() != h || p.b.cols() != 1) {
      throw ShapeError(fmt::format("layer {}: W {} U {} b {} inconsistent with width {} input {}",
                                   i, p.W.shape_string(), p.U.shape_string(),
                                   p.b.shape_string(), h, in));
    }
    require_finite(p.W, "W");
    require_finite(p.U, "U");
    require_finite(p.b, "b");
  }
  const std::size_t v = config.vocab_size;
  if (head.V.rows() != v || head.V.cols() != h || head.c.rows() != v || head.c.cols() != 1 ||
      head.embedding.rows() != config.embedding_dim || head.embedding.cols() != v) {
    throw ShapeError(fmt::format("head: V {} c {} embedding {} inconsistent with config",
                                 head.V.shape_string(), head.c.shape_string(),
                                 head.embedding.shape_string()));
  }
  require_finite(head.V, "V");
  require_finite(head.c, "c");
  require_finite(head.embedding, "embedding");
}

Tensor2D orthonormal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  // Modified Gram-Schmidt over the shorter dimension.
  const bool by_rows = rows <= cols;
  const std::size_t count = by_rows ? rows : cols;
  const std::size_t len = by_rows ? cols : rows;
  std::vector<std::vector<double>> basis;
  basis.reserve(count);
  while (basis.size() < count) {
    std::vector<double> v(len);
    for (double& x : v) x = rng.normal();
    for (const auto& q : basis) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += v[k] * q[k];
      for (std::size_t k = 0; k < len; ++k) v[k] -= dot * q[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-10) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  // Unit vectors of length `len` have entries of variance ~1/len; rescale to 1/cols.
  const double gain = std::sqrt(static_cast<double>(len) / static_cast<double>(cols));
  Tensor2D out(rows, cols);
  for (std::size_t a = 0; a < count; ++a) {
    for (std::size_t k = 0; k < len; ++k) {
      if (by_rows) {
        out(a, k) = gain * basis[a][k];
      } else {
        out(k, a) = gain * basis[a][k];
      }
    }
  }
  return out;
}

Model make_model(const StackConfig& config, Rng& rng, PreInit init) {
  config.validate();
  Model model;
  model.config = config;
  model.layers.reserve(config.depth);
  const std::size_t h = config.width;
  for (std::size_t i = 1; i <= config.depth; ++i) {
    const std::size_t in = config.input_dim(i);
    LayerParams p;
    if (init == PreInit::Orthonormal) {
      p.W = orthonormal_matrix(h, h, rng);
      p.U = orthonormal_matrix(h, in, rng);
    } else {
      p.W = sample_gaussian(rng, h, h, 0.0, 1.0 / std::sqrt(static_cast<double>(h)));
      p.U = sample_gaussian(rng, h, in, 0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    }
    p.b = Tensor2D(h, 1);
    model.layers.push_back(std::move(p));
  }
  model.head.V = Tensor2D(config.vocab_size, h);
  model.head.c = Tensor2D(config.vocab_size, 1);
  model.head.embedding = sample_gaussian(rng, config.embedding_dim, config.vocab_size, 0.0, 1.0);
  return model;
}

std::size_t parameter_count(const Model& model, bool include_embedding) {
  std::size_t n = 0;
  for (const auto& p : model.layers) n += p.W.size() + p.U.size() + p.b.size();
  n += model.head.V.size() + model.head.c.size();
  if (include_embedding) n += model.head.embedding.size();
  return n;
}

}  // namespace bprnn
