#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bprnn/activation.hpp"
#include "bprnn/random.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

// Architecture of a stack of vanilla RNN layers.
//
// Layers are numbered 1..depth. Layer i receives x_i(t) = v_{i-1}(t), where
// v_0 is the frozen embedding column of the current token. When
// `skip_connections` is on, every layer whose number is a multiple of
// `skip_period` adds skip_scale * v_{i - skip_period}(t) after its activation.
struct StackConfig {
  std::size_t depth = 8;
  std::size_t width = 64;
  ActivationSpec activation = ActivationSpec::elu(1.0, true);
  bool skip_connections = true;
  std::size_t skip_period = 4;
  double skip_scale = 0.99;
  std::size_t embedding_dim = 64;
  std::size_t vocab_size = 1;

  void validate() const;

  [[nodiscard]] bool has_skip(std::size_t layer) const noexcept {
    return skip_connections && layer >= skip_period && layer % skip_period == 0;
  }
  [[nodiscard]] std::size_t input_dim(std::size_t layer) const noexcept {
    return layer == 1 ? embedding_dim : width;
  }
  // Blocks of skip_period consecutive layers used by stochastic block depth.
  // Block k (0-based) spans layers k*P+1 .. min((k+1)*P, depth).
  [[nodiscard]] std::size_t block_count() const noexcept {
    return (depth + skip_period - 1) / skip_period;
  }
  [[nodiscard]] std::size_t block_of(std::size_t layer) const noexcept {
    return (layer - 1) / skip_period;
  }
  [[nodiscard]] std::size_t block_first(std::size_t block) const noexcept {
    return block * skip_period + 1;
  }
  [[nodiscard]] std::size_t block_last(std::size_t block) const noexcept;

  friend bool operator==(const StackConfig&, const StackConfig&) = default;
};

// h_i(t) = f(W h_i(t-1) + U x_i(t) + b)
struct LayerParams {
  Tensor2D W;  // width x width
  Tensor2D U;  // width x input_dim
  Tensor2D b;  // width x 1

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Affine softmax readout plus the frozen input embedding.
struct HeadParams {
  Tensor2D V;          // vocab x width
  Tensor2D c;          // vocab x 1
  Tensor2D embedding;  // embedding_dim x vocab, never trained

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct Model {
  StackConfig config;
  std::vector<LayerParams> layers;  // layers[i - 1] is layer i
  HeadParams head;

  [[nodiscard]] const LayerParams& layer(std::size_t i) const { return layers.at(i - 1); }
  LayerParams& layer(std::size_t i) { return layers.at(i - 1); }

  // Shapes agree with the config and every entry is finite.
  void validate() const;

  friend bool operator==(const Model&, const Model&) = default;
};

enum class PreInit { Gaussian, Orthonormal };

// Pre-initialization before LSUV: W, U ~ N(0, 1/fan_in) (or scaled
// orthonormal), b = 0, embedding ~ N(0, 1), V = 0, c = 0.
Model make_model(const StackConfig& config, Rng& rng, PreInit init = PreInit::Gaussian);

// Random matrix with orthonormal rows or columns (whichever is shorter),
// scaled so each entry has variance 1/cols like the Gaussian pre-init.
Tensor2D orthonormal_matrix(std::size_t rows, std::size_t cols, Rng& rng);

std::size_t parameter_count(const Model& model, bool include_embedding = false);

}  // namespace bprnn
