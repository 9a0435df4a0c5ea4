#pragma once

// Reference implementations written with plain loops over std::vector. They
// share no numerical code with the library and are used as oracles.
// Arithmetic is long double so finite differences taken on the oracle loss
// are not swamped by rounding in the reference itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bprnn/dropout.hpp"
#include "bprnn/rnn.hpp"
#include "bprnn/stack.hpp"

namespace oracle {

using Real = long double;
using Vec = std::vector<Real>;
using Mat = std::vector<Vec>;  // [row][col]

inline Real base(const bprnn::ActivationSpec& s, Real x) {
  switch (s.base) {
    case bprnn::ActivationBase::ReLU: return x > 0 ? x : Real(0);
    case bprnn::ActivationBase::LeakyReLU: return x > 0 ? x : s.leaky_slope * x;
    case bprnn::ActivationBase::ELU: return x > 0 ? x : s.elu_alpha * (std::exp(x) - 1);
    case bprnn::ActivationBase::SELU:
      return s.selu_lambda * (x > 0 ? x : s.elu_alpha * (std::exp(x) - 1));
  }
  return 0;
}

// Feature `row` of a column.
inline Real act(const bprnn::ActivationSpec& s, Real x, std::size_t row) {
  if (s.bipolar && row % 2 == 1) return -base(s, -x);
  return base(s, x);
}

inline Mat to_mat(const bprnn::Tensor2D& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

struct Pass {
  Real loss = 0.0;
  std::vector<char> signs;  // sign of every pre-activation, to spot kink crossings
};

// Mean cross-entropy (nats) of the stacked RNN over the grid, or only the
// last step's mean when final_only.
inline Pass loss(const bprnn::Model& m, const bprnn::StackState& init, const bprnn::TokenGrid& in,
                 const bprnn::TokenGrid& tgt, const bprnn::DropoutMasks& masks,
                 bool final_only = false) {
  const auto& cfg = m.config;
  const std::size_t L = cfg.depth, H = cfg.width, P = cfg.skip_period;
  const std::size_t T = in.steps(), B = in.batch(), V = cfg.vocab_size;
  Pass out;

  // h[i][unit][b], 1-based layers
  std::vector<Mat> h(L + 1);
  for (std::size_t i = 1; i <= L; ++i) h[i] = to_mat(init.h[i - 1]);

  for (std::size_t t = 1; t <= T; ++t) {
    std::vector<Mat> v(L + 1);
    v[0].assign(cfg.embedding_dim, Vec(B));
    for (std::size_t r = 0; r < cfg.embedding_dim; ++r)
      for (std::size_t b = 0; b < B; ++b)
        v[0][r][b] = m.head.embedding(r, static_cast<std::size_t>(in.at(t - 1, b)));

    for (std::size_t i = 1; i <= L; ++i) {
      const std::size_t blk = (i - 1) / P;
      const bool alive = masks.block_alive.empty() || masks.block_alive[t - 1][blk] != 0;
      const auto& p = m.layer(i);
      if (alive || !masks.block_freeze) {
        const bool has_rec = !masks.recurrent.empty() && !masks.recurrent[i - 1].empty();
        const bool has_btw = !masks.between.empty() && !masks.between[t - 1][i - 1].empty();
        Mat nh(H, Vec(B));
        for (std::size_t u = 0; u < H; ++u) {
          for (std::size_t b = 0; b < B; ++b) {
            Real a = p.b(u, 0);
            for (std::size_t k = 0; k < H; ++k) {
              const Real mk = has_rec ? masks.recurrent[i - 1](k, b) : Real(1);
              a += p.W(u, k) * h[i][k][b] * mk;
            }
            const std::size_t in_dim = v[i - 1].size();
            for (std::size_t k = 0; k < in_dim; ++k) {
              const Real mk = has_btw ? masks.between[t - 1][i - 1](k, b) : Real(1);
              a += p.U(u, k) * v[i - 1][k][b] * mk;
            }
            out.signs.push_back(a > 0 ? 1 : (a < 0 ? -1 : 0));
            Real y = act(cfg.activation, a, u);
            if (cfg.skip_connections && i % P == 0) y += cfg.skip_scale * v[i - P][u][b];
            nh[u][b] = y;
          }
        }
        h[i] = std::move(nh);
      }
      const std::size_t last = std::min((blk + 1) * P, L);
      if (!alive && masks.block_identity && i == last) {
        v[i] = v[blk * P];
      } else {
        v[i] = h[i];
      }
    }

    if (final_only && t != T) continue;
    for (std::size_t b = 0; b < B; ++b) {
      Vec logits(V);
      Real mx = -1e300L;
      for (std::size_t r = 0; r < V; ++r) {
        Real z = m.head.c(r, 0);
        for (std::size_t k = 0; k < H; ++k) z += m.head.V(r, k) * v[L][k][b];
        logits[r] = z;
        mx = std::max(mx, z);
      }
      Real sum = 0.0;
      for (Real z : logits) sum += std::exp(z - mx);
      const auto target = static_cast<std::size_t>(tgt.at(t - 1, b));
      out.loss += -(logits[target] - mx - std::log(sum));
    }
  }
  out.loss /= static_cast<Real>(final_only ? B : T * B);
  return out;
}

}  // namespace oracle
