#include "bprnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

namespace {

void require_positive(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError(fmt::format("tensor dimensions must be positive, got {}x{}", rows, cols));
  }
}

void require_same_shape(const Tensor2D& a, const Tensor2D& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw ShapeError(
        fmt::format("{}: shape mismatch {} vs {}", op, a.shape_string(), b.shape_string()));
  }
}

}  // namespace

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  require_positive(rows, cols);
  data_.assign(rows * cols, fill);
}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_positive(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError(fmt::format("tensor {}x{} needs {} values, got {}", rows, cols,
                                 rows * cols, data_.size()));
  }
}

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw ShapeError("from_rows: ragged row lengths");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2D(r, c, std::move(data));
}

Tensor2D Tensor2D::column(std::span<const double> values) {
  return Tensor2D(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Tensor2D Tensor2D::identity(std::size_t n) {
  Tensor2D out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

void Tensor2D::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor2D::shape_string() const { return fmt::format("{}x{}", rows_, cols_); }

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor2D& a, std::string_view what) {
  if (!all_finite(a.values())) {
    throw NumericError(fmt::format("{}: non-finite value in {} tensor", what, a.shape_string()));
  }
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(
        fmt::format("matmul: cannot multiply {} by {}", a.shape_string(), b.shape_string()));
  }
  Tensor2D out(a.rows(), b.cols());
  kernels::gemm_accumulate(out, a, Transpose::No, b, Transpose::No);
  require_finite(out, "matmul");
  return out;
}

Tensor2D elementwise(const Tensor2D& a, const Tensor2D& b, BinaryOp op) {
  require_same_shape(a, b, "elementwise");
  Tensor2D out = a;
  auto dst = out.values();
  const auto src = b.values();
  switch (op) {
    case BinaryOp::Add:
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      break;
    case BinaryOp::Sub:
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
      break;
    case BinaryOp::Mul:
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
      break;
  }
  require_finite(out, "elementwise");
  return out;
}

Tensor2D add(const Tensor2D& a, const Tensor2D& b) { return elementwise(a, b, BinaryOp::Add); }
Tensor2D sub(const Tensor2D& a, const Tensor2D& b) { return elementwise(a, b, BinaryOp::Sub); }
Tensor2D mul(const Tensor2D& a, const Tensor2D& b) { return elementwise(a, b, BinaryOp::Mul); }

Tensor2D scale(const Tensor2D& a, double k) {
  Tensor2D out = a;
  for (double& v : out.values()) v *= k;
  require_finite(out, "scale");
  return out;
}

Tensor2D transpose(const Tensor2D& a) {
  Tensor2D out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

double frobenius_norm(const Tensor2D& a) {
  double sum = 0.0;
  for (double v : a.values()) sum += v * v;
  return std::sqrt(sum);
}

namespace kernels {

void gemm_accumulate(Tensor2D& c, const Tensor2D& a, Transpose ta, const Tensor2D& b,
                     Transpose tb, double alpha) {
  const bool at = ta == Transpose::Yes;
  const bool bt = tb == Transpose::Yes;
  const std::size_t m = at ? a.cols() : a.rows();
  const std::size_t k = at ? a.rows() : a.cols();
  const std::size_t kb = bt ? b.cols() : b.rows();
  const std::size_t n = bt ? b.rows() : b.cols();
  if (k != kb || c.rows() != m || c.cols() != n) {
    throw ShapeError(fmt::format("gemm: op(a)={}x{} op(b)={}x{} into c={}", m, k, kb, n,
                                 c.shape_string()));
  }

  // Row-major inner loops run over contiguous columns of b and c.
  const Tensor2D* rhs = &b;
  Tensor2D b_transposed;
  if (bt) {
    b_transposed = transpose(b);
    rhs = &b_transposed;
  }
  const double* bp = rhs->data();
  double* cp = c.data();
  const double* ap = a.data();

  if (!at) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = cp + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double s = alpha * ap[i * k + p];
        if (s == 0.0) continue;
        const double* brow = bp + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  } else {
    // a is stored k x m
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = bp + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double s = alpha * ap[p * m + i];
        if (s == 0.0) continue;
        double* crow = cp + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  }
}

void axpy(Tensor2D& y, const Tensor2D& x, double alpha) {
  require_same_shape(y, x, "axpy");
  auto dst = y.values();
  const auto src = x.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
}

void hadamard_inplace(Tensor2D& x, const Tensor2D& m) {
  require_same_shape(x, m, "hadamard");
  auto dst = x.values();
  const auto src = m.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
}

void add_column_broadcast(Tensor2D& c, const Tensor2D& v) {
  if (v.rows() != c.rows() || v.cols() != 1) {
    throw ShapeError(fmt::format("broadcast: {} onto {}", v.shape_string(), c.shape_string()));
  }
  for (std::size_t r = 0; r < c.rows(); ++r) {
    const double b = v(r, 0);
    for (double& x : c.row(r)) x += b;
  }
}

void accumulate_row_sums(Tensor2D& out, const Tensor2D& a) {
  if (out.rows() != a.rows() || out.cols() != 1) {
    throw ShapeError(
        fmt::format("row sums: {} into {}", a.shape_string(), out.shape_string()));
  }
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (double x : a.row(r)) s += x;
    out(r, 0) += s;
  }
}

}  // namespace kernels

}  // namespace bprnn
