#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bprnn {

// Dense row-major matrix of doubles.
//
// Activations are stored as (features x samples): every column is one sample
// vector, so `W * h` maps a batch of hidden states in one product. A
// default-constructed tensor is empty (0 x 0) and only serves as a placeholder;
// every other tensor has positive dimensions.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Tensor2D::from_rows({{1, 2}, {3, 4}})
  static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows);
  // Single column (n x 1) holding `values`.
  static Tensor2D column(std::span<const double> values);
  static Tensor2D identity(std::size_t n);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] bool same_shape(const Tensor2D& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }

  void fill(double value) noexcept;

  [[nodiscard]] std::string shape_string() const;

  friend bool operator==(const Tensor2D& a, const Tensor2D& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class BinaryOp { Add, Sub, Mul };
enum class Transpose { No, Yes };

// Pure operations. All of them validate shapes and reject non-finite results.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
Tensor2D elementwise(const Tensor2D& a, const Tensor2D& b, BinaryOp op);
Tensor2D add(const Tensor2D& a, const Tensor2D& b);
Tensor2D sub(const Tensor2D& a, const Tensor2D& b);
Tensor2D mul(const Tensor2D& a, const Tensor2D& b);
Tensor2D scale(const Tensor2D& a, double k);
Tensor2D transpose(const Tensor2D& a);

double frobenius_norm(const Tensor2D& a);
bool all_finite(std::span<const double> values) noexcept;
// Throws NumericError naming `what` if any entry is NaN/Inf.
void require_finite(const Tensor2D& a, std::string_view what);

// In-place kernels for hot loops. They check shapes but not finiteness;
// callers validate results at a coarser granularity.
namespace kernels {

// c += alpha * op(a) * op(b)
void gemm_accumulate(Tensor2D& c, const Tensor2D& a, Transpose ta, const Tensor2D& b,
                     Transpose tb, double alpha = 1.0);
// y += alpha * x
void axpy(Tensor2D& y, const Tensor2D& x, double alpha = 1.0);
// x *= m (elementwise)
void hadamard_inplace(Tensor2D& x, const Tensor2D& m);
// c(:, j) += v for every column j; v is rows x 1
void add_column_broadcast(Tensor2D& c, const Tensor2D& v);
// out(r, 0) += sum_j a(r, j)
void accumulate_row_sums(Tensor2D& out, const Tensor2D& a);

}  // namespace kernels

}  // namespace bprnn
