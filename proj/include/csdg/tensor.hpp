#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace csdg {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 tensors and
// batches of samples are stored one sample per row.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 row_vector(std::span<const double> values);
  static Tensor2 identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Unary { tanh, softplus, exp, log, neg, square };

const char* unary_name(Unary kind);

// Throws DomainError naming the first non-finite entry.
void require_finite(const Tensor2& t, const char* context);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// a^T * b and a * b^T without materializing the transpose.
Tensor2 matmul_at_b(const Tensor2& a, const Tensor2& b);
Tensor2 matmul_a_bt(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);

Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
Tensor2 divide(const Tensor2& a, const Tensor2& b);
Tensor2 scale(const Tensor2& a, double factor);
// Adds a 1xC row to every row of an NxC tensor.
Tensor2 add_row(const Tensor2& a, const Tensor2& row);

Tensor2 apply_unary(const Tensor2& x, Unary kind);
// d(kind)/dx evaluated elementwise, given input x and output y = kind(x).
Tensor2 unary_derivative(const Tensor2& x, const Tensor2& y, Unary kind);

Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t end);
Tensor2 concat_cols(const Tensor2& a, const Tensor2& b);
// out(:, j) = a(:, perm[j])
Tensor2 permute_cols(const Tensor2& a, std::span<const std::size_t> perm);
Tensor2 select_rows(const Tensor2& a, std::span<const std::size_t> rows);

Tensor2 row_sums(const Tensor2& a);  // N x 1
Tensor2 col_sums(const Tensor2& a);  // 1 x C
double sum(const Tensor2& a);

Tensor2 softmax_rows(const Tensor2& logits);

}  // namespace csdg
