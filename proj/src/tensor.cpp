#include "csdg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csdg/error.hpp"

namespace csdg {

namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

template <typename F>
Tensor2 zip(const Tensor2& a, const Tensor2& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Tensor2 out(a.rows(), a.cols());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(av[i], bv[i]);
  return out;
}

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Tensor2: " + std::to_string(data_.size()) + " values for shape " +
                     shape_string());
  }
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor2::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

std::string Tensor2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

const char* unary_name(Unary kind) {
  switch (kind) {
    case Unary::tanh: return "tanh";
    case Unary::softplus: return "softplus";
    case Unary::exp: return "exp";
    case Unary::log: return "log";
    case Unary::neg: return "neg";
    case Unary::square: return "square";
  }
  return "?";
}

void require_finite(const Tensor2& t, const char* context) {
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << context << ": non-finite value " << v[i] << " at (" << i / t.cols() << ", "
          << i % t.cols() << ")";
      throw DomainError(msg.str());
    }
  }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
  }
  Tensor2 out(a.rows(), b.cols());
  const std::size_t n = a.cols();
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.values().data() + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_at_b(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_at_b: cannot multiply transpose of " + a.shape_string() + " by " +
                     b.shape_string());
  }
  Tensor2 out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto brow = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < m; ++j) orow[j] += ari * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_a_bt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_a_bt: cannot multiply " + a.shape_string() + " by transpose of " +
                     b.shape_string());
  }
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Tensor2 divide(const Tensor2& a, const Tensor2& b) {
  return zip(a, b, "divide", [](double x, double y) { return x / y; });
}

Tensor2 scale(const Tensor2& a, double factor) {
  Tensor2 out = a;
  for (double& v : out.values()) v *= factor;
  return out;
}

Tensor2 add_row(const Tensor2& a, const Tensor2& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: cannot broadcast " + row.shape_string() + " onto " +
                     a.shape_string());
  }
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t j = 0; j < orow.size(); ++j) orow[j] += row(0, j);
  }
  return out;
}

Tensor2 apply_unary(const Tensor2& x, Unary kind) {
  Tensor2 out(x.rows(), x.cols());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    switch (kind) {
      case Unary::tanh: ov[i] = std::tanh(v); break;
      case Unary::softplus: ov[i] = softplus(v); break;
      case Unary::exp: ov[i] = std::exp(v); break;
      case Unary::log:
        if (!(v > 0.0)) {
          std::ostringstream msg;
          msg << "log: non-positive entry " << v << " at (" << i / x.cols() << ", "
              << i % x.cols() << ")";
          throw DomainError(msg.str());
        }
        ov[i] = std::log(v);
        break;
      case Unary::neg: ov[i] = -v; break;
      case Unary::square: ov[i] = v * v; break;
    }
  }
  require_finite(out, unary_name(kind));
  return out;
}

Tensor2 unary_derivative(const Tensor2& x, const Tensor2& y, Unary kind) {
  Tensor2 out(x.rows(), x.cols());
  auto xv = x.values();
  auto yv = y.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    switch (kind) {
      case Unary::tanh: ov[i] = 1.0 - yv[i] * yv[i]; break;
      case Unary::softplus: ov[i] = sigmoid(xv[i]); break;
      case Unary::exp: ov[i] = yv[i]; break;
      case Unary::log: ov[i] = 1.0 / xv[i]; break;
      case Unary::neg: ov[i] = -1.0; break;
      case Unary::square: ov[i] = 2.0 * xv[i]; break;
    }
  }
  return out;
}

Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for " + a.shape_string());
  }
  Tensor2 out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i).subspan(begin, end - begin);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Tensor2 concat_cols(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor2 out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<long>(a.cols()));
  }
  return out;
}

Tensor2 permute_cols(const Tensor2& a, std::span<const std::size_t> perm) {
  if (perm.size() != a.cols()) {
    throw ShapeError("permute_cols: permutation of length " + std::to_string(perm.size()) +
                     " for " + a.shape_string());
  }
  Tensor2 out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < perm.size(); ++j) out(i, j) = a(i, perm[j]);
  return out;
}

Tensor2 select_rows(const Tensor2& a, std::span<const std::size_t> rows) {
  Tensor2 out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " out of bounds for " +
                       a.shape_string());
    }
    std::copy(a.row(rows[i]).begin(), a.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

Tensor2 row_sums(const Tensor2& a) {
  Tensor2 out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (double v : a.row(i)) acc += v;
    out(i, 0) = acc;
  }
  return out;
}

Tensor2 col_sums(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out(0, j) += r[j];
  }
  return out;
}

double sum(const Tensor2& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return acc;
}

Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

}  // namespace csdg
