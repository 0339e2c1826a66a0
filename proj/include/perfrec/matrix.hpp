#pragma once
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace perfrec {

// Dense row-major matrix of doubles. All entries are expected to stay finite;
// ops that can overflow check and throw.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d)
      : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols)
      throw std::invalid_argument("Matrix: data length " + std::to_string(data.size()) +
                                  " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static Matrix row_vec(std::vector<double> d) {
    std::size_t n = d.size();
    return Matrix(1, n, std::move(d));
  }
  static Matrix col_vec(std::vector<double> d) {
    std::size_t n = d.size();
    return Matrix(n, 1, std::move(d));
  }
  static Matrix ones(std::size_t r, std::size_t c) { return Matrix(r, c, 1.0); }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " * " + b.shape_str());
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

inline double dot(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: size mismatch " + a.shape_str() + " vs " + b.shape_str());
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

inline double row_norm(const Matrix& a, std::size_t i) {
  double s = 0;
  for (std::size_t j = 0; j < a.cols; ++j) s += a.at(i, j) * a.at(i, j);
  return std::sqrt(s);
}

// Row-wise l2 normalization; throws on a zero row.
inline Matrix normalize_rows(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double nrm = row_norm(a, i);
    if (nrm < 1e-12)
      throw std::invalid_argument("normalize_rows: zero row " + std::to_string(i));
    for (std::size_t j = 0; j < a.cols; ++j) out.at(i, j) /= nrm;
  }
  return out;
}

inline void check_unit_rows(const Matrix& a, double tol = 1e-9) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double nrm = row_norm(a, i);
    if (std::abs(nrm - 1.0) > tol)
      throw std::invalid_argument("row " + std::to_string(i) + " not unit-norm (|x|=" +
                                  std::to_string(nrm) + ")");
  }
}

}  // namespace perfrec
