#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mananet/errors.hpp"

namespace mananet {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small encoders only; no BLAS needed at this scale.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return a.size(); }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("dot: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

/// out = W x + b
inline void affine(const Mat& w, std::span<const double> b, std::span<const double> x,
                   std::span<double> out) {
  if (static_cast<size_t>(w.cols) != x.size() || static_cast<size_t>(w.rows) != out.size() ||
      b.size() != out.size()) {
    throw ValidationError("affine: dimension mismatch");
  }
  for (int r = 0; r < w.rows; ++r) {
    double s = b[r];
    const double* row = &w.a[static_cast<size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

inline Vec affine(const Mat& w, const Vec& b, std::span<const double> x) {
  Vec out(static_cast<size_t>(w.rows));
  affine(w, b, x, out);
  return out;
}

/// dW += dy x^T
inline void add_outer(Mat& dw, std::span<const double> dy, std::span<const double> x) {
  for (int r = 0; r < dw.rows; ++r) {
    double* row = &dw.a[static_cast<size_t>(r) * dw.cols];
    const double g = dy[r];
    for (int c = 0; c < dw.cols; ++c) row[c] += g * x[c];
  }
}

/// out += W^T dy
inline void add_transpose_mul(const Mat& w, std::span<const double> dy, std::span<double> out) {
  for (int r = 0; r < w.rows; ++r) {
    const double* row = &w.a[static_cast<size_t>(r) * w.cols];
    const double g = dy[r];
    for (int c = 0; c < w.cols; ++c) out[c] += row[c] * g;
  }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace mananet
