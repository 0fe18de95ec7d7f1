#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace vicntm {

// Dense row-major matrix of doubles. The heavy kernels (matmul and friends)
// are delegated to Eigen maps over the same storage; everything else is
// plain loops. 64-bit floats throughout so gradient checks have headroom.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(size_t(r) * size_t(c), fill) {}

  static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }
  static Matrix full(int r, int c, double v) { return Matrix(r, c, v); }
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(const std::vector<double>& v);

  double& operator()(int r, int c) { return data[size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return data[size_t(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  std::string shape_str() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T and a^T * b without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// x * w + b with the bias row broadcast over rows; b must be 1 x w.cols.
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b);

// Row-wise softmax with per-row max subtraction for stability.
Matrix softmax_rows(const Matrix& x);

// Per-column running statistics of one batchnorm layer.
struct BnStats {
  Matrix mean;  // 1 x c
  Matrix var;   // 1 x c
  static BnStats fresh(int c);
};

// Per-column batch normalization. Training mode standardizes by batch
// statistics (biased variance) and folds them into the running stats with
// the usual unbiased correction; eval mode standardizes by the running
// stats. Training requires at least two rows.
Matrix batchnorm(const Matrix& x, const Matrix& scale, const Matrix& shift,
                 bool training, BnStats& stats, double eps = 1e-5,
                 double momentum = 0.1);

// Column mean / biased column variance of a batch (helpers shared with the
// autodiff batchnorm op so both paths fold identical numbers).
void column_moments(const Matrix& x, Matrix& mean, Matrix& var);
void update_running_stats(BnStats& stats, const Matrix& batch_mean,
                          const Matrix& batch_var, int batch_rows,
                          double momentum);

}  // namespace vicntm
