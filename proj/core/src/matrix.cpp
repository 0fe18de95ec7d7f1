#include "vicntm/matrix.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace vicntm {

namespace {
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap map(const Matrix& m) { return CMap(m.data.data(), m.rows, m.cols); }
MMap map(Matrix& m) { return MMap(m.data.data(), m.rows, m.cols); }
}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(int(rows.size()), rows.size() ? int(rows.begin()->size()) : 0);
  int r = 0;
  for (const auto& row : rows) {
    if (int(row.size()) != m.cols)
      throw std::invalid_argument("from_rows: ragged initializer");
    int c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
  Matrix m(1, int(v.size()));
  m.data = v;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dimensions " + a.shape_str() +
                                " vs " + b.shape_str());
  Matrix out(a.rows, b.cols);
  map(out).noalias() = map(a) * map(b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw std::invalid_argument("matmul_nt: shapes " + a.shape_str() + " vs " +
                                b.shape_str());
  Matrix out(a.rows, b.rows);
  map(out).noalias() = map(a) * map(b).transpose();
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw std::invalid_argument("matmul_tn: shapes " + a.shape_str() + " vs " +
                                b.shape_str());
  Matrix out(a.cols, b.cols);
  map(out).noalias() = map(a).transpose() * map(b);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  map(out) = map(a).transpose();
  return out;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (b.rows != 1 || b.cols != w.cols)
    throw std::invalid_argument("affine: bias must be 1x" + std::to_string(w.cols));
  Matrix out = matmul(x, w);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) += b(0, c);
  return out;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    double mx = x(r, 0);
    for (int c = 1; c < x.cols; ++c) mx = std::max(mx, x(r, c));
    double sum = 0.0;
    for (int c = 0; c < x.cols; ++c) {
      double e = std::exp(x(r, c) - mx);
      out(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < x.cols; ++c) out(r, c) /= sum;
  }
  return out;
}

BnStats BnStats::fresh(int c) {
  BnStats s;
  s.mean = Matrix::zeros(1, c);
  s.var = Matrix::full(1, c, 1.0);
  return s;
}

void column_moments(const Matrix& x, Matrix& mean, Matrix& var) {
  mean = Matrix::zeros(1, x.cols);
  var = Matrix::zeros(1, x.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) mean(0, c) += x(r, c);
  for (int c = 0; c < x.cols; ++c) mean(0, c) /= x.rows;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      double d = x(r, c) - mean(0, c);
      var(0, c) += d * d;
    }
  for (int c = 0; c < x.cols; ++c) var(0, c) /= x.rows;
}

void update_running_stats(BnStats& stats, const Matrix& batch_mean,
                          const Matrix& batch_var, int batch_rows,
                          double momentum) {
  double unbias = batch_rows > 1 ? double(batch_rows) / (batch_rows - 1) : 1.0;
  for (int c = 0; c < batch_mean.cols; ++c) {
    stats.mean(0, c) = (1.0 - momentum) * stats.mean(0, c) + momentum * batch_mean(0, c);
    stats.var(0, c) = (1.0 - momentum) * stats.var(0, c) + momentum * unbias * batch_var(0, c);
  }
}

Matrix batchnorm(const Matrix& x, const Matrix& scale, const Matrix& shift,
                 bool training, BnStats& stats, double eps, double momentum) {
  if (scale.rows != 1 || scale.cols != x.cols || !shift.same_shape(scale))
    throw std::invalid_argument("batchnorm: scale/shift must be 1x" +
                                std::to_string(x.cols));
  Matrix mean, var;
  if (training) {
    if (x.rows < 2)
      throw std::invalid_argument("batchnorm: training mode needs a batch of >= 2 rows");
    column_moments(x, mean, var);
    update_running_stats(stats, mean, var, x.rows, momentum);
  } else {
    mean = stats.mean;
    var = stats.var;
  }
  Matrix out(x.rows, x.cols);
  for (int c = 0; c < x.cols; ++c) {
    double inv = 1.0 / std::sqrt(var(0, c) + eps);
    for (int r = 0; r < x.rows; ++r)
      out(r, c) = scale(0, c) * (x(r, c) - mean(0, c)) * inv + shift(0, c);
  }
  return out;
}

}  // namespace vicntm
