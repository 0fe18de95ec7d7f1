#include "vicntm/vicreg.hpp"

#include <cmath>
#include <stdexcept>

#include "vicntm/errors.hpp"

namespace vicntm {

namespace {
void require_batch(const Matrix& y, const char* who) {
  if (y.rows < 2)
    throw std::invalid_argument(std::string(who) + ": batch must have n >= 2 rows");
}
}  // namespace

double variance_term(const Matrix& y, double gamma, double eps) {
  require_batch(y, "variance_term");
  int n = y.rows, d = y.cols;
  double acc = 0.0;
  for (int c = 0; c < d; ++c) {
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += y(r, c);
    mean /= n;
    double var = 0.0;
    for (int r = 0; r < n; ++r) {
      double dv = y(r, c) - mean;
      var += dv * dv;
    }
    var /= (n - 1);
    double hinge = gamma - std::sqrt(var + eps);
    if (hinge > 0.0) acc += hinge;
  }
  return acc / d;
}

double invariance_term(const Matrix& y, const Matrix& yp) {
  if (!y.same_shape(yp))
    throw std::invalid_argument("invariance_term: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    double d = y.data[i] - yp.data[i];
    acc += d * d;
  }
  return acc / y.rows;
}

double covariance_term(const Matrix& y) {
  require_batch(y, "covariance_term");
  int n = y.rows, d = y.cols;
  std::vector<double> mean(d, 0.0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) mean[c] += y(r, c);
  for (int c = 0; c < d; ++c) mean[c] /= n;
  double acc = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      double cij = 0.0;
      for (int r = 0; r < n; ++r)
        cij += (y(r, i) - mean[i]) * (y(r, j) - mean[j]);
      cij /= (n - 1);
      acc += cij * cij;
    }
  return acc / d;
}

VicBreakdown vic_loss(const Matrix& y, const Matrix& yp, const VicWeights& w) {
  VicBreakdown b;
  b.inv = w.lambda * invariance_term(y, yp);
  b.var = w.mu * (variance_term(y, w.gamma, w.eps) + variance_term(yp, w.gamma, w.eps));
  b.cov = w.nu * (covariance_term(y) + covariance_term(yp));
  b.total = (b.inv + b.var) + b.cov;
  return b;
}

Tape::Id variance_term_node(Tape& t, Tape::Id y, double gamma, double eps) {
  const Matrix& v = t.value(y);
  require_batch(v, "variance_term");
  int n = v.rows, d = v.cols;
  Tape::Id centered = t.sub_row(y, t.col_mean(y));
  Tape::Id var = t.scale(t.col_sum(t.square(centered)), 1.0 / (n - 1));
  Tape::Id sd = t.sqrt(t.add_scalar(var, eps));
  Tape::Id hinge = t.relu(t.add_scalar(t.scale(sd, -1.0), gamma));
  return t.scale(t.sum_all(hinge), 1.0 / d);
}

Tape::Id invariance_term_node(Tape& t, Tape::Id y, Tape::Id yp) {
  const Matrix& v = t.value(y);
  if (!v.same_shape(t.value(yp)))
    throw std::invalid_argument("invariance_term: shape mismatch");
  return t.scale(t.sum_all(t.square(t.sub(y, yp))), 1.0 / v.rows);
}

Tape::Id covariance_term_node(Tape& t, Tape::Id y) {
  const Matrix& v = t.value(y);
  require_batch(v, "covariance_term");
  int n = v.rows, d = v.cols;
  Tape::Id centered = t.sub_row(y, t.col_mean(y));
  Tape::Id cov = t.scale(t.matmul(t.transpose(centered), centered), 1.0 / (n - 1));
  Tape::Id sq = t.square(cov);
  Tape::Id off = t.sub(t.sum_all(sq), t.sum_all(t.square(t.diag_part(cov))));
  return t.scale(off, 1.0 / d);
}

VicNodes vic_loss_nodes(Tape& t, Tape::Id y, Tape::Id yp, const VicWeights& w,
                        bool include_inv) {
  VicNodes out;
  Tape::Id zero = t.constant(Matrix(1, 1, 0.0));
  out.inv = include_inv ? t.scale(invariance_term_node(t, y, yp), w.lambda) : zero;
  out.var = t.scale(t.add(variance_term_node(t, y, w.gamma, w.eps),
                          variance_term_node(t, yp, w.gamma, w.eps)),
                    w.mu);
  out.cov = t.scale(t.add(covariance_term_node(t, y), covariance_term_node(t, yp)),
                    w.nu);
  out.total = t.add(t.add(out.inv, out.var), out.cov);
  out.values.inv = t.scalar(out.inv);
  out.values.var = t.scalar(out.var);
  out.values.cov = t.scalar(out.cov);
  out.values.total = t.scalar(out.total);
  return out;
}

int default_expander_dim(int k) { return 4 * k; }

void check_expander_dim(int k, int dim) {
  if (dim < k || dim > 16 * k)
    throw ConfigError("expander dim " + std::to_string(dim) +
                      " outside [k, 16k] = [" + std::to_string(k) + ", " +
                      std::to_string(16 * k) + "]");
}

Expander Expander::init(int input_dim, int dim, Rng& rng) {
  check_expander_dim(input_dim, dim);
  Expander e;
  e.input_dim = input_dim;
  e.dim = dim;
  auto xavier = [&rng](int in, int out) {
    double limit = std::sqrt(6.0 / double(in + out));
    Matrix w(in, out);
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    return w;
  };
  e.params.add("l1.w", xavier(input_dim, dim));
  e.params.add("l1.b", Matrix::zeros(1, dim));
  e.params.add("l2.w", xavier(dim, dim));
  e.params.add("l2.b", Matrix::zeros(1, dim));
  e.params.add("l3.w", xavier(dim, dim));
  e.params.add("l3.b", Matrix::zeros(1, dim));
  return e;
}

Matrix expand_eval(const Expander& e, const Matrix& z) {
  Matrix h = affine(z, e.params.at("l1.w"), e.params.at("l1.b"));
  for (double& v : h.data) v = v > 0.0 ? v : 0.0;
  h = affine(h, e.params.at("l2.w"), e.params.at("l2.b"));
  for (double& v : h.data) v = v > 0.0 ? v : 0.0;
  return affine(h, e.params.at("l3.w"), e.params.at("l3.b"));
}

Tape::Id expand_node(Tape& t, BoundParams& bound, Tape::Id z) {
  Tape::Id h = t.relu(t.add_row(t.matmul(z, bound("l1.w")), bound("l1.b")));
  h = t.relu(t.add_row(t.matmul(h, bound("l2.w")), bound("l2.b")));
  return t.add_row(t.matmul(h, bound("l3.w")), bound("l3.b"));
}

}  // namespace vicntm
