#include "vicntm/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace vicntm {

namespace {
double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
double sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tape::Id Tape::push(Matrix v, bool needs_grad) {
  Node n;
  n.value = std::move(v);
  n.needs_grad = needs_grad;
  if (needs_grad) n.grad = Matrix::zeros(n.value.rows, n.value.cols);
  nodes_.push_back(std::move(n));
  return Id(nodes_.size() - 1);
}

void Tape::check(Id id) const {
  if (id < 0 || size_t(id) >= nodes_.size())
    throw std::invalid_argument("tape: bad node id");
}

void Tape::accumulate(Matrix& dst, const Matrix& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

double Tape::scalar(Id id) const {
  check(id);
  const Matrix& v = nodes_[id].value;
  if (v.rows != 1 || v.cols != 1)
    throw std::invalid_argument("tape: scalar() on a " + v.shape_str() + " node");
  return v.data[0];
}

Tape::Id Tape::constant(Matrix v) { return push(std::move(v), false); }

Tape::Id Tape::leaf(Matrix v) { return push(std::move(v), true); }

Tape::Id Tape::add(Id a, Id b) {
  check(a); check(b);
  const Matrix& va = nodes_[a].value;
  const Matrix& vb = nodes_[b].value;
  if (!va.same_shape(vb))
    throw std::invalid_argument("add: shape " + va.shape_str() + " vs " + vb.shape_str());
  Matrix out = va;
  accumulate(out, vb);
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, b, o] {
      const Matrix& g = nodes_[o].grad;
      if (nodes_[a].needs_grad) accumulate(nodes_[a].grad, g);
      if (nodes_[b].needs_grad) accumulate(nodes_[b].grad, g);
    };
  return o;
}

Tape::Id Tape::sub(Id a, Id b) {
  check(a); check(b);
  const Matrix& va = nodes_[a].value;
  const Matrix& vb = nodes_[b].value;
  if (!va.same_shape(vb))
    throw std::invalid_argument("sub: shape " + va.shape_str() + " vs " + vb.shape_str());
  Matrix out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, b, o] {
      const Matrix& g = nodes_[o].grad;
      if (nodes_[a].needs_grad) accumulate(nodes_[a].grad, g);
      if (nodes_[b].needs_grad)
        for (size_t i = 0; i < g.data.size(); ++i) nodes_[b].grad.data[i] -= g.data[i];
    };
  return o;
}

Tape::Id Tape::mul(Id a, Id b) {
  check(a); check(b);
  const Matrix& va = nodes_[a].value;
  const Matrix& vb = nodes_[b].value;
  if (!va.same_shape(vb))
    throw std::invalid_argument("mul: shape " + va.shape_str() + " vs " + vb.shape_str());
  Matrix out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, b, o] {
      const Matrix& g = nodes_[o].grad;
      if (nodes_[a].needs_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          nodes_[a].grad.data[i] += g.data[i] * nodes_[b].value.data[i];
      if (nodes_[b].needs_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          nodes_[b].grad.data[i] += g.data[i] * nodes_[a].value.data[i];
    };
  return o;
}

Tape::Id Tape::div(Id a, Id b) {
  check(a); check(b);
  const Matrix& va = nodes_[a].value;
  const Matrix& vb = nodes_[b].value;
  if (!va.same_shape(vb))
    throw std::invalid_argument("div: shape " + va.shape_str() + " vs " + vb.shape_str());
  Matrix out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] /= vb.data[i];
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, b, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& bv = nodes_[b].value;
      if (nodes_[a].needs_grad)
        for (size_t i = 0; i < g.data.size(); ++i)
          nodes_[a].grad.data[i] += g.data[i] / bv.data[i];
      if (nodes_[b].needs_grad) {
        const Matrix& ov = nodes_[o].value;
        for (size_t i = 0; i < g.data.size(); ++i)
          nodes_[b].grad.data[i] -= g.data[i] * ov.data[i] / bv.data[i];
      }
    };
  return o;
}

Tape::Id Tape::matmul(Id a, Id b) {
  check(a); check(b);
  Matrix out = vicntm::matmul(nodes_[a].value, nodes_[b].value);
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, b, o] {
      const Matrix& g = nodes_[o].grad;
      if (nodes_[a].needs_grad)
        accumulate(nodes_[a].grad, matmul_nt(g, nodes_[b].value));
      if (nodes_[b].needs_grad)
        accumulate(nodes_[b].grad, matmul_tn(nodes_[a].value, g));
    };
  return o;
}

Tape::Id Tape::transpose(Id a) {
  check(a);
  Matrix out = vicntm::transpose(nodes_[a].value);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      accumulate(nodes_[a].grad, vicntm::transpose(nodes_[o].grad));
    };
  return o;
}

Tape::Id Tape::add_row(Id a, Id v) {
  check(a); check(v);
  const Matrix& va = nodes_[a].value;
  const Matrix& vv = nodes_[v].value;
  if (vv.rows != 1 || vv.cols != va.cols)
    throw std::invalid_argument("add_row: row must be 1x" + std::to_string(va.cols));
  Matrix out = va;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) += vv(0, c);
  bool ng = nodes_[a].needs_grad || nodes_[v].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, v, o] {
      const Matrix& g = nodes_[o].grad;
      if (nodes_[a].needs_grad) accumulate(nodes_[a].grad, g);
      if (nodes_[v].needs_grad)
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) nodes_[v].grad(0, c) += g(r, c);
    };
  return o;
}

Tape::Id Tape::sub_row(Id a, Id v) {
  check(a); check(v);
  const Matrix& va = nodes_[a].value;
  const Matrix& vv = nodes_[v].value;
  if (vv.rows != 1 || vv.cols != va.cols)
    throw std::invalid_argument("sub_row: row must be 1x" + std::to_string(va.cols));
  Matrix out = va;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) -= vv(0, c);
  bool ng = nodes_[a].needs_grad || nodes_[v].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, v, o] {
      const Matrix& g = nodes_[o].grad;
      if (nodes_[a].needs_grad) accumulate(nodes_[a].grad, g);
      if (nodes_[v].needs_grad)
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) nodes_[v].grad(0, c) -= g(r, c);
    };
  return o;
}

Tape::Id Tape::mul_row(Id a, Id v) {
  check(a); check(v);
  const Matrix& va = nodes_[a].value;
  const Matrix& vv = nodes_[v].value;
  if (vv.rows != 1 || vv.cols != va.cols)
    throw std::invalid_argument("mul_row: row must be 1x" + std::to_string(va.cols));
  Matrix out = va;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) *= vv(0, c);
  bool ng = nodes_[a].needs_grad || nodes_[v].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, v, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& av = nodes_[a].value;
      const Matrix& rv = nodes_[v].value;
      if (nodes_[a].needs_grad)
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) nodes_[a].grad(r, c) += g(r, c) * rv(0, c);
      if (nodes_[v].needs_grad)
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) nodes_[v].grad(0, c) += g(r, c) * av(r, c);
    };
  return o;
}

Tape::Id Tape::scale(Id a, double s) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v *= s;
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o, s] {
      const Matrix& g = nodes_[o].grad;
      for (size_t i = 0; i < g.data.size(); ++i) nodes_[a].grad.data[i] += s * g.data[i];
    };
  return o;
}

Tape::Id Tape::add_scalar(Id a, double s) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v += s;
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] { accumulate(nodes_[a].grad, nodes_[o].grad); };
  return o;
}

Tape::Id Tape::exp(Id a) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = std::exp(v);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& y = nodes_[o].value;
      for (size_t i = 0; i < g.data.size(); ++i)
        nodes_[a].grad.data[i] += g.data[i] * y.data[i];
    };
  return o;
}

Tape::Id Tape::log_clamped(Id a, double floor) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = std::log(v > floor ? v : floor);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o, floor] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& x = nodes_[a].value;
      for (size_t i = 0; i < g.data.size(); ++i)
        if (x.data[i] > floor) nodes_[a].grad.data[i] += g.data[i] / x.data[i];
    };
  return o;
}

Tape::Id Tape::sqrt(Id a) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = std::sqrt(v);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& y = nodes_[o].value;
      for (size_t i = 0; i < g.data.size(); ++i)
        nodes_[a].grad.data[i] += 0.5 * g.data[i] / y.data[i];
    };
  return o;
}

Tape::Id Tape::square(Id a) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v *= v;
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& x = nodes_[a].value;
      for (size_t i = 0; i < g.data.size(); ++i)
        nodes_[a].grad.data[i] += 2.0 * g.data[i] * x.data[i];
    };
  return o;
}

Tape::Id Tape::relu(Id a) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& x = nodes_[a].value;
      for (size_t i = 0; i < g.data.size(); ++i)
        if (x.data[i] > 0.0) nodes_[a].grad.data[i] += g.data[i];
    };
  return o;
}

Tape::Id Tape::softplus(Id a) {
  check(a);
  Matrix out = nodes_[a].value;
  for (double& v : out.data) v = stable_softplus(v);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& x = nodes_[a].value;
      for (size_t i = 0; i < g.data.size(); ++i)
        nodes_[a].grad.data[i] += g.data[i] * sigmoid(x.data[i]);
    };
  return o;
}

Tape::Id Tape::softmax_rows(Id a) {
  check(a);
  Matrix out = vicntm::softmax_rows(nodes_[a].value);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      const Matrix& y = nodes_[o].value;
      for (int r = 0; r < g.rows; ++r) {
        double dot = 0.0;
        for (int c = 0; c < g.cols; ++c) dot += g(r, c) * y(r, c);
        for (int c = 0; c < g.cols; ++c)
          nodes_[a].grad(r, c) += y(r, c) * (g(r, c) - dot);
      }
    };
  return o;
}

Tape::Id Tape::batchnorm(Id x, Id scale, Id shift, double eps,
                         Matrix* batch_mean, Matrix* batch_var) {
  check(x); check(scale); check(shift);
  const Matrix& vx = nodes_[x].value;
  const Matrix& vs = nodes_[scale].value;
  const Matrix& vb = nodes_[shift].value;
  if (vx.rows < 2)
    throw std::invalid_argument("batchnorm: training mode needs a batch of >= 2 rows");
  if (vs.rows != 1 || vs.cols != vx.cols || !vb.same_shape(vs))
    throw std::invalid_argument("batchnorm: scale/shift must be 1x" +
                                std::to_string(vx.cols));
  Matrix mean, var;
  column_moments(vx, mean, var);
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;

  Matrix inv(1, vx.cols);
  for (int c = 0; c < vx.cols; ++c) inv(0, c) = 1.0 / std::sqrt(var(0, c) + eps);
  Matrix xhat(vx.rows, vx.cols);
  Matrix out(vx.rows, vx.cols);
  for (int r = 0; r < vx.rows; ++r)
    for (int c = 0; c < vx.cols; ++c) {
      xhat(r, c) = (vx(r, c) - mean(0, c)) * inv(0, c);
      out(r, c) = vs(0, c) * xhat(r, c) + vb(0, c);
    }
  bool ng = nodes_[x].needs_grad || nodes_[scale].needs_grad || nodes_[shift].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, x, scale, shift, o, xhat = std::move(xhat),
                      inv = std::move(inv)] {
      const Matrix& g = nodes_[o].grad;
      int n = g.rows, cdim = g.cols;
      // Per-column reductions of the upstream gradient.
      std::vector<double> gsum(cdim, 0.0), gxsum(cdim, 0.0);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < cdim; ++c) {
          gsum[c] += g(r, c);
          gxsum[c] += g(r, c) * xhat(r, c);
        }
      if (nodes_[shift].needs_grad)
        for (int c = 0; c < cdim; ++c) nodes_[shift].grad(0, c) += gsum[c];
      if (nodes_[scale].needs_grad)
        for (int c = 0; c < cdim; ++c) nodes_[scale].grad(0, c) += gxsum[c];
      if (nodes_[x].needs_grad) {
        const Matrix& vs = nodes_[scale].value;
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < cdim; ++c)
            nodes_[x].grad(r, c) +=
                vs(0, c) * inv(0, c) *
                (g(r, c) - gsum[c] / n - xhat(r, c) * gxsum[c] / n);
      }
    };
  return o;
}

Tape::Id Tape::sum_all(Id a) {
  check(a);
  double s = 0.0;
  for (double v : nodes_[a].value.data) s += v;
  Matrix out(1, 1, s);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      double g = nodes_[o].grad.data[0];
      for (double& d : nodes_[a].grad.data) d += g;
    };
  return o;
}

Tape::Id Tape::row_sum(Id a) {
  check(a);
  const Matrix& v = nodes_[a].value;
  Matrix out(v.rows, 1);
  for (int r = 0; r < v.rows; ++r)
    for (int c = 0; c < v.cols; ++c) out(r, 0) += v(r, c);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      Matrix& ga = nodes_[a].grad;
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(r, 0);
    };
  return o;
}

Tape::Id Tape::col_sum(Id a) {
  check(a);
  const Matrix& v = nodes_[a].value;
  Matrix out(1, v.cols);
  for (int r = 0; r < v.rows; ++r)
    for (int c = 0; c < v.cols; ++c) out(0, c) += v(r, c);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      Matrix& ga = nodes_[a].grad;
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(0, c);
    };
  return o;
}

Tape::Id Tape::col_mean(Id a) {
  check(a);
  const Matrix& v = nodes_[a].value;
  Matrix out(1, v.cols);
  for (int r = 0; r < v.rows; ++r)
    for (int c = 0; c < v.cols; ++c) out(0, c) += v(r, c);
  for (int c = 0; c < v.cols; ++c) out(0, c) /= v.rows;
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      Matrix& ga = nodes_[a].grad;
      for (int r = 0; r < ga.rows; ++r)
        for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(0, c) / ga.rows;
    };
  return o;
}

Tape::Id Tape::diag_part(Id a) {
  check(a);
  const Matrix& v = nodes_[a].value;
  if (v.rows != v.cols)
    throw std::invalid_argument("diag_part: matrix must be square");
  Matrix out(1, v.cols);
  for (int c = 0; c < v.cols; ++c) out(0, c) = v(c, c);
  bool ng = nodes_[a].needs_grad;
  Id o = push(std::move(out), ng);
  if (ng)
    nodes_[o].back = [this, a, o] {
      const Matrix& g = nodes_[o].grad;
      for (int c = 0; c < g.cols; ++c) nodes_[a].grad(c, c) += g(0, c);
    };
  return o;
}

Tape::Id Tape::softmax_xent_sum(Id logits, std::vector<int> labels) {
  check(logits);
  const Matrix& v = nodes_[logits].value;
  if (int(labels.size()) != v.rows)
    throw std::invalid_argument("softmax_xent_sum: one label per row required");
  Matrix probs = vicntm::softmax_rows(v);
  double loss = 0.0;
  for (int r = 0; r < v.rows; ++r) {
    int y = labels[r];
    if (y < 0 || y >= v.cols)
      throw std::invalid_argument("softmax_xent_sum: label out of range");
    double mx = v(r, 0);
    for (int c = 1; c < v.cols; ++c) mx = std::max(mx, v(r, c));
    double lse = 0.0;
    for (int c = 0; c < v.cols; ++c) lse += std::exp(v(r, c) - mx);
    loss += mx + std::log(lse) - v(r, y);
  }
  bool ng = nodes_[logits].needs_grad;
  Id o = push(Matrix(1, 1, loss), ng);
  if (ng)
    nodes_[o].back = [this, logits, o, probs = std::move(probs),
                      labels = std::move(labels)] {
      double g = nodes_[o].grad.data[0];
      Matrix& gl = nodes_[logits].grad;
      for (int r = 0; r < gl.rows; ++r)
        for (int c = 0; c < gl.cols; ++c)
          gl(r, c) += g * (probs(r, c) - (labels[r] == c ? 1.0 : 0.0));
    };
  return o;
}

void Tape::backward(Id loss) {
  check(loss);
  if (backward_done_)
    throw std::logic_error("tape: backward() may run only once per tape");
  backward_done_ = true;
  Node& top = nodes_[loss];
  if (top.value.rows != 1 || top.value.cols != 1)
    throw std::invalid_argument("tape: backward() needs a 1x1 loss node");
  if (!top.needs_grad) return;
  top.grad.data[0] = 1.0;
  for (int i = loss; i >= 0; --i)
    if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back();
}

}  // namespace vicntm
