#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "vicntm/autodiff.hpp"
#include "vicntm/errors.hpp"
#include "vicntm/grad_check.hpp"
#include "vicntm/matrix.hpp"
#include "vicntm/optimizer.hpp"
#include "vicntm/params.hpp"
#include "vicntm/rng.hpp"

using namespace vicntm;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k)
      for (int j = 0; j < b.cols; ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Shared pattern: evaluate and differentiate a tape program built from a
// single store, then finite-difference it.
GradCheckReport check_program(
    ParamStore& ps, const std::function<Tape::Id(Tape&, BoundParams&)>& program,
    const std::function<bool(const std::string&, int)>& skip = {}) {
  auto loss = [&] {
    Tape t;
    BoundParams b(t, ps);
    return t.scalar(program(t, b));
  };
  auto grads = [&] {
    ps.zero_grads();
    Tape t;
    BoundParams b(t, ps);
    t.backward(program(t, b));
    b.write_grads();
  };
  return grad_check(ps, loss, grads, 1e-5, skip);
}

}  // namespace

TEST_CASE("matmul agrees with the naive triple loop") {
  Rng rng(1);
  Matrix a = random_matrix(5, 7, rng), b = random_matrix(7, 3, rng);
  Matrix got = matmul(a, b), want = naive_matmul(a, b);
  REQUIRE(got.same_shape(want));
  for (size_t i = 0; i < got.data.size(); ++i)
    CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}

TEST_CASE("matmul_nt and matmul_tn avoid explicit transposes correctly") {
  Rng rng(2);
  Matrix a = random_matrix(4, 6, rng), b = random_matrix(5, 6, rng);
  Matrix nt = matmul_nt(a, b);                  // a * b^T
  Matrix want = naive_matmul(a, transpose(b));
  for (size_t i = 0; i < nt.data.size(); ++i)
    CHECK(nt.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));

  Matrix c = random_matrix(6, 4, rng), d = random_matrix(6, 3, rng);
  Matrix tn = matmul_tn(c, d);                  // c^T * d
  Matrix want2 = naive_matmul(transpose(c), d);
  for (size_t i = 0; i < tn.data.size(); ++i)
    CHECK(tn.data[i] == doctest::Approx(want2.data[i]).epsilon(1e-12));
}

TEST_CASE("softmax rows are simplex points and shift-invariant") {
  Rng rng(3);
  Matrix x = random_matrix(4, 6, rng, -5, 5);
  Matrix s = softmax_rows(x);
  for (int i = 0; i < s.rows; ++i) {
    double total = 0;
    for (int j = 0; j < s.cols; ++j) {
      CHECK(s(i, j) > 0.0);
      total += s(i, j);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  Matrix shifted = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) shifted(i, j) += 123.0;
  Matrix s2 = softmax_rows(shifted);
  for (size_t i = 0; i < s.data.size(); ++i)
    CHECK(s2.data[i] == doctest::Approx(s.data[i]).epsilon(1e-12));
}

TEST_CASE("batchnorm standardizes batch columns and folds running stats") {
  Rng rng(4);
  Matrix x = random_matrix(8, 3, rng, -2, 4);
  Matrix scale = Matrix::full(1, 3, 1.0), shift = Matrix::zeros(1, 3);
  BnStats stats = BnStats::fresh(3);
  Matrix y = batchnorm(x, scale, shift, true, stats, 1e-5, 0.1);
  for (int j = 0; j < 3; ++j) {
    double m = 0, v = 0;
    for (int i = 0; i < 8; ++i) m += y(i, j);
    m /= 8;
    for (int i = 0; i < 8; ++i) v += (y(i, j) - m) * (y(i, j) - m);
    v /= 8;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));  // eps-deflated
  }
  // Running stats: (1-momentum)*old + momentum*batch, unbiased variance.
  double bm = 0, bv = 0;
  for (int i = 0; i < 8; ++i) bm += x(i, 0);
  bm /= 8;
  for (int i = 0; i < 8; ++i) bv += (x(i, 0) - bm) * (x(i, 0) - bm);
  bv /= 8;
  double unbiased = bv * 8.0 / 7.0;
  CHECK(stats.mean(0, 0) == doctest::Approx(0.9 * 0.0 + 0.1 * bm).epsilon(1e-12));
  CHECK(stats.var(0, 0) == doctest::Approx(0.9 * 1.0 + 0.1 * unbiased).epsilon(1e-12));

  // Eval mode uses the running statistics, not the batch.
  Matrix one_row(1, 3, 0.5);
  Matrix ye = batchnorm(one_row, scale, shift, false, stats, 1e-5, 0.1);
  CHECK(ye(0, 0) == doctest::Approx((0.5 - stats.mean(0, 0)) /
                                    std::sqrt(stats.var(0, 0) + 1e-5)));
  CHECK_THROWS_AS(batchnorm(one_row, scale, shift, true, stats, 1e-5, 0.1),
                  std::invalid_argument);
}

TEST_CASE("rng streams are deterministic and resumable from a counter") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  uint64_t counter = a.counter();
  Rng resumed(42, counter);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == resumed.next_u64());
}

TEST_CASE("rng uniforms live in [0,1) and permutations are permutations") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  auto perm = rng.permutation(257);
  std::set<int> seen(perm.begin(), perm.end());
  CHECK(seen.size() == 257);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 256);
}

TEST_CASE("rng normals have roughly standard moments") {
  Rng rng(8);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("log_uniform covers the bounds multiplicatively") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    double v = rng.log_uniform(1.25, 500.0);
    CHECK(v >= 1.25);
    CHECK(v <= 500.0);
  }
}

TEST_CASE("elementwise and broadcast tape ops pass finite differences") {
  Rng rng(10);
  ParamStore ps;
  ps.add("a", random_matrix(3, 4, rng, 0.5, 2.0));
  ps.add("b", random_matrix(3, 4, rng, 0.5, 2.0));
  ps.add("r", random_matrix(1, 4, rng, 0.5, 2.0));
  auto rep = check_program(ps, [](Tape& t, BoundParams& b) {
    auto x = t.mul(b("a"), b("b"));
    x = t.div(x, t.add_scalar(b("b"), 3.0));
    x = t.add_row(x, b("r"));
    x = t.sub_row(x, b("r"));
    x = t.mul_row(x, b("r"));
    x = t.sub(t.add(x, b("a")), b("b"));
    return t.sum_all(t.scale(x, 1.7));
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("exp log sqrt square softplus tape ops pass finite differences") {
  Rng rng(11);
  ParamStore ps;
  ps.add("a", random_matrix(4, 3, rng, 0.2, 1.5));
  auto rep = check_program(ps, [](Tape& t, BoundParams& b) {
    auto a = b("a");
    auto y = t.add(t.exp(t.scale(a, 0.3)), t.sqrt(a));
    y = t.add(y, t.square(a));
    y = t.add(y, t.softplus(a));
    y = t.add(y, t.log_clamped(a, 1e-10));
    return t.sum_all(y);
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("log_clamped zeroes the gradient where the floor is active") {
  ParamStore ps;
  Matrix& a = ps.add("a", Matrix(1, 2));
  a(0, 0) = 1e-14;  // below the floor
  a(0, 1) = 0.5;
  Tape t;
  BoundParams b(t, ps);
  auto loss = t.sum_all(t.log_clamped(b("a"), 1e-10));
  t.backward(loss);
  b.write_grads();
  CHECK(ps.grad_of("a")(0, 0) == 0.0);
  CHECK(ps.grad_of("a")(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("matmul transpose and reduction tape ops pass finite differences") {
  Rng rng(12);
  ParamStore ps;
  ps.add("w", random_matrix(3, 5, rng));
  ps.add("x", random_matrix(4, 3, rng));
  auto rep = check_program(ps, [](Tape& t, BoundParams& b) {
    auto y = t.matmul(b("x"), b("w"));           // 4x5
    auto yt = t.transpose(y);                    // 5x4
    auto g = t.matmul(yt, y);                    // 5x5 gram
    auto d = t.diag_part(g);                     // 1x5
    auto rs = t.row_sum(y);                      // 4x1
    auto cs = t.col_sum(y);                      // 1x5
    auto cm = t.col_mean(y);                     // 1x5
    return t.add(t.add(t.sum_all(d), t.sum_all(rs)),
                 t.add(t.sum_all(cs), t.sum_all(cm)));
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("relu gradient checks away from the kink") {
  Rng rng(13);
  ParamStore ps;
  Matrix a = random_matrix(4, 4, rng, -2, 2);
  for (double& v : a.data)
    if (std::fabs(v) < 0.05) v = 0.1;  // keep the FD probe off the corner
  ps.add("a", a);
  auto rep = check_program(ps, [](Tape& t, BoundParams& b) {
    return t.sum_all(t.relu(b("a")));
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("softmax_rows tape op passes finite differences") {
  Rng rng(14);
  ParamStore ps;
  ps.add("a", random_matrix(3, 5, rng, -2, 2));
  ps.add("w", random_matrix(3, 5, rng));
  auto rep = check_program(ps, [](Tape& t, BoundParams& b) {
    // Weighted sum of softmax entries exercises the full Jacobian.
    return t.sum_all(t.mul(t.softmax_rows(b("a")), b("w")));
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("batchnorm tape op matches finite differences for x scale shift") {
  Rng rng(15);
  ParamStore ps;
  ps.add("x", random_matrix(6, 3, rng, -1, 3));
  ps.add("g", random_matrix(1, 3, rng, 0.5, 1.5));
  ps.add("s", random_matrix(1, 3, rng, -0.5, 0.5));
  ps.add("w", random_matrix(6, 3, rng));
  auto rep = check_program(ps, [](Tape& t, BoundParams& b) {
    auto y = t.batchnorm(b("x"), b("g"), b("s"), 1e-5);
    return t.sum_all(t.mul(y, b("w")));
  });
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("batchnorm tape op reports batch moments without side effects") {
  Rng rng(16);
  Matrix x = random_matrix(5, 2, rng, -1, 1);
  Tape t;
  auto xid = t.constant(x);
  auto g = t.constant(Matrix::full(1, 2, 1.0));
  auto s = t.constant(Matrix::zeros(1, 2));
  Matrix bm, bv;
  t.batchnorm(xid, g, s, 1e-5, &bm, &bv);
  double m0 = 0;
  for (int i = 0; i < 5; ++i) m0 += x(i, 0);
  m0 /= 5;
  CHECK(bm(0, 0) == doctest::Approx(m0).epsilon(1e-12));
  double v0 = 0;
  for (int i = 0; i < 5; ++i) v0 += (x(i, 0) - m0) * (x(i, 0) - m0);
  v0 /= 5;  // biased, like the normalization itself
  CHECK(bv(0, 0) == doctest::Approx(v0).epsilon(1e-12));
}

TEST_CASE("softmax_xent_sum matches the explicit log-softmax loss") {
  Rng rng(17);
  ParamStore ps;
  ps.add("z", random_matrix(4, 6, rng, -3, 3));
  std::vector<int> labels{2, 0, 5, 1};

  Tape t;
  BoundParams b(t, ps);
  auto loss = t.softmax_xent_sum(b("z"), labels);
  const Matrix& z = ps.at("z");
  double want = 0;
  for (int i = 0; i < 4; ++i) {
    double mx = z(i, 0);
    for (int j = 1; j < 6; ++j) mx = std::max(mx, z(i, j));
    double lse = 0;
    for (int j = 0; j < 6; ++j) lse += std::exp(z(i, j) - mx);
    want += -(z(i, labels[i]) - mx - std::log(lse));
  }
  CHECK(t.scalar(loss) == doctest::Approx(want).epsilon(1e-12));

  auto rep = check_program(ps, [&](Tape& tt, BoundParams& bb) {
    return tt.softmax_xent_sum(bb("z"), labels);
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("tape allows only one backward pass") {
  Tape t;
  auto a = t.leaf(Matrix::full(1, 1, 2.0));
  auto l = t.sum_all(t.square(a));
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), std::logic_error);
}

TEST_CASE("constants do not accumulate gradients") {
  Tape t;
  auto c = t.constant(Matrix::full(2, 2, 3.0));
  auto a = t.leaf(Matrix::full(2, 2, 1.0));
  auto l = t.sum_all(t.mul(c, a));
  t.backward(l);
  CHECK_FALSE(t.tracked(c));
  CHECK(t.grad(a)(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("adam first step moves by lr against the gradient sign") {
  ParamStore ps;
  ps.add("w", Matrix::full(1, 2, 1.0));
  ps.grad_of("w")(0, 0) = 0.5;
  ps.grad_of("w")(0, 1) = -2.0;
  AdamState st;
  st.cfg = AdamConfig{0.01, 0.9, 0.999, 1e-8};
  adam_step(ps, st);
  // With bias correction, step 1 is lr * g / (|g| + eps') ~ lr * sign(g).
  double g0 = 0.5;
  double m = 0.1 * g0, v = 0.001 * g0 * g0;
  double mh = m / (1 - 0.9), vh = v / (1 - 0.999);
  double want0 = 1.0 - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  CHECK(ps.at("w")(0, 0) == doctest::Approx(want0).epsilon(1e-12));
  CHECK(ps.at("w")(0, 1) > 1.0);  // negative gradient climbs
  CHECK(st.step == 1);
}

TEST_CASE("multi-store adam shares a single step counter") {
  ParamStore a, b;
  a.add("enc.w", Matrix::full(1, 1, 0.0));
  b.add("l1.w", Matrix::full(1, 1, 0.0));
  a.grad_of("enc.w")(0, 0) = 1.0;
  b.grad_of("l1.w")(0, 0) = 1.0;
  AdamState st;
  adam_step({&a, &b}, st);
  CHECK(st.step == 1);
  CHECK(a.at("enc.w")(0, 0) == doctest::Approx(b.at("l1.w")(0, 0)));
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
  ParamStore ps;
  ps.add("dec.beta", Matrix::full(1, 1, 0.0));
  ps.grad_of("dec.beta")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState st;
  CHECK_THROWS_WITH_AS(adam_step(ps, st),
                       doctest::Contains("dec.beta"), TrainError);
}

TEST_CASE("grad_check flags a deliberately wrong gradient") {
  ParamStore ps;
  ps.add("a", Matrix::full(1, 1, 1.5));
  auto loss = [&] { return ps.at("a")(0, 0) * ps.at("a")(0, 0); };
  auto bad_grads = [&] {
    ps.zero_grads();
    ps.grad_of("a")(0, 0) = 7.0;  // truth is 3.0
  };
  auto rep = grad_check(ps, loss, bad_grads);
  CHECK(rep.max_rel_err > 0.5);
  CHECK(rep.worst_param == "a");
}
