#pragma once

#include "vicntm/autodiff.hpp"
#include "vicntm/matrix.hpp"
#include "vicntm/params.hpp"
#include "vicntm/rng.hpp"

namespace vicntm {

struct VicWeights {
  double lambda = 25.0;  // invariance
  double mu = 25.0;      // variance
  double nu = 1.0;       // covariance
  double gamma = 1.0;    // target standard deviation
  double eps = 1e-4;     // inside the sqrt
};

// --- plain evaluations (no gradient) ---
// v(Y) = (1/d) sum_j max(0, gamma - sqrt(Var(Y_j) + eps)), unbiased variance.
double variance_term(const Matrix& y, double gamma, double eps);
// s(Y, Y') = (1/n) sum_i ||y_i - y'_i||^2.
double invariance_term(const Matrix& y, const Matrix& yp);
// c(Y) = (1/d) sum_{i != j} C(Y)_ij^2 with C the unbiased covariance.
double covariance_term(const Matrix& y);

// Weighted contributions; total == inv + var + cov bit-for-bit.
struct VicBreakdown {
  double inv = 0.0, var = 0.0, cov = 0.0, total = 0.0;
};
VicBreakdown vic_loss(const Matrix& y, const Matrix& yp, const VicWeights& w);

// --- tape versions (same math, gradients attached) ---
Tape::Id variance_term_node(Tape& t, Tape::Id y, double gamma, double eps);
Tape::Id invariance_term_node(Tape& t, Tape::Id y, Tape::Id yp);
Tape::Id covariance_term_node(Tape& t, Tape::Id y);

struct VicNodes {
  Tape::Id inv = -1, var = -1, cov = -1, total = -1;
  VicBreakdown values;
};
// include_inv lets the VC variants drop the invariance term structurally
// (weighted contribution logged as zero).
VicNodes vic_loss_nodes(Tape& t, Tape::Id y, Tape::Id yp, const VicWeights& w,
                        bool include_inv = true);

// Three fully-connected layers k -> dim -> dim -> dim with ReLU between
// layers (none after the last).
struct Expander {
  int input_dim = 0;
  int dim = 0;
  ParamStore params;  // l1.w l1.b l2.w l2.b l3.w l3.b

  static Expander init(int input_dim, int dim, Rng& rng);
};
// Default width and its admissible range, both relative to k.
int default_expander_dim(int k);
void check_expander_dim(int k, int dim);  // throws ConfigError outside [k, 16k]

Matrix expand_eval(const Expander& e, const Matrix& z);
Tape::Id expand_node(Tape& t, BoundParams& bound, Tape::Id z);

}  // namespace vicntm
