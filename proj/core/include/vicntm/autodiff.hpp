#pragma once

#include <functional>
#include <vector>

#include "vicntm/matrix.hpp"

namespace vicntm {

// Eager reverse-mode tape over Matrix values. Every op evaluates its result
// at creation time (so samplers can peek at intermediate values mid-graph)
// and records a closure that scatters the output gradient back to its
// parents. backward() walks the tape in reverse creation order, which is a
// valid topological order by construction.
class Tape {
 public:
  using Id = int;

  Id constant(Matrix v);  // no gradient tracked
  Id leaf(Matrix v);      // gradient-tracked input (parameters)

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);  // elementwise
  Id div(Id a, Id b);  // elementwise
  Id matmul(Id a, Id b);
  Id transpose(Id a);

  // Broadcast a 1 x c row across all rows of a.
  Id add_row(Id a, Id v);
  Id sub_row(Id a, Id v);
  Id mul_row(Id a, Id v);

  Id scale(Id a, double s);
  Id add_scalar(Id a, double s);
  Id exp(Id a);
  // ln(max(a, floor)); gradient is zero where the clamp is active.
  Id log_clamped(Id a, double floor);
  Id sqrt(Id a);
  Id square(Id a);
  Id relu(Id a);
  Id softplus(Id a);
  Id softmax_rows(Id a);

  // Training-mode batchnorm with batch statistics (biased variance).
  // The batch moments are exposed so the caller can fold them into running
  // statistics; the op itself has no side effects.
  Id batchnorm(Id x, Id scale, Id shift, double eps,
               Matrix* batch_mean = nullptr, Matrix* batch_var = nullptr);

  Id sum_all(Id a);   // -> 1x1
  Id row_sum(Id a);   // -> n x 1
  Id col_sum(Id a);   // -> 1 x c
  Id col_mean(Id a);  // -> 1 x c
  Id diag_part(Id a); // square d x d -> 1 x d

  // Sum over rows of -log softmax(logits)[i, labels[i]].
  Id softmax_xent_sum(Id logits, std::vector<int> labels);

  const Matrix& value(Id id) const { return nodes_[id].value; }
  const Matrix& grad(Id id) const { return nodes_[id].grad; }
  bool tracked(Id id) const { return nodes_[id].needs_grad; }
  double scalar(Id id) const;  // value of a 1x1 node

  // Seeds d(loss)/d(loss) = 1 and accumulates into every tracked node.
  // One backward pass per tape.
  void backward(Id loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated iff needs_grad
    bool needs_grad = false;
    std::function<void()> back;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  Id push(Matrix v, bool needs_grad);
  void check(Id id) const;
  static void accumulate(Matrix& dst, const Matrix& src);
};

}  // namespace vicntm
