#pragma once

#include <functional>
#include <string>

#include "vicntm/params.hpp"

namespace vicntm {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  size_t checked = 0;
};

// Central finite differences per coordinate against the analytic gradient.
// `loss` must re-evaluate the objective from the current store contents
// (holding any noise or sampled inputs fixed); `grads` must fill the store
// gradients at the same point. Discrepancies are scaled by
// max(1, |fd|, |analytic|) so near-zero coordinates do not blow up the
// ratio. `skip` may exclude coordinates that sit on a kink (e.g. an input
// exactly at a ReLU corner), where the two-sided difference is not a
// derivative estimate.
GradCheckReport grad_check(
    ParamStore& params, const std::function<double()>& loss,
    const std::function<void()>& grads, double h = 1e-5,
    const std::function<bool(const std::string&, int)>& skip = {});

}  // namespace vicntm
