#include "vicntm/grad_check.hpp"

#include <cmath>

namespace vicntm {

GradCheckReport grad_check(ParamStore& params,
                           const std::function<double()>& loss,
                           const std::function<void()>& grads, double h,
                           const std::function<bool(const std::string&, int)>& skip) {
  params.zero_grads();
  grads();
  std::unordered_map<std::string, Matrix> analytic;
  for (const auto& name : params.names) analytic.emplace(name, params.grad_of(name));

  GradCheckReport report;
  for (const auto& name : params.names) {
    Matrix& p = params.at(name);
    const Matrix& a = analytic.at(name);
    for (int i = 0; i < int(p.data.size()); ++i) {
      if (skip && skip(name, i)) continue;
      double orig = p.data[i];
      p.data[i] = orig + h;
      double fp = loss();
      p.data[i] = orig - h;
      double fm = loss();
      p.data[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double denom = std::max({1.0, std::fabs(fd), std::fabs(a.data[i])});
      double rel = std::fabs(fd - a.data[i]) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace vicntm
