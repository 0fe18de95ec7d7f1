#include "vicntm/optimizer.hpp"

#include <cmath>
#include <vector>

#include "vicntm/errors.hpp"

namespace vicntm {

namespace {

void update_store(ParamStore& params, AdamState& state, double bc1, double bc2) {
  const AdamConfig& c = state.cfg;
  for (const std::string& name : params.names) {
    Matrix& p = params.at(name);
    const Matrix& g = params.grad_of(name);
    if (!g.all_finite())
      throw TrainError("non-finite gradient for parameter '" + name + "'");
    auto mi = state.m.find(name);
    if (mi == state.m.end()) {
      mi = state.m.emplace(name, Matrix::zeros(p.rows, p.cols)).first;
      state.v.emplace(name, Matrix::zeros(p.rows, p.cols));
    }
    Matrix& m = mi->second;
    Matrix& v = state.v.at(name);
    for (size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * g.data[i];
      v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * g.data[i] * g.data[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace

void adam_step(const std::vector<ParamStore*>& stores, AdamState& state) {
  ++state.step;
  double bc1 = 1.0 - std::pow(state.cfg.beta1, double(state.step));
  double bc2 = 1.0 - std::pow(state.cfg.beta2, double(state.step));
  for (ParamStore* s : stores) update_store(*s, state, bc1, bc2);
}

void adam_step(ParamStore& params, AdamState& state) {
  adam_step(std::vector<ParamStore*>{&params}, state);
}

}  // namespace vicntm
