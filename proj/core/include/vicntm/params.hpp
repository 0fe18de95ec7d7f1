#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vicntm/autodiff.hpp"
#include "vicntm/matrix.hpp"

namespace vicntm {

// Named parameter tensors with gradient slots. Registration order is
// remembered so optimizer sweeps and serialization are deterministic.
struct ParamStore {
  std::vector<std::string> names;
  std::unordered_map<std::string, Matrix> value;
  std::unordered_map<std::string, Matrix> grad;

  Matrix& add(const std::string& name, Matrix init) {
    if (value.count(name))
      throw std::invalid_argument("duplicate parameter: " + name);
    names.push_back(name);
    grad.emplace(name, Matrix::zeros(init.rows, init.cols));
    return value.emplace(name, std::move(init)).first->second;
  }
  bool has(const std::string& name) const { return value.count(name) != 0; }
  Matrix& at(const std::string& name) {
    auto it = value.find(name);
    if (it == value.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }
  const Matrix& at(const std::string& name) const {
    auto it = value.find(name);
    if (it == value.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }
  Matrix& grad_of(const std::string& name) {
    auto it = grad.find(name);
    if (it == grad.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }
  void zero_grads() {
    for (auto& [k, g] : grad)
      for (double& v : g.data) v = 0.0;
  }
  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& name : names) n += value.at(name).size();
    return n;
  }
};

// Binds store parameters to tape leaves on demand; after backward() the
// accumulated leaf gradients are copied back with write_grads().
struct BoundParams {
  Tape* tape = nullptr;
  ParamStore* store = nullptr;
  std::map<std::string, Tape::Id> ids;

  BoundParams(Tape& t, ParamStore& s) : tape(&t), store(&s) {}

  Tape::Id operator()(const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    Tape::Id id = tape->leaf(store->at(name));
    ids.emplace(name, id);
    return id;
  }

  void write_grads() {
    for (const auto& [name, id] : ids) {
      const Matrix& g = tape->grad(id);
      Matrix& dst = store->grad_of(name);
      for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
    }
  }
};

}  // namespace vicntm
