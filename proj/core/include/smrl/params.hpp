#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "smrl/rng.hpp"
#include "smrl/tensor.hpp"

namespace smrl {

// Named parameters with parallel gradient buffers. std::map keeps iteration
// deterministic (sorted by name), which the serializers and Adam rely on.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  Tensor& add(const std::string& name, Tensor init) {
    require(entries_.find(name) == entries_.end(), "duplicate parameter: " + name);
    Entry e;
    e.grad = Tensor::zeros(init.shape);
    e.value = std::move(init);
    return entries_.emplace(name, std::move(e)).first->second.value;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    require(it != entries_.end(), "unknown parameter: " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    require(it != entries_.end(), "unknown parameter: " + name);
    return it->second;
  }

  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  void zero_grads() {
    for (auto& [name, e] : entries_) {
      for (double& g : e.grad.data) g = 0.0;
    }
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.numel();
    return n;
  }

  double grad_global_norm() const {
    double sq = 0.0;
    for (const auto& [name, e] : entries_)
      for (double g : e.grad.data) sq += g * g;
    return std::sqrt(sq);
  }

  // Scales all gradients so their global norm is at most max_norm.
  void clip_grad_norm(double max_norm) {
    double norm = grad_global_norm();
    if (norm > max_norm && norm > 0.0) {
      double scale = max_norm / norm;
      for (auto& [name, e] : entries_)
        for (double& g : e.grad.data) g *= scale;
    }
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t count() const { return entries_.size(); }

 private:
  std::map<std::string, Entry> entries_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), the project-wide weight init
inline Tensor init_weight(std::size_t out, std::size_t in, Rng& rng, double scale = 1.0) {
  Tensor w = Tensor::zeros({out, in});
  double bound = scale / std::sqrt(static_cast<double>(in));
  for (double& x : w.data) x = rng.uniform(-bound, bound);
  return w;
}

}  // namespace smrl
