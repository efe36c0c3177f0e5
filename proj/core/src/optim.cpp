#include "smrl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smrl {

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  for (auto& [name, e] : params) {
    for (double g : e.grad.data)
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" + name + "'");
  }

  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (auto& [name, e] : params) {
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor::zeros(e.value.shape)).first;
      state.v.emplace(name, Tensor::zeros(e.value.shape));
    }
    Tensor& m = mit->second;
    Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      double g = e.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    for (double& g : e.grad.data) g = 0.0;
  }
}

double grad_check(ParamStore& params, const std::function<double(ParamStore&)>& loss,
                  double eps) {
  params.zero_grads();
  loss(params);

  // snapshot analytic gradients; the forward-only probes below still
  // accumulate, so we subtract nothing and simply restore at the end
  std::map<std::string, Tensor> analytic;
  for (auto& [name, e] : params) analytic.emplace(name, e.grad);

  double worst = 0.0;
  for (auto& [name, e] : params) {
    const Tensor& ga = analytic.at(name);
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      double orig = e.value[i];
      e.value[i] = orig + eps;
      double up = loss(params);
      e.value[i] = orig - eps;
      double down = loss(params);
      e.value[i] = orig;
      double numeric = (up - down) / (2.0 * eps);
      double denom = std::max({std::abs(ga[i]), std::abs(numeric), 1e-8});
      double rel = std::abs(ga[i] - numeric) / denom;
      worst = std::max(worst, rel);
    }
  }
  params.zero_grads();
  return worst;
}

}  // namespace smrl
