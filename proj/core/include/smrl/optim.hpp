#pragma once

#include <functional>
#include <map>
#include <string>

#include "smrl/params.hpp"

namespace smrl {

struct AdamState {
  std::map<std::string, Tensor> m;  // first moments
  std::map<std::string, Tensor> v;  // second moments
  long t = 0;                       // completed steps
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every parameter in the store. Gradients are
// zeroed after a successful step. A non-finite gradient aborts with the
// offending parameter named.
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

// Max over parameters of |analytic - central difference| relative error.
// `loss` must build its own tape over `params` and return the loss value;
// it is invoked once with gradient accumulation and then 2N times
// forward-only. Parameters are restored afterwards.
double grad_check(ParamStore& params, const std::function<double(ParamStore&)>& loss,
                  double eps);

}  // namespace smrl
