#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dar/common.hpp"
#include "dar/optim.hpp"

namespace dar {

struct GradCheckResult {
  Scalar max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central-difference gradient check. `forward` evaluates the loss from the
// current parameter values without side effects; `backward_fill` zeroes the
// grads and fills them analytically for the same loss. Relative error per
// coordinate is |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check(const std::vector<Parameter*>& params,
                                  const std::function<Scalar()>& forward,
                                  const std::function<void()>& backward_fill,
                                  Scalar eps = 1e-5) {
  backward_fill();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const Scalar saved = p.value.values[i];
      p.value.values[i] = saved + eps;
      const Scalar f_plus = forward();
      p.value.values[i] = saved - eps;
      const Scalar f_minus = forward();
      p.value.values[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("grad_check: non-finite loss at parameter " +
                           p.name);
      }
      const Scalar numeric = (f_plus - f_minus) / (2.0 * eps);
      const Scalar a = analytic[pi].values[i];
      const Scalar rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace dar
