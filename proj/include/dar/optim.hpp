#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dar/common.hpp"
#include "dar/rng.hpp"
#include "dar/tensor.hpp"

namespace dar {

// A trainable tensor with its gradient buffer and Adam moment state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::size_t step = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape),
        adam_m(value.shape),
        adam_v(value.shape) {}

  void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

// Bias-corrected Adam update, applied in place. The step counter increments by
// exactly one per call, including zero-gradient calls.
inline void adam_step(Parameter& param, const Tensor& grad,
                      const AdamConfig& cfg = {}) {
  require_same_shape(param.value, grad, "adam_step");
  param.step += 1;
  const Scalar bc1 = 1.0 - std::pow(cfg.beta1, static_cast<Scalar>(param.step));
  const Scalar bc2 = 1.0 - std::pow(cfg.beta2, static_cast<Scalar>(param.step));
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const Scalar g = grad.values[i];
    param.adam_m.values[i] = cfg.beta1 * param.adam_m.values[i] + (1.0 - cfg.beta1) * g;
    param.adam_v.values[i] = cfg.beta2 * param.adam_v.values[i] + (1.0 - cfg.beta2) * g * g;
    const Scalar m_hat = param.adam_m.values[i] / bc1;
    const Scalar v_hat = param.adam_v.values[i] / bc2;
    param.value.values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

inline void adam_step(Parameter& param, const AdamConfig& cfg = {}) {
  adam_step(param, param.grad, cfg);
}

// Owns all parameters of one model. Node-based map keeps Parameter addresses
// stable across insertions.
class ParameterStore {
 public:
  Parameter& create(const std::string& name, Tensor init) {
    if (params_.count(name)) {
      throw ConfigError("duplicate parameter name: " + name);
    }
    order_.push_back(name);
    auto [it, _] = params_.emplace(name, Parameter(name, std::move(init)));
    return it->second;
  }

  // Glorot-uniform init for dense / conv / recurrent weights.
  Parameter& create_glorot(const std::string& name,
                           std::vector<std::size_t> shape, std::size_t fan_in,
                           std::size_t fan_out, SeededRng& rng) {
    Tensor t(std::move(shape));
    const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
    for (Scalar& v : t.values) v = rng.uniform(-limit, limit);
    return create(name, std::move(t));
  }

  Parameter& create_zeros(const std::string& name,
                          std::vector<std::size_t> shape) {
    return create(name, Tensor(std::move(shape)));
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Parameter& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw LookupError("unknown parameter: " + name);
    return it->second;
  }

  const Parameter& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw LookupError("unknown parameter: " + name);
    return it->second;
  }

  // Creation order; deterministic for a given model construction sequence.
  const std::vector<std::string>& names() const { return order_; }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    out.reserve(order_.size());
    for (const auto& n : order_) out.push_back(&params_.at(n));
    return out;
  }

  void zero_grads() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  void adam_step_all(const AdamConfig& cfg) {
    for (const auto& n : order_) adam_step(params_.at(n), cfg);
  }

  // Snapshot / restore of values only (optimizer state excluded); used by
  // early stopping to roll back to the best validation epoch.
  std::map<std::string, Tensor> snapshot_values() const {
    std::map<std::string, Tensor> out;
    for (const auto& [n, p] : params_) out.emplace(n, p.value);
    return out;
  }

  void restore_values(const std::map<std::string, Tensor>& snap) {
    for (const auto& [n, t] : snap) {
      Parameter& p = get(n);
      require_same_shape(p.value, t, "restore_values");
      p.value = t;
    }
  }

 private:
  std::map<std::string, Parameter> params_;
  std::vector<std::string> order_;
};

}  // namespace dar
