#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "dar/common.hpp"
#include "dar/tensor.hpp"

namespace dar {

struct SoftmaxResult {
  Tensor probs;  // sums to 1
  Scalar loss;   // -ln(probs[target]), >= 0
};

// Plain (non-graph) softmax + cross entropy, max-shifted; used at inference
// and in invariant tests. The graph counterpart is Graph::softmax_xent_loss.
inline SoftmaxResult softmax_xent(const Tensor& logits, std::size_t target) {
  if (logits.rank() != 1) {
    throw DimensionError("softmax_xent: logits must be a vector");
  }
  const std::size_t c = logits.size();
  if (target >= c) throw IndexError("softmax_xent: target class out of range");
  Scalar mx = logits.values[0];
  for (Scalar v : logits.values) mx = std::max(mx, v);
  Tensor probs({c});
  Scalar denom = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    probs.values[i] = std::exp(logits.values[i] - mx);
    denom += probs.values[i];
  }
  for (Scalar& v : probs.values) v /= denom;
  const Scalar loss = -std::log(probs.values[target]);
  return {std::move(probs), loss};
}

// Argmax with ties resolved to the lowest class index.
inline std::size_t argmax(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v.values[i] > v.values[best]) best = i;
  }
  return best;
}

}  // namespace dar
