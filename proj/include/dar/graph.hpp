#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "dar/common.hpp"
#include "dar/optim.hpp"
#include "dar/rng.hpp"
#include "dar/tensor.hpp"

namespace dar {

// Reverse-mode tape. Nodes are created in topological order by construction,
// so backward() just walks the tape in reverse creation order. One Graph per
// forward pass; parameters live outside in a ParameterStore and are bound to
// leaf nodes via param().
class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backward;  // accumulates into parents' grads
  };

  using Var = Node*;

  Var leaf(Tensor v, bool requires_grad = false) {
    return make(std::move(v), requires_grad, nullptr);
  }

  // Leaf bound to a parameter; after backward(), accumulate_param_grads()
  // adds the leaf gradient into the parameter's grad buffer.
  Var param(Parameter& p) {
    Var n = make(p.value, true, nullptr);
    bound_.emplace_back(&p, n);
    return n;
  }

  void backward(Var loss) {
    if (loss->value.size() != 1) {
      throw DimensionError("backward: loss must be scalar, got " +
                           loss->value.shape_string());
    }
    loss->grad.values[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->requires_grad && it->backward) it->backward();
    }
  }

  void accumulate_param_grads() {
    for (auto& [p, node] : bound_) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) {
        p->grad.values[i] += node->grad.values[i];
      }
    }
  }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    require_same_shape(a->value, b->value, "add");
    Var out = make(a->value, a->requires_grad || b->requires_grad, nullptr);
    for (std::size_t i = 0; i < out->value.size(); ++i) {
      out->value.values[i] = a->value.values[i] + b->value.values[i];
    }
    out->backward = [a, b, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const Scalar g = out->grad.values[i];
        a->grad.values[i] += g;
        b->grad.values[i] += g;
      }
    };
    return out;
  }

  Var sub(Var a, Var b) {
    require_same_shape(a->value, b->value, "sub");
    Var out = make(a->value, a->requires_grad || b->requires_grad, nullptr);
    for (std::size_t i = 0; i < out->value.size(); ++i) {
      out->value.values[i] = a->value.values[i] - b->value.values[i];
    }
    out->backward = [a, b, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const Scalar g = out->grad.values[i];
        a->grad.values[i] += g;
        b->grad.values[i] -= g;
      }
    };
    return out;
  }

  Var mul(Var a, Var b) {
    require_same_shape(a->value, b->value, "mul");
    Var out = make(a->value, a->requires_grad || b->requires_grad, nullptr);
    for (std::size_t i = 0; i < out->value.size(); ++i) {
      out->value.values[i] = a->value.values[i] * b->value.values[i];
    }
    out->backward = [a, b, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const Scalar g = out->grad.values[i];
        a->grad.values[i] += g * b->value.values[i];
        b->grad.values[i] += g * a->value.values[i];
      }
    };
    return out;
  }

  // alpha * a + beta, elementwise.
  Var affine_const(Var a, Scalar alpha, Scalar beta) {
    Var out = make(a->value, a->requires_grad, nullptr);
    for (std::size_t i = 0; i < out->value.size(); ++i) {
      out->value.values[i] = alpha * a->value.values[i] + beta;
    }
    out->backward = [a, out, alpha] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        a->grad.values[i] += alpha * out->grad.values[i];
      }
    };
    return out;
  }

  Var relu(Var a) {
    Var out = make(a->value, a->requires_grad, nullptr);
    for (Scalar& v : out->value.values) v = v > 0.0 ? v : 0.0;
    out->backward = [a, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        if (a->value.values[i] > 0.0) a->grad.values[i] += out->grad.values[i];
      }
    };
    return out;
  }

  Var tanh_op(Var a) {
    Var out = make(a->value, a->requires_grad, nullptr);
    for (Scalar& v : out->value.values) v = std::tanh(v);
    out->backward = [a, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const Scalar t = out->value.values[i];
        a->grad.values[i] += (1.0 - t * t) * out->grad.values[i];
      }
    };
    return out;
  }

  Var sigmoid(Var a) {
    Var out = make(a->value, a->requires_grad, nullptr);
    for (Scalar& v : out->value.values) v = 1.0 / (1.0 + std::exp(-v));
    out->backward = [a, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        const Scalar s = out->value.values[i];
        a->grad.values[i] += s * (1.0 - s) * out->grad.values[i];
      }
    };
    return out;
  }

  // Elementwise maximum of two same-shape tensors. Ties route to the first.
  Var vmax(Var a, Var b) {
    require_same_shape(a->value, b->value, "vmax");
    Var out = make(a->value, a->requires_grad || b->requires_grad, nullptr);
    for (std::size_t i = 0; i < out->value.size(); ++i) {
      out->value.values[i] = std::max(a->value.values[i], b->value.values[i]);
    }
    out->backward = [a, b, out] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        if (a->value.values[i] >= b->value.values[i]) {
          a->grad.values[i] += out->grad.values[i];
        } else {
          b->grad.values[i] += out->grad.values[i];
        }
      }
    };
    return out;
  }

  // ---- shape ops ----

  Var concat(const std::vector<Var>& parts) {
    std::size_t total = 0;
    bool req = false;
    for (Var p : parts) {
      if (p->value.rank() != 1) {
        throw DimensionError("concat expects vectors, got " +
                             p->value.shape_string());
      }
      total += p->value.size();
      req = req || p->requires_grad;
    }
    Tensor v({total});
    std::size_t off = 0;
    for (Var p : parts) {
      std::copy(p->value.values.begin(), p->value.values.end(),
                v.values.begin() + static_cast<std::ptrdiff_t>(off));
      off += p->value.size();
    }
    Var out = make(std::move(v), req, nullptr);
    std::vector<Var> ps = parts;
    out->backward = [ps, out] {
      std::size_t o = 0;
      for (Var p : ps) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          p->grad.values[i] += out->grad.values[o + i];
        }
        o += p->value.size();
      }
    };
    return out;
  }

  Var slice(Var v, std::size_t offset, std::size_t len) {
    if (v->value.rank() != 1 || offset + len > v->value.size()) {
      throw DimensionError("slice out of range");
    }
    Tensor t({len});
    std::copy(v->value.values.begin() + static_cast<std::ptrdiff_t>(offset),
              v->value.values.begin() + static_cast<std::ptrdiff_t>(offset + len),
              t.values.begin());
    Var out = make(std::move(t), v->requires_grad, nullptr);
    out->backward = [v, out, offset, len] {
      for (std::size_t i = 0; i < len; ++i) {
        v->grad.values[offset + i] += out->grad.values[i];
      }
    };
    return out;
  }

  // Row r of a matrix as a vector.
  Var row(Var m, std::size_t r) {
    if (m->value.rank() != 2 || r >= m->value.rows()) {
      throw IndexError("row index out of range");
    }
    const std::size_t c = m->value.cols();
    Tensor t({c});
    std::copy(m->value.values.begin() + static_cast<std::ptrdiff_t>(r * c),
              m->value.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * c),
              t.values.begin());
    Var out = make(std::move(t), m->requires_grad, nullptr);
    out->backward = [m, out, r, c] {
      for (std::size_t i = 0; i < c; ++i) {
        m->grad.values[r * c + i] += out->grad.values[i];
      }
    };
    return out;
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 ||
        a->value.cols() != b->value.rows()) {
      throw DimensionError("matmul: incompatible shapes " +
                           a->value.shape_string() + " x " +
                           b->value.shape_string());
    }
    const std::size_t m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
    Tensor t({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const Scalar av = a->value.at(i, p);
        for (std::size_t j = 0; j < n; ++j) {
          t.at(i, j) += av * b->value.at(p, j);
        }
      }
    }
    Var out = make(std::move(t), a->requires_grad || b->requires_grad, nullptr);
    out->backward = [a, b, out, m, k, n] {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const Scalar g = out->grad.at(i, j);
          for (std::size_t p = 0; p < k; ++p) {
            a->grad.values[i * k + p] += g * b->value.at(p, j);
            b->grad.values[p * n + j] += g * a->value.at(i, p);
          }
        }
      }
    };
    return out;
  }

  // x (vector d) times W (d x H) -> vector H.
  Var vecmat(Var x, Var w) {
    if (x->value.rank() != 1 || w->value.rank() != 2 ||
        x->value.size() != w->value.rows()) {
      throw DimensionError("vecmat: incompatible shapes " +
                           x->value.shape_string() + " x " +
                           w->value.shape_string());
    }
    const std::size_t d = x->value.size(), h = w->value.cols();
    Tensor t({h});
    for (std::size_t i = 0; i < d; ++i) {
      const Scalar xv = x->value.values[i];
      for (std::size_t j = 0; j < h; ++j) {
        t.values[j] += xv * w->value.at(i, j);
      }
    }
    Var out = make(std::move(t), x->requires_grad || w->requires_grad, nullptr);
    out->backward = [x, w, out, d, h] {
      for (std::size_t j = 0; j < h; ++j) {
        const Scalar g = out->grad.values[j];
        for (std::size_t i = 0; i < d; ++i) {
          x->grad.values[i] += g * w->value.at(i, j);
          w->grad.values[i * h + j] += g * x->value.values[i];
        }
      }
    };
    return out;
  }

  Var affine(Var x, Var w, Var b) { return add(vecmat(x, w), b); }

  // ---- pooling / conv ----

  // Componentwise max over the first `len` rows of a matrix. Masked (padding)
  // rows beyond `len` never contribute.
  Var rowmax(Var m, std::size_t len) {
    if (m->value.rank() != 2) throw DimensionError("rowmax expects a matrix");
    if (len == 0 || len > m->value.rows()) {
      throw IndexError("rowmax: invalid effective length");
    }
    const std::size_t c = m->value.cols();
    Tensor t({c});
    auto argmax = std::make_shared<std::vector<std::size_t>>(c, 0);
    for (std::size_t j = 0; j < c; ++j) {
      Scalar best = m->value.at(0, j);
      std::size_t bi = 0;
      for (std::size_t i = 1; i < len; ++i) {
        if (m->value.at(i, j) > best) {
          best = m->value.at(i, j);
          bi = i;
        }
      }
      t.values[j] = best;
      (*argmax)[j] = bi;
    }
    Var out = make(std::move(t), m->requires_grad, nullptr);
    out->backward = [m, out, argmax, c] {
      for (std::size_t j = 0; j < c; ++j) {
        m->grad.values[(*argmax)[j] * c + j] += out->grad.values[j];
      }
    };
    return out;
  }

  // 1-d convolution over a token sequence followed by relu and max-over-time.
  // seq is L x d (rows beyond `len` are padding and ignored); filters is
  // F x w x d; bias is F. When len < w the sequence is treated as right-padded
  // with zero rows to length w, giving a single window position.
  Var conv1d_maxpool(Var seq, std::size_t len, Var filters, Var bias,
                     std::size_t window) {
    if (seq->value.rank() != 2 || filters->value.rank() != 3) {
      throw DimensionError("conv1d_maxpool: seq must be LxD, filters FxWxD");
    }
    const std::size_t d = seq->value.cols();
    const std::size_t f_count = filters->value.shape[0];
    const std::size_t w = filters->value.shape[1];
    if (w != window) throw DimensionError("conv1d_maxpool: filter width mismatch");
    if (filters->value.shape[2] != d) {
      throw DimensionError("conv1d_maxpool: embedding dim mismatch, seq " +
                           seq->value.shape_string() + " vs filters " +
                           filters->value.shape_string());
    }
    if (bias->value.rank() != 1 || bias->value.size() != f_count) {
      throw DimensionError("conv1d_maxpool: bias size mismatch");
    }
    if (len == 0 || len > seq->value.rows()) {
      throw IndexError("conv1d_maxpool: invalid effective length");
    }
    // positions 0..len-w; a single zero-padded window when len < w
    const std::size_t positions = len >= w ? len - w + 1 : 1;
    Tensor t({f_count});
    auto best_pos = std::make_shared<std::vector<std::size_t>>(f_count, 0);
    auto active = std::make_shared<std::vector<bool>>(f_count, false);
    for (std::size_t f = 0; f < f_count; ++f) {
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      std::size_t bp = 0;
      for (std::size_t p = 0; p < positions; ++p) {
        Scalar z = bias->value.values[f];
        for (std::size_t r = 0; r < w; ++r) {
          if (p + r >= len) break;  // zero padding beyond the true length
          for (std::size_t c = 0; c < d; ++c) {
            z += filters->value.values[(f * w + r) * d + c] *
                 seq->value.at(p + r, c);
          }
        }
        if (z > best) {
          best = z;
          bp = p;
        }
      }
      (*best_pos)[f] = bp;
      (*active)[f] = best > 0.0;
      t.values[f] = best > 0.0 ? best : 0.0;  // relu before max is monotone,
                                              // so relu(max) == max(relu)
    }
    Var out = make(std::move(t),
                   seq->requires_grad || filters->requires_grad ||
                       bias->requires_grad,
                   nullptr);
    out->backward = [seq, filters, bias, out, best_pos, active, f_count, w, d,
                     len] {
      for (std::size_t f = 0; f < f_count; ++f) {
        if (!(*active)[f]) continue;
        const Scalar g = out->grad.values[f];
        const std::size_t p = (*best_pos)[f];
        bias->grad.values[f] += g;
        for (std::size_t r = 0; r < w; ++r) {
          if (p + r >= len) break;
          for (std::size_t c = 0; c < d; ++c) {
            filters->grad.values[(f * w + r) * d + c] +=
                g * seq->value.at(p + r, c);
            seq->grad.values[(p + r) * d + c] +=
                g * filters->value.values[(f * w + r) * d + c];
          }
        }
      }
    };
    return out;
  }

  // ---- embedding lookup ----

  // Gathers rows of an embedding table into an L x dim matrix; backward
  // scatter-adds into the gathered rows only, so the padding row (never
  // gathered) receives no gradient.
  Var embedding_rows(Var table, const std::vector<std::size_t>& indices) {
    if (table->value.rank() != 2) {
      throw DimensionError("embedding_rows expects a VxD table");
    }
    const std::size_t d = table->value.cols();
    Tensor t({indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= table->value.rows()) {
        throw IndexError("embedding index out of range");
      }
      std::copy(
          table->value.values.begin() + static_cast<std::ptrdiff_t>(indices[i] * d),
          table->value.values.begin() + static_cast<std::ptrdiff_t>((indices[i] + 1) * d),
          t.values.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    Var out = make(std::move(t), table->requires_grad, nullptr);
    auto idx = std::make_shared<std::vector<std::size_t>>(indices);
    out->backward = [table, out, idx, d] {
      for (std::size_t i = 0; i < idx->size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          table->grad.values[(*idx)[i] * d + c] += out->grad.values[i * d + c];
        }
      }
    };
    return out;
  }

  // ---- regularization ----

  // Inverted dropout: zero with probability p at training time, scale
  // survivors by 1/(1-p); identity at evaluation time.
  Var dropout(Var x, Scalar p, SeededRng& rng, bool training) {
    if (p < 0.0 || p >= 1.0) {
      throw ParameterError("dropout rate must be in [0, 1)");
    }
    if (!training || p == 0.0) {
      Var out = make(x->value, x->requires_grad, nullptr);
      out->backward = [x, out] {
        for (std::size_t i = 0; i < out->grad.size(); ++i) {
          x->grad.values[i] += out->grad.values[i];
        }
      };
      return out;
    }
    const Scalar scale = 1.0 / (1.0 - p);
    auto mask = std::make_shared<std::vector<Scalar>>(x->value.size());
    Var out = make(x->value, x->requires_grad, nullptr);
    for (std::size_t i = 0; i < out->value.size(); ++i) {
      const Scalar m = rng.uniform() < p ? 0.0 : scale;
      (*mask)[i] = m;
      out->value.values[i] = x->value.values[i] * m;
    }
    out->backward = [x, out, mask] {
      for (std::size_t i = 0; i < out->grad.size(); ++i) {
        x->grad.values[i] += out->grad.values[i] * (*mask)[i];
      }
    };
    return out;
  }

  // ---- loss ----

  // Softmax cross entropy against a single class index; max-shifted for
  // stability. Returns the scalar loss; probs() on the result node is not
  // needed in the graph path, use softmax_xent() in loss.hpp for inference.
  Var softmax_xent_loss(Var logits, std::size_t target) {
    if (logits->value.rank() != 1) {
      throw DimensionError("softmax_xent: logits must be a vector");
    }
    const std::size_t c = logits->value.size();
    if (target >= c) throw IndexError("softmax_xent: target class out of range");
    Scalar mx = logits->value.values[0];
    for (Scalar v : logits->value.values) mx = std::max(mx, v);
    auto probs = std::make_shared<std::vector<Scalar>>(c);
    Scalar denom = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      (*probs)[i] = std::exp(logits->value.values[i] - mx);
      denom += (*probs)[i];
    }
    for (Scalar& v : *probs) v /= denom;
    Tensor t({1});
    t.values[0] = -std::log((*probs)[target]);
    Var out = make(std::move(t), logits->requires_grad, nullptr);
    out->backward = [logits, out, probs, target, c] {
      const Scalar g = out->grad.values[0];
      for (std::size_t i = 0; i < c; ++i) {
        Scalar delta = (*probs)[i] - (i == target ? 1.0 : 0.0);
        logits->grad.values[i] += g * delta;
      }
    };
    return out;
  }

  Var mean(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw ParameterError("mean of empty list");
    bool req = false;
    Scalar sum = 0.0;
    for (Var s : scalars) {
      if (s->value.size() != 1) throw DimensionError("mean expects scalars");
      sum += s->value.values[0];
      req = req || s->requires_grad;
    }
    Tensor t({1});
    t.values[0] = sum / static_cast<Scalar>(scalars.size());
    Var out = make(std::move(t), req, nullptr);
    std::vector<Var> ss = scalars;
    out->backward = [ss, out] {
      const Scalar g = out->grad.values[0] / static_cast<Scalar>(ss.size());
      for (Var s : ss) s->grad.values[0] += g;
    };
    return out;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  Var make(Tensor value, bool requires_grad, std::function<void()> backward) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.grad = Tensor(n.value.shape);
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    return &n;
  }

  std::deque<Node> nodes_;
  std::vector<std::pair<Parameter*, Node*>> bound_;
};

using Var = Graph::Var;

}  // namespace dar
