#pragma once

#include <string>
#include <utility>

#include "dar/graph.hpp"
#include "dar/optim.hpp"

namespace dar {

// Conventions (fixed so tests are unambiguous):
//   LSTM: i,f,o = sigmoid(x W + h U + b); g = tanh(x W + h U + b);
//         c' = f * c + i * g; h' = o * tanh(c')
//   GRU:  z,r = sigmoid(x W + h U + b); hc = tanh(x W + (r * h) U + b);
//         h' = (1 - z) * h + z * hc

struct LstmCell {
  Parameter* wi; Parameter* ui; Parameter* bi;
  Parameter* wf; Parameter* uf; Parameter* bf;
  Parameter* wo; Parameter* uo; Parameter* bo;
  Parameter* wg; Parameter* ug; Parameter* bg;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static LstmCell create(ParameterStore& store, const std::string& prefix,
                         std::size_t input_dim, std::size_t hidden_dim,
                         SeededRng& rng) {
    LstmCell c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    auto gate = [&](const char* g, Parameter*& w, Parameter*& u, Parameter*& b) {
      w = &store.create_glorot(prefix + ".w" + g, {input_dim, hidden_dim},
                               input_dim, hidden_dim, rng);
      u = &store.create_glorot(prefix + ".u" + g, {hidden_dim, hidden_dim},
                               hidden_dim, hidden_dim, rng);
      b = &store.create_zeros(prefix + ".b" + g, {hidden_dim});
    };
    gate("i", c.wi, c.ui, c.bi);
    gate("f", c.wf, c.uf, c.bf);
    gate("o", c.wo, c.uo, c.bo);
    gate("g", c.wg, c.ug, c.bg);
    c.bf->value.fill(1.0);  // forget-gate bias stabilizer
    return c;
  }

  // One step; returns (h', c').
  std::pair<Var, Var> step(Graph& g, Var x, Var h, Var c) const {
    auto pre = [&](Parameter* w, Parameter* u, Parameter* b) {
      return g.add(g.add(g.vecmat(x, g.param(*w)), g.vecmat(h, g.param(*u))),
                   g.param(*b));
    };
    Var i_g = g.sigmoid(pre(wi, ui, bi));
    Var f_g = g.sigmoid(pre(wf, uf, bf));
    Var o_g = g.sigmoid(pre(wo, uo, bo));
    Var g_g = g.tanh_op(pre(wg, ug, bg));
    Var c_new = g.add(g.mul(f_g, c), g.mul(i_g, g_g));
    Var h_new = g.mul(o_g, g.tanh_op(c_new));
    return {h_new, c_new};
  }
};

struct GruCell {
  Parameter* wz; Parameter* uz; Parameter* bz;
  Parameter* wr; Parameter* ur; Parameter* br;
  Parameter* wh; Parameter* uh; Parameter* bh;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static GruCell create(ParameterStore& store, const std::string& prefix,
                        std::size_t input_dim, std::size_t hidden_dim,
                        SeededRng& rng) {
    GruCell c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    auto gate = [&](const char* g, Parameter*& w, Parameter*& u, Parameter*& b) {
      w = &store.create_glorot(prefix + ".w" + g, {input_dim, hidden_dim},
                               input_dim, hidden_dim, rng);
      u = &store.create_glorot(prefix + ".u" + g, {hidden_dim, hidden_dim},
                               hidden_dim, hidden_dim, rng);
      b = &store.create_zeros(prefix + ".b" + g, {hidden_dim});
    };
    gate("z", c.wz, c.uz, c.bz);
    gate("r", c.wr, c.ur, c.br);
    gate("h", c.wh, c.uh, c.bh);
    return c;
  }

  Var step(Graph& g, Var x, Var h) const {
    auto pre = [&](Parameter* w, Parameter* u, Var hh) {
      return g.add(g.vecmat(x, g.param(*w)), g.vecmat(hh, g.param(*u)));
    };
    Var z = g.sigmoid(g.add(pre(wz, uz, h), g.param(*bz)));
    Var r = g.sigmoid(g.add(pre(wr, ur, h), g.param(*br)));
    Var hc = g.tanh_op(g.add(
        g.add(g.vecmat(x, g.param(*wh)), g.vecmat(g.mul(r, h), g.param(*uh))),
        g.param(*bh)));
    // h' = (1 - z) * h + z * hc
    return g.add(g.mul(g.affine_const(z, -1.0, 1.0), h), g.mul(z, hc));
  }
};

}  // namespace dar
