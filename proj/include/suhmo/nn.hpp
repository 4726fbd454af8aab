#pragma once

// Layer building blocks shared by the generator, the discriminators and the
// frozen feature extractors. A layer owns only its name prefix and sizes;
// weights live in a ParamSet.

#include <cmath>
#include <string>
#include <vector>

#include "suhmo/autodiff.hpp"
#include "suhmo/params.hpp"
#include "suhmo/rng.hpp"

namespace suhmo::nn {

using ad::Graph;
using ad::Var;

template <class T>
Var<T> zeros(Graph<T>& g, Shape shape) {
  return g.constant(Tensor<T>(std::move(shape)));
}

struct Linear {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;

  template <class T>
  void init(ParamSet<T>& ps, Rng& rng, double gain = 1.0) const {
    ps.add(name + ".w", glorot<T>(in, out, rng, gain));
    ps.add(name + ".b", Tensor<T>(Shape{out}));
  }

  template <class T>
  Var<T> operator()(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& x) const {
    return ad::add(ad::matmul(x, g.param(ps, name + ".w")), g.param(ps, name + ".b"));
  }
};

// tanh between layers, linear output.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp make(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                  std::size_t depth) {
    Mlp m;
    if (depth == 0) depth = 1;
    std::size_t prev = in;
    for (std::size_t i = 0; i < depth; ++i) {
      const std::size_t next = i + 1 == depth ? out : hidden;
      m.layers.push_back(Linear{name + ".l" + std::to_string(i), prev, next});
      prev = next;
    }
    return m;
  }

  template <class T>
  void init(ParamSet<T>& ps, Rng& rng, double out_gain = 1.0) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].init(ps, rng, i + 1 == layers.size() ? out_gain : 1.0);
    }
  }

  template <class T>
  Var<T> operator()(Graph<T>& g, const ParamSet<T>& ps, Var<T> x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](g, ps, x);
      if (i + 1 < layers.size()) x = ad::tanh(x);
    }
    return x;
  }
};

template <class T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

// Gate layout along the 4H axis: input, forget, candidate, output.
struct LstmCell {
  std::string name;
  std::size_t in = 0;
  std::size_t hidden = 0;

  template <class T>
  void init(ParamSet<T>& ps, Rng& rng) const {
    ps.add(name + ".w", glorot<T>(in + hidden, 4 * hidden, rng));
    Tensor<T> b(Shape{4 * hidden});
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = T{1};
    ps.add(name + ".b", std::move(b));
  }

  template <class T>
  LstmState<T> zero_state(Graph<T>& g, std::size_t batch) const {
    return {zeros(g, Shape{batch, hidden}), zeros(g, Shape{batch, hidden})};
  }

  template <class T>
  LstmState<T> operator()(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& x,
                          const LstmState<T>& s) const {
    const std::size_t H = hidden;
    auto z = ad::add(ad::matmul(ad::concat<T>({x, s.h}, 1), g.param(ps, name + ".w")),
                     g.param(ps, name + ".b"));
    auto i = ad::sigmoid(ad::slice(z, 1, 0, H));
    auto f = ad::sigmoid(ad::slice(z, 1, H, 2 * H));
    auto u = ad::tanh(ad::slice(z, 1, 2 * H, 3 * H));
    auto o = ad::sigmoid(ad::slice(z, 1, 3 * H, 4 * H));
    auto c = ad::add(ad::mul(f, s.c), ad::mul(i, u));
    auto h = ad::mul(o, ad::tanh(c));
    return {h, c};
  }
};

// Scaled dot-product attention on pre-projected tensors:
// q [B, m, D], k and v [B, n, D] -> [B, m, D].
template <class T>
Var<T> attend(const Var<T>& q, const Var<T>& k, const Var<T>& v) {
  const T inv = T{1} / std::sqrt(static_cast<T>(q.shape().back()));
  return ad::bmm(ad::softmax(ad::scale(ad::bmm(q, k, true), inv)), v);
}

// Single-head attention with query/key/value/output projections.
struct Attention {
  std::string name;
  std::size_t dim = 0;

  template <class T>
  void init(ParamSet<T>& ps, Rng& rng) const {
    for (const char* p : {".wq", ".wk", ".wv", ".wo"}) ps.add(name + p, glorot<T>(dim, dim, rng));
  }

  template <class T>
  Var<T> query(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& x) const {
    return ad::matmul(x, g.param(ps, name + ".wq"));
  }
  template <class T>
  Var<T> key(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& x) const {
    return ad::matmul(x, g.param(ps, name + ".wk"));
  }
  template <class T>
  Var<T> value(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& x) const {
    return ad::matmul(x, g.param(ps, name + ".wv"));
  }
  template <class T>
  Var<T> output(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& x) const {
    return ad::matmul(x, g.param(ps, name + ".wo"));
  }

  // queries [B, m, D] attend over keys_values [B, n, D].
  template <class T>
  Var<T> operator()(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& queries,
                    const Var<T>& keys_values) const {
    return output(g, ps,
                  attend(query(g, ps, queries), key(g, ps, keys_values), value(g, ps, keys_values)));
  }
};

// Pair partner index for the interleaved pair layout (0,1), (2,3), ...
inline std::vector<std::size_t> pair_swap_indices(std::size_t batch) {
  std::vector<std::size_t> idx(batch);
  for (std::size_t i = 0; i < batch; ++i) idx[i] = i ^ std::size_t{1};
  return idx;
}

// Elementwise max over each pair, repeated to both members so the batch
// size is unchanged. Ties route the gradient to the member itself.
template <class T>
Var<T> batch_pool(const Var<T>& x) {
  const std::size_t batch = x.shape().at(0);
  if (batch % 2 != 0) {
    throw ShapeError("batch_pool: odd batch size " + std::to_string(batch) + " in " + shape_str(x.shape()));
  }
  return ad::maximum(x, ad::gather(x, pair_swap_indices(batch)));
}

}  // namespace suhmo::nn
