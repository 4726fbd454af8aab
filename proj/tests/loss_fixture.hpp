#pragma once

// Tiny generator/discriminator setups for gradient checks of the full loss
// graphs, shared by the unit tests and the acceptance suite.

#include <vector>

#include "suhmo/gradcheck.hpp"
#include "suhmo/training.hpp"
#include "test_util.hpp"

namespace suhmo::testing {

inline TrainConfig tiny_config(Variant v, std::uint64_t seed = 3) {
  TrainConfig c;
  c.gen.variant = v;
  c.gen.landmarks = 2;
  c.gen.hidden = 4;
  c.gen.embedding = 4;
  c.disc.landmarks = 2;
  c.disc.embedding = 4;
  c.disc.scales = {2, 3};
  c.disc.windows = 2;
  c.frames = 4;
  c.max_prefix = 2;
  c.batch = 4;
  c.seed = seed;
  return c;
}

// Real and fake frames for one loss evaluation; fakes come from a rollout of
// the generator so the G loss graph covers the whole model.
template <class T>
LossInputs<T> loss_inputs(ad::Graph<T>& g, const GanModels<T>& m, const ParamSet<T>& gps, GenState<T>& state,
                          std::uint64_t seed, std::size_t prefix = 2) {
  Rng rng(seed);
  const std::size_t F = 2 * m.gen.config().landmarks, B = 4, frames = 4;
  LossInputs<T> in;
  for (std::size_t t = 0; t < frames; ++t) in.real.push_back(g.constant(random_tensor<T>(Shape{B, F}, rng, 0.3)));
  in.prefix = prefix;
  in.windows = {{0, 2}, {1, 3}};
  state = m.gen.begin(g, B);
  std::vector<ad::Var<T>> pre(in.real.begin(), in.real.begin() + static_cast<long>(prefix));
  in.fake = rollout<T>(g, m.gen.stepper(gps, state), pre, frames, m.gen.config().mode).frames;
  return in;
}

template <class T>
void randomize(ParamSet<T>& ps, Rng& rng, double scale) {
  for (auto& [_, t] : ps)
    for (auto& v : t.values()) v = static_cast<T>(scale * rng.normal());
}

// Finite-difference check of the G loss (D frozen) or the D loss (G frozen)
// for one seed. `per_leaf` = 0 checks every coordinate. Bias gradients that
// cancel exactly leave a difference quotient of a few ulp(loss) / eps, about
// 1e-10, so the denominator floor is 1e-5.
inline GradCheckResult check_loss_graph(Variant v, bool discriminator, std::uint64_t seed, std::size_t per_leaf = 0,
                                        double eps = 1e-5) {
  const auto cfg = tiny_config(v, seed);
  GanModels<double> m(cfg);
  ParamSet<double> gps, dps;
  m.init(gps, dps, seed);
  Rng rng(derive_seed(seed, discriminator ? "disc" : "gen"));
  randomize(dps, rng, 0.4);
  randomize(gps, rng, 0.3);
  const std::uint64_t data_seed = derive_seed(seed, "data");
  ScalarFn<double> f = [&](ad::Graph<double>& g, const ParamSet<double>& ps) {
    g.freeze(discriminator ? gps : dps);
    GenState<double> st;
    if (discriminator) {
      auto in = loss_inputs(g, m, gps, st, data_seed);
      return discriminator_loss(g, m, ps, in);
    }
    auto in = loss_inputs(g, m, ps, st, data_seed);
    return generator_loss(g, m, dps, in, 0.5, false);
  };
  auto& target = discriminator ? dps : gps;
  if (per_leaf == 0) return grad_check_detail(f, target, eps, 1e-5);
  Rng pick(derive_seed(seed, "coords"));
  return grad_check_detail(f, target, eps, 1e-5, per_leaf, &pick);
}

}  // namespace suhmo::testing
