#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "suhmo/autodiff.hpp"
#include "suhmo/rng.hpp"

namespace suhmo {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_leaf;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

template <class T>
using ScalarFn = std::function<ad::Var<T>(ad::Graph<T>&, const ParamSet<T>&)>;

// Compares backward() against central differences on every scalar of every
// leaf. Relative error is |a - n| / max(|a|, |n|, floor); `floor` sits above
// the roundoff level of the difference quotient, about ulp(loss) / eps.
// With `per_leaf` > 0 and an Rng, only that many random coordinates of each
// leaf are probed.
template <class T>
GradCheckResult grad_check_detail(const ScalarFn<T>& f, ParamSet<T> params, double eps, double floor = 1e-8,
                                  std::size_t per_leaf = 0, Rng* pick = nullptr) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  Gradients<T> analytic;
  {
    ad::Graph<T> g;
    auto loss = f(g, params);
    analytic = g.backward(loss, params);
  }
  auto eval = [&](const ParamSet<T>& ps) {
    ad::Graph<T> g;
    return static_cast<double>(f(g, ps).value().item());
  };
  GradCheckResult res;
  for (auto& [name, leaf] : params) {
    std::vector<std::size_t> coords;
    if (per_leaf > 0 && pick && per_leaf < leaf.size()) {
      for (std::size_t j = 0; j < per_leaf; ++j) coords.push_back(static_cast<std::size_t>(pick->below(leaf.size())));
    } else {
      for (std::size_t j = 0; j < leaf.size(); ++j) coords.push_back(j);
    }
    for (std::size_t i : coords) {
      const T saved = leaf[i];
      leaf[i] = static_cast<T>(saved + eps);
      const double up = eval(params);
      leaf[i] = static_cast<T>(saved - eps);
      const double down = eval(params);
      leaf[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(analytic.grads.at(name)[i]);
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (err > res.max_rel_error) res = {err, name, i, a, numeric};
    }
  }
  return res;
}

template <class T>
double grad_check(const ScalarFn<T>& f, const ParamSet<T>& params, double eps) {
  return grad_check_detail(f, params, eps).max_rel_error;
}

}  // namespace suhmo
