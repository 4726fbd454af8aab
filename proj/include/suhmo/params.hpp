#pragma once

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "suhmo/rng.hpp"
#include "suhmo/tensor.hpp"

namespace suhmo {

// Trainable leaves keyed by hierarchical name ("gen.lstm.w"). std::map keeps
// iteration lexicographic, which fixes the order of initialization,
// optimizer updates and checkpoint records.
template <class T>
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    auto [it, inserted] = leaves_.emplace(name, std::move(value));
    if (!inserted) throw std::invalid_argument("param set: duplicate leaf '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return leaves_.count(name) != 0; }

  Tensor<T>& get(const std::string& name) {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw std::out_of_range("param set: no leaf '" + name + "'");
    return it->second;
  }
  const Tensor<T>& get(const std::string& name) const {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw std::out_of_range("param set: no leaf '" + name + "'");
    return it->second;
  }

  std::size_t size() const noexcept { return leaves_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : leaves_) n += t.size();
    return n;
  }

  auto begin() noexcept { return leaves_.begin(); }
  auto end() noexcept { return leaves_.end(); }
  auto begin() const noexcept { return leaves_.begin(); }
  auto end() const noexcept { return leaves_.end(); }

  Map& leaves() noexcept { return leaves_; }
  const Map& leaves() const noexcept { return leaves_; }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, t] : leaves_) out.add(name, t.template cast<U>());
    return out;
  }

  bool operator==(const ParamSet& other) const = default;

 private:
  Map leaves_;
};

// Gradient map returned by backward: one entry per leaf of the ParamSet.
// `touched` lists the leaves that were part of the loss graph.
template <class T>
struct Gradients {
  std::map<std::string, Tensor<T>> grads;
  std::set<std::string> touched;

  const Tensor<T>& operator[](const std::string& name) const { return grads.at(name); }
};

template <class T>
Tensor<T> uniform_init(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

// Glorot-uniform for a [fan_in, fan_out] weight, scaled by `gain`.
template <class T>
Tensor<T> glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain = 1.0) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init<T>(Shape{fan_in, fan_out}, bound, rng);
}

}  // namespace suhmo
