#pragma once

// Window-based multi-scale discriminators.
//
// A base scorer D_M maps a kinematic window of any length to a score. The
// sequence score D_S is the Monte-Carlo mean of D_M over windows whose length
// is drawn uniformly from a scale set and whose start is drawn uniformly
// among valid positions. The joint scorer encodes both members of a pair,
// batch-pools the encodings and scores the pooled vector once. The frame
// scorer D_F is feed-forward on a single frame.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "suhmo/autodiff.hpp"
#include "suhmo/generator.hpp"
#include "suhmo/landmarks.hpp"
#include "suhmo/nn.hpp"

namespace suhmo {

struct DiscConfig {
  Variant variant = Variant::recurrent;
  std::size_t landmarks = 5;
  std::size_t embedding = 32;
  std::vector<std::size_t> scales{10, 20, 40};
  std::size_t windows = 4;  // windows per sequence per step
  std::size_t head_depth = 2;
  double position_gain = 1.0;
  double velocity_gain = 10.0;
  double acceleration_gain = 20.0;

  std::size_t input_dim() const { return 6 * landmarks; }

  void validate(std::size_t train_frames) const {
    if (embedding == 0) throw std::invalid_argument("discriminator: embedding must be > 0");
    if (scales.empty()) throw std::invalid_argument("discriminator: empty scale set");
    for (auto s : scales) {
      if (s == 0 || s > train_frames) {
        throw std::invalid_argument("discriminator: scale " + std::to_string(s) + " outside [1, " +
                                    std::to_string(train_frames) + "]");
      }
    }
    if (windows == 0) throw std::invalid_argument("discriminator: windows per sequence must be >= 1");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiscConfig, variant, landmarks, embedding, scales, windows,
                                                head_depth, position_gain, velocity_gain, acceleration_gain)

struct WindowSpec {
  std::size_t start = 0;
  std::size_t length = 0;
  bool operator==(const WindowSpec&) const = default;
};

// tau uniform over `scales`, then start uniform over {0, ..., T - tau}.
inline std::vector<WindowSpec> sample_windows(std::size_t frames, const std::vector<std::size_t>& scales,
                                              std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_windows: n must be >= 1");
  if (scales.empty()) throw std::invalid_argument("sample_windows: empty scale set");
  for (auto s : scales) {
    if (s == 0 || s > frames) {
      throw std::invalid_argument("sample_windows: scale " + std::to_string(s) + " does not fit a " +
                                  std::to_string(frames) + "-frame sequence");
    }
  }
  std::vector<WindowSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t tau = scales[rng.below(scales.size())];
    const std::size_t t = static_cast<std::size_t>(rng.below(frames - tau + 1));
    out.push_back({t, tau});
  }
  return out;
}

inline std::vector<WindowSpec> sample_windows(std::size_t frames, const std::vector<std::size_t>& scales,
                                              std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_windows(frames, scales, n, rng);
}

// Monte-Carlo mean of score(window) over n sampled windows.
template <class Fn>
double multiscale_mean(Fn&& score, std::size_t frames, const std::vector<std::size_t>& scales, std::size_t n,
                       std::uint64_t seed) {
  double acc = 0.0;
  for (const auto& w : sample_windows(frames, scales, n, seed)) acc += static_cast<double>(score(w));
  return acc / static_cast<double>(n);
}

// Scales no longer than the sequence; throws when none remain.
inline std::vector<std::size_t> feasible_scales(const std::vector<std::size_t>& scales, std::size_t frames) {
  std::vector<std::size_t> out;
  for (auto s : scales)
    if (s >= 1 && s <= frames) out.push_back(s);
  if (out.empty()) {
    throw std::invalid_argument("multiscale: no scale fits a " + std::to_string(frames) + "-frame sequence");
  }
  return out;
}

// Gain-scaled kinematic rows [B, 6K] for frames [B, 2K], computed inside the
// graph so gradients reach the generator through velocities and accelerations.
template <class T>
std::vector<Var<T>> kinematic_rows(Graph<T>& g, const std::vector<Var<T>>& frames, const DiscConfig& cfg) {
  const std::size_t F = 2 * cfg.landmarks;
  Tensor<T> gains(Shape{3 * F});
  for (std::size_t i = 0; i < F; ++i) {
    gains[i] = static_cast<T>(cfg.position_gain);
    gains[F + i] = static_cast<T>(cfg.velocity_gain);
    gains[2 * F + i] = static_cast<T>(cfg.acceleration_gain);
  }
  auto gv = g.constant(std::move(gains));
  auto zero = nn::zeros(g, frames.front().shape());
  std::vector<Var<T>> rows;
  rows.reserve(frames.size());
  Var<T> prev_vel = zero;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    Var<T> vel = t >= 1 ? ad::sub(frames[t], frames[t - 1]) : zero;
    Var<T> acc = t >= 2 ? ad::sub(vel, prev_vel) : zero;
    rows.push_back(ad::mul(ad::concat<T>({frames[t], vel, acc}, 1), gv));
    prev_vel = vel;
  }
  return rows;
}

template <class T>
std::vector<Var<T>> constant_frames(Graph<T>& g, const std::vector<const MotionSequence*>& seqs) {
  std::vector<Var<T>> frames;
  for (std::size_t t = 0; t < seqs.front()->frames(); ++t) frames.push_back(g.constant(stack_frame<T>(seqs, t)));
  return frames;
}

// Base sequence scorer D_M. With `joint`, rows come in interleaved pairs and
// one score is produced per pair.
template <class T>
class SequenceScorer {
 public:
  SequenceScorer() = default;
  SequenceScorer(std::string name, DiscConfig cfg, bool joint)
      : name_(std::move(name)), cfg_(std::move(cfg)), joint_(joint) {
    const std::size_t E = cfg_.embedding;
    lstm_ = nn::LstmCell{name_ + ".lstm", cfg_.input_dim(), E};
    embed_ = nn::Linear{name_ + ".embed", cfg_.input_dim(), E};
    attn_ = nn::Attention{name_ + ".attn", E};
    ff_ = nn::Mlp::make(name_ + ".ff", E, 2 * E, E, 2);
    head_ = nn::Mlp::make(name_ + ".head", E, E, 1, cfg_.head_depth);
  }

  const std::string& name() const noexcept { return name_; }
  bool joint() const noexcept { return joint_; }

  void init(ParamSet<T>& ps, Rng& rng) const {
    if (cfg_.variant == Variant::recurrent) {
      lstm_.init(ps, rng);
    } else {
      embed_.init(ps, rng);
      ps.add(name_ + ".cls", uniform_init<T>(Shape{cfg_.embedding}, 0.1, rng));
      attn_.init(ps, rng);
      ff_.init(ps, rng);
    }
    head_.init(ps, rng);
  }

  // rows: window of kinematic rows [B, 6K]. Returns [B, E].
  Var<T> encode(Graph<T>& g, const ParamSet<T>& ps, std::span<const Var<T>> rows) const {
    if (rows.empty()) throw std::invalid_argument(name_ + ": empty window");
    if (cfg_.variant == Variant::recurrent) {
      auto st = lstm_.zero_state(g, rows.front().shape()[0]);
      for (const auto& r : rows) st = lstm_(g, ps, r, st);
      return st.h;
    }
    const std::size_t B = rows.front().shape()[0], E = cfg_.embedding;
    std::vector<Var<T>> seq;
    seq.reserve(rows.size() + 1);
    seq.push_back(ad::gather(ad::reshape(g.param(ps, name_ + ".cls"), Shape{1, 1, E}), std::vector<std::size_t>(B, 0)));
    for (const auto& r : rows) seq.push_back(ad::reshape(embed_(g, ps, r), Shape{B, 1, E}));
    auto x = ad::concat<T>(seq, 1);
    auto x1 = ad::layer_norm(ad::add(x, attn_(g, ps, x, x)));
    auto x2 = ad::layer_norm(ad::add(x1, ff_(g, ps, x1)));
    return ad::reshape(ad::slice(x2, 1, 0, 1), Shape{B, E});
  }

  // [B, 1] marginal scores, or [B/2, 1] joint scores.
  Var<T> score(Graph<T>& g, const ParamSet<T>& ps, std::span<const Var<T>> rows) const {
    auto h = encode(g, ps, rows);
    if (joint_) {
      const std::size_t B = h.shape()[0];
      if (B % 2 != 0) throw std::invalid_argument(name_ + ": joint scorer needs whole pairs");
      std::vector<std::size_t> even, odd;
      for (std::size_t i = 0; i < B; i += 2) {
        even.push_back(i);
        odd.push_back(i + 1);
      }
      h = ad::maximum(ad::gather(h, even), ad::gather(h, odd));
    }
    return head_(g, ps, h);
  }

  // Mean of window scores over `windows` of the full row sequence.
  Var<T> score_windows(Graph<T>& g, const ParamSet<T>& ps, const std::vector<Var<T>>& rows,
                       const std::vector<WindowSpec>& windows) const {
    if (windows.empty()) throw std::invalid_argument(name_ + ": no windows");
    Var<T> acc;
    for (const auto& w : windows) {
      if (w.length == 0 || w.start + w.length > rows.size()) {
        throw std::invalid_argument(name_ + ": window [" + std::to_string(w.start) + ", " +
                                    std::to_string(w.start + w.length) + ") outside " +
                                    std::to_string(rows.size()) + " frames");
      }
      auto s = score(g, ps, std::span<const Var<T>>(rows).subspan(w.start, w.length));
      acc = acc.valid() ? ad::add(acc, s) : s;
    }
    return ad::scale(acc, T{1} / static_cast<T>(windows.size()));
  }

 private:
  std::string name_;
  DiscConfig cfg_;
  bool joint_ = false;
  nn::LstmCell lstm_;
  nn::Linear embed_;
  nn::Attention attn_;
  nn::Mlp ff_, head_;
};

// Feed-forward per-frame scorer.
template <class T>
class FrameScorer {
 public:
  FrameScorer() = default;
  FrameScorer(std::string name, const DiscConfig& cfg)
      : name_(std::move(name)),
        position_gain_(cfg.position_gain),
        mlp_(nn::Mlp::make(name_ + ".mlp", 2 * cfg.landmarks, 2 * cfg.embedding, 1, 3)) {}

  void init(ParamSet<T>& ps, Rng& rng) const { mlp_.init(ps, rng); }

  // frames: [N, 2K] -> [N, 1]
  Var<T> score(Graph<T>& g, const ParamSet<T>& ps, const Var<T>& frames) const {
    return mlp_(g, ps, ad::scale(frames, static_cast<T>(position_gain_)));
  }

  // Scores every frame of every batch row: [T * B, 1].
  Var<T> score_all(Graph<T>& g, const ParamSet<T>& ps, const std::vector<Var<T>>& frames) const {
    return score(g, ps, ad::concat<T>(frames, 0));
  }

 private:
  std::string name_;
  double position_gain_ = 1.0;
  nn::Mlp mlp_;
};

// ---------------------------------------------------------------------------
// Sequence-level helpers on plain data.

template <class T>
T score_base(const SequenceScorer<T>& d, const ParamSet<T>& ps, const DiscConfig& cfg, const MotionSequence& window) {
  Graph<T> g;
  g.freeze(ps);
  auto rows = kinematic_rows(g, constant_frames<T>(g, {&window}), cfg);
  return d.score(g, ps, rows).value().item();
}

template <class T>
T score_multiscale(const SequenceScorer<T>& d, const ParamSet<T>& ps, const DiscConfig& cfg,
                   const MotionSequence& seq, std::uint64_t seed) {
  const auto scales = feasible_scales(cfg.scales, seq.frames());
  Graph<T> g;
  g.freeze(ps);
  auto rows = kinematic_rows(g, constant_frames<T>(g, {&seq}), cfg);
  return d.score_windows(g, ps, rows, sample_windows(seq.frames(), scales, cfg.windows, seed)).value().item();
}

template <class T>
T score_joint(const SequenceScorer<T>& d, const ParamSet<T>& ps, const DiscConfig& cfg, const SamplePair& pair,
              std::uint64_t seed) {
  if (!d.joint()) throw std::invalid_argument("score_joint: scorer is not joint");
  const auto scales = feasible_scales(cfg.scales, pair.first.frames());
  Graph<T> g;
  g.freeze(ps);
  auto rows = kinematic_rows(g, constant_frames<T>(g, {&pair.first, &pair.second}), cfg);
  return d.score_windows(g, ps, rows, sample_windows(pair.first.frames(), scales, cfg.windows, seed))
      .value()
      .item();
}

template <class T>
T score_frame(const FrameScorer<T>& d, const ParamSet<T>& ps, const LandmarkFrame& frame) {
  Graph<T> g;
  g.freeze(ps);
  Tensor<T> x(Shape{1, frame.coords.size()});
  for (std::size_t j = 0; j < frame.coords.size(); ++j) x[j] = static_cast<T>(frame.coords[j]);
  return d.score(g, ps, g.constant(std::move(x))).value().item();
}

}  // namespace suhmo
