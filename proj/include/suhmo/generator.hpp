#pragma once

// Autoregressive pair generator: x_t = x_{t-1} + G(x_{0:t-1}), run on both
// members of a pair at once. Two bodies share the interface:
//   recurrent - LSTM whose hidden state is batch-pooled across the pair and
//               fed back with the next input;
//   attention - per-frame embedding, batch-cross attention onto the partner's
//               history, then one single-head self-attention block. No
//               positional encoding.
// Pairs use an interleaved batch layout: rows (0,1), (2,3), ...

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "suhmo/autodiff.hpp"
#include "suhmo/landmarks.hpp"
#include "suhmo/nn.hpp"

namespace suhmo {

using ad::Graph;
using ad::Var;

enum class Variant { recurrent, attention };
enum class OutputMode { velocity, delta };

NLOHMANN_JSON_SERIALIZE_ENUM(Variant, {{Variant::recurrent, "rnn"}, {Variant::attention, "transformer"}})
NLOHMANN_JSON_SERIALIZE_ENUM(OutputMode, {{OutputMode::velocity, "velocity"}, {OutputMode::delta, "delta"}})

struct GenConfig {
  Variant variant = Variant::recurrent;
  std::size_t landmarks = 5;
  std::size_t hidden = 64;     // LSTM state (recurrent)
  std::size_t embedding = 64;  // model width (attention)
  std::size_t head_depth = 2;
  OutputMode mode = OutputMode::velocity;
  bool pair_mixing = true;  // false: one-sample generator ablation
  // Input feature gains for positions and velocities.
  double position_gain = 1.0;
  double velocity_gain = 10.0;
  // Gain on the last head layer at initialization.
  double head_init_gain = 0.1;

  std::size_t input_dim() const { return 4 * landmarks; }
  std::size_t output_dim() const { return 2 * landmarks; }
  std::size_t width() const { return variant == Variant::recurrent ? hidden : embedding; }

  void validate() const {
    if (landmarks == 0) throw std::invalid_argument("generator: landmarks must be > 0");
    if (width() == 0) throw std::invalid_argument("generator: hidden size must be > 0");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenConfig, variant, landmarks, hidden, embedding, head_depth, mode,
                                                pair_mixing, position_gain, velocity_gain, head_init_gain)

// Two-vector form of batch-pool: both members receive max(a, b).
template <class T>
std::pair<Var<T>, Var<T>> batch_pool(const Var<T>& a, const Var<T>& b) {
  return {ad::maximum(a, b), ad::maximum(b, a)};
}

template <class T>
struct GenState {
  // recurrent
  nn::LstmState<T> lstm;
  Var<T> pooled;
  // attention: keys/values accumulated over the history, [B, t, D]
  Var<T> cross_k, cross_v, self_k, self_v;
  std::size_t steps = 0;
};

template <class T>
using Stepper = std::function<Var<T>(Graph<T>&, const Var<T>&)>;

template <class T>
class Generator {
 public:
  explicit Generator(GenConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::size_t W = cfg_.width();
    lstm_ = nn::LstmCell{"gen.lstm", cfg_.input_dim() + cfg_.hidden, cfg_.hidden};
    embed_ = nn::Linear{"gen.embed", cfg_.input_dim(), W};
    cross_ = nn::Attention{"gen.cross", W};
    self_ = nn::Attention{"gen.self", W};
    ff_ = nn::Mlp::make("gen.ff", W, 2 * W, W, 2);
    head_ = nn::Mlp::make("gen.head", W, W, cfg_.output_dim(), cfg_.head_depth);
  }

  const GenConfig& config() const noexcept { return cfg_; }

  void init(ParamSet<T>& ps, Rng& rng) const {
    if (cfg_.variant == Variant::recurrent) {
      lstm_.init(ps, rng);
    } else {
      embed_.init(ps, rng);
      cross_.init(ps, rng);
      self_.init(ps, rng);
      ff_.init(ps, rng);
    }
    head_.init(ps, rng, cfg_.head_init_gain);
  }

  GenState<T> begin(Graph<T>& g, std::size_t batch) const {
    if (batch % 2 != 0) throw std::invalid_argument("generator: batch must hold whole pairs, got " + std::to_string(batch));
    GenState<T> s;
    if (cfg_.variant == Variant::recurrent) {
      s.lstm = lstm_.zero_state(g, batch);
      s.pooled = nn::zeros(g, Shape{batch, cfg_.hidden});
    }
    return s;
  }

  // One autoregressive step. input: [B, 4K] positions | velocities of the
  // latest frame. Returns the head output [B, 2K].
  Var<T> step(Graph<T>& g, const ParamSet<T>& ps, GenState<T>& s, const Var<T>& input) const {
    auto x = ad::mul(input, g.constant(input_gains()));
    ++s.steps;
    if (cfg_.variant == Variant::recurrent) return step_recurrent(g, ps, s, x);
    return step_attention(g, ps, s, x);
  }

  Stepper<T> stepper(const ParamSet<T>& ps, GenState<T>& s) const {
    return [this, &ps, &s](Graph<T>& g, const Var<T>& input) { return step(g, ps, s, input); };
  }

 private:
  Tensor<T> input_gains() const {
    const std::size_t F = cfg_.output_dim();
    Tensor<T> gains(Shape{2 * F});
    for (std::size_t i = 0; i < F; ++i) {
      gains[i] = static_cast<T>(cfg_.position_gain);
      gains[F + i] = static_cast<T>(cfg_.velocity_gain);
    }
    return gains;
  }

  Var<T> step_recurrent(Graph<T>& g, const ParamSet<T>& ps, GenState<T>& s, const Var<T>& x) const {
    s.lstm = lstm_(g, ps, ad::concat<T>({x, s.pooled}, 1), s.lstm);
    s.pooled = cfg_.pair_mixing ? nn::batch_pool(s.lstm.h) : s.lstm.h;
    return head_(g, ps, s.lstm.h);
  }

  static Var<T> append_time(const Var<T>& acc, const Var<T>& row) {
    return acc.valid() ? ad::concat<T>({acc, row}, 1) : row;
  }

  Var<T> step_attention(Graph<T>& g, const ParamSet<T>& ps, GenState<T>& s, const Var<T>& x) const {
    const std::size_t B = x.shape()[0], W = cfg_.embedding;
    auto e = ad::reshape(embed_(g, ps, x), Shape{B, 1, W});
    auto partner = cfg_.pair_mixing ? ad::gather(e, nn::pair_swap_indices(B)) : e;
    s.cross_k = append_time(s.cross_k, cross_.key(g, ps, partner));
    s.cross_v = append_time(s.cross_v, cross_.value(g, ps, partner));
    auto a = cross_.output(g, ps, nn::attend(cross_.query(g, ps, e), s.cross_k, s.cross_v));
    auto x1 = ad::layer_norm(ad::add(e, a));
    s.self_k = append_time(s.self_k, self_.key(g, ps, x1));
    s.self_v = append_time(s.self_v, self_.value(g, ps, x1));
    auto a2 = self_.output(g, ps, nn::attend(self_.query(g, ps, x1), s.self_k, s.self_v));
    auto x2 = ad::layer_norm(ad::add(x1, a2));
    auto x3 = ad::layer_norm(ad::add(x2, ff_(g, ps, x2)));
    return head_(g, ps, ad::reshape(x3, Shape{B, W}));
  }

  GenConfig cfg_;
  nn::LstmCell lstm_;
  nn::Linear embed_;
  nn::Attention cross_, self_;
  nn::Mlp ff_, head_;
};

// ---------------------------------------------------------------------------
// Rollout

template <class T>
struct Rollout {
  std::vector<Var<T>> frames;      // [B, 2K] per frame, x_0 .. x_{T-1}
  std::vector<Var<T>> velocities;  // head outputs that produced frames prefix..T-1
  std::size_t prefix = 1;
};

// Feeds `prefix` observed frames, then runs the model freely until
// `total_frames` frames exist. Inputs are recomputed from the frames the
// model produced; velocity mode accumulates x_t = x_{t-1} + out, delta mode
// emits x_t = x_0 + out.
template <class T>
Rollout<T> rollout(Graph<T>& g, const Stepper<T>& step, const std::vector<Var<T>>& prefix, std::size_t total_frames,
                   OutputMode mode = OutputMode::velocity) {
  if (prefix.empty()) throw std::invalid_argument("rollout: empty prefix");
  if (total_frames < prefix.size()) {
    throw std::invalid_argument("rollout: requested " + std::to_string(total_frames) + " frames, fewer than the " +
                                std::to_string(prefix.size()) + "-frame prefix");
  }
  Rollout<T> r;
  r.prefix = prefix.size();
  r.frames.push_back(prefix[0]);
  const Var<T> still = nn::zeros(g, prefix[0].shape());
  for (std::size_t s = 0; s + 1 < total_frames; ++s) {
    const Var<T> vel = s == 0 ? still : ad::sub(r.frames[s], r.frames[s - 1]);
    const Var<T> out = step(g, ad::concat<T>({r.frames[s], vel}, 1));
    if (s + 1 < prefix.size()) {
      r.frames.push_back(prefix[s + 1]);
    } else {
      r.velocities.push_back(out);
      r.frames.push_back(mode == OutputMode::velocity ? ad::add(r.frames[s], out) : ad::add(r.frames[0], out));
    }
  }
  return r;
}

// Stacks frame `t` of each sequence into a [B, 2K] tensor.
template <class T>
Tensor<T> stack_frame(const std::vector<const MotionSequence*>& seqs, std::size_t t) {
  const std::size_t F = seqs.front()->frame_size();
  Tensor<T> out(Shape{seqs.size(), F});
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    auto f = seqs[b]->frame_span(t);
    for (std::size_t j = 0; j < F; ++j) out.at(b, j) = static_cast<T>(f[j]);
  }
  return out;
}

// Converts rollout frames back into one MotionSequence per batch row.
template <class T>
std::vector<MotionSequence> to_sequences(const std::vector<Var<T>>& frames, std::size_t landmarks,
                                         float fps = kDefaultFps) {
  const std::size_t B = frames.front().shape()[0], F = 2 * landmarks;
  std::vector<MotionSequence> out(B, MotionSequence(frames.size(), landmarks, fps));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& v = frames[t].value();
    for (std::size_t b = 0; b < B; ++b) {
      auto dst = out[b].frame_span(t);
      for (std::size_t j = 0; j < F; ++j) dst[j] = static_cast<float>(v.at(b, j));
    }
  }
  return out;
}

// Inference: each reference is paired with its partner frame and the pair is
// rolled out for `length` frames. Returns one SamplePair per reference.
template <class T>
std::vector<SamplePair> generate_pairs(const Generator<T>& gen, const ParamSet<T>& ps,
                                       const std::vector<LandmarkFrame>& references,
                                       const std::vector<LandmarkFrame>& partners, std::size_t length,
                                       float fps = kDefaultFps) {
  if (references.size() != partners.size() || references.empty()) {
    throw std::invalid_argument("generate: need one partner per reference");
  }
  if (length < 1) throw std::invalid_argument("generate: length must be >= 1");
  const std::size_t K = gen.config().landmarks;
  Tensor<T> x0(Shape{2 * references.size(), 2 * K});
  for (std::size_t i = 0; i < references.size(); ++i) {
    for (const auto* f : {&references[i], &partners[i]}) {
      if (f->landmarks() != K) {
        throw std::invalid_argument("generate: frame has " + std::to_string(f->landmarks()) +
                                    " landmarks, model expects " + std::to_string(K));
      }
    }
    for (std::size_t j = 0; j < 2 * K; ++j) {
      x0.at(2 * i, j) = static_cast<T>(references[i].coords[j]);
      x0.at(2 * i + 1, j) = static_cast<T>(partners[i].coords[j]);
    }
  }
  Graph<T> g;
  g.freeze(ps);
  auto state = gen.begin(g, 2 * references.size());
  auto r = rollout<T>(g, gen.stepper(ps, state), {g.constant(std::move(x0))}, length, gen.config().mode);
  auto seqs = to_sequences(r.frames, K, fps);
  std::vector<SamplePair> out;
  for (std::size_t i = 0; i < references.size(); ++i) out.emplace_back(std::move(seqs[2 * i]), std::move(seqs[2 * i + 1]));
  return out;
}

}  // namespace suhmo
