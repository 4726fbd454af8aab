#pragma once

// Adversarial training: hinge losses for the sequence, joint and frame
// discriminators, a scaled L2 reconstruction term, Adam, and a one-shot
// learning-rate decay when the validation metric stalls.
//
// One iteration:
//   1. sample B/2 real pairs and an observed prefix length P in {1..max_prefix};
//   2. roll the generator out from the first P real frames of each pair;
//   3. update D on real pairs against detached fakes;
//   4. update G through a frozen copy of the updated D.
// Windows for the multi-scale scorers are drawn once per iteration and shared
// by every pair and by both updates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "suhmo/autodiff.hpp"
#include "suhmo/checkpoint.hpp"
#include "suhmo/discriminator.hpp"
#include "suhmo/generator.hpp"
#include "suhmo/landmarks.hpp"
#include "suhmo/metrics.hpp"
#include "suhmo/params.hpp"
#include "suhmo/rng.hpp"

namespace suhmo {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration

struct Ablation {
  bool one_sample_G = false;
  bool one_sample_D = false;
  bool no_multiscale = false;
  bool delta_based = false;
  bool l2_only = false;
  bool operator==(const Ablation&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Ablation, one_sample_G, one_sample_D, no_multiscale, delta_based,
                                                l2_only)

struct TrainConfig {
  GenConfig gen{};
  DiscConfig disc{};
  double lambda = 1e-2;
  std::size_t lambda_anneal_iters = 0;  // 0 keeps lambda constant
  double lr_G = 2e-5;
  double lr_D = 1e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 120;
  std::size_t frames = 40;
  std::size_t max_prefix = 5;
  double decay_factor = 10.0;
  std::size_t stall_window = 10;     // evaluation intervals
  double stall_tolerance = 0.01;     // relative improvement required
  std::size_t iterations = 60000;
  std::size_t eval_interval = 500;
  std::size_t eval_samples = 64;     // validation references per evaluation
  Ablation ablation{};
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
    if (!(lambda >= 0.0)) bad("lambda must be >= 0");
    if (!(lr_G > 0.0) || !(lr_D > 0.0)) bad("learning rates must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) bad("Adam epsilon must be > 0");
    if (batch < 2 || batch % 2 != 0) bad("batch size must be even and >= 2, got " + std::to_string(batch));
    if (frames < 2) bad("training sequence length must be >= 2");
    if (max_prefix < 1 || max_prefix >= frames) bad("max_prefix must lie in [1, frames)");
    if (!(decay_factor >= 1.0)) bad("decay factor must be >= 1");
    if (stall_window < 1) bad("stall window must be >= 1");
    if (eval_interval < 1) bad("eval interval must be >= 1");
    if (gen.landmarks != disc.landmarks) bad("generator and discriminator landmark counts differ");
    gen.validate();
    disc.validate(frames);
  }

  // Generator / discriminator settings after applying the ablation switches.
  GenConfig effective_gen() const {
    GenConfig g = gen;
    if (ablation.one_sample_G) g.pair_mixing = false;
    if (ablation.delta_based) g.mode = OutputMode::delta;
    return g;
  }
  DiscConfig effective_disc() const {
    DiscConfig d = disc;
    d.variant = gen.variant;
    d.landmarks = gen.landmarks;
    return d;
  }

  double lambda_at(std::size_t iter) const {
    if (ablation.l2_only) return 1.0;
    if (lambda_anneal_iters == 0) return lambda;
    const double f = 1.0 - static_cast<double>(iter) / static_cast<double>(lambda_anneal_iters);
    return lambda * std::max(0.0, f);
  }

  static TrainConfig paper() {
    TrainConfig c;
    c.gen.hidden = 1024;
    c.gen.embedding = 1024;
    c.disc.embedding = 128;
    return c;
  }

  // Desk scale: small widths, batch 32, 1000 iterations on one CPU core. The
  // attention discriminator overpowers its generator at equal rates, so it
  // gets a third of the generator's.
  static TrainConfig desk(Variant v = Variant::recurrent) {
    TrainConfig c;
    c.gen.variant = v;
    c.gen.hidden = 64;
    c.gen.embedding = 32;
    c.disc.embedding = 32;
    c.batch = 32;
    c.iterations = 1000;
    c.lr_G = 3e-4;
    c.lr_D = v == Variant::attention ? 1e-4 : 3e-4;
    c.eval_interval = 250;
    c.stall_window = 4;
    return c;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, gen, disc, lambda, lambda_anneal_iters, lr_G, lr_D, beta1,
                                                beta2, adam_eps, batch, frames, max_prefix, decay_factor,
                                                stall_window, stall_tolerance, iterations, eval_interval,
                                                eval_samples, ablation, seed)

inline TrainConfig preset(const std::string& name, Variant v = Variant::recurrent) {
  if (name == "desk") return TrainConfig::desk(v);
  if (name == "paper") {
    auto c = TrainConfig::paper();
    c.gen.variant = v;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

// ---------------------------------------------------------------------------
// Hinge losses

inline double hinge_d_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("hinge_d_loss: empty score list");
  double r = 0, f = 0;
  for (double s : real) r += std::max(0.0, 1.0 - s);
  for (double s : fake) f += std::max(0.0, 1.0 + s);
  return r / static_cast<double>(real.size()) + f / static_cast<double>(fake.size());
}

inline double hinge_g_loss(const std::vector<double>& fake) {
  if (fake.empty()) throw std::invalid_argument("hinge_g_loss: empty score list");
  double f = 0;
  for (double s : fake) f += s;
  return -f / static_cast<double>(fake.size());
}

template <class T>
Var<T> hinge_d_loss(const Var<T>& real, const Var<T>& fake) {
  return ad::add(ad::mean(ad::relu(ad::shift(ad::scale(real, T{-1}), T{1}))), ad::mean(ad::relu(ad::shift(fake, T{1}))));
}

template <class T>
Var<T> hinge_g_loss(const Var<T>& fake) {
  return ad::scale(ad::mean(fake), T{-1});
}

// ---------------------------------------------------------------------------
// Adam

template <class T>
struct AdamState {
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
  std::size_t step = 0;

  bool operator==(const AdamState&) const = default;

  explicit AdamState(const ParamSet<T>& ps = {}) {
    for (const auto& [name, t] : ps) {
      m.emplace(name, Tensor<T>(t.shape()));
      v.emplace(name, Tensor<T>(t.shape()));
    }
  }
};

struct AdamHyper {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam on the leaves the loss graph reached. Untouched leaves
// and their moments are left as they are; the step counter advances once.
template <class T>
void adam_step(ParamSet<T>& ps, const Gradients<T>& grads, AdamState<T>& st, double lr, const AdamHyper& h = {}) {
  ++st.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.step));
  for (const auto& name : grads.touched) {
    auto& p = ps.get(name);
    const auto& g = grads[name];
    auto& m = st.m.at(name);
    auto& v = st.v.at(name);
    if (g.shape() != p.shape() || m.shape() != p.shape()) {
      throw ShapeError("adam: gradient for '" + name + "' has shape " + shape_str(g.shape()) + ", leaf is " +
                       shape_str(p.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = h.beta1 * static_cast<double>(m[i]) + (1.0 - h.beta1) * gi;
      const double vi = h.beta2 * static_cast<double>(v[i]) + (1.0 - h.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// Learning-rate schedule

struct StallRule {
  std::size_t window = 10;
  double tolerance = 0.01;
  double factor = 10.0;
};

// True once the best value of the last `window` entries of history[0..n) fails
// to improve on the best earlier value by more than `tolerance` (relative).
inline bool stalled(const std::vector<double>& history, std::size_t n, const StallRule& rule) {
  if (n <= rule.window) return false;
  const double earlier = *std::min_element(history.begin(), history.begin() + static_cast<long>(n - rule.window));
  const double recent =
      *std::min_element(history.begin() + static_cast<long>(n - rule.window), history.begin() + static_cast<long>(n));
  return recent > (1.0 - rule.tolerance) * earlier;
}

// Learning rate implied by a metric history: base_lr until the first stall,
// base_lr / factor afterwards. Decays at most once.
inline double lr_schedule(const std::vector<double>& history, double base_lr, const StallRule& rule = {}) {
  for (std::size_t n = rule.window + 1; n <= history.size(); ++n)
    if (stalled(history, n, rule)) return base_lr / rule.factor;
  return base_lr;
}

class LrSchedule {
 public:
  LrSchedule(double base_lr, StallRule rule) : base_(base_lr), rule_(rule) {}

  // Appends a metric value and returns the multiplier to apply from now on.
  double observe(double metric) {
    history_.push_back(metric);
    if (!decayed_ && stalled(history_, history_.size(), rule_)) decayed_ = true;
    return multiplier();
  }

  double multiplier() const { return decayed_ ? 1.0 / rule_.factor : 1.0; }
  double lr() const { return base_ * multiplier(); }
  bool decayed() const { return decayed_; }
  const std::vector<double>& history() const { return history_; }

 private:
  double base_;
  StallRule rule_;
  std::vector<double> history_;
  bool decayed_ = false;
};

// ---------------------------------------------------------------------------
// Models and losses

template <class T>
struct GanModels {
  explicit GanModels(const TrainConfig& cfg)
      : gen(cfg.effective_gen()),
        disc_cfg(cfg.effective_disc()),
        seq("disc.seq", disc_cfg, false),
        pair(cfg.ablation.one_sample_D ? SequenceScorer<T>("disc.seq2", disc_cfg, false)
                                       : SequenceScorer<T>("disc.joint", disc_cfg, true)),
        frame("disc.frame", disc_cfg) {}

  Generator<T> gen;
  DiscConfig disc_cfg;
  SequenceScorer<T> seq;
  SequenceScorer<T> pair;  // joint scorer, or a second marginal scorer
  FrameScorer<T> frame;

  void init(ParamSet<T>& gen_ps, ParamSet<T>& disc_ps, std::uint64_t seed) const {
    Rng rg(derive_seed(seed, "init.gen"));
    gen.init(gen_ps, rg);
    Rng rd(derive_seed(seed, "init.disc"));
    seq.init(disc_ps, rd);
    pair.init(disc_ps, rd);
    frame.init(disc_ps, rd);
  }
};

// Scalar loss terms of one update, as plain numbers for logging.
struct LossTerms {
  double seq = 0;
  double pair = 0;
  double frame = 0;
  double l2 = 0;
  double total = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_finite(const LossTerms& t, std::size_t iter, const char* which) {
  const std::pair<const char*, double> terms[] = {
      {"seq", t.seq}, {"pair", t.pair}, {"frame", t.frame}, {"l2", t.l2}, {"total", t.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw TrainingError("iteration " + std::to_string(iter) + ": non-finite " + which + " loss term '" + name + "'");
    }
  }
}

// Inputs shared by the discriminator and generator losses of one iteration.
template <class T>
struct LossInputs {
  std::vector<Var<T>> real;  // [B, 2K] per frame
  std::vector<Var<T>> fake;  // [B, 2K] per frame
  std::size_t prefix = 1;    // fake frames [prefix, T) are generated
  std::vector<WindowSpec> windows;
};

template <class T>
Var<T> generated_frames(const std::vector<Var<T>>& frames, std::size_t prefix) {
  return ad::concat<T>(std::vector<Var<T>>(frames.begin() + static_cast<long>(prefix), frames.end()), 0);
}

// D loss: hinge on each scorer, real pairs against fake pairs.
template <class T>
Var<T> discriminator_loss(Graph<T>& g, const GanModels<T>& m, const ParamSet<T>& dps, const LossInputs<T>& in,
                          LossTerms* terms = nullptr) {
  const auto real_rows = kinematic_rows(g, in.real, m.disc_cfg);
  const auto fake_rows = kinematic_rows(g, in.fake, m.disc_cfg);
  auto seq = hinge_d_loss(m.seq.score_windows(g, dps, real_rows, in.windows),
                          m.seq.score_windows(g, dps, fake_rows, in.windows));
  auto pair = hinge_d_loss(m.pair.score_windows(g, dps, real_rows, in.windows),
                           m.pair.score_windows(g, dps, fake_rows, in.windows));
  auto frame = hinge_d_loss(m.frame.score_all(g, dps, in.real),
                            m.frame.score(g, dps, generated_frames(in.fake, in.prefix)));
  auto total = ad::add(ad::add(seq, pair), frame);
  if (terms) {
    terms->seq = seq.value().item();
    terms->pair = pair.value().item();
    terms->frame = frame.value().item();
    terms->l2 = 0;
    terms->total = total.value().item();
  }
  return total;
}

// G loss: the three generator hinge terms plus lambda * MSE of generated
// frames against the real continuation. With l2_only, MSE alone.
template <class T>
Var<T> generator_loss(Graph<T>& g, const GanModels<T>& m, const ParamSet<T>& dps, const LossInputs<T>& in,
                      double lambda, bool l2_only, LossTerms* terms = nullptr) {
  auto l2 = ad::mse(generated_frames(in.fake, in.prefix), generated_frames(in.real, in.prefix));
  if (l2_only) {
    if (terms) *terms = LossTerms{0, 0, 0, l2.value().item(), l2.value().item()};
    return l2;
  }
  const auto fake_rows = kinematic_rows(g, in.fake, m.disc_cfg);
  auto seq = hinge_g_loss(m.seq.score_windows(g, dps, fake_rows, in.windows));
  auto pair = hinge_g_loss(m.pair.score_windows(g, dps, fake_rows, in.windows));
  auto frame = hinge_g_loss(m.frame.score(g, dps, generated_frames(in.fake, in.prefix)));
  auto total = ad::add(ad::add(ad::add(seq, pair), frame), ad::scale(l2, static_cast<T>(lambda)));
  if (terms) {
    terms->seq = seq.value().item();
    terms->pair = pair.value().item();
    terms->frame = frame.value().item();
    terms->l2 = l2.value().item();
    terms->total = total.value().item();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Data

struct DataSplit {
  std::vector<MotionSequence> train;
  std::vector<MotionSequence> val;
  std::vector<int> train_labels;
  std::vector<int> val_labels;
};

// Every fifth sequence (index % 5 == 4) is held out for validation.
inline std::string split_of(std::size_t index) { return index % 5 == 4 ? "val" : "train"; }

inline DataSplit split_dataset(const SynthDataset& ds) {
  DataSplit s;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const bool val = split_of(i) == "val";
    (val ? s.val : s.train).push_back(ds.sequences[i]);
    (val ? s.val_labels : s.train_labels).push_back(ds.labels[i]);
  }
  return s;
}

inline DataSplit load_dataset(const std::string& manifest_path) {
  const auto manifest = read_manifest(manifest_path);
  auto tr = load_split(manifest, "train");
  auto va = load_split(manifest, "val");
  return {std::move(tr.sequences), std::move(va.sequences), std::move(tr.labels), std::move(va.labels)};
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double fvd40 = 0;
  double tfid = 0;
  std::vector<MotionSequence> fakes;
};

// Validation population: each reference is the first frame of a held-out
// sequence, its partner an augmented copy. The reference members are kept.
template <class T>
std::vector<MotionSequence> generate_from_references(const Generator<T>& gen, const ParamSet<T>& ps,
                                                     const std::vector<MotionSequence>& sources, std::size_t n,
                                                     std::size_t length, std::uint64_t seed) {
  n = std::min(n, sources.size());
  std::vector<LandmarkFrame> refs, partners;
  for (std::size_t i = 0; i < n; ++i) {
    refs.push_back(sources[i].frame(0));
    partners.push_back(augment_reference(refs.back(), derive_seed(seed, static_cast<std::uint64_t>(i))));
  }
  std::vector<MotionSequence> out;
  for (auto& p : generate_pairs(gen, ps, refs, partners, length)) out.push_back(std::move(p.first));
  return out;
}

template <class T>
EvalResult evaluate(const Generator<T>& gen, const ParamSet<T>& ps, const std::vector<MotionSequence>& val,
                    std::size_t n, std::size_t length, std::uint64_t seed, const MetricOptions& opt = {}) {
  EvalResult r;
  r.fakes = generate_from_references(gen, ps, val, n, length, seed);
  const std::size_t L = std::min<std::size_t>(40, length);
  std::vector<MotionSequence> real(val.begin(), val.begin() + static_cast<long>(r.fakes.size()));
  r.fvd40 = fvd_like(real, r.fakes, L, opt);
  r.tfid = tfid(real, r.fakes, kDefaultAlpha, opt);
  return r;
}

// ---------------------------------------------------------------------------
// Trainer

struct LogRow {
  std::size_t iter = 0;
  double loss_G = 0;
  double loss_D = 0;
  double loss_L2 = 0;
  double fvd40 = 0;
  double tfid = 0;
  double lr_G = 0;
  double lr_D = 0;
};

inline std::string csv_header() { return "iter,loss_G,loss_D,loss_L2,fvd40,tfid,lr_G,lr_D"; }

inline std::string csv_row(const LogRow& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.iter << ',' << r.loss_G << ',' << r.loss_D << ',' << r.loss_L2 << ',' << r.fvd40 << ',' << r.tfid << ','
     << r.lr_G << ',' << r.lr_D;
  return os.str();
}

template <class T>
class Trainer {
 public:
  Trainer(TrainConfig cfg, DataSplit data) : cfg_(std::move(cfg)), data_(std::move(data)), models_(cfg_) {
    cfg_.validate();
    if (data_.train.size() < cfg_.batch) {
      throw std::invalid_argument("train: " + std::to_string(data_.train.size()) +
                                  " training sequences, batch needs " + std::to_string(cfg_.batch));
    }
    if (data_.val.empty()) throw std::invalid_argument("train: empty validation split");
    for (const auto* set : {&data_.train, &data_.val}) {
      for (const auto& s : *set) {
        if (s.frames() < cfg_.frames) {
          throw std::invalid_argument("train: sequence of " + std::to_string(s.frames()) +
                                      " frames is shorter than the training length " + std::to_string(cfg_.frames));
        }
        if (s.landmarks() != cfg_.gen.landmarks) {
          throw std::invalid_argument("train: sequence has " + std::to_string(s.landmarks()) +
                                      " landmarks, config expects " + std::to_string(cfg_.gen.landmarks));
        }
      }
    }
    train_seed_ = derive_seed(cfg_.seed, "train");
    models_.init(gen_ps_, disc_ps_, train_seed_);
    adam_G_ = AdamState<T>(gen_ps_);
    adam_D_ = AdamState<T>(disc_ps_);
  }

  const TrainConfig& config() const { return cfg_; }
  const GanModels<T>& models() const { return models_; }
  const ParamSet<T>& gen_params() const { return gen_ps_; }
  const ParamSet<T>& disc_params() const { return disc_ps_; }
  std::size_t iteration() const { return iter_; }
  const std::vector<LogRow>& log() const { return log_; }
  double lr_G() const { return cfg_.lr_G * lr_mult_; }
  double lr_D() const { return cfg_.lr_D * lr_mult_; }

  // One G/D iteration. Returns the G and D loss terms.
  std::pair<LossTerms, LossTerms> step() {
    Rng rng(derive_seed(derive_seed(train_seed_, "iter"), static_cast<std::uint64_t>(iter_)));
    const std::size_t T_ = cfg_.frames, B = cfg_.batch;
    const auto real = sample_batch(rng);
    const std::size_t P = static_cast<std::size_t>(rng.integer(1, static_cast<long long>(cfg_.max_prefix)));
    const auto windows = cfg_.ablation.no_multiscale
                             ? std::vector<WindowSpec>{{0, T_}}
                             : sample_windows(T_, models_.disc_cfg.scales, models_.disc_cfg.windows, rng);
    std::vector<const MotionSequence*> ptrs;
    for (const auto& s : real) ptrs.push_back(&s);
    (void)B;

    Graph<T> g;
    LossInputs<T> gin;
    gin.real = constant_frames<T>(g, ptrs);
    gin.prefix = P;
    gin.windows = windows;
    auto state = models_.gen.begin(g, ptrs.size());
    std::vector<Var<T>> prefix(gin.real.begin(), gin.real.begin() + static_cast<long>(P));
    gin.fake = rollout<T>(g, models_.gen.stepper(gen_ps_, state), prefix, T_, models_.gen.config().mode).frames;

    LossTerms dterms;
    if (!cfg_.ablation.l2_only) {
      Graph<T> gd;
      LossInputs<T> din;
      din.prefix = P;
      din.windows = windows;
      for (const auto& v : gin.real) din.real.push_back(gd.constant(v.value()));
      for (const auto& v : gin.fake) din.fake.push_back(gd.constant(v.value()));
      auto dl = discriminator_loss(gd, models_, disc_ps_, din, &dterms);
      check_finite(dterms, iter_, "D");
      adam_step(disc_ps_, gd.backward(dl, disc_ps_), adam_D_, lr_D(), hyper());
    }

    const ParamSet<T> d_frozen = disc_ps_;
    g.freeze(d_frozen);
    LossTerms gterms;
    auto gl = generator_loss(g, models_, d_frozen, gin, cfg_.lambda_at(iter_), cfg_.ablation.l2_only, &gterms);
    check_finite(gterms, iter_, "G");
    adam_step(gen_ps_, g.backward(gl, gen_ps_), adam_G_, lr_G(), hyper());
    ++iter_;
    return {gterms, dterms};
  }

  // Runs to cfg.iterations, evaluating every eval_interval iterations and at
  // the end. `on_log` is called with every log row.
  template <class Fn = void (*)(const LogRow&)>
  void run(Fn&& on_log = [](const LogRow&) {}) {
    double sum_g = 0, sum_d = 0, sum_l2 = 0;
    std::size_t since = 0;
    while (iter_ < cfg_.iterations) {
      const auto [gt, dt] = step();
      sum_g += gt.total;
      sum_d += dt.total;
      sum_l2 += gt.l2;
      ++since;
      if (iter_ % cfg_.eval_interval == 0 || iter_ == cfg_.iterations) {
        const auto ev = evaluate_val();
        const double n = static_cast<double>(since);
        LogRow row{iter_, sum_g / n, sum_d / n, sum_l2 / n, ev.fvd40, ev.tfid, lr_G(), lr_D()};
        log_.push_back(row);
        on_log(row);
        lr_mult_ = schedule_.observe(ev.fvd40);
        sum_g = sum_d = sum_l2 = 0;
        since = 0;
      }
    }
  }

  EvalResult evaluate_val() const {
    return evaluate(models_.gen, gen_ps_, data_.val, cfg_.eval_samples, cfg_.frames, derive_seed(cfg_.seed, "val"));
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.meta = {{"tool_version", kToolVersion},
              {"config", cfg_},
              {"generator", models_.gen.config()},
              {"iteration", iter_},
              {"adam_step_G", adam_G_.step},
              {"adam_step_D", adam_D_.step},
              {"lr_G", lr_G()},
              {"lr_D", lr_D()},
              {"lr_decayed", schedule_.decayed()},
              {"metric_history", schedule_.history()}};
    c.put(gen_ps_);
    c.put(disc_ps_);
    c.put(adam_G_.m, ".m1");
    c.put(adam_G_.v, ".m2");
    c.put(adam_D_.m, ".m1");
    c.put(adam_D_.v, ".m2");
    return c;
  }

 private:
  AdamHyper hyper() const { return {cfg_.beta1, cfg_.beta2, cfg_.adam_eps}; }

  // B distinct training sequences, independently paired, each cropped to the
  // training length at a random offset.
  std::vector<MotionSequence> sample_batch(Rng& rng) const {
    const auto pairs = pair_indices(data_.train.size(), rng.next());
    std::vector<MotionSequence> out;
    out.reserve(cfg_.batch);
    for (std::size_t p = 0; p < cfg_.batch / 2; ++p) {
      for (auto idx : {pairs[p].first, pairs[p].second}) {
        const auto& s = data_.train[idx];
        const std::size_t start = static_cast<std::size_t>(rng.below(s.frames() - cfg_.frames + 1));
        out.push_back(s.slice(start, start + cfg_.frames));
      }
    }
    return out;
  }

  TrainConfig cfg_;
  DataSplit data_;
  GanModels<T> models_;
  ParamSet<T> gen_ps_, disc_ps_;
  AdamState<T> adam_G_, adam_D_;
  std::uint64_t train_seed_ = 0;
  std::size_t iter_ = 0;
  double lr_mult_ = 1.0;
  LrSchedule schedule_{1.0, StallRule{cfg_.stall_window, cfg_.stall_tolerance, cfg_.decay_factor}};
  std::vector<LogRow> log_;
};

// Generator rebuilt from a checkpoint's metadata and records.
template <class T>
struct LoadedGenerator {
  Generator<T> gen;
  ParamSet<T> params;
};

template <class T>
LoadedGenerator<T> load_generator(const Checkpoint& c) {
  if (!c.meta.contains("generator")) throw FormatError("checkpoint: no generator metadata");
  LoadedGenerator<T> out{Generator<T>(c.meta.at("generator").get<GenConfig>()), {}};
  Rng rng(0);
  out.gen.init(out.params, rng);
  c.get(out.params);
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::string> checkpoints;
  std::string metric_log;
  std::string tool_version = kToolVersion;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunManifest, config, seed, checkpoints, metric_log, tool_version)

}  // namespace suhmo
