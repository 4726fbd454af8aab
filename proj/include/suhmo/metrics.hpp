#pragma once

// Evaluation: rasterization, motion maps, frozen random-feature extractors,
// Gaussian feature statistics and Fréchet distances (FID / FVD / t-FID
// analogs), plus diversity and mode coverage.
//
// Feature statistics are reduced over lexicographically sorted feature rows,
// so every metric is independent of population order and of thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "suhmo/binary_io.hpp"
#include "suhmo/generator.hpp"
#include "suhmo/landmarks.hpp"
#include "suhmo/rng.hpp"

namespace suhmo {

// ---------------------------------------------------------------------------
// Worker pool helper

// Runs fn(i) for i in [0, n) on up to `threads` workers with static chunks.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * n / threads; i < (w + 1) * n / threads; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Rasterization

struct Canvas {
  std::size_t height = 64;
  std::size_t width = 64;
  double radius = 1.0;  // pixels
};

struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0.0f) {}

  float& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  bool operator==(const Image&) const = default;
};

// [-1, 1]^2 maps linearly onto the canvas; y points up. Each landmark lights
// the pixels whose centers lie within `radius` of it.
inline Image rasterize(const LandmarkFrame& frame, const Canvas& canvas = {}) {
  Image img(canvas.height, canvas.width);
  const double r = canvas.radius, r2 = r * r;
  for (std::size_t k = 0; k < frame.landmarks(); ++k) {
    const double x = std::clamp(static_cast<double>(frame.x(k)), -1.5, 1.5);
    const double y = std::clamp(static_cast<double>(frame.y(k)), -1.5, 1.5);
    const double u = (x + 1.0) * 0.5 * static_cast<double>(canvas.width);
    const double v = (1.0 - y) * 0.5 * static_cast<double>(canvas.height);
    const long c0 = static_cast<long>(std::floor(u - r - 0.5)), c1 = static_cast<long>(std::ceil(u + r));
    const long r0 = static_cast<long>(std::floor(v - r - 0.5)), r1 = static_cast<long>(std::ceil(v + r));
    for (long i = std::max(0L, r0); i <= std::min(static_cast<long>(canvas.height) - 1, r1); ++i) {
      for (long j = std::max(0L, c0); j <= std::min(static_cast<long>(canvas.width) - 1, c1); ++j) {
        const double dx = static_cast<double>(j) + 0.5 - u, dy = static_cast<double>(i) + 0.5 - v;
        if (dx * dx + dy * dy <= r2) img.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 1.0f;
      }
    }
  }
  return img;
}

inline std::vector<Image> rasterize(const MotionSequence& seq, const Canvas& canvas = {}) {
  std::vector<Image> out;
  out.reserve(seq.frames());
  for (std::size_t t = 0; t < seq.frames(); ++t) out.push_back(rasterize(seq.frame(t), canvas));
  return out;
}

inline constexpr double kDefaultAlpha = 0.15;

// Unnormalized weights w_t = (1 - alpha)^(T - t) for t = 1..T.
inline std::vector<double> motion_weights(std::size_t frames, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("motion_map: alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  std::vector<double> w(frames);
  for (std::size_t t = 0; t < frames; ++t) w[t] = std::pow(1.0 - alpha, static_cast<double>(frames - 1 - t));
  return w;
}

// Exponential moving average weighted toward the last frame:
// m = sum_t w_t I_t / sum_t w_t.
inline Image motion_map(const MotionSequence& seq, double alpha = kDefaultAlpha, const Canvas& canvas = {}) {
  const auto w = motion_weights(seq.frames(), alpha);
  std::vector<double> acc(canvas.height * canvas.width, 0.0);
  double norm = 0.0;
  for (std::size_t t = 0; t < seq.frames(); ++t) {
    if (w[t] == 0.0) continue;
    norm += w[t];
    const Image img = rasterize(seq.frame(t), canvas);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w[t] * img.pixels[i];
  }
  Image out(canvas.height, canvas.width);
  for (std::size_t i = 0; i < acc.size(); ++i) out.pixels[i] = static_cast<float>(std::clamp(acc[i] / norm, 0.0, 1.0));
  return out;
}

// Binary PGM (P5), 8-bit.
inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (float p : img.pixels) {
    const auto v = static_cast<unsigned char>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f));
    os.put(static_cast<char>(v));
  }
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline Image read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255) throw FormatError(path + ": not an 8-bit P5 image");
  is.get();
  Image img(h, w);
  for (auto& p : img.pixels) {
    const int c = is.get();
    if (c == EOF) throw FormatError(path + ": truncated pixel data");
    p = static_cast<float>(c) / 255.0f;
  }
  return img;
}

// ---------------------------------------------------------------------------
// Gaussian statistics and the Fréchet distance

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t count = 0;
};

inline constexpr double kCovRegularization = 1e-6;

// Sample mean and unbiased covariance of feature rows, reduced in sorted row
// order, plus `reg` on the diagonal.
inline GaussianStats stats_from_features(std::vector<std::vector<double>> rows, double reg = kCovRegularization) {
  if (rows.size() < 2) {
    throw std::invalid_argument("feature_stats: need at least 2 items, got " + std::to_string(rows.size()));
  }
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("feature_stats: ragged feature rows");
  }
  std::sort(rows.begin(), rows.end());
  GaussianStats s;
  s.count = rows.size();
  s.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (const auto& r : rows) s.mean += Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(d));
  s.mean /= static_cast<double>(rows.size());
  s.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& r : rows) {
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(d)) - s.mean;
    s.cov.noalias() += c * c.transpose();
  }
  s.cov /= static_cast<double>(rows.size() - 1);
  s.cov.diagonal().array() += reg;
  return s;
}

template <class Item, class Extractor>
GaussianStats feature_stats(const std::vector<Item>& items, const Extractor& extractor, std::size_t threads = 1) {
  if (items.size() < 2) {
    throw std::invalid_argument("feature_stats: need at least 2 items, got " + std::to_string(items.size()));
  }
  std::vector<std::vector<double>> rows(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) { rows[i] = extractor(items[i]); });
  return stats_from_features(std::move(rows));
}

inline constexpr double kEigenTolerance = 1e-6;

// Principal square root of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues below -1e-6 are rejected; the remaining negatives clamp to 0.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("sqrtm: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -kEigenTolerance) {
    throw std::domain_error("sqrtm: matrix is indefinite (eigenvalue " + std::to_string(ev.minCoeff()) + ")");
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)
inline double frechet(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw std::invalid_argument("frechet: dimension mismatch (" + std::to_string(a.mean.size()) + " vs " +
                                std::to_string(b.mean.size()) + ")");
  }
  const Eigen::MatrixXd ra = sqrtm_psd(a.cov);
  const Eigen::MatrixXd cross = sqrtm_psd(ra * b.cov * ra);
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
  return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------
// Frozen random-feature extractors

inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::uint64_t kDefaultExtractorSeed = 20240;

// Images: Gaussian blur, 8x8 average pooling of intensity and of squared
// intensity, then a random two-layer tanh network.
class FrameFeatureExtractor {
 public:
  explicit FrameFeatureExtractor(std::uint64_t seed = kDefaultExtractorSeed, const Canvas& canvas = {},
                                 std::size_t dim = kFeatureDim)
      : seed_(seed), canvas_(canvas), dim_(dim) {
    pooled_h_ = canvas.height / kPool;
    pooled_w_ = canvas.width / kPool;
    const std::size_t in = 2 * pooled_h_ * pooled_w_;
    Rng rng(derive_seed(seed, "frame-extractor"));
    w1_ = Eigen::MatrixXd(kHidden, in);
    for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = 3.0 * rng.normal();
    b1_ = Eigen::VectorXd(kHidden);
    for (auto& v : b1_) v = 0.5 * rng.normal();
    w2_ = Eigen::MatrixXd(dim, kHidden);
    for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = rng.normal() / std::sqrt(double(kHidden));
    const int rad = 3;
    double z = 0;
    for (int i = -rad; i <= rad; ++i) z += blur_.emplace_back(std::exp(-0.5 * i * i / (1.5 * 1.5)));
    for (auto& v : blur_) v /= z;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim() const noexcept { return dim_; }
  const Canvas& canvas() const noexcept { return canvas_; }

  std::vector<double> operator()(const Image& img) const {
    if (img.height != canvas_.height || img.width != canvas_.width) {
      throw std::invalid_argument("frame extractor: image size mismatch");
    }
    const std::size_t H = img.height, W = img.width;
    const int rad = static_cast<int>(blur_.size() / 2);
    std::vector<double> tmp(H * W, 0.0), blurred(H * W, 0.0);
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const float p = img.at(i, j);
        if (p == 0.0f) continue;
        for (int d = -rad; d <= rad; ++d) {
          const long jj = static_cast<long>(j) + d;
          if (jj >= 0 && jj < static_cast<long>(W)) tmp[i * W + static_cast<std::size_t>(jj)] += p * blur_[static_cast<std::size_t>(d + rad)];
        }
      }
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const double p = tmp[i * W + j];
        if (p == 0.0) continue;
        for (int d = -rad; d <= rad; ++d) {
          const long ii = static_cast<long>(i) + d;
          if (ii >= 0 && ii < static_cast<long>(H)) blurred[static_cast<std::size_t>(ii) * W + j] += p * blur_[static_cast<std::size_t>(d + rad)];
        }
      }
    const std::size_t cells = pooled_h_ * pooled_w_;
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * cells));
    for (std::size_t i = 0; i < pooled_h_ * kPool; ++i)
      for (std::size_t j = 0; j < pooled_w_ * kPool; ++j) {
        const double p = blurred[i * W + j];
        const std::size_t c = (i / kPool) * pooled_w_ + j / kPool;
        pooled[static_cast<Eigen::Index>(c)] += p / double(kPool * kPool);
        pooled[static_cast<Eigen::Index>(cells + c)] += kEnergyGain * p * p / double(kPool * kPool);
      }
    const Eigen::VectorXd h = (w1_ * pooled + b1_).array().tanh().matrix();
    const Eigen::VectorXd f = w2_ * h;
    return std::vector<double>(f.data(), f.data() + f.size());
  }

 private:
  static constexpr std::size_t kPool = 8;
  static constexpr double kEnergyGain = 16.0;
  static constexpr Eigen::Index kHidden = 128;
  std::uint64_t seed_;
  Canvas canvas_;
  std::size_t dim_;
  std::size_t pooled_h_ = 0, pooled_w_ = 0;
  std::vector<double> blur_;
  Eigen::MatrixXd w1_, w2_;
  Eigen::VectorXd b1_;
};

// Kinematic windows: a random tanh recurrence over gain-scaled
// positions | velocities | accelerations; the feature is the time-averaged state.
class SequenceFeatureExtractor {
 public:
  SequenceFeatureExtractor(std::size_t landmarks, std::uint64_t seed = kDefaultExtractorSeed,
                           std::size_t dim = kFeatureDim)
      : landmarks_(landmarks), seed_(seed), dim_(dim) {
    const std::size_t in = 6 * landmarks;
    Rng rng(derive_seed(seed, "sequence-extractor"));
    wx_ = Eigen::MatrixXd(dim, in);
    for (Eigen::Index i = 0; i < wx_.size(); ++i) wx_.data()[i] = 2.0 * rng.normal() / std::sqrt(double(in));
    wh_ = Eigen::MatrixXd(dim, dim);
    for (Eigen::Index i = 0; i < wh_.size(); ++i) wh_.data()[i] = 0.8 * rng.normal() / std::sqrt(double(dim));
    b_ = Eigen::VectorXd(dim);
    for (auto& v : b_) v = 0.2 * rng.normal();
    gains_ = Eigen::VectorXd(in);
    for (std::size_t i = 0; i < in; ++i) gains_[static_cast<Eigen::Index>(i)] = i < 2 * landmarks ? 1.0 : i < 4 * landmarks ? 10.0 : 20.0;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim() const noexcept { return dim_; }

  std::vector<double> operator()(const MotionSequence& window) const {
    if (window.landmarks() != landmarks_) {
      throw std::invalid_argument("sequence extractor: expected " + std::to_string(landmarks_) + " landmarks, got " +
                                  std::to_string(window.landmarks()));
    }
    const KinematicTensor kin = kinematics(window);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    Eigen::VectorXd x(gains_.size());
    for (std::size_t t = 0; t < kin.frames(); ++t) {
      auto row = kin.row(t);
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = gains_[i] * row[static_cast<std::size_t>(i)];
      h = (wx_ * x + wh_ * h + b_).array().tanh().matrix();
      acc += h;
    }
    acc /= static_cast<double>(kin.frames());
    return std::vector<double>(acc.data(), acc.data() + acc.size());
  }

 private:
  std::size_t landmarks_;
  std::uint64_t seed_;
  std::size_t dim_;
  Eigen::MatrixXd wx_, wh_;
  Eigen::VectorXd b_, gains_;
};

// ---------------------------------------------------------------------------
// Population metrics

struct MetricOptions {
  std::uint64_t extractor_seed = kDefaultExtractorSeed;
  std::size_t threads = 1;
  Canvas canvas{};
};

// Last `n` frames (all frames when the sequence is shorter).
inline MotionSequence tail(const MotionSequence& seq, std::size_t n) {
  if (n == 0 || n >= seq.frames()) return seq;
  return seq.slice(seq.frames() - n, seq.frames());
}

// All length-L windows with stride max(1, L/2).
inline std::vector<MotionSequence> windows_of(const std::vector<MotionSequence>& seqs, std::size_t length) {
  if (length == 0) throw std::invalid_argument("fvd: window length must be >= 1");
  const std::size_t stride = std::max<std::size_t>(1, length / 2);
  std::vector<MotionSequence> out;
  for (const auto& s : seqs) {
    if (s.frames() < length) {
      throw std::invalid_argument("fvd: sequence of " + std::to_string(s.frames()) + " frames is shorter than window " +
                                  std::to_string(length));
    }
    for (std::size_t t = 0; t + length <= s.frames(); t += stride) out.push_back(s.slice(t, t + length));
  }
  return out;
}

inline double fvd_like(const std::vector<MotionSequence>& real, const std::vector<MotionSequence>& fake,
                       std::size_t length, const MetricOptions& opt = {}) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("fvd: empty population");
  const SequenceFeatureExtractor ex(real.front().landmarks(), opt.extractor_seed);
  const auto a = feature_stats(windows_of(real, length), ex, opt.threads);
  const auto b = feature_stats(windows_of(fake, length), ex, opt.threads);
  return frechet(a, b);
}

inline double tfid(const std::vector<MotionSequence>& real, const std::vector<MotionSequence>& fake,
                   double alpha = kDefaultAlpha, const MetricOptions& opt = {}) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("tfid: empty population");
  const FrameFeatureExtractor ex(opt.extractor_seed, opt.canvas);
  auto map_features = [&](const MotionSequence& s) { return ex(motion_map(s, alpha, opt.canvas)); };
  return frechet(feature_stats(real, map_features, opt.threads), feature_stats(fake, map_features, opt.threads));
}

// Frame-level FID analog over every frame of every sequence.
inline double fid_like(const std::vector<MotionSequence>& real, const std::vector<MotionSequence>& fake,
                       const MetricOptions& opt = {}) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("fid: empty population");
  const FrameFeatureExtractor ex(opt.extractor_seed, opt.canvas);
  auto frames_of = [](const std::vector<MotionSequence>& seqs) {
    std::vector<LandmarkFrame> out;
    for (const auto& s : seqs)
      for (std::size_t t = 0; t < s.frames(); ++t) out.push_back(s.frame(t));
    return out;
  };
  auto f = [&](const LandmarkFrame& fr) { return ex(rasterize(fr, opt.canvas)); };
  return frechet(feature_stats(frames_of(real), f, opt.threads), feature_stats(frames_of(fake), f, opt.threads));
}

// Mean Euclidean landmark displacement between consecutive frames.
inline double mean_displacement(const std::vector<MotionSequence>& seqs) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : seqs) {
    for (std::size_t t = 1; t < s.frames(); ++t) {
      for (std::size_t k = 0; k < s.landmarks(); ++k) {
        const double dx = s.at(t, k, 0) - s.at(t - 1, k, 0), dy = s.at(t, k, 1) - s.at(t - 1, k, 1);
        total += std::sqrt(dx * dx + dy * dy);
        ++n;
      }
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

struct DiversityReport {
  double mean_pairwise_distance = 0.0;
  std::size_t mode_coverage = 0;
  std::vector<int> modes;
};

// Mean pairwise L2 distance between flattened sequences, and the number of
// distinct synthetic modes the frequency oracle assigns.
inline DiversityReport population_diversity(const std::vector<MotionSequence>& seqs, std::size_t n_modes) {
  if (seqs.size() < 2) throw std::invalid_argument("diversity: need at least 2 sequences");
  DiversityReport r;
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t j = i + 1; j < seqs.size(); ++j) {
      if (seqs[i].data().size() != seqs[j].data().size()) throw std::invalid_argument("diversity: shape mismatch");
      double d2 = 0;
      for (std::size_t k = 0; k < seqs[i].data().size(); ++k) {
        const double d = double(seqs[i].data()[k]) - double(seqs[j].data()[k]);
        d2 += d * d;
      }
      total += std::sqrt(d2);
      ++pairs;
    }
  }
  r.mean_pairwise_distance = total / static_cast<double>(pairs);
  std::vector<bool> hit(n_modes, false);
  for (const auto& s : seqs) {
    const int m = classify_mode(s, n_modes);
    r.modes.push_back(m);
    if (m >= 0) hit[static_cast<std::size_t>(m)] = true;
  }
  r.mode_coverage = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
  return r;
}

// n generations from one reference, each paired with a differently augmented
// copy of it; diversity and coverage are measured on the reference member.
template <class T>
DiversityReport diversity(const Generator<T>& gen, const ParamSet<T>& ps, const LandmarkFrame& reference, std::size_t n,
                          std::size_t length, std::uint64_t seed, std::size_t n_modes, bool identity_partner = false) {
  if (n < 2) throw std::invalid_argument("diversity: n must be >= 2");
  std::vector<LandmarkFrame> refs(n, reference), partners;
  for (std::size_t i = 0; i < n; ++i) {
    partners.push_back(identity_partner ? reference : augment_reference(reference, derive_seed(seed, i)));
  }
  std::vector<MotionSequence> seqs;
  for (auto& p : generate_pairs(gen, ps, refs, partners, length)) seqs.push_back(std::move(p.first));
  return population_diversity(seqs, n_modes);
}

// ---------------------------------------------------------------------------
// Report

struct MetricResult {
  std::string metric;
  std::size_t window_length = 0;
  double alpha = 0.0;
  double value = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::uint64_t extractor_seed = kDefaultExtractorSeed;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MetricResult, metric, window_length, alpha, value, n_real, n_fake, extractor_seed)

}  // namespace suhmo
