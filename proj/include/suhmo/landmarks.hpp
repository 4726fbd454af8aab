#pragma once

// Landmark sequences: storage, .lmk files, kinematic features, reference-pose
// augmentation, pairing, and the synthetic multi-mode motion generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "suhmo/binary_io.hpp"
#include "suhmo/rng.hpp"

namespace suhmo {

inline constexpr float kDefaultFps = 25.0f;
inline constexpr float kIngestLimit = 1.5f;

struct LandmarkFrame {
  std::vector<float> coords;  // K x 2, (x, y) per landmark

  LandmarkFrame() = default;
  explicit LandmarkFrame(std::vector<float> c) : coords(std::move(c)) {
    if (coords.size() % 2 != 0) throw std::invalid_argument("landmark frame: odd coordinate count");
  }

  std::size_t landmarks() const noexcept { return coords.size() / 2; }
  float x(std::size_t k) const { return coords[2 * k]; }
  float y(std::size_t k) const { return coords[2 * k + 1]; }

  // Finite and inside the ingestion slack around the [-1, 1] canvas.
  void validate(float limit = kIngestLimit) const {
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (!std::isfinite(coords[i]) || std::abs(coords[i]) > limit) {
        throw std::invalid_argument("landmark frame: coordinate " + std::to_string(i) + " = " +
                                    std::to_string(coords[i]) + " outside [-" + std::to_string(limit) +
                                    ", " + std::to_string(limit) + "]");
      }
    }
  }

  bool operator==(const LandmarkFrame&) const = default;
};

class MotionSequence {
 public:
  MotionSequence() = default;
  MotionSequence(std::size_t frames, std::size_t landmarks, float fps = kDefaultFps)
      : frames_(frames), landmarks_(landmarks), fps_(fps), data_(frames * landmarks * 2, 0.0f) {
    check();
  }
  MotionSequence(std::size_t frames, std::size_t landmarks, std::vector<float> data, float fps = kDefaultFps)
      : frames_(frames), landmarks_(landmarks), fps_(fps), data_(std::move(data)) {
    check();
    if (data_.size() != frames_ * landmarks_ * 2) {
      throw std::invalid_argument("motion sequence: expected " + std::to_string(frames_ * landmarks_ * 2) +
                                  " values, got " + std::to_string(data_.size()));
    }
  }

  static MotionSequence from_frames(const std::vector<LandmarkFrame>& frames, float fps = kDefaultFps) {
    if (frames.empty()) throw std::invalid_argument("motion sequence: no frames");
    MotionSequence s(frames.size(), frames.front().landmarks(), fps);
    for (std::size_t t = 0; t < frames.size(); ++t) s.set_frame(t, frames[t]);
    return s;
  }

  std::size_t frames() const noexcept { return frames_; }
  std::size_t landmarks() const noexcept { return landmarks_; }
  std::size_t frame_size() const noexcept { return landmarks_ * 2; }
  float fps() const noexcept { return fps_; }

  float& at(std::size_t t, std::size_t k, std::size_t axis) { return data_[(t * landmarks_ + k) * 2 + axis]; }
  float at(std::size_t t, std::size_t k, std::size_t axis) const {
    return data_[(t * landmarks_ + k) * 2 + axis];
  }

  std::span<const float> frame_span(std::size_t t) const {
    return std::span<const float>(data_).subspan(t * frame_size(), frame_size());
  }
  std::span<float> frame_span(std::size_t t) { return std::span<float>(data_).subspan(t * frame_size(), frame_size()); }

  LandmarkFrame frame(std::size_t t) const {
    auto s = frame_span(t);
    return LandmarkFrame(std::vector<float>(s.begin(), s.end()));
  }

  void set_frame(std::size_t t, const LandmarkFrame& f) {
    if (f.landmarks() != landmarks_) {
      throw std::invalid_argument("motion sequence: frame has " + std::to_string(f.landmarks()) +
                                  " landmarks, sequence has " + std::to_string(landmarks_));
    }
    std::copy(f.coords.begin(), f.coords.end(), frame_span(t).begin());
  }

  // Frames [begin, end).
  MotionSequence slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > frames_) {
      throw std::out_of_range("motion sequence: slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                              ") of " + std::to_string(frames_) + " frames");
    }
    return MotionSequence(end - begin, landmarks_,
                          std::vector<float>(data_.begin() + static_cast<std::ptrdiff_t>(begin * frame_size()),
                                             data_.begin() + static_cast<std::ptrdiff_t>(end * frame_size())),
                          fps_);
  }

  const std::vector<float>& data() const noexcept { return data_; }
  std::vector<float>& data() noexcept { return data_; }

  void validate(float limit = kIngestLimit) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw std::invalid_argument("motion sequence: non-finite value at index " + std::to_string(i));
      }
      if (std::abs(data_[i]) > limit) {
        throw std::invalid_argument("motion sequence: value " + std::to_string(data_[i]) + " at index " +
                                    std::to_string(i) + " outside canvas slack");
      }
    }
  }

  bool operator==(const MotionSequence&) const = default;

 private:
  void check() const {
    if (frames_ == 0) throw std::invalid_argument("motion sequence: T must be >= 1");
  }

  std::size_t frames_ = 0;
  std::size_t landmarks_ = 0;
  float fps_ = kDefaultFps;
  std::vector<float> data_;
};

struct SamplePair {
  MotionSequence first;
  MotionSequence second;

  SamplePair(MotionSequence a, MotionSequence b) : first(std::move(a)), second(std::move(b)) {
    if (first.frames() != second.frames() || first.landmarks() != second.landmarks()) {
      throw std::invalid_argument("sample pair: members differ in shape (" + std::to_string(first.frames()) + "x" +
                                  std::to_string(first.landmarks()) + " vs " + std::to_string(second.frames()) +
                                  "x" + std::to_string(second.landmarks()) + ")");
    }
  }

  SamplePair swapped() const { return SamplePair(second, first); }
};

// ---------------------------------------------------------------------------
// Kinematics

// Per frame: positions | velocities | accelerations, each K x 2, so a row
// holds 6K values. velocity[0] = 0 and acceleration[0] = acceleration[1] = 0.
class KinematicTensor {
 public:
  KinematicTensor(std::size_t frames, std::size_t landmarks)
      : frames_(frames), landmarks_(landmarks), data_(frames * landmarks * 6, 0.0f) {}

  std::size_t frames() const noexcept { return frames_; }
  std::size_t landmarks() const noexcept { return landmarks_; }
  std::size_t row_size() const noexcept { return landmarks_ * 6; }

  float& position(std::size_t t, std::size_t k, std::size_t a) { return data_[t * row_size() + 2 * k + a]; }
  float& velocity(std::size_t t, std::size_t k, std::size_t a) {
    return data_[t * row_size() + 2 * landmarks_ + 2 * k + a];
  }
  float& acceleration(std::size_t t, std::size_t k, std::size_t a) {
    return data_[t * row_size() + 4 * landmarks_ + 2 * k + a];
  }
  float position(std::size_t t, std::size_t k, std::size_t a) const { return data_[t * row_size() + 2 * k + a]; }
  float velocity(std::size_t t, std::size_t k, std::size_t a) const {
    return data_[t * row_size() + 2 * landmarks_ + 2 * k + a];
  }
  float acceleration(std::size_t t, std::size_t k, std::size_t a) const {
    return data_[t * row_size() + 4 * landmarks_ + 2 * k + a];
  }

  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(data_).subspan(t * row_size(), row_size());
  }
  const std::vector<float>& data() const noexcept { return data_; }

 private:
  std::size_t frames_;
  std::size_t landmarks_;
  std::vector<float> data_;
};

inline KinematicTensor kinematics(const MotionSequence& seq) {
  const std::size_t T = seq.frames(), K = seq.landmarks();
  KinematicTensor kin(T, K);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t a = 0; a < 2; ++a) {
        kin.position(t, k, a) = seq.at(t, k, a);
        if (t >= 1) kin.velocity(t, k, a) = seq.at(t, k, a) - seq.at(t - 1, k, a);
        if (t >= 2) kin.acceleration(t, k, a) = kin.velocity(t, k, a) - kin.velocity(t - 1, k, a);
      }
    }
  }
  return kin;
}

// ---------------------------------------------------------------------------
// .lmk files: "LMK1", u32 T, u32 K, f32 fps, then T*K*2 f32 in (t, k, xy) order.

inline std::vector<unsigned char> encode_sequence(const MotionSequence& seq) {
  ByteWriter w;
  w.str("LMK1");
  w.u32(static_cast<std::uint32_t>(seq.frames()));
  w.u32(static_cast<std::uint32_t>(seq.landmarks()));
  w.f32(seq.fps());
  for (float v : seq.data()) w.f32(v);
  return w.buffer();
}

inline void write_sequence(const std::string& path, const MotionSequence& seq) {
  ByteWriter w;
  const auto bytes = encode_sequence(seq);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

inline MotionSequence decode_sequence(ByteReader r) {
  const std::string magic = r.str(4, "magic");
  if (magic != "LMK1") throw FormatError(r.what() + ": bad magic, expected LMK1");
  const std::uint32_t T = r.u32("frame count");
  const std::uint32_t K = r.u32("landmark count");
  const float fps = r.f32("fps");
  if (T == 0) throw FormatError(r.what() + ": zero frames");
  const std::size_t expected = static_cast<std::size_t>(T) * K * 2 * 4;
  if (r.remaining() != expected) {
    throw FormatError(r.what() + ": payload size mismatch: expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(r.remaining()));
  }
  std::vector<float> data(static_cast<std::size_t>(T) * K * 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = r.f32("payload");
    if (!std::isfinite(data[i])) {
      throw FormatError(r.what() + ": non-finite value at index " + std::to_string(i));
    }
  }
  return MotionSequence(T, K, std::move(data), fps);
}

inline MotionSequence load_sequence(const std::string& path) {
  return decode_sequence(ByteReader::from_file(path));
}

// Centers on the sequence centroid and scales so the largest |coordinate| is
// 0.9. Applied to externally sourced landmarks at ingestion.
inline MotionSequence normalize_to_canvas(const MotionSequence& seq) {
  MotionSequence out = seq;
  double cx = 0, cy = 0;
  const std::size_t n = seq.frames() * seq.landmarks();
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    cx += seq.data()[2 * i];
    cy += seq.data()[2 * i + 1];
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  double extent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    extent = std::max({extent, std::abs(seq.data()[2 * i] - cx), std::abs(seq.data()[2 * i + 1] - cy)});
  }
  const double s = extent > 0 ? 0.9 / extent : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.data()[2 * i] = static_cast<float>((seq.data()[2 * i] - cx) * s);
    out.data()[2 * i + 1] = static_cast<float>((seq.data()[2 * i + 1] - cy) * s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest: JSON list of {path, mode_label (optional), split}.

struct ManifestEntry {
  std::string path;
  std::optional<int> mode_label;
  std::string split = "train";
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json row{{"path", e.path}, {"split", e.split}};
    if (e.mode_label) row["mode_label"] = *e.mode_label;
    j.push_back(std::move(row));
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

// Relative paths are resolved against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path + "': " + e.what());
  }
  if (!j.is_array()) throw FormatError("manifest '" + path + "': expected a JSON list");
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  for (const auto& row : j) {
    ManifestEntry e;
    e.path = row.at("path").get<std::string>();
    if (std::filesystem::path(e.path).is_relative()) e.path = (base / e.path).string();
    if (row.contains("mode_label") && !row["mode_label"].is_null()) e.mode_label = row["mode_label"].get<int>();
    e.split = row.value("split", std::string("train"));
    out.push_back(std::move(e));
  }
  return out;
}

struct LabeledSet {
  std::vector<MotionSequence> sequences;
  std::vector<int> labels;  // -1 when unknown
};

inline LabeledSet load_split(const std::vector<ManifestEntry>& manifest, const std::string& split) {
  LabeledSet out;
  for (const auto& e : manifest) {
    if (!split.empty() && e.split != split) continue;
    auto seq = load_sequence(e.path);
    seq.validate();
    out.sequences.push_back(std::move(seq));
    out.labels.push_back(e.mode_label.value_or(-1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference-pose augmentation

// Flip negates x about the canvas center; scaling is about the landmark
// centroid of the (flipped) frame; the shift is applied last.
struct ReferenceTransform {
  bool flip = false;
  double scale = 1.0;
  double shift_x = 0.0;
  double shift_y = 0.0;

  static ReferenceTransform sample(std::uint64_t seed) {
    Rng rng(seed);
    ReferenceTransform t;
    t.flip = rng.bernoulli(0.5);
    t.scale = rng.uniform(0.9, 1.1);
    t.shift_x = rng.uniform(-0.1, 0.1);
    t.shift_y = rng.uniform(-0.1, 0.1);
    return t;
  }

  static ReferenceTransform identity() { return {}; }

  LandmarkFrame apply(const LandmarkFrame& in) const {
    const std::size_t K = in.landmarks();
    std::vector<double> x(K), y(K);
    double cx = 0, cy = 0;
    for (std::size_t k = 0; k < K; ++k) {
      x[k] = flip ? -static_cast<double>(in.x(k)) : in.x(k);
      y[k] = in.y(k);
      cx += x[k];
      cy += y[k];
    }
    if (K > 0) {
      cx /= static_cast<double>(K);
      cy /= static_cast<double>(K);
    }
    LandmarkFrame out(std::vector<float>(2 * K));
    for (std::size_t k = 0; k < K; ++k) {
      out.coords[2 * k] = static_cast<float>(cx + scale * (x[k] - cx) + shift_x);
      out.coords[2 * k + 1] = static_cast<float>(cy + scale * (y[k] - cy) + shift_y);
    }
    return out;
  }
};

inline LandmarkFrame augment_reference(const LandmarkFrame& frame, std::uint64_t seed) {
  return ReferenceTransform::sample(seed).apply(frame);
}

// ---------------------------------------------------------------------------
// Pairing

// Random disjoint pairing of indices 0..n-1; with odd n one item sits out.
inline std::vector<std::pair<std::size_t, std::size_t>> pair_indices(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_pairs: need at least 2 sequences, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i + 1 < n; i += 2) out.emplace_back(idx[i], idx[i + 1]);
  return out;
}

inline std::vector<SamplePair> make_pairs(const std::vector<MotionSequence>& dataset, std::uint64_t seed) {
  std::vector<SamplePair> out;
  for (auto [a, b] : pair_indices(dataset.size(), seed)) out.emplace_back(dataset[a], dataset[b]);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset

struct SynthConfig {
  std::size_t n_sequences = 256;
  std::size_t frames = 40;
  std::size_t landmarks = 5;
  std::size_t n_modes = 2;
  std::uint64_t seed = 0;
  float fps = kDefaultFps;
  double rotation_amplitude = 0.25;     // radians
  double translation_amplitude = 0.12;  // canvas units
  double scale_amplitude = 0.05;        // relative
};

struct ModeBand {
  double lo_hz = 0;
  double hi_hz = 0;
  double center() const { return std::sqrt(lo_hz * hi_hz); }
};

// Geometric ladder of oscillation bands starting at 0.6 Hz; the ratio
// shrinks for many modes so the top band stays below 5 Hz.
inline ModeBand mode_band(std::size_t mode, std::size_t n_modes) {
  double ratio = 3.2;
  if (n_modes > 1) ratio = std::min(ratio, std::pow(5.0 / 0.6, 1.0 / static_cast<double>(n_modes - 1)));
  const double c = 0.6 * std::pow(ratio, static_cast<double>(mode));
  const double half = std::sqrt(ratio) > 1.5 ? 1.2 : 1.1;
  return {c / half, c * half};
}

// Centered face template. K = 5: eyes, nose tip, mouth corners. Other K:
// points on an elliptic contour.
inline std::vector<std::array<double, 2>> face_template(std::size_t K) {
  if (K == 5) return {{-0.22, 0.18}, {0.22, 0.18}, {0.0, 0.0}, {-0.16, -0.22}, {0.16, -0.22}};
  std::vector<std::array<double, 2>> pts(K);
  double cx = 0, cy = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(K);
    const double r = (k % 3 == 0) ? 1.0 : 0.6;
    pts[k] = {0.3 * r * std::cos(a), 0.38 * r * std::sin(a)};
    cx += pts[k][0];
    cy += pts[k][1];
  }
  for (auto& p : pts) {
    p[0] -= cx / static_cast<double>(K);
    p[1] -= cy / static_cast<double>(K);
  }
  return pts;
}

struct SynthDataset {
  std::vector<MotionSequence> sequences;
  std::vector<int> labels;
};

// One rigid trajectory: rotation, translation and scale oscillate at a common
// frequency drawn from the band of the mode label; phases and amplitudes are
// drawn per sequence from seed ^ index.
inline MotionSequence synth_sequence(const SynthConfig& cfg, std::size_t index, int label) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
  const ModeBand band = mode_band(static_cast<std::size_t>(label), cfg.n_modes);
  const double f = rng.uniform(band.lo_hz, band.hi_hz);
  const double two_pi = 2.0 * std::numbers::pi;
  std::array<double, 4> phase{};
  for (auto& p : phase) p = rng.uniform(0.0, two_pi);
  const double a_rot = cfg.rotation_amplitude * rng.uniform(0.6, 1.0);
  const double a_tx = cfg.translation_amplitude * rng.uniform(0.6, 1.0);
  const double a_ty = cfg.translation_amplitude * rng.uniform(0.6, 1.0);
  const double a_s = cfg.scale_amplitude * rng.uniform(0.6, 1.0);
  const auto tpl = face_template(cfg.landmarks);
  MotionSequence seq(cfg.frames, cfg.landmarks, cfg.fps);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double w = two_pi * f * static_cast<double>(t) / cfg.fps;
    const double theta = a_rot * std::sin(w + phase[0]);
    const double tx = a_tx * std::sin(w + phase[1]);
    const double ty = a_ty * std::sin(w + phase[2]);
    const double s = 1.0 + a_s * std::sin(w + phase[3]);
    const double c = std::cos(theta), sn = std::sin(theta);
    for (std::size_t k = 0; k < cfg.landmarks; ++k) {
      const double px = tpl[k][0], py = tpl[k][1];
      seq.at(t, k, 0) = static_cast<float>(s * (c * px - sn * py) + tx);
      seq.at(t, k, 1) = static_cast<float>(s * (sn * px + c * py) + ty);
    }
  }
  return seq;
}

inline SynthDataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.n_modes < 1) throw std::invalid_argument("synth_dataset: n_modes must be >= 1");
  if (cfg.frames < 1) throw std::invalid_argument("synth_dataset: frames must be >= 1");
  SynthDataset ds;
  ds.sequences.reserve(cfg.n_sequences);
  for (std::size_t i = 0; i < cfg.n_sequences; ++i) {
    const int label = static_cast<int>(i % cfg.n_modes);
    ds.sequences.push_back(synth_sequence(cfg, i, label));
    ds.labels.push_back(label);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Frequency oracle

// Peak frequency (Hz) of the summed power spectrum of all landmark velocity
// channels, each mean-removed and zero-padded. Returns 0 for motionless input.
inline double dominant_frequency(const MotionSequence& seq) {
  const std::size_t T = seq.frames();
  if (T < 3) return 0.0;
  const std::size_t C = seq.frame_size();
  const std::size_t n = T - 1;
  std::size_t N = 256;
  while (N < 4 * n) N *= 2;
  std::vector<double> power(N / 2 + 1, 0.0);
  std::vector<double> v(n);
  double total = 0.0;
  for (std::size_t ch = 0; ch < C; ++ch) {
    double mu = 0;
    for (std::size_t t = 0; t < n; ++t) {
      v[t] = static_cast<double>(seq.data()[(t + 1) * C + ch]) - static_cast<double>(seq.data()[t * C + ch]);
      mu += v[t];
    }
    mu /= static_cast<double>(n);
    for (auto& x : v) x -= mu;
    for (std::size_t b = 1; b <= N / 2; ++b) {
      std::complex<double> acc{0, 0};
      const double w = -2.0 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(N);
      for (std::size_t t = 0; t < n; ++t) acc += v[t] * std::polar(1.0, w * static_cast<double>(t));
      power[b] += std::norm(acc);
      total += std::norm(acc);
    }
  }
  if (!(total > 1e-18)) return 0.0;
  const auto peak = std::max_element(power.begin() + 1, power.end()) - power.begin();
  return static_cast<double>(peak) * seq.fps() / static_cast<double>(N);
}

// Mode whose band center is nearest in log-frequency; -1 for static input.
inline int classify_mode(const MotionSequence& seq, std::size_t n_modes) {
  const double f = dominant_frequency(seq);
  if (f <= 0.0) return -1;
  int best = 0;
  double best_d = 1e300;
  for (std::size_t m = 0; m < n_modes; ++m) {
    const double d = std::abs(std::log(f) - std::log(mode_band(m, n_modes).center()));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(m);
    }
  }
  return best;
}

}  // namespace suhmo
