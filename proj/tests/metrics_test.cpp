#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include <unistd.h>

#include "suhmo/metrics.hpp"

using namespace suhmo;

namespace {

MotionSequence constant_sequence(const LandmarkFrame& f, std::size_t T) {
  MotionSequence s(T, f.landmarks());
  for (std::size_t t = 0; t < T; ++t) s.set_frame(t, f);
  return s;
}

std::vector<MotionSequence> moving(std::size_t n, std::uint64_t seed, std::size_t frames = 40) {
  SynthConfig cfg;
  cfg.n_sequences = n;
  cfg.seed = seed;
  cfg.frames = frames;
  return synth_dataset(cfg).sequences;
}

std::vector<MotionSequence> frozen(const std::vector<MotionSequence>& seqs) {
  std::vector<MotionSequence> out;
  for (const auto& s : seqs) out.push_back(constant_sequence(s.frame(0), s.frames()));
  return out;
}

GaussianStats stats_1d(double mean, double var) {
  GaussianStats s;
  s.mean = Eigen::VectorXd::Constant(1, mean);
  s.cov = Eigen::MatrixXd::Constant(1, 1, var);
  s.count = 2;
  return s;
}

Eigen::MatrixXd random_spd(std::size_t d, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return a * a.transpose() / static_cast<double>(d) + 1e-3 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST(Rasterize, OriginLandmarkIsCenteredDisc) {
  auto img = rasterize(LandmarkFrame({0.0f, 0.0f}));
  double sr = 0, sc = 0, n = 0;
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j)
      if (img.at(i, j) > 0) {
        sr += i + 0.5;
        sc += j + 0.5;
        n += 1;
      }
  EXPECT_EQ(n, 4);
  EXPECT_DOUBLE_EQ(sr / n, 32.0);
  EXPECT_DOUBLE_EQ(sc / n, 32.0);
}

TEST(Rasterize, EmptyFrameIsBlank) {
  auto img = rasterize(LandmarkFrame(std::vector<float>{}));
  for (float p : img.pixels) EXPECT_EQ(p, 0.0f);
}

TEST(Rasterize, HalfUnitTranslationShiftsQuarterWidth) {
  LandmarkFrame a({-0.3f, 0.1f, 0.05f, -0.4f}), b({0.2f, 0.1f, 0.55f, -0.4f});
  auto ia = rasterize(a), ib = rasterize(b);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(ib.at(i, j), j >= 16 ? ia.at(i, j - 16) : 0.0f) << i << "," << j;
}

TEST(Rasterize, OffCanvasCoordinatesAreClipped) {
  auto img = rasterize(LandmarkFrame({1.4f, -1.4f}));
  for (float p : img.pixels) EXPECT_EQ(p, 0.0f);
}

TEST(MotionMap, AlphaOneIsLastFrame) {
  auto s = moving(1, 3)[0];
  EXPECT_EQ(motion_map(s, 1.0), rasterize(s.frame(s.frames() - 1)));
}

TEST(MotionMap, StaticSequenceIsFrameRaster) {
  auto s = constant_sequence(moving(1, 4)[0].frame(0), 30);
  for (double a : {0.05, 0.15, 0.5, 1.0}) {
    auto m = motion_map(s, a), r = rasterize(s.frame(0));
    for (std::size_t i = 0; i < m.pixels.size(); ++i) EXPECT_NEAR(m.pixels[i], r.pixels[i], 1e-6);
  }
}

TEST(MotionMap, TwoFrameImpulseClosedForm) {
  MotionSequence s(2, 1);
  s.set_frame(0, LandmarkFrame({-0.5f, 0.0f}));
  s.set_frame(1, LandmarkFrame({0.5f, 0.0f}));
  auto m = motion_map(s, 0.5);
  // Pixel lit only at t=1: weight 0.5 / 1.5; only at t=2: 1 / 1.5.
  auto a = rasterize(s.frame(0)), b = rasterize(s.frame(1));
  int seen_a = 0, seen_b = 0;
  for (std::size_t i = 0; i < m.pixels.size(); ++i) {
    if (a.pixels[i] > 0) {
      EXPECT_NEAR(m.pixels[i], 1.0 / 3.0, 1e-6);
      ++seen_a;
    }
    if (b.pixels[i] > 0) {
      EXPECT_NEAR(m.pixels[i], 2.0 / 3.0, 1e-6);
      ++seen_b;
    }
  }
  EXPECT_GT(seen_a, 0);
  EXPECT_GT(seen_b, 0);
}

TEST(MotionMap, WeightsStrictlyIncreaseAndAlphaValidated) {
  for (double a : {0.01, 0.15, 0.5, 0.99}) {
    auto w = motion_weights(40, a);
    for (std::size_t t = 1; t < w.size(); ++t) EXPECT_GT(w[t], w[t - 1]);
    EXPECT_EQ(w.back(), 1.0);
  }
  EXPECT_THROW(motion_weights(3, 0.0), std::invalid_argument);
  EXPECT_THROW(motion_weights(3, 1.5), std::invalid_argument);
}

TEST(MotionMap, PixelsStayInUnitRange) {
  for (const auto& s : moving(5, 5))
    for (float p : motion_map(s).pixels) {
      EXPECT_GE(p, 0.0f);
      EXPECT_LE(p, 1.0f);
    }
}

TEST(Pgm, RoundTripQuantized) {
  auto dir = std::filesystem::temp_directory_path() / ("suhmo_pgm_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto m = motion_map(moving(1, 6)[0]);
  write_pgm((dir / "m.pgm").string(), m);
  auto r = read_pgm((dir / "m.pgm").string());
  ASSERT_EQ(r.height, 64u);
  for (std::size_t i = 0; i < m.pixels.size(); ++i) EXPECT_NEAR(r.pixels[i], m.pixels[i], 0.5 / 255 + 1e-7);
  std::filesystem::remove_all(dir);
}

TEST(FeatureStats, IdenticalItemsHaveZeroCovariance) {
  auto s = stats_from_features({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}, 0.0);
  EXPECT_EQ(s.cov.norm(), 0.0);
  auto r = stats_from_features({{1.0, 2.0}, {1.0, 2.0}});
  EXPECT_DOUBLE_EQ(r.cov(0, 0), 1e-6);
}

TEST(FeatureStats, TwoPointExample) {
  auto s = stats_from_features({{0.0}, {2.0}}, 0.0);
  EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.cov(0, 0), 2.0);
  EXPECT_EQ(s.count, 2u);
}

TEST(FeatureStats, FewerThanTwoItemsRejected) {
  EXPECT_THROW(stats_from_features({{1.0}}), std::invalid_argument);
  EXPECT_THROW(stats_from_features({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST(FeatureStats, GaussianSampleWithinThreeSigma) {
  // x = mu + L z with known covariance L L^T.
  Rng rng(17);
  const double mu[3] = {0.5, -1.0, 2.0};
  const double L[3][3] = {{1.0, 0, 0}, {0.5, 2.0, 0}, {-0.3, 0.2, 0.7}};
  double cov[3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) cov[i][j] += L[i][k] * L[j][k];
  const int n = 200;
  std::vector<std::vector<double>> rows;
  for (int s = 0; s < n; ++s) {
    double z[3] = {rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> x(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = mu[i];
      for (int k = 0; k < 3; ++k) x[i] += L[i][k] * z[k];
    }
    rows.push_back(x);
  }
  auto st = stats_from_features(rows, 0.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(st.mean[i] - mu[i]), 3 * std::sqrt(cov[i][i] / n)) << i;
    for (int j = 0; j < 3; ++j) {
      // Var of the sample covariance entry: (s_ij^2 + s_ii s_jj) / (n - 1).
      const double sd = std::sqrt((cov[i][j] * cov[i][j] + cov[i][i] * cov[j][j]) / (n - 1));
      EXPECT_LE(std::abs(st.cov(i, j) - cov[i][j]), 3 * sd) << i << "," << j;
    }
  }
  EXPECT_LE((st.cov - st.cov.transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FeatureStats, ReductionIgnoresRowOrder) {
  Rng rng(3);
  std::vector<std::vector<double>> rows(50, std::vector<double>(4));
  for (auto& r : rows)
    for (auto& v : r) v = rng.normal();
  auto a = stats_from_features(rows);
  rng.shuffle(rows.begin(), rows.end());
  auto b = stats_from_features(rows);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.cov, b.cov);
}

TEST(Frechet, ClosedForms) {
  auto a = stats_1d(0.0, 1.0);
  EXPECT_NEAR(frechet(a, a), 0.0, 1e-8);
  EXPECT_NEAR(frechet(a, stats_1d(1.0, 1.0)), 1.0, 1e-6);
  GaussianStats x, y;
  x.mean = y.mean = Eigen::Vector2d(0.3, -0.2);
  x.cov = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  y.cov = Eigen::Vector2d(4.0, 1.0).asDiagonal();
  EXPECT_NEAR(frechet(x, y), 2.0, 1e-6);
}

TEST(Frechet, SymmetricAndRejectsBadInput) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianStats a, b;
    a.mean = Eigen::VectorXd::Random(8);
    b.mean = Eigen::VectorXd::Random(8);
    a.cov = random_spd(8, rng);
    b.cov = random_spd(8, rng);
    EXPECT_NEAR(frechet(a, b), frechet(b, a), 1e-8);
    EXPECT_LE(frechet(a, a), 1e-8);
  }
  EXPECT_THROW(frechet(stats_1d(0, 1), GaussianStats{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 2}),
               std::invalid_argument);
  EXPECT_THROW(sqrtm_psd(Eigen::MatrixXd::Constant(1, 1, -1.0)), std::domain_error);
  EXPECT_NO_THROW(sqrtm_psd(Eigen::MatrixXd::Constant(1, 1, -1e-8)));
}

TEST(Frechet, SqrtmResidualOnRandomSpd) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_spd(64, rng), b = random_spd(64, rng);
    const auto ra = sqrtm_psd(a);
    const Eigen::MatrixXd m = ra * b * ra;
    const auto s = sqrtm_psd(m);
    EXPECT_LT((s * s - m).norm() / m.norm(), 1e-6);
  }
}

TEST(Extractors, SeedDeterminesFeatures) {
  auto seq = moving(1, 7)[0];
  SequenceFeatureExtractor a(5, 11), b(5, 11), c(5, 12);
  EXPECT_EQ(a(seq), b(seq));
  EXPECT_NE(a(seq), c(seq));
  EXPECT_EQ(a(seq).size(), kFeatureDim);
  FrameFeatureExtractor f(11), h(11);
  auto img = motion_map(seq);
  EXPECT_EQ(f(img), h(img));
  EXPECT_EQ(f(img).size(), kFeatureDim);
}

TEST(Fvd, SameSetIsZeroAndShortSequencesRejected) {
  auto real = moving(40, 1);
  for (std::size_t L : {10u, 20u, 40u}) EXPECT_LE(fvd_like(real, real, L), 1e-8);
  EXPECT_THROW(fvd_like(real, real, 41), std::invalid_argument);
}

TEST(Fvd, SplitDistanceShrinksWithPopulation) {
  auto split = [](std::size_t n) {
    auto pop = moving(2 * n, 21);
    std::vector<MotionSequence> a(pop.begin(), pop.begin() + n), b(pop.begin() + n, pop.end());
    return fvd_like(a, b, 40);
  };
  EXPECT_LT(split(200), split(50));
}

TEST(Fvd, StaticFakesAreFarFromMovingReal) {
  auto pop = moving(200, 22);
  std::vector<MotionSequence> a(pop.begin(), pop.begin() + 100), b(pop.begin() + 100, pop.end());
  const double baseline = fvd_like(a, b, 40);
  const double stat = fvd_like(a, frozen(b), 40);
  EXPECT_GE(stat, 10 * baseline) << stat << " vs " << baseline;
}

TEST(Tfid, IdenticalZeroAndStaticFar) {
  auto pop = moving(200, 23);
  std::vector<MotionSequence> a(pop.begin(), pop.begin() + 100), b(pop.begin() + 100, pop.end());
  EXPECT_LE(tfid(a, a), 1e-8);
  const double baseline = tfid(a, b), stat = tfid(a, frozen(b));
  EXPECT_GT(stat, 10 * baseline) << stat << " vs " << baseline;
}

TEST(Tfid, AlphaOneIsLastFrameFid) {
  auto pop = moving(60, 24);
  std::vector<MotionSequence> a(pop.begin(), pop.begin() + 30), b(pop.begin() + 30, pop.end());
  auto last = [](const std::vector<MotionSequence>& s) {
    std::vector<MotionSequence> out;
    for (const auto& x : s) out.push_back(x.slice(x.frames() - 1, x.frames()));
    return out;
  };
  EXPECT_NEAR(tfid(a, b, 1.0), fid_like(last(a), last(b)), 1e-9);
}

TEST(Metrics, PopulationOrderAndThreadCountDoNotMatter) {
  auto pop = moving(40, 25);
  std::vector<MotionSequence> a(pop.begin(), pop.begin() + 20), b(pop.begin() + 20, pop.end());
  const double f1 = fvd_like(a, b, 20), t1 = tfid(a, b);
  std::reverse(a.begin(), a.end());
  std::swap(b[0], b[7]);
  MetricOptions four;
  four.threads = 4;
  EXPECT_EQ(fvd_like(a, b, 20, four), f1);
  EXPECT_EQ(tfid(a, b, kDefaultAlpha, four), t1);
}

TEST(Metrics, TailAndWindows) {
  auto s = moving(1, 26, 80)[0];
  EXPECT_EQ(tail(s, 40), s.slice(40, 80));
  EXPECT_EQ(tail(s, 100), s);
  EXPECT_EQ(windows_of({s}, 40).size(), 3u);  // starts 0, 20, 40
  EXPECT_EQ(windows_of({s}, 1).size(), 80u);
}

TEST(Diversity, IdenticalDrawsHaveZeroDistance) {
  auto s = moving(1, 27)[0];
  auto d = population_diversity({s, s}, 2);
  EXPECT_EQ(d.mean_pairwise_distance, 0.0);
  EXPECT_EQ(d.mode_coverage, 1u);
  EXPECT_THROW(population_diversity({s}, 2), std::invalid_argument);
}

TEST(Diversity, CountsModesOfRealData) {
  auto d = population_diversity(moving(10, 28), 2);
  EXPECT_EQ(d.mode_coverage, 2u);
  EXPECT_GT(d.mean_pairwise_distance, 0.0);
}

TEST(Diversity, IdentityAugmentationOfDeterministicGeneratorIsZero) {
  GenConfig gc;
  gc.hidden = 16;
  Generator<float> gen(gc);
  ParamSet<float> ps;
  Rng rng(1);
  gen.init(ps, rng);
  const auto ref = moving(1, 29)[0].frame(0);
  EXPECT_EQ(diversity(gen, ps, ref, 4, 20, 5, 2, true).mean_pairwise_distance, 0.0);
  EXPECT_GT(diversity(gen, ps, ref, 4, 20, 5, 2, false).mean_pairwise_distance, 0.0);
}

TEST(Report, JsonFields) {
  MetricResult r{"fvd40", 40, 0.15, 1.5, 10, 12, 7};
  nlohmann::json j = r;
  for (const char* k : {"metric", "window_length", "alpha", "value", "n_real", "n_fake", "extractor_seed"})
    EXPECT_TRUE(j.contains(k)) << k;
}
