#include <gtest/gtest.h>

#include <cmath>

#include "suhmo/gradcheck.hpp"
#include "suhmo/training.hpp"
#include "loss_fixture.hpp"
#include "test_util.hpp"

using namespace suhmo;
using suhmo::testing::random_tensor;
using suhmo::testing::loss_inputs;
using suhmo::testing::randomize;
using suhmo::testing::tiny_config;

namespace suhmo {
void PrintTo(Variant v, std::ostream* os) { *os << (v == Variant::recurrent ? "rnn" : "transformer"); }
}  // namespace suhmo

namespace {

DataSplit small_data(std::size_t frames = 12, std::size_t n = 40) {
  SynthConfig sc;
  sc.n_sequences = n;
  sc.frames = frames;
  sc.seed = 11;
  return split_dataset(synth_dataset(sc));
}

TrainConfig small_trainer_config(Variant v, std::uint64_t seed) {
  TrainConfig c = TrainConfig::desk();
  c.gen.variant = v;
  c.gen.hidden = 8;
  c.gen.embedding = 8;
  c.disc.embedding = 8;
  c.disc.scales = {4, 8, 12};
  c.frames = 12;
  c.batch = 4;
  c.eval_samples = 4;
  c.eval_interval = 2;
  c.seed = seed;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Hinge losses

TEST(Hinge, DiscriminatorExamples) {
  EXPECT_DOUBLE_EQ(hinge_d_loss({2.0}, {-2.0}), 0.0);
  EXPECT_DOUBLE_EQ(hinge_d_loss({0.0}, {0.0}), 2.0);
  EXPECT_DOUBLE_EQ(hinge_d_loss({0.5, -1.0}, {3.0}), 5.25);
  EXPECT_THROW(hinge_d_loss({}, {1.0}), std::invalid_argument);
}

TEST(Hinge, GeneratorExamples) {
  EXPECT_DOUBLE_EQ(hinge_g_loss({0.0}), 0.0);
  EXPECT_DOUBLE_EQ(hinge_g_loss({1.0, 3.0}), -2.0);
  EXPECT_THROW(hinge_g_loss({}), std::invalid_argument);
}

TEST(Hinge, GeneratorLossDecreasesInEveryScore) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(5);
    for (auto& v : s) v = rng.normal(0, 2);
    const double base = hinge_g_loss(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto t = s;
      t[i] += rng.uniform(0.01, 1.0);
      EXPECT_LT(hinge_g_loss(t), base);
    }
  }
}

TEST(Hinge, GraphVersionsMatchPlainVersions) {
  ad::Graph<double> g;
  auto r = g.constant(Tensor<double>(Shape{2, 1}, std::vector<double>{0.5, -1.0}));
  auto f = g.constant(Tensor<double>(Shape{1, 1}, std::vector<double>{3.0}));
  EXPECT_DOUBLE_EQ(hinge_d_loss(r, f).value().item(), 5.25);
  auto f2 = g.constant(Tensor<double>(Shape{2, 1}, std::vector<double>{1.0, 3.0}));
  EXPECT_DOUBLE_EQ(hinge_g_loss(f2).value().item(), -2.0);
}

// ---------------------------------------------------------------------------
// Adam

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>(Shape{3}, std::vector<double>{1.0, -2.0, 0.5}));
  const auto before = ps;
  AdamState<double> st(ps);
  Gradients<double> g;
  g.grads.emplace("w", Tensor<double>(Shape{3}));
  g.touched.insert("w");
  adam_step(ps, g, st, 0.1);
  EXPECT_EQ(ps, before);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesBySignOfGradient) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>(Shape{4}, std::vector<double>{0.0, 1.0, -1.0, 2.0}));
  const auto before = ps;
  AdamState<double> st(ps);
  Gradients<double> g;
  g.grads.emplace("w", Tensor<double>(Shape{4}, std::vector<double>{3.0, -0.2, 1e-3, -50.0}));
  g.touched.insert("w");
  const double lr = 0.01;
  adam_step(ps, g, st, lr);
  for (std::size_t i = 0; i < 4; ++i) {
    const double sign = g["w"][i] > 0 ? 1.0 : -1.0;
    EXPECT_NEAR(ps.get("w")[i] - before.get("w")[i], -lr * sign, lr * 1e-4);
  }
}

TEST(Adam, TwoStepsMatchReferenceRecurrence) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>(Shape{1}, std::vector<double>{0.3}));
  AdamState<double> st(ps);
  Gradients<double> g;
  g.grads.emplace("w", Tensor<double>(Shape{1}, std::vector<double>{1.0}));
  g.touched.insert("w");
  const AdamHyper h{0.5, 0.999, 1e-8};
  adam_step(ps, g, st, 0.1, h);
  adam_step(ps, g, st, 0.1, h);
  // Scripted recurrence.
  double w = 0.3, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.5 * m + 0.5 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1 - std::pow(0.5, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(ps.get("w")[0], w, 1e-12);
  EXPECT_NEAR(st.m.at("w")[0], m, 1e-12);
  EXPECT_NEAR(st.v.at("w")[0], v, 1e-12);
  EXPECT_EQ(st.step, 2u);
}

TEST(Adam, UntouchedLeavesAndMomentsStayPut) {
  ParamSet<double> ps;
  ps.add("a", Tensor<double>(Shape{2}, std::vector<double>{1.0, 2.0}));
  ps.add("b", Tensor<double>(Shape{2}, std::vector<double>{3.0, 4.0}));
  AdamState<double> st(ps);
  ad::Graph<double> graph;
  auto loss = ad::sum(ad::square(graph.param(ps, "a")));
  graph.param(ps, "b");  // present in the graph, not reached from the loss
  const auto grads = graph.backward(loss, ps);
  EXPECT_EQ(grads.touched, std::set<std::string>{"a"});
  const auto before = ps;
  adam_step(ps, grads, st, 0.1);
  EXPECT_EQ(ps.get("b"), before.get("b"));
  EXPECT_NE(ps.get("a"), before.get("a"));
  EXPECT_EQ(st.m.at("b"), Tensor<double>(Shape{2}));
}

TEST(Adam, ShapeMismatchThrows) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>(Shape{2}));
  AdamState<double> st(ps);
  Gradients<double> g;
  g.grads.emplace("w", Tensor<double>(Shape{3}));
  g.touched.insert("w");
  EXPECT_THROW(adam_step(ps, g, st, 0.1), ShapeError);
}

// ---------------------------------------------------------------------------
// Learning-rate schedule

TEST(LrSchedule, ImprovingMetricKeepsRate) {
  std::vector<double> h;
  for (int i = 0; i < 40; ++i) h.push_back(100.0 * std::pow(0.95, i));
  EXPECT_DOUBLE_EQ(lr_schedule(h, 2e-5), 2e-5);
}

TEST(LrSchedule, FlatMetricDecaysByTen) {
  const std::vector<double> h(11, 5.0);
  EXPECT_DOUBLE_EQ(lr_schedule(h, 2e-5), 2e-6);
  EXPECT_DOUBLE_EQ(lr_schedule(std::vector<double>(10, 5.0), 2e-5), 2e-5);  // not enough history
}

TEST(LrSchedule, SmallImprovementCountsAsStall) {
  std::vector<double> h(5, 10.0);
  for (int i = 0; i < 10; ++i) h.push_back(9.95);  // 0.5% better
  EXPECT_DOUBLE_EQ(lr_schedule(h, 1.0), 0.1);
}

TEST(LrSchedule, DecaysAtMostOnce) {
  const std::vector<double> h(200, 1.0);
  EXPECT_DOUBLE_EQ(lr_schedule(h, 2e-5), 2e-6);
  LrSchedule s(2e-5, StallRule{});
  for (int i = 0; i < 200; ++i) s.observe(1.0);
  EXPECT_TRUE(s.decayed());
  EXPECT_DOUBLE_EQ(s.lr(), 2e-6);
}

TEST(LrSchedule, StatefulMatchesPure) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    StallRule rule{3, 0.01, 10.0};
    LrSchedule s(1.0, rule);
    std::vector<double> h;
    double v = 10;
    for (int i = 0; i < 20; ++i) {
      v *= rng.uniform(0.9, 1.05);
      h.push_back(v);
      s.observe(v);
      EXPECT_DOUBLE_EQ(s.lr(), lr_schedule(h, 1.0, rule));
    }
  }
}

// ---------------------------------------------------------------------------
// Configuration

TEST(TrainConfig, DefaultsAndPresets) {
  const auto p = TrainConfig::paper();
  EXPECT_DOUBLE_EQ(p.lambda, 1e-2);
  EXPECT_DOUBLE_EQ(p.lr_G, 2e-5);
  EXPECT_DOUBLE_EQ(p.lr_D, 1e-5);
  EXPECT_DOUBLE_EQ(p.beta1, 0.5);
  EXPECT_DOUBLE_EQ(p.beta2, 0.999);
  EXPECT_DOUBLE_EQ(p.adam_eps, 1e-8);
  EXPECT_EQ(p.batch, 120u);
  EXPECT_EQ(p.gen.hidden, 1024u);
  EXPECT_EQ(p.gen.embedding, 1024u);
  EXPECT_EQ(p.disc.embedding, 128u);
  EXPECT_EQ(p.frames, 40u);
  EXPECT_DOUBLE_EQ(p.decay_factor, 10.0);
  const auto d = TrainConfig::desk();
  EXPECT_EQ(d.batch, 32u);
  EXPECT_EQ(d.gen.hidden, 64u);
  EXPECT_EQ(d.gen.landmarks, 5u);
  EXPECT_NO_THROW(d.validate());
  EXPECT_NO_THROW(p.validate());
  EXPECT_THROW(preset("huge"), std::invalid_argument);
  const auto t = preset("desk", Variant::attention);
  EXPECT_EQ(t.gen.variant, Variant::attention);
  EXPECT_EQ(t.effective_disc().variant, Variant::attention);
  EXPECT_LT(t.lr_D, t.lr_G);
  EXPECT_EQ(preset("paper", Variant::attention).gen.variant, Variant::attention);
}

TEST(TrainConfig, RejectsInvalidValues) {
  auto c = TrainConfig::desk();
  c.batch = 31;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig::desk();
  c.lambda = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig::desk();
  c.lr_D = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig::desk();
  c.disc.scales = {10, 50};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainConfig, JsonRoundTrip) {
  auto c = TrainConfig::desk();
  c.ablation.one_sample_D = true;
  c.gen.variant = Variant::attention;
  c.seed = 99;
  const nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  // Missing fields take defaults.
  const auto partial = nlohmann::json{{"seed", 4}}.get<TrainConfig>();
  EXPECT_EQ(partial.seed, 4u);
  EXPECT_DOUBLE_EQ(partial.lambda, 1e-2);
}

TEST(TrainConfig, AblationSwitchesReachModels) {
  auto c = TrainConfig::desk();
  c.ablation.one_sample_G = true;
  c.ablation.delta_based = true;
  EXPECT_FALSE(c.effective_gen().pair_mixing);
  EXPECT_EQ(c.effective_gen().mode, OutputMode::delta);
  c.ablation.l2_only = true;
  EXPECT_DOUBLE_EQ(c.lambda_at(0), 1.0);
  c.ablation.l2_only = false;
  c.lambda_anneal_iters = 100;
  EXPECT_DOUBLE_EQ(c.lambda_at(50), 0.5e-2);
  EXPECT_DOUBLE_EQ(c.lambda_at(500), 0.0);
}

// ---------------------------------------------------------------------------
// Loss graphs

class LossGraph : public ::testing::TestWithParam<Variant> {};

TEST_P(LossGraph, L2OnlyEqualsMse) {
  const auto cfg = tiny_config(GetParam());
  GanModels<double> m(cfg);
  ParamSet<double> gps, dps;
  m.init(gps, dps, 1);
  ad::Graph<double> g;
  GenState<double> st;
  auto in = loss_inputs(g, m, gps, st, 4);
  LossTerms terms;
  auto loss = generator_loss(g, m, dps, in, 1.0, true, &terms);
  double se = 0;
  std::size_t n = 0;
  for (std::size_t t = in.prefix; t < in.fake.size(); ++t) {
    for (std::size_t i = 0; i < in.fake[t].value().size(); ++i) {
      const double d = in.fake[t].value()[i] - in.real[t].value()[i];
      se += d * d;
      ++n;
    }
  }
  EXPECT_NEAR(loss.value().item(), se / static_cast<double>(n), 1e-15);
  EXPECT_EQ(terms.seq, 0.0);
  const auto grads = g.backward(loss, dps);
  EXPECT_TRUE(grads.touched.empty());
}

TEST_P(LossGraph, ZeroLambdaIsPureAdversarialSum) {
  const auto cfg = tiny_config(GetParam());
  GanModels<double> m(cfg);
  ParamSet<double> gps, dps;
  m.init(gps, dps, 2);
  Rng rng(8);
  randomize(dps, rng, 0.5);
  ad::Graph<double> g;
  GenState<double> st;
  auto in = loss_inputs(g, m, gps, st, 5);
  LossTerms t;
  auto loss = generator_loss(g, m, dps, in, 0.0, false, &t);
  EXPECT_DOUBLE_EQ(loss.value().item(), t.seq + t.pair + t.frame);
  EXPECT_GT(t.l2, 0.0);
  LossTerms t2;
  auto loss2 = generator_loss(g, m, dps, in, 1e-2, false, &t2);
  EXPECT_NEAR(loss2.value().item(), t.seq + t.pair + t.frame + 1e-2 * t.l2, 1e-12);
}

TEST_P(LossGraph, GeneratorLossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = suhmo::testing::check_loss_graph(GetParam(), false, seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " leaf " << r.worst_leaf << "[" << r.worst_index
                                     << "] a=" << r.analytic << " n=" << r.numeric;
  }
}

TEST_P(LossGraph, DiscriminatorLossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = suhmo::testing::check_loss_graph(GetParam(), true, seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " leaf " << r.worst_leaf << "[" << r.worst_index
                                     << "] a=" << r.analytic << " n=" << r.numeric;
  }
}

TEST_P(LossGraph, OneSampleDiscriminatorReplacesJointScorer) {
  auto cfg = tiny_config(GetParam());
  cfg.ablation.one_sample_D = true;
  GanModels<double> m(cfg);
  ParamSet<double> gps, dps;
  m.init(gps, dps, 1);
  bool has_seq2 = false;
  for (const auto& [name, _] : dps) {
    EXPECT_EQ(name.rfind("disc.joint", 0), std::string::npos) << name;
    has_seq2 = has_seq2 || name.rfind("disc.seq2.", 0) == 0;
  }
  EXPECT_TRUE(has_seq2);
  ad::Graph<double> g;
  g.freeze(gps);
  GenState<double> st;
  auto in = loss_inputs(g, m, gps, st, 3);
  const auto grads = g.backward(discriminator_loss(g, m, dps, in), dps);
  for (const auto& [name, _] : dps) EXPECT_TRUE(grads.touched.count(name)) << name;
}

TEST_P(LossGraph, OneSampleGeneratorCutsPartnerGradient) {
  for (bool mixing : {true, false}) {
    auto cfg = tiny_config(GetParam());
    cfg.ablation.one_sample_G = !mixing;
    GanModels<double> m(cfg);
    ParamSet<double> gps, dps;
    m.init(gps, dps, 1);
    Rng rng(12);
    randomize(gps, rng, 0.5);
    ad::Graph<double> g;
    auto x0 = g.variable(random_tensor<double>(Shape{2, 4}, rng, 0.3));
    auto st = m.gen.begin(g, 2);
    auto r = rollout<double>(g, m.gen.stepper(gps, st), {x0}, 5);
    // Loss on member 0 only.
    auto loss = ad::sum(ad::square(ad::slice(r.frames.back(), 0, 0, 1)));
    g.backward(loss);
    double partner = 0;
    for (std::size_t j = 0; j < 4; ++j) partner += std::abs(x0.grad().at(1, j));
    if (mixing) {
      EXPECT_GT(partner, 0.0);
    } else {
      EXPECT_EQ(partner, 0.0);
    }
  }
}

TEST_P(LossGraph, FullSequenceWindowScoresWholeSequence) {
  const auto cfg = tiny_config(GetParam());
  GanModels<double> m(cfg);
  ParamSet<double> gps, dps;
  m.init(gps, dps, 6);
  ad::Graph<double> g;
  GenState<double> st;
  auto in = loss_inputs(g, m, gps, st, 2);
  const auto rows = kinematic_rows(g, in.real, m.disc_cfg);
  const auto windowed = m.seq.score_windows(g, dps, rows, {{0, rows.size()}});
  const auto full = m.seq.score(g, dps, rows);
  EXPECT_EQ(windowed.value(), full.value());
}

INSTANTIATE_TEST_SUITE_P(Variants, LossGraph, ::testing::Values(Variant::recurrent, Variant::attention),
                         [](const auto& info) { return info.param == Variant::recurrent ? "rnn" : "transformer"; });

TEST(LossTerms, NonFiniteTermNamesIterationAndTerm) {
  LossTerms t{0.1, 0.2, std::nan(""), 0.0, 0.3};
  try {
    check_finite(t, 7, "G");
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("iteration 7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'frame'"), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(check_finite(LossTerms{}, 0, "D"));
}

// ---------------------------------------------------------------------------
// Checkpoint

TEST(Checkpoint, RoundTrip) {
  Checkpoint c;
  c.meta = {{"iteration", 3}, {"note", "x"}};
  c.tensors.emplace("gen.w", Tensor<float>(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6}));
  c.tensors.emplace("gen.w.m1", Tensor<float>(Shape{2, 3}, 0.5f));
  c.tensors.emplace("scalar", Tensor<float>::scalar(7.0f));
  const auto back = Checkpoint::decode(ByteReader(c.encode()));
  EXPECT_EQ(back, c);
}

TEST(Checkpoint, RejectsBadInput) {
  Checkpoint c;
  c.tensors.emplace("w", Tensor<float>(Shape{4}, 1.0f));
  auto bytes = c.encode();
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(Checkpoint::decode(ByteReader(bad)), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  try {
    Checkpoint::decode(ByteReader(cut));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("record payload"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, MissingOrMisshapedRecordThrows) {
  ParamSet<float> ps;
  ps.add("w", Tensor<float>(Shape{2}));
  Checkpoint c;
  EXPECT_THROW(c.get(ps), FormatError);
  c.tensors.emplace("w", Tensor<float>(Shape{3}));
  EXPECT_THROW(c.get(ps), FormatError);
}

// ---------------------------------------------------------------------------
// Trainer

TEST(Trainer, ZeroIterationCheckpointEqualsInitialization) {
  auto cfg = small_trainer_config(Variant::recurrent, 5);
  cfg.iterations = 0;
  Trainer<float> tr(cfg, small_data());
  tr.run();
  const auto c = tr.checkpoint();
  GanModels<float> m(cfg);
  ParamSet<float> gps, dps;
  m.init(gps, dps, derive_seed(cfg.seed, "train"));
  ParamSet<float> g2 = gps, d2 = dps;
  c.get(g2);
  c.get(d2);
  EXPECT_EQ(g2, gps);
  EXPECT_EQ(d2, dps);
  for (const auto& [name, t] : gps) EXPECT_EQ(c.tensors.at(name + ".m1"), Tensor<float>(t.shape()));
  EXPECT_EQ(c.meta.at("iteration").get<std::size_t>(), 0u);
}

TEST(Trainer, SameSeedGivesBitIdenticalCheckpoints) {
  for (auto v : {Variant::recurrent, Variant::attention}) {
    auto cfg = small_trainer_config(v, 7);
    cfg.iterations = 4;
    Trainer<float> a(cfg, small_data()), b(cfg, small_data());
    a.run();
    b.run();
    EXPECT_EQ(a.checkpoint().encode(), b.checkpoint().encode());
    cfg.seed = 8;
    Trainer<float> c(cfg, small_data());
    c.run();
    EXPECT_NE(a.checkpoint().encode(), c.checkpoint().encode());
  }
}

TEST(Trainer, CheckpointRestoresGenerator) {
  auto cfg = small_trainer_config(Variant::attention, 2);
  cfg.iterations = 2;
  Trainer<float> tr(cfg, small_data());
  tr.run();
  const auto loaded = load_generator<float>(Checkpoint::decode(ByteReader(tr.checkpoint().encode())));
  EXPECT_EQ(loaded.params, tr.gen_params());
  EXPECT_EQ(nlohmann::json(loaded.gen.config()), nlohmann::json(tr.models().gen.config()));
}

TEST(Trainer, LogsEveryEvalInterval) {
  auto cfg = small_trainer_config(Variant::recurrent, 1);
  cfg.iterations = 5;
  Trainer<float> tr(cfg, small_data());
  std::vector<std::size_t> iters;
  tr.run([&](const LogRow& r) { iters.push_back(r.iter); });
  EXPECT_EQ(iters, (std::vector<std::size_t>{2, 4, 5}));
  EXPECT_EQ(csv_header(), "iter,loss_G,loss_D,loss_L2,fvd40,tfid,lr_G,lr_D");
  EXPECT_EQ(csv_row(tr.log().front()).substr(0, 2), "2,");
}

TEST(Trainer, L2OnlyLeavesDiscriminatorUntouched) {
  auto cfg = small_trainer_config(Variant::recurrent, 1);
  cfg.ablation.l2_only = true;
  cfg.iterations = 3;
  Trainer<float> tr(cfg, small_data());
  const auto d0 = tr.disc_params();
  const auto g0 = tr.gen_params();
  tr.run();
  EXPECT_EQ(tr.disc_params(), d0);
  EXPECT_NE(tr.gen_params(), g0);
}

TEST(Trainer, RejectsUnusableData) {
  auto cfg = small_trainer_config(Variant::recurrent, 1);
  EXPECT_THROW(Trainer<float>(cfg, small_data(8)), std::invalid_argument);  // too short
  cfg.batch = 64;
  EXPECT_THROW(Trainer<float>(cfg, small_data()), std::invalid_argument);  // too few sequences
}

TEST(Trainer, LossesFiniteForFirstHundredIterationsOnDeskConfig) {
  SynthConfig sc;
  sc.seed = 1;
  const auto data = split_dataset(synth_dataset(sc));
  for (std::uint64_t seed : {1, 2, 3}) {
    auto cfg = TrainConfig::desk();
    cfg.seed = seed;
    Trainer<float> tr(cfg, data);
    for (int i = 0; i < 100; ++i) {
      const auto [gt, dt] = tr.step();  // aborts with TrainingError on a non-finite term
      ASSERT_TRUE(std::isfinite(gt.total) && std::isfinite(dt.total)) << "seed " << seed << " iter " << i;
    }
  }
}
