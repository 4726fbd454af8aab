// suhmo: data synthesis, training, generation, evaluation and rendering.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "suhmo/checkpoint.hpp"
#include "suhmo/landmarks.hpp"
#include "suhmo/metrics.hpp"
#include "suhmo/training.hpp"

namespace fs = std::filesystem;
using namespace suhmo;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string pad(std::size_t i, int width = 4) {
  std::string s = std::to_string(i);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

std::size_t thread_count(int flag) {
  if (flag > 0) return static_cast<std::size_t>(flag);
  if (const char* env = std::getenv("SUHMO_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("SUHMO_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

// A population is a manifest (.json), a directory of .lmk files, or one .lmk.
std::vector<MotionSequence> load_population(const std::string& spec, const std::string& split) {
  const fs::path p(spec);
  if (fs::is_directory(p)) {
    if (fs::exists(p / "manifest.json")) return load_population((p / "manifest.json").string(), split);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p))
      if (e.path().extension() == ".lmk") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<MotionSequence> out;
    for (const auto& f : files) out.push_back(load_sequence(f.string()));
    if (out.empty()) throw std::runtime_error("no .lmk files in '" + spec + "'");
    return out;
  }
  if (p.extension() == ".json") {
    auto seqs = load_split(read_manifest(spec), split).sequences;
    if (seqs.empty()) throw std::runtime_error("manifest '" + spec + "' has no sequences in split '" + split + "'");
    return seqs;
  }
  return {load_sequence(spec)};
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t n = 256, modes = 2, frames = 40, landmarks = 5;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  if (a.modes == 0) throw UsageError("--modes must be >= 1");
  if (a.n == 0) throw UsageError("--n must be >= 1");
  SynthConfig sc;
  sc.n_sequences = a.n;
  sc.n_modes = a.modes;
  sc.frames = a.frames;
  sc.landmarks = a.landmarks;
  sc.seed = derive_seed(a.seed, "data");
  const auto ds = synth_dataset(sc);
  fs::create_directories(a.out);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const std::string name = "seq_" + pad(i) + ".lmk";
    write_sequence((fs::path(a.out) / name).string(), ds.sequences[i]);
    entries.push_back({name, ds.labels[i], split_of(i)});
  }
  write_manifest((fs::path(a.out) / "manifest.json").string(), entries);
  std::cout << "wrote " << entries.size() << " sequences (" << a.modes << " modes) to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, preset = "desk", config, variant;
  std::optional<std::size_t> iters, batch, eval_interval, hidden, embedding;
  std::optional<double> lambda, lr_g, lr_d;
  std::optional<std::uint64_t> seed;
  bool one_sample_g = false, one_sample_d = false, no_multiscale = false, delta_based = false, l2_only = false;
};

int cmd_train(const TrainArgs& a) {
  std::optional<Variant> variant;
  if (a.variant == "rnn") {
    variant = Variant::recurrent;
  } else if (a.variant == "transformer") {
    variant = Variant::attention;
  } else if (!a.variant.empty()) {
    throw UsageError("--variant must be rnn or transformer, got '" + a.variant + "'");
  }
  TrainConfig cfg = preset(a.preset, variant.value_or(Variant::recurrent));
  if (!a.config.empty()) {
    std::ifstream is(a.config);
    if (!is) throw std::runtime_error("cannot open config '" + a.config + "'");
    nlohmann::json j;
    is >> j;
    nlohmann::json base = cfg;
    base.merge_patch(j);
    cfg = base.get<TrainConfig>();
  }
  if (variant) cfg.gen.variant = *variant;
  if (a.iters) cfg.iterations = *a.iters;
  if (a.batch) cfg.batch = *a.batch;
  if (a.eval_interval) cfg.eval_interval = *a.eval_interval;
  if (a.hidden) cfg.gen.hidden = *a.hidden;
  if (a.embedding) cfg.gen.embedding = cfg.disc.embedding = *a.embedding;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.lr_g) cfg.lr_G = *a.lr_g;
  if (a.lr_d) cfg.lr_D = *a.lr_d;
  if (a.seed) cfg.seed = *a.seed;
  cfg.ablation.one_sample_G |= a.one_sample_g;
  cfg.ablation.one_sample_D |= a.one_sample_d;
  cfg.ablation.no_multiscale |= a.no_multiscale;
  cfg.ablation.delta_based |= a.delta_based;
  cfg.ablation.l2_only |= a.l2_only;
  if (cfg.ablation.l2_only && (cfg.ablation.no_multiscale || cfg.ablation.one_sample_D)) {
    std::cerr << "suhmo: warning: --l2-only trains no discriminator; discriminator ablations have no effect\n";
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path manifest = fs::is_directory(a.data) ? fs::path(a.data) / "manifest.json" : fs::path(a.data);
  if (!fs::exists(manifest)) throw std::runtime_error("dataset manifest '" + manifest.string() + "' not found");
  auto data = load_dataset(manifest.string());

  fs::create_directories(a.out);
  const fs::path out(a.out);
  write_json(out / "config.json", cfg);
  Trainer<float> tr(cfg, std::move(data));
  std::ofstream log(out / "metrics.csv");
  if (!log) throw std::runtime_error("cannot open '" + (out / "metrics.csv").string() + "' for writing");
  log << csv_header() << '\n';
  tr.run([&](const LogRow& r) {
    log << csv_row(r) << '\n' << std::flush;
    std::cout << "iter " << r.iter << "  loss_G " << r.loss_G << "  loss_D " << r.loss_D << "  fvd40 " << r.fvd40
              << "  tfid " << r.tfid << "\n"
              << std::flush;
  });
  const fs::path ckpt = out / "checkpoint.suhm";
  tr.checkpoint().save(ckpt.string());
  RunManifest rm;
  rm.config = cfg;
  rm.seed = cfg.seed;
  rm.checkpoints = {ckpt.string()};
  rm.metric_log = (out / "metrics.csv").string();
  write_json(out / "run.json", rm);
  std::cout << "checkpoint " << ckpt.string() << " after " << tr.iteration() << " iterations\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string checkpoint, ref, out;
  long long length = 40;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  bool partners = false;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.length < 1) throw UsageError("--length must be >= 1, got " + std::to_string(a.length));
  if (a.n < 1) throw UsageError("--n must be >= 1");
  const auto loaded = load_generator<float>(Checkpoint::load(a.checkpoint));
  const LandmarkFrame ref = load_sequence(a.ref).frame(0);
  const std::uint64_t stream = derive_seed(a.seed, "generate");
  std::vector<LandmarkFrame> refs(a.n, ref), partners;
  for (std::size_t i = 0; i < a.n; ++i) partners.push_back(augment_reference(ref, derive_seed(stream, i)));
  const auto pairs =
      generate_pairs(loaded.gen, loaded.params, refs, partners, static_cast<std::size_t>(a.length));
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    write_sequence((fs::path(a.out) / ("gen_" + pad(i) + ".lmk")).string(), pairs[i].first);
    if (a.partners) write_sequence((fs::path(a.out) / ("partner_" + pad(i) + ".lmk")).string(), pairs[i].second);
  }
  std::cout << "wrote " << pairs.size() << " sequences of " << a.length << " frames to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kMetricNames{"fvd10", "fvd20", "fvd40", "tfid", "fid", "diversity"};

struct EvalArgs {
  std::string real, fake, metrics = "fvd40,tfid,fid", out, real_split, fake_split;
  std::size_t tail = 40, modes = 2;
  double alpha = kDefaultAlpha;
  std::uint64_t extractor_seed = kDefaultExtractorSeed;
  int threads = 0;
};

int cmd_eval(const EvalArgs& a) {
  std::vector<std::string> names;
  std::stringstream ss(a.metrics);
  for (std::string m; std::getline(ss, m, ',');) {
    if (m.empty()) continue;
    if (std::find(kMetricNames.begin(), kMetricNames.end(), m) == kMetricNames.end()) {
      std::string valid;
      for (const auto& v : kMetricNames) valid += (valid.empty() ? "" : ",") + v;
      throw UsageError("unknown metric '" + m + "' (valid: " + valid + ")");
    }
    names.push_back(m);
  }
  if (names.empty()) throw UsageError("--metrics is empty");
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");

  auto cut = [&](std::vector<MotionSequence> seqs) {
    for (auto& s : seqs) s = tail(s, a.tail);
    return seqs;
  };
  const auto real = cut(load_population(a.real, a.real_split));
  const auto fake = cut(load_population(a.fake, a.fake_split));
  MetricOptions opt;
  opt.extractor_seed = a.extractor_seed;
  opt.threads = thread_count(a.threads);

  nlohmann::json report = nlohmann::json::array();
  auto emit = [&](MetricResult r) {
    r.n_real = real.size();
    r.n_fake = fake.size();
    r.extractor_seed = opt.extractor_seed;
    std::cout << r.metric << " " << r.value << "\n";
    report.push_back(r);
  };
  for (const auto& m : names) {
    if (m.rfind("fvd", 0) == 0) {
      const std::size_t L = std::stoul(m.substr(3));
      emit({m, L, 0.0, fvd_like(real, fake, L, opt)});
    } else if (m == "tfid") {
      emit({m, 0, a.alpha, tfid(real, fake, a.alpha, opt)});
    } else if (m == "fid") {
      emit({m, 0, 0.0, fid_like(real, fake, opt)});
    } else {
      const auto d = population_diversity(fake, a.modes);
      emit({"diversity", 0, 0.0, d.mean_pairwise_distance});
      emit({"mode_coverage", 0, 0.0, static_cast<double>(d.mode_coverage)});
    }
  }
  if (!a.out.empty()) write_json(a.out, report);
  return 0;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  std::string input, out;
  bool motion_map = false;
  double alpha = kDefaultAlpha;
  std::size_t size = 64;
  double radius = 1.0;
};

int cmd_render(const RenderArgs& a) {
  if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");
  const auto seq = load_sequence(a.input);
  Canvas canvas;
  canvas.width = canvas.height = a.size;
  canvas.radius = a.radius;
  if (a.motion_map) {
    fs::path out(a.out);
    if (fs::is_directory(out)) out /= "motion_map.pgm";
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_pgm(out.string(), motion_map(seq, a.alpha, canvas));
    std::cout << "wrote " << out.string() << "\n";
    return 0;
  }
  fs::create_directories(a.out);
  const auto frames = rasterize(seq, canvas);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    write_pgm((fs::path(a.out) / ("frame_" + pad(t) + ".pgm")).string(), frames[t]);
  }
  std::cout << "wrote " << frames.size() << " frames to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"suhmo: paired landmark motion generation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic multi-mode landmark dataset");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--n", sa.n, "Number of sequences");
  synth->add_option("--modes", sa.modes, "Number of motion modes");
  synth->add_option("--frames", sa.frames, "Frames per sequence");
  synth->add_option("--landmarks", sa.landmarks, "Landmarks per frame");
  synth->add_option("--seed", sa.seed, "Root seed");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a generator/discriminator pair");
  train->add_option("--data", ta.data, "Dataset manifest or directory")->required();
  train->add_option("--out", ta.out, "Run directory")->required();
  train->add_option("--preset", ta.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--config", ta.config, "JSON file overriding preset fields");
  train->add_option("--variant", ta.variant, "rnn or transformer");
  train->add_option("--iters", ta.iters, "Training iterations");
  train->add_option("--batch", ta.batch, "Batch size (even)");
  train->add_option("--eval-interval", ta.eval_interval, "Iterations between evaluations");
  train->add_option("--hidden", ta.hidden, "Recurrent generator state size");
  train->add_option("--embedding", ta.embedding, "Attention width and discriminator embedding");
  train->add_option("--lambda", ta.lambda, "L2 weight");
  train->add_option("--lr-g", ta.lr_g, "Generator learning rate");
  train->add_option("--lr-d", ta.lr_d, "Discriminator learning rate");
  train->add_option("--seed", ta.seed, "Root seed");
  train->add_flag("--one-sample-g", ta.one_sample_g, "Disable pair mixing in the generator");
  train->add_flag("--one-sample-d", ta.one_sample_d, "Replace the joint discriminator with a marginal one");
  train->add_flag("--no-multiscale", ta.no_multiscale, "Score whole sequences instead of sampled windows");
  train->add_flag("--delta-based", ta.delta_based, "Predict offsets from the first frame");
  train->add_flag("--l2-only", ta.l2_only, "Train with the reconstruction loss only");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Generate sequences from a reference pose");
  gen->add_option("--checkpoint", ga.checkpoint, "Checkpoint file")->required();
  gen->add_option("--ref", ga.ref, ".lmk file whose first frame is the reference")->required();
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_option("--length", ga.length, "Frames per sequence, reference included");
  gen->add_option("--n", ga.n, "Number of draws");
  gen->add_option("--seed", ga.seed, "Root seed for partner augmentation");
  gen->add_flag("--partners", ga.partners, "Also write the partner member of each pair");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Compare two populations");
  eval->add_option("--real", ea.real, "Real population: manifest, directory or .lmk")->required();
  eval->add_option("--fake", ea.fake, "Generated population: manifest, directory or .lmk")->required();
  eval->add_option("--metrics", ea.metrics, "Comma list of fvd10,fvd20,fvd40,tfid,fid,diversity");
  eval->add_option("--real-split", ea.real_split, "Manifest split for --real (default: all)");
  eval->add_option("--fake-split", ea.fake_split, "Manifest split for --fake (default: all)");
  eval->add_option("--tail", ea.tail, "Evaluate the last N frames (0: all)");
  eval->add_option("--alpha", ea.alpha, "Motion-map EMA factor");
  eval->add_option("--modes", ea.modes, "Synthetic modes for coverage");
  eval->add_option("--extractor-seed", ea.extractor_seed, "Feature extractor seed");
  eval->add_option("--threads", ea.threads, "Worker threads (default: SUHMO_THREADS or 1)");
  eval->add_option("--out", ea.out, "JSON report path");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Rasterize a sequence to PGM images");
  render->add_option("--input", ra.input, ".lmk file")->required();
  render->add_option("--out", ra.out, "Output directory, or file with --motion-map")->required();
  render->add_flag("--motion-map", ra.motion_map, "Write one motion map instead of every frame");
  render->add_option("--alpha", ra.alpha, "Motion-map EMA factor");
  render->add_option("--size", ra.size, "Canvas side in pixels");
  render->add_option("--radius", ra.radius, "Landmark disc radius in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "suhmo: usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*train) return cmd_train(ta);
    if (*gen) return cmd_generate(ga);
    if (*eval) return cmd_eval(ea);
    if (*render) return cmd_render(ra);
  } catch (const UsageError& e) {
    std::cerr << "suhmo: usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "suhmo: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
