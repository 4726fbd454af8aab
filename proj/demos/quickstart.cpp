// Quickstart: synthesize a small two-mode dataset, train a recurrent pair
// generator for a few hundred iterations, then generate from a held-out
// reference pose and score the result.
//
//   quickstart [iterations] [output directory]

#include <filesystem>
#include <iostream>
#include <string>

#include "suhmo/metrics.hpp"
#include "suhmo/training.hpp"

int main(int argc, char** argv) {
  using namespace suhmo;
  const std::size_t iterations = argc > 1 ? std::stoul(argv[1]) : 300;
  const std::filesystem::path out = argc > 2 ? argv[2] : "quickstart_out";

  SynthConfig sc;
  sc.n_sequences = 128;
  sc.seed = 7;
  const auto data = split_dataset(synth_dataset(sc));
  std::cout << data.train.size() << " training / " << data.val.size() << " validation sequences\n";

  TrainConfig cfg = TrainConfig::desk();
  cfg.iterations = iterations;
  cfg.eval_interval = std::max<std::size_t>(1, iterations / 3);
  cfg.seed = 1;
  Trainer<float> trainer(cfg, data);
  const double before = trainer.evaluate_val().fvd40;
  trainer.run([](const LogRow& r) {
    std::cout << "iter " << r.iter << "  loss_G " << r.loss_G << "  loss_D " << r.loss_D << "  fvd40 " << r.fvd40
              << "\n";
  });
  std::cout << "fvd40 before training " << before << ", after " << trainer.log().back().fvd40 << "\n";

  std::filesystem::create_directories(out);
  trainer.checkpoint().save((out / "checkpoint.suhm").string());

  // Eight draws from one reference; the partner of each draw is an augmented
  // copy of the reference.
  const auto report = diversity(trainer.models().gen, trainer.gen_params(), data.val.front().frame(0), 8, 80, 3,
                                sc.n_modes);
  std::cout << "8 draws of 80 frames: mean pairwise distance " << report.mean_pairwise_distance << ", modes hit "
            << report.mode_coverage << " of " << sc.n_modes << "\n";

  const auto fakes = generate_from_references(trainer.models().gen, trainer.gen_params(), data.val, 1, 80, 3);
  write_sequence((out / "sample.lmk").string(), fakes.front());
  write_pgm((out / "sample_motion_map.pgm").string(), motion_map(fakes.front()));
  std::cout << "wrote " << (out / "sample.lmk").string() << " and its motion map\n";
}
