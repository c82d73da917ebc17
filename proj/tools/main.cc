#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include <CLI11.hpp>

#include "commands.h"

namespace {

using scov::cli::RunConfig;

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--threads", cfg.threads, "Worker threads (0: STEERABLE_COV_THREADS or all cores)");
  sub->add_option("--out", cfg.out, "Output directory");
  sub->add_option("--band-ratio", cfg.band_ratio, "Bandlimit as a fraction of pi L / 2");
}

void add_shrink(CLI::App* sub, RunConfig& cfg) {
  sub->add_flag_callback("--shrink", [&cfg] { cfg.shrink = true; }, "Eigenvalue shrinkage on");
  sub->add_flag_callback("--no-shrink", [&cfg] { cfg.shrink = false; }, "Eigenvalue shrinkage off");
}

void add_simulation(CLI::App* sub, RunConfig& cfg, std::string& snr_text) {
  sub->add_option("--size", cfg.size, "Image size L");
  sub->add_option("--num-images", cfg.num_images, "Number of images N");
  sub->add_option("--num-groups", cfg.num_groups, "Number of defocus groups M");
  sub->add_option("--snr", snr_text, "Signal-to-noise ratio (inf: noiseless)");
  sub->add_option("--seed", cfg.seed, "Random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steerable covariance estimation and denoising for CTF-affected images"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string snr_text = "0.1";

  auto* sim = app.add_subcommand("simulate", "Simulate a projection dataset");
  add_simulation(sim, cfg, snr_text);
  add_common(sim, cfg);
  sim->add_flag("--white-noise", cfg.white_noise, "White instead of colored noise");
  sim->add_flag("--random-steer", cfg.random_steer, "Rotate every clean image by a random in-plane angle");
  sim->add_flag("--force", cfg.force, "Overwrite an existing dataset");

  auto* est = app.add_subcommand("estimate", "Estimate mean and covariance");
  est->add_option("--dataset", cfg.dataset, "Dataset directory")->required();
  est->add_option("--repeat", cfg.repeat, "Timing repetitions (best is kept)");
  add_common(est, cfg);
  add_shrink(est, cfg);

  auto* den = app.add_subcommand("denoise", "Wiener-filter selected images");
  den->add_option("--dataset", cfg.dataset, "Dataset directory")->required();
  den->add_option("--report", cfg.report, "Estimation report")->required();
  den->add_option("--select", cfg.select, "Images: a:stride:b (inclusive), i,j,k or all");
  den->add_flag("--png", cfg.png, "Write PNG previews");
  add_common(den, cfg);

  auto* eig = app.add_subcommand("eigenimages", "Top eigenimages of the covariance");
  eig->add_option("--report", cfg.report, "Estimation report")->required();
  eig->add_option("--top", cfg.top, "Number of eigenimages");
  eig->add_flag("--png", cfg.png, "Write PNG previews");
  add_common(eig, cfg);

  auto* bench = app.add_subcommand("bench", "Runtime against the number of defocus groups");
  add_simulation(bench, cfg, snr_text);
  add_common(bench, cfg);
  add_shrink(bench, cfg);
  bench->add_option("--bench-groups", cfg.bench_groups, "Values of M")->delimiter(',');
  bench->add_option("--cg-size", cfg.cg_size, "Image size of the CG reference");
  bench->add_option("--cg-images", cfg.cg_images, "Image count of the CG reference");
  bench->add_option("--repeat", cfg.repeat, "Timing repetitions (best is kept)");

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.snr = snr_text == "inf" ? std::numeric_limits<double>::infinity() : std::stod(snr_text);
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (cfg.subcommand == "simulate") {
      const auto r = scov::cli::cmd_simulate(cfg);
      std::cout << "dataset " << r.dir.string() << " measured_snr " << r.measured_snr << "\n";
    } else if (cfg.subcommand == "estimate") {
      const auto r = scov::cli::cmd_estimate(cfg);
      std::cout << "report " << r.report_path.string() << "\nblocks " << r.blocks_path.string() << "\n";
      for (const auto& w : r.report.warnings) std::cerr << "warning: " << w << "\n";
    } else if (cfg.subcommand == "denoise") {
      for (const auto& f : scov::cli::cmd_denoise(cfg)) std::cout << f.string() << "\n";
    } else if (cfg.subcommand == "eigenimages") {
      for (const auto& f : scov::cli::cmd_eigenimages(cfg)) std::cout << f.string() << "\n";
    } else if (cfg.subcommand == "bench") {
      std::cout << "M,t_fast,t_cg\n";
      for (const auto& r : scov::cli::cmd_bench(cfg)) std::cout << r.groups << "," << r.t_fast << "," << r.t_cg << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
