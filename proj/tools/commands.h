#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scov/covariance.h"

namespace scov::cli {

struct RunConfig {
  std::string subcommand;
  int size = 32;
  int num_images = 1000;
  int num_groups = 10;
  double snr = 0.1;
  double band_ratio = 1.0;
  std::uint64_t seed = 0;
  // Unset: on when the noise variance is positive.
  std::optional<bool> shrink;
  int threads = 0;
  std::filesystem::path out = "out";
  std::filesystem::path dataset;
  std::filesystem::path report;
  std::string select = "0";
  int top = 6;
  std::vector<int> bench_groups = {1, 10, 100};
  int cg_size = 8;
  int cg_images = 256;
  int repeat = 3;
  bool white_noise = false;
  bool random_steer = false;
  bool png = false;
  bool force = false;

  // Throws std::invalid_argument before any work is done.
  void validate() const;
  std::map<std::string, std::string> to_map() const;
};

// "a:s:b" is a..b inclusive with stride s, "a:b" stride 1, "i,j,k" a list,
// "all" every image. Ids must be below `count`.
std::vector<std::size_t> parse_selection(const std::string& spec, std::size_t count);

struct SimulateOutput {
  std::filesystem::path dir;
  double measured_snr = 0.0;
};
SimulateOutput cmd_simulate(const RunConfig& cfg);

struct EstimateOutput {
  std::filesystem::path report_path;
  std::filesystem::path blocks_path;
  EstimationReport report;
};
EstimateOutput cmd_estimate(const RunConfig& cfg);

std::vector<std::filesystem::path> cmd_denoise(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_eigenimages(const RunConfig& cfg);

struct BenchRow {
  int groups = 0;
  double t_fast = 0.0;
  double t_cg = 0.0;
};
std::vector<BenchRow> cmd_bench(const RunConfig& cfg);

// Line plot of t_fast and t_cg against M on log-log axes.
void plot_bench(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

}  // namespace scov::cli
