#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scov/block_diag.h"
#include "scov/covariance.h"
#include "scov/image.h"
#include "scov/metrics.h"
#include "scov/simulate.h"

namespace scov {

// MRC2014 mode 2 stack: nz sections of nx x ny float32, x fastest.
struct MrcStack {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  float pixel_size = 1.0f;  // Angstrom
  std::vector<float> data;

  static MrcStack from_images(std::span<const Image> images);
  std::vector<Image> to_images() const;
};

void write_mrc(const MrcStack& stack, const std::filesystem::path& path);
// Raises UnsupportedModeError, ShapeError or TruncatedFileError.
MrcStack read_mrc(const std::filesystem::path& path);

constexpr int kReportVersion = 1;
constexpr std::uint32_t kBlockFileVersion = 1;

// JSON with every double at round-trip precision. NaN or infinite values
// are rejected.
void save_report(const EstimationReport& report, const std::filesystem::path& path);
// Raises SchemaError naming a missing field, VersionError on a version
// mismatch and BasisMismatchError when `basis` is given and differs.
EstimationReport load_report(const std::filesystem::path& path, const BasisSpec* basis = nullptr);

// "FBCOVBLK", u32 version, u64 basis hash, u32 block count, then per block
// i32 n, u32 k_max and k_max^2 row-major (f32 re, f32 im) pairs.
void write_blocks(const BlockDiagHermitian& C, const std::filesystem::path& path);
BlockDiagHermitian read_blocks(const std::filesystem::path& path, const BasisSpec& basis);

// metric,index,value,count
void write_metrics_csv(std::span<const MetricRow> rows, const std::filesystem::path& path);
// Header row, then one line per row; doubles at round-trip precision.
void write_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
               const std::filesystem::path& path);

// 8-bit grayscale, linearly stretched from min to max. Preview only.
void write_png_preview(const Image& image, const std::filesystem::path& path);
// Raw 8-bit RGB buffer, row-major from the top-left corner.
void write_png_rgb(int width, int height, std::span<const std::uint8_t> rgb,
                   const std::filesystem::path& path);

// JSON array of CTF records keyed by defocus-group id:
// [{"group": 0, "defocus_um": ..., "voltage_kv": ..., "cs_mm": ...,
//   "amplitude_contrast": ..., "pixel_size_a": ..., "b_factor_a2": ...}, ...]
void write_ctf_params(std::span<const CtfParams> ctfs, const std::filesystem::path& path);
// Records may appear in any order; group ids must be dense 0..M-1.
std::vector<CtfParams> read_ctf_params(const std::filesystem::path& path);

// Dataset directory: images.mrc, clean.mrc (when present) and dataset.json
// with the group map, CTFs, noise model, seed and `config`.
void save_dataset(const Dataset& d, const std::filesystem::path& dir,
                  const std::map<std::string, std::string>& config = {});
Dataset load_dataset(const std::filesystem::path& dir);
// The `config` object of a dataset sidecar.
std::map<std::string, std::string> load_dataset_config(const std::filesystem::path& dir);

}  // namespace scov
