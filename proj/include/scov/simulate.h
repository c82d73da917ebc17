#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scov/covariance.h"
#include "scov/ctf.h"
#include "scov/fb_basis.h"
#include "scov/image.h"

namespace scov {

// Cubic voxel grid, x fastest. Voxel (i, j, k) sits at the centered
// coordinate (i - (L-1)/2, j - (L-1)/2, k - (L-1)/2) in voxel units.
struct Volume {
  int size = 0;
  double voxel_size = 1.0;  // Angstrom
  std::vector<double> voxels;

  Volume() = default;
  Volume(int L, double voxel_size_a);
  double& at(int i, int j, int k) { return voxels[(static_cast<std::size_t>(k) * size + j) * size + i]; }
  double at(int i, int j, int k) const {
    return voxels[(static_cast<std::size_t>(k) * size + j) * size + i];
  }
  double sum() const;
};

// One anisotropic Gaussian: amplitude * exp(-1/2 (x-c)^T R diag(sigma)^-2 R^T (x-c)).
struct Blob {
  Eigen::Vector3d center;
  Eigen::Vector3d sigma;
  Eigen::Matrix3d orientation;
  double amplitude = 1.0;
};

constexpr int kPhantomBlobs = 12;

// Seeded blob parameters: sigmas in [0.04, 0.10] L, amplitudes in
// [0.5, 1.5] times amplitude_scale, centers uniform in the ball of radius
// 0.8 L/2 - 2 max(sigma).
std::vector<Blob> phantom_blobs(int L, std::uint64_t seed, double amplitude_scale = 1.0);
double blob_density(const std::vector<Blob>& blobs, const Eigen::Vector3d& x);
Volume make_phantom(int L, std::uint64_t seed, double amplitude_scale = 1.0, double voxel_size_a = 1.0);

// Line integral along x3 of v(R^T x): trilinear sampling at every voxel
// center of the rotated frame, summed and scaled by voxel_size.
// Out-of-grid samples read 0.
Image project(const Volume& v, const Eigen::Matrix3d& R);

enum class NoiseKind { kWhite, kColored };

struct NoiseModel {
  NoiseKind kind = NoiseKind::kColored;
  // Coefficient-domain variance scale: E|e_nk|^2 = sigma2 * psd(r_nk).
  double sigma2 = 1.0;

  // r in [0, 1] is the radial frequency relative to lambda = pi L / 2.
  // Colored: 1 / (r L / 20 + 1).
  double psd(double r, int L) const;
  // psd at every basis index.
  Eigen::VectorXd psd_weights(const BasisSpec& basis) const;
};

struct Dataset {
  int grid_size = 0;
  double pixel_size = 1.0;
  std::vector<Image> images;
  std::vector<int> group_of;
  std::vector<CtfParams> ctfs;
  NoiseModel noise;
  // Set by whiten(): the model the images were whitened against.
  std::optional<NoiseModel> whitened_from;
  // Clean (pre-CTF) images, band limited to the basis; simulation only.
  std::vector<Image> clean_images;

  std::uint64_t seed = 0;
  double snr = std::numeric_limits<double>::infinity();
  double measured_snr = std::numeric_limits<double>::infinity();

  std::size_t size() const { return images.size(); }
  int num_groups() const { return static_cast<int>(ctfs.size()); }
  // Throws std::invalid_argument on a broken group map.
  void validate() const;
};

struct SimulationOptions {
  int num_images = 1000;
  int num_groups = 10;
  // Infinity gives noiseless images.
  double snr = 0.1;
  NoiseKind noise = NoiseKind::kColored;
  std::uint64_t seed = 0;
  double defocus_min_um = 1.0;
  double defocus_max_um = 4.0;
  CtfModel ctf_model = CtfModel::kWeakPhase;
  // Extra in-plane rotation of every clean coefficient vector by a uniform
  // random angle, applied before the CTF and the noise.
  bool random_steer = false;
  int threads = 1;
};

// Pixel size (Angstrom) used when none is given: 0.832 A at L = 512,
// scaled with the grid.
double default_pixel_size(int L);

// Uniform rotation of image i for a given seed.
Eigen::Matrix3d image_rotation(std::uint64_t seed, std::size_t index);

// Simulated projections grouped by i mod M with defocus linearly spaced on
// [defocus_min, defocus_max]. The CTF and noise are applied in coefficient
// space; the noise scale makes sum ||clean filtered||^2 / E sum ||noise||^2
// over the disk equal to snr. Output bytes do not depend on `threads`.
Dataset make_dataset(const Volume& v, const BasisSpec& basis, const SimulationOptions& options);

// CTF weights per group, times the whitening filter when the dataset is
// whitened.
std::vector<RadialWeightVec> effective_weights(const Dataset& d, const BasisSpec& basis);
ImageWeights image_weights(const Dataset& d, const BasisSpec& basis);

// Multiplies every image by 1 / (sigma sqrt(psd)) in coefficient space and
// records the filter so effective_weights() rescales the CTFs. The result
// has white noise with sigma2 = 1.
Dataset whiten(const Dataset& d, const BasisSpec& basis);

// Whitening filter 1 / (sigma sqrt(psd)) per basis index.
RadialWeightVec whitening_weights(const NoiseModel& noise, const BasisSpec& basis);

// Coefficient-domain noise variance of unfiltered data from the median
// per-pixel variance of the corner region outside the disk. For external
// data only: simulated images carry no noise outside the disk.
double estimate_noise_variance(std::span<const Image> images);

}  // namespace scov
