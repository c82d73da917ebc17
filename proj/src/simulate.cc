#include "scov/simulate.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/LU>

#include "scov/parallel.h"
#include "scov/rng.h"

namespace scov {
namespace {

double disk_energy(const Image& img) { return img.data.squaredNorm(); }

double trilinear(const Volume& v, double x, double y, double z) {
  const double h = 0.5 * (v.size - 1);
  const double fx = x + h, fy = y + h, fz = z + h;
  const int i0 = static_cast<int>(std::floor(fx));
  const int j0 = static_cast<int>(std::floor(fy));
  const int k0 = static_cast<int>(std::floor(fz));
  const double tx = fx - i0, ty = fy - j0, tz = fz - k0;
  auto sample = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= v.size || j >= v.size || k >= v.size) return 0.0;
    return v.at(i, j, k);
  };
  double acc = 0.0;
  for (int dk = 0; dk < 2; ++dk) {
    const double wz = dk ? tz : 1.0 - tz;
    for (int dj = 0; dj < 2; ++dj) {
      const double wy = dj ? ty : 1.0 - ty;
      for (int di = 0; di < 2; ++di) {
        const double wx = di ? tx : 1.0 - tx;
        const double w = wx * wy * wz;
        if (w != 0.0) acc += w * sample(i0 + di, j0 + dj, k0 + dk);
      }
    }
  }
  return acc;
}

// Conjugate-symmetric coefficient noise with E|e_j|^2 = sigma2 psd_j.
CoeffVec draw_noise(const BasisSpec& basis, const Eigen::VectorXd& psd, double sigma2,
                    CounterRng& rng) {
  CoeffVec e = CoeffVec::Zero(static_cast<Eigen::Index>(basis.size()));
  const auto& idx = basis.indices();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j].n < 0) continue;
    const double var = sigma2 * psd[j];
    if (idx[j].n == 0) {
      e[j] = Complex(std::sqrt(var) * rng.normal(), 0.0);
    } else {
      const double s = std::sqrt(0.5 * var);
      const double re = s * rng.normal();
      const double im = s * rng.normal();
      e[j] = Complex(re, im);
      e[basis.partner(j)] = Complex(re, -im);
    }
  }
  return e;
}

}  // namespace

Volume::Volume(int L, double voxel_size_a)
    : size(L), voxel_size(voxel_size_a), voxels(static_cast<std::size_t>(L) * L * L, 0.0) {}

double Volume::sum() const {
  double s = 0.0;
  for (double x : voxels) s += x;
  return s;
}

std::vector<Blob> phantom_blobs(int L, std::uint64_t seed, double amplitude_scale) {
  if (L < 8) throw std::invalid_argument("phantom needs L >= 8");
  CounterRng rng(seed, stream_id(StreamPurpose::kPhantom, 0));
  const double sigma_lo = 0.04 * L, sigma_hi = 0.10 * L;
  const double radius = 0.8 * L / 2.0 - 2.0 * sigma_hi;
  std::vector<Blob> blobs(kPhantomBlobs);
  for (auto& b : blobs) {
    for (int a = 0; a < 3; ++a) b.sigma[a] = sigma_lo + (sigma_hi - sigma_lo) * rng.uniform();
    b.amplitude = amplitude_scale * (0.5 + rng.uniform());
    b.orientation = random_rotation(rng);
    // Uniform point in the ball: Gaussian direction, radius ~ u^(1/3).
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    b.center = dir * radius * std::cbrt(rng.uniform());
  }
  return blobs;
}

double blob_density(const std::vector<Blob>& blobs, const Eigen::Vector3d& x) {
  double total = 0.0;
  for (const auto& b : blobs) {
    const Eigen::Vector3d local = b.orientation.transpose() * (x - b.center);
    const double q = (local.array() / b.sigma.array()).square().sum();
    total += b.amplitude * std::exp(-0.5 * q);
  }
  return total;
}

Volume make_phantom(int L, std::uint64_t seed, double amplitude_scale, double voxel_size_a) {
  const auto blobs = phantom_blobs(L, seed, amplitude_scale);
  Volume v(L, voxel_size_a);
  const double h = 0.5 * (L - 1);
  for (int k = 0; k < L; ++k)
    for (int j = 0; j < L; ++j)
      for (int i = 0; i < L; ++i) v.at(i, j, k) = blob_density(blobs, {i - h, j - h, k - h});
  return v;
}

Image project(const Volume& v, const Eigen::Matrix3d& R) {
  if (std::abs(R.determinant() - 1.0) > 1e-12 ||
      !(R * R.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-12))
    throw std::invalid_argument("projection needs a proper rotation");
  const int L = v.size;
  const double h = 0.5 * (L - 1);
  Image out(L, v.voxel_size);
  const Eigen::Matrix3d Rt = R.transpose();
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      double acc = 0.0;
      for (int k = 0; k < L; ++k) {
        const Eigen::Vector3d p = Rt * Eigen::Vector3d(i - h, j - h, k - h);
        acc += trilinear(v, p.x(), p.y(), p.z());
      }
      out(i, j) = acc * v.voxel_size;
    }
  }
  return out;
}

double NoiseModel::psd(double r, int L) const {
  if (kind == NoiseKind::kWhite) return 1.0;
  return 1.0 / (r * L / 20.0 + 1.0);
}

Eigen::VectorXd NoiseModel::psd_weights(const BasisSpec& basis) const {
  const int L = basis.grid_size();
  const double nyquist = std::numbers::pi * L / 2.0;
  Eigen::VectorXd w(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) w[j] = psd(basis.lambdas()[j] / nyquist, L);
  return w;
}

void Dataset::validate() const {
  if (group_of.size() != images.size()) throw std::invalid_argument("group map does not cover every image");
  for (int g : group_of)
    if (g < 0 || g >= num_groups()) throw std::invalid_argument("unknown group id " + std::to_string(g));
  if (!clean_images.empty() && clean_images.size() != images.size())
    throw std::invalid_argument("clean images do not match images");
}

double default_pixel_size(int L) { return 0.832 * 512.0 / L; }

Eigen::Matrix3d image_rotation(std::uint64_t seed, std::size_t index) {
  CounterRng rng(seed, stream_id(StreamPurpose::kRotation, index));
  return random_rotation(rng);
}

Dataset make_dataset(const Volume& v, const BasisSpec& basis, const SimulationOptions& o) {
  const int L = basis.grid_size();
  if (v.size != L) throw std::invalid_argument("volume and basis sizes differ");
  if (o.num_images < 1 || o.num_groups < 1 || o.num_groups > o.num_images)
    throw std::invalid_argument("need 1 <= num_groups <= num_images");
  if (!(o.snr > 0.0)) throw std::invalid_argument("snr must be positive");

  const auto N = static_cast<std::size_t>(o.num_images);
  const int M = o.num_groups;
  Dataset d;
  d.grid_size = L;
  d.pixel_size = default_pixel_size(L);
  d.seed = o.seed;
  d.snr = o.snr;
  d.noise.kind = o.noise;
  d.group_of.resize(N);
  for (std::size_t i = 0; i < N; ++i) d.group_of[i] = static_cast<int>(i % M);
  for (int g = 0; g < M; ++g) {
    CtfParams p;
    p.defocus_um = M == 1 ? o.defocus_min_um
                          : o.defocus_min_um + (o.defocus_max_um - o.defocus_min_um) * g / (M - 1);
    p.pixel_size_a = d.pixel_size;
    p.model = o.ctf_model;
    d.ctfs.push_back(p);
  }
  std::vector<RadialWeightVec> H;
  for (const auto& p : d.ctfs) H.push_back(ctf_to_weights(p, basis));

  // Clean projections and filtered signal energy.
  std::vector<CoeffVec> filtered(N);
  std::vector<double> signal(N, 0.0);
  d.clean_images.resize(N);
  parallel_for(N, o.threads, [&](std::size_t i) {
    CoeffVec F = expand(project(v, image_rotation(o.seed, i)), basis);
    if (o.random_steer) {
      CounterRng rng(o.seed, stream_id(StreamPurpose::kSteer, i));
      F = steer(F, basis, 2.0 * std::numbers::pi * rng.uniform());
    }
    d.clean_images[i] = synthesize(F, basis);
    d.clean_images[i].pixel_size = d.pixel_size;
    filtered[i] = radial_convolve(F, H[d.group_of[i]]);
    signal[i] = disk_energy(synthesize(filtered[i], basis));
  });
  double total_signal = 0.0;
  for (double s : signal) total_signal += s;

  const Eigen::VectorXd psd = d.noise.psd_weights(basis);
  double noise_energy_per_unit = 0.0;  // E||synth(e)||^2 for sigma2 = 1
  for (std::size_t j = 0; j < basis.size(); ++j) noise_energy_per_unit += psd[j] * basis.column_energy()[j];
  const bool noiseless = std::isinf(o.snr);
  d.noise.sigma2 = noiseless ? 0.0 : total_signal / (static_cast<double>(N) * o.snr * noise_energy_per_unit);

  std::vector<double> noise_energy(N, 0.0);
  d.images.resize(N);
  parallel_for(N, o.threads, [&](std::size_t i) {
    if (noiseless) {
      d.images[i] = synthesize(filtered[i], basis);
    } else {
      CounterRng rng(o.seed, stream_id(StreamPurpose::kNoise, i));
      const CoeffVec e = draw_noise(basis, psd, d.noise.sigma2, rng);
      const Image noise = synthesize(e, basis);
      noise_energy[i] = disk_energy(noise);
      d.images[i] = synthesize(filtered[i], basis);
      d.images[i].data += noise.data;
    }
    d.images[i].pixel_size = d.pixel_size;
  });
  double total_noise = 0.0;
  for (double s : noise_energy) total_noise += s;
  d.measured_snr = noiseless ? std::numeric_limits<double>::infinity() : total_signal / total_noise;
  return d;
}

RadialWeightVec whitening_weights(const NoiseModel& noise, const BasisSpec& basis) {
  if (!(noise.sigma2 > 0.0)) throw std::invalid_argument("cannot whiten noise with zero variance");
  const Eigen::VectorXd psd = noise.psd_weights(basis);
  if ((psd.array() <= 0.0).any()) throw std::invalid_argument("noise PSD has zeros");
  return (psd.array() * noise.sigma2).sqrt().inverse().matrix();
}

std::vector<RadialWeightVec> effective_weights(const Dataset& d, const BasisSpec& basis) {
  std::vector<RadialWeightVec> out;
  std::optional<RadialWeightVec> filter;
  if (d.whitened_from) filter = whitening_weights(*d.whitened_from, basis);
  for (const auto& p : d.ctfs) {
    RadialWeightVec w = ctf_to_weights(p, basis);
    if (filter) w = (w.array() * filter->array()).matrix();
    out.push_back(std::move(w));
  }
  return out;
}

ImageWeights image_weights(const Dataset& d, const BasisSpec& basis) {
  d.validate();
  ImageWeights w;
  w.groups = effective_weights(d, basis);
  w.group_of = d.group_of;
  return w;
}

Dataset whiten(const Dataset& d, const BasisSpec& basis) {
  d.validate();
  if (d.whitened_from && d.noise.kind == NoiseKind::kWhite && d.noise.sigma2 == 1.0) return d;
  const RadialWeightVec w = whitening_weights(d.noise, basis);
  Dataset out = d;
  out.whitened_from = d.noise;
  out.noise = NoiseModel{NoiseKind::kWhite, 1.0};
  // Unit-variance white noise needs no filtering.
  if ((w.array() == 1.0).all()) return out;
  for (auto& img : out.images) {
    const double px = img.pixel_size;
    img = synthesize(radial_convolve(expand(img, basis), w), basis);
    img.pixel_size = px;
  }
  return out;
}

double estimate_noise_variance(std::span<const Image> images) {
  if (images.size() < 2) throw std::invalid_argument("need at least two images");
  const int L = images.front().size();
  std::vector<double> variances;
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      const double x = 2.0 * i - L + 1, y = 2.0 * j - L + 1;
      if (x * x + y * y <= static_cast<double>(L) * L) continue;
      double mean = 0.0, sq = 0.0;
      for (const auto& img : images) mean += img(i, j);
      mean /= static_cast<double>(images.size());
      for (const auto& img : images) sq += (img(i, j) - mean) * (img(i, j) - mean);
      variances.push_back(sq / static_cast<double>(images.size() - 1));
    }
  }
  if (variances.empty()) throw std::invalid_argument("grid has no pixels outside the disk");
  auto mid = variances.begin() + static_cast<std::ptrdiff_t>(variances.size() / 2);
  std::nth_element(variances.begin(), mid, variances.end());
  // White pixel noise s^2 maps to coefficient variance s^2 (2/L)^2.
  return *mid * 4.0 / (static_cast<double>(L) * L);
}

}  // namespace scov
