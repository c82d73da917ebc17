#include "scov/fb_basis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "scov/bessel.h"
#include "scov/errors.h"
#include "scov/parallel.h"

namespace scov {
namespace detail {

struct BasisData {
  int grid_size = 0;
  double band_ratio = 1.0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double pixel_size = 1.0;

  std::vector<BasisIndex> indices;
  std::vector<double> lambdas;
  std::vector<double> normalizers;
  std::vector<std::vector<std::size_t>> blocks;  // n >= 0
  std::vector<std::size_t> group_offset;         // first slot of each |n|
  std::vector<std::size_t> partner;

  std::vector<int> disk_pixels;
  // Real synthesis matrix (disk pixels x |I|); column j is psi_0k for n = 0,
  // 2 Re psi_nk for n > 0 and -2 Im psi_|n|k for n < 0.
  Eigen::MatrixXd design;
  // Regularized left inverse (|I| x disk pixels).
  Eigen::MatrixXd left_inverse;
  std::vector<double> column_energy;

  double condition = 0.0;
  double expansion_bound = 0.0;
  std::uint64_t hash = 0;
};

}  // namespace detail

namespace {

constexpr int kPowerIterations = 500;
constexpr double kRayleighTolerance = 1e-9;

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T>
std::uint64_t fnv1a_value(std::uint64_t h, T value) {
  return fnv1a(h, &value, sizeof(T));
}

// Largest eigenvalue of a symmetric positive semidefinite matrix.
double top_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(sym.rows(), 1.0, 2.0).normalized();
  double estimate = 0.0;
  for (int iter = 0; iter < kPowerIterations; ++iter) {
    Eigen::VectorXd w = sym.selfadjointView<Eigen::Lower>() * v;
    const double next = v.dot(w);
    v = w.normalized();
    if (std::abs(next - estimate) <= kRayleighTolerance * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

// Smallest eigenvalue by inverse iteration on a Cholesky factorization.
double bottom_eigenvalue(const Eigen::MatrixXd& sym, const Eigen::LLT<Eigen::MatrixXd>& llt) {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(sym.rows(), 2.0, 1.0).normalized();
  double estimate = 0.0;
  for (int iter = 0; iter < kPowerIterations; ++iter) {
    v = llt.solve(v).normalized();
    const double next = v.dot(sym.selfadjointView<Eigen::Lower>() * v);
    if (std::abs(next - estimate) <= kRayleighTolerance * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

void build_index_set(detail::BasisData& d, const RootTable& roots) {
  const int max_n = roots.max_order();
  d.blocks.assign(max_n + 1, {});
  d.group_offset.assign(max_n + 2, 0);
  for (int m = 0; m <= max_n; ++m) {
    d.group_offset[m] = d.indices.size();
    const auto& r = roots.roots[m];
    for (std::size_t k = 1; k <= r.size(); ++k) {
      const double lambda = r[k - 1];
      const double gamma = 1.0 / (std::sqrt(std::numbers::pi) * std::abs(bessel_j(m + 1, lambda)));
      const int signs = m == 0 ? 1 : 2;
      for (int s = 0; s < signs; ++s) {
        const int n = s == 0 ? m : -m;
        if (s == 0) d.blocks[m].push_back(d.indices.size());
        d.indices.push_back({n, static_cast<int>(k)});
        d.lambdas.push_back(lambda);
        d.normalizers.push_back(gamma);
      }
    }
  }
  d.group_offset[max_n + 1] = d.indices.size();
  d.partner.resize(d.indices.size());
  for (std::size_t p = 0; p < d.indices.size(); ++p) {
    const int n = d.indices[p].n;
    d.partner[p] = n == 0 ? p : (n > 0 ? p + 1 : p - 1);
  }
}

void build_design(detail::BasisData& d) {
  const int L = d.grid_size;
  const std::size_t dim = d.indices.size();
  // Squared radius in units of (1/L)^2 is an integer; radial profiles are
  // shared across the pixels of each ring.
  std::map<long, std::size_t> radius_slot;
  std::vector<long> radius_keys;
  struct PixelGeom {
    std::size_t slot;
    double angle;
  };
  std::vector<PixelGeom> geom;
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      const long a = 2L * i - L + 1;
      const long b = 2L * j - L + 1;
      const long key = a * a + b * b;
      if (key > static_cast<long>(L) * L) continue;
      auto [it, inserted] = radius_slot.emplace(key, radius_keys.size());
      if (inserted) radius_keys.push_back(key);
      d.disk_pixels.push_back(i + j * L);
      geom.push_back({it->second, std::atan2(static_cast<double>(b), static_cast<double>(a))});
    }
  }

  const std::size_t num_radii = radius_keys.size();
  Eigen::MatrixXd radial(num_radii, dim);
  for (std::size_t u = 0; u < num_radii; ++u) {
    const double r = std::sqrt(static_cast<double>(radius_keys[u])) / L;
    for (std::size_t p = 0; p < dim; ++p) {
      const int n = d.indices[p].n;
      if (n < 0) {
        radial(u, p) = radial(u, p - 1);
        continue;
      }
      radial(u, p) = d.normalizers[p] * bessel_j(n, d.lambdas[p] * r);
    }
  }

  const std::size_t num_pixels = d.disk_pixels.size();
  d.design.resize(num_pixels, dim);
  for (std::size_t q = 0; q < num_pixels; ++q) {
    const auto& g = geom[q];
    for (std::size_t p = 0; p < dim; ++p) {
      const int n = d.indices[p].n;
      const double b = radial(g.slot, p);
      if (n == 0) {
        d.design(q, p) = b;
      } else if (n > 0) {
        d.design(q, p) = 2.0 * b * std::cos(n * g.angle);
      } else {
        d.design(q, p) = -2.0 * b * std::sin(-n * g.angle);
      }
    }
  }

  d.column_energy.resize(dim);
  for (std::size_t p = 0; p < dim; ++p) {
    const int n = d.indices[p].n;
    if (n == 0) {
      d.column_energy[p] = d.design.col(p).squaredNorm();
    } else {
      // |psi_nk|^2 = (gamma J)^2 at every pixel, for both signs of n.
      const std::size_t pos = n > 0 ? p : p - 1;
      double sum = 0.0;
      for (std::size_t q = 0; q < num_pixels; ++q) {
        const double b = radial(geom[q].slot, pos);
        sum += b * b;
      }
      d.column_energy[p] = sum;
    }
  }
}

void build_left_inverse(detail::BasisData& d, double tikhonov, double max_condition) {
  const auto dim = static_cast<Eigen::Index>(d.indices.size());
  const auto num_pixels = static_cast<Eigen::Index>(d.disk_pixels.size());
  auto rank_error = [&](double cond) {
    std::ostringstream msg;
    msg << "synthesis matrix is rank deficient for L=" << d.grid_size
        << " and lambda_max=" << d.lambda_max << " (" << dim << " basis functions, "
        << num_pixels << " disk pixels, condition " << cond
        << "); use a smaller band_ratio";
    return NumericalError(msg.str());
  };
  if (dim > num_pixels) throw rank_error(std::numeric_limits<double>::infinity());

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(d.design.transpose());
  const double top = top_eigenvalue(gram);
  const double eps = tikhonov * top;
  Eigen::MatrixXd regularized = gram;
  regularized.diagonal().array() += eps;
  Eigen::LLT<Eigen::MatrixXd> llt(regularized.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw rank_error(std::numeric_limits<double>::infinity());
  const double bottom = std::max(bottom_eigenvalue(gram, llt), 0.0);
  const double cond = bottom > 0.0 ? std::sqrt(top / bottom)
                                   : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition)) throw rank_error(cond);

  d.condition = cond;
  const double s_min = std::sqrt(bottom);
  // Complex coefficients carry each n != 0 real parameter twice.
  d.expansion_bound = std::sqrt(2.0) * s_min / (bottom + eps);
  d.left_inverse = llt.solve(d.design.transpose());
}

Eigen::VectorXd to_real_params(const CoeffVec& alpha, const detail::BasisData& d) {
  const std::size_t dim = d.indices.size();
  Eigen::VectorXd theta(dim);
  for (std::size_t p = 0; p < dim; ++p) {
    const int n = d.indices[p].n;
    if (n == 0) {
      theta[p] = alpha[p].real();
    } else if (n > 0) {
      const Complex c = alpha[p] + std::conj(alpha[p + 1]);
      theta[p] = 0.5 * c.real();
      theta[p + 1] = 0.5 * c.imag();
    }
  }
  return theta;
}

CoeffVec from_real_params(const Eigen::Ref<const Eigen::VectorXd>& theta,
                          const detail::BasisData& d) {
  const std::size_t dim = d.indices.size();
  CoeffVec alpha(dim);
  for (std::size_t p = 0; p < dim; ++p) {
    const int n = d.indices[p].n;
    if (n == 0) {
      alpha[p] = Complex(theta[p], 0.0);
    } else if (n > 0) {
      alpha[p] = Complex(theta[p], theta[p + 1]);
      alpha[p + 1] = Complex(theta[p], -theta[p + 1]);
    }
  }
  return alpha;
}

void check_image(const Image& g, const detail::BasisData& d) {
  if (g.size() != d.grid_size || g.data.cols() != d.grid_size) {
    std::ostringstream msg;
    msg << "image is " << g.data.rows() << "x" << g.data.cols() << ", basis expects "
        << d.grid_size << "x" << d.grid_size;
    throw std::invalid_argument(msg.str());
  }
}

void check_coeffs(Eigen::Index size, const detail::BasisData& d) {
  if (static_cast<std::size_t>(size) != d.indices.size()) {
    std::ostringstream msg;
    msg << "coefficient vector has " << size << " entries, basis has " << d.indices.size();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

const detail::BasisData& BasisSpec::data() const { return *data_; }
int BasisSpec::grid_size() const { return data_->grid_size; }
double BasisSpec::band_ratio() const { return data_->band_ratio; }
double BasisSpec::lambda_max() const { return data_->lambda_max; }
double BasisSpec::lambda_min() const { return data_->lambda_min; }
double BasisSpec::pixel_size() const { return data_->pixel_size; }
std::size_t BasisSpec::size() const { return data_->indices.size(); }
const std::vector<BasisIndex>& BasisSpec::indices() const { return data_->indices; }
const std::vector<double>& BasisSpec::lambdas() const { return data_->lambdas; }
const std::vector<double>& BasisSpec::normalizers() const { return data_->normalizers; }
int BasisSpec::max_order() const { return static_cast<int>(data_->blocks.size()) - 1; }

int BasisSpec::block_size(int n) const {
  const int m = std::abs(n);
  if (m > max_order()) return 0;
  return static_cast<int>(data_->blocks[m].size());
}

const std::vector<std::size_t>& BasisSpec::block_positions(int n) const {
  if (n < 0 || n > max_order()) throw std::out_of_range("block_positions: no block for n");
  return data_->blocks[n];
}

std::size_t BasisSpec::index_of(int n, int k) const {
  const int m = std::abs(n);
  if (m > max_order() || k < 1 || k > block_size(m)) {
    std::ostringstream msg;
    msg << "index (" << n << "," << k << ") is not in the basis";
    throw std::out_of_range(msg.str());
  }
  const std::size_t pos = data_->blocks[m][k - 1];
  return n < 0 ? pos + 1 : pos;
}

std::size_t BasisSpec::partner(std::size_t position) const { return data_->partner.at(position); }
std::uint64_t BasisSpec::hash() const { return data_->hash; }
double BasisSpec::condition_number() const { return data_->condition; }
double BasisSpec::expansion_bound() const { return data_->expansion_bound; }
const std::vector<double>& BasisSpec::column_energy() const { return data_->column_energy; }
const std::vector<int>& BasisSpec::disk_pixels() const { return data_->disk_pixels; }

double grid_coordinate(int i, int L) { return ((i - L / 2) + 0.5) * (2.0 / L); }

BasisSpec build_basis(int L, double band_ratio) {
  if (!(band_ratio > 0.0 && band_ratio <= 1.0)) {
    throw std::invalid_argument("build_basis: band_ratio must lie in (0, 1]");
  }
  BasisOptions options;
  options.band_ratio = band_ratio;
  return build_basis(L, options);
}

BasisSpec build_basis(int L, const BasisOptions& options) {
  if (L < 4 || L % 2 != 0) throw std::invalid_argument("build_basis: L must be even and >= 4");
  if (!(options.band_ratio > 0.0)) throw std::invalid_argument("build_basis: band_ratio <= 0");
  if (!(options.pixel_size > 0.0)) throw std::invalid_argument("build_basis: pixel_size <= 0");
  if (!(options.lambda_min >= 0.0)) throw std::invalid_argument("build_basis: lambda_min < 0");

  auto d = std::make_shared<detail::BasisData>();
  d->grid_size = L;
  d->band_ratio = options.band_ratio;
  d->lambda_max = options.band_ratio * std::numbers::pi * L / 2.0;
  d->lambda_min = options.lambda_min;
  d->pixel_size = options.pixel_size;

  build_index_set(*d, compute_bessel_roots(kAutoOrder, d->lambda_max));
  build_design(*d);
  build_left_inverse(*d, options.tikhonov, options.max_condition);

  std::uint64_t h = 0xcbf29ce484222325ull;
  const char tag[] = "scov-fb-v1";
  h = fnv1a(h, tag, sizeof(tag) - 1);
  h = fnv1a_value<std::int64_t>(h, L);
  h = fnv1a_value<double>(h, d->band_ratio);
  h = fnv1a_value<double>(h, d->lambda_min);
  h = fnv1a_value<std::uint64_t>(h, d->indices.size());
  for (const auto& idx : d->indices) {
    h = fnv1a_value<std::int32_t>(h, idx.n);
    h = fnv1a_value<std::int32_t>(h, idx.k);
  }
  d->hash = h;

  BasisSpec spec;
  spec.data_ = std::move(d);
  return spec;
}

Image synthesize(const CoeffVec& alpha, const BasisSpec& basis) {
  const auto& d = basis.data();
  check_coeffs(alpha.size(), d);
  const Eigen::VectorXd values = d.design * to_real_params(alpha, d);
  Image out(d.grid_size, d.pixel_size);
  double* px = out.data.data();
  for (std::size_t q = 0; q < d.disk_pixels.size(); ++q) px[d.disk_pixels[q]] = values[q];
  return out;
}

CoeffVec expand(const Image& g, const BasisSpec& basis) {
  const auto& d = basis.data();
  check_image(g, d);
  Eigen::VectorXd disk(d.disk_pixels.size());
  const double* px = g.data.data();
  for (std::size_t q = 0; q < d.disk_pixels.size(); ++q) disk[q] = px[d.disk_pixels[q]];
  return from_real_params(d.left_inverse * disk, d);
}

std::vector<CoeffVec> expand_batch(std::span<const Image> images, const BasisSpec& basis,
                                   int threads) {
  const auto& d = basis.data();
  // Fixed chunking keeps every GEMM shape, and so every bit of the result,
  // independent of the thread count.
  constexpr std::size_t kChunk = 64;
  const std::size_t count = images.size();
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<CoeffVec> out(count);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(count, begin + kChunk);
    Eigen::MatrixXd stack(d.disk_pixels.size(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) {
      check_image(images[i], d);
      const double* px = images[i].data.data();
      for (std::size_t q = 0; q < d.disk_pixels.size(); ++q) {
        stack(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i - begin)) =
            px[d.disk_pixels[q]];
      }
    }
    const Eigen::MatrixXd theta = d.left_inverse * stack;
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = from_real_params(theta.col(static_cast<Eigen::Index>(i - begin)), d);
    }
  });
  return out;
}

CoeffVec analyze(const Image& g, const BasisSpec& basis) {
  const auto& d = basis.data();
  check_image(g, d);
  Eigen::VectorXd disk(d.disk_pixels.size());
  const double* px = g.data.data();
  for (std::size_t q = 0; q < d.disk_pixels.size(); ++q) disk[q] = px[d.disk_pixels[q]];
  const Eigen::VectorXd u = d.design.transpose() * disk;
  CoeffVec out(d.indices.size());
  for (std::size_t p = 0; p < d.indices.size(); ++p) {
    const int n = d.indices[p].n;
    if (n == 0) {
      out[p] = Complex(u[p], 0.0);
    } else if (n > 0) {
      out[p] = 0.5 * Complex(u[p], u[p + 1]);
      out[p + 1] = 0.5 * Complex(u[p], -u[p + 1]);
    }
  }
  return out;
}

Complex evaluate(const CoeffVec& alpha, const BasisSpec& basis, double x, double y) {
  const auto& d = basis.data();
  check_coeffs(alpha.size(), d);
  const double r = std::hypot(x, y);
  if (r > 1.0) return {0.0, 0.0};
  const double theta = std::atan2(y, x);
  Complex sum{0.0, 0.0};
  for (std::size_t p = 0; p < d.indices.size(); ++p) {
    const int n = d.indices[p].n;
    const double radial = d.normalizers[p] * bessel_j(std::abs(n), d.lambdas[p] * r);
    sum += alpha[p] * radial * std::polar(1.0, n * theta);
  }
  return sum;
}

CoeffVec steer(const CoeffVec& alpha, const BasisSpec& basis, double phi) {
  const auto& d = basis.data();
  check_coeffs(alpha.size(), d);
  const double reduced = std::remainder(phi, 2.0 * std::numbers::pi);
  CoeffVec out(alpha.size());
  for (std::size_t p = 0; p < d.indices.size(); ++p) {
    const int n = d.indices[p].n;
    out[p] = n == 0 ? alpha[p] : alpha[p] * std::polar(1.0, n * reduced);
  }
  return out;
}

CoeffVec radial_convolve(const CoeffVec& alpha, const RadialWeightVec& weights) {
  if (alpha.size() != weights.size()) {
    std::ostringstream msg;
    msg << "radial_convolve: " << alpha.size() << " coefficients vs " << weights.size()
        << " weights";
    throw std::invalid_argument(msg.str());
  }
  return alpha.cwiseProduct(weights.cast<Complex>());
}

RadialWeightVec radial_weights(const BasisSpec& basis,
                               const std::function<double(double)>& transfer) {
  const auto& lambdas = basis.lambdas();
  RadialWeightVec w(lambdas.size());
  for (std::size_t p = 0; p < lambdas.size(); ++p) {
    // (n, k) and (-n, k) share lambda; evaluate once so they stay identical.
    w[p] = (basis.indices()[p].n < 0) ? w[p - 1] : transfer(lambdas[p]);
  }
  return w;
}

double conjugate_asymmetry(const CoeffVec& alpha, const BasisSpec& basis) {
  double worst = 0.0;
  for (std::size_t p = 0; p < basis.size(); ++p) {
    worst = std::max(worst, std::abs(alpha[basis.partner(p)] - std::conj(alpha[p])));
  }
  return worst;
}

}  // namespace scov
