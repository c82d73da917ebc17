#include "scov/ctf.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace scov {

CtfParams CtfParams::identity(double pixel_size_a) {
  CtfParams p;
  p.model = CtfModel::kNone;
  p.defocus_um = 0.0;
  p.amplitude_contrast = 0.0;
  p.pixel_size_a = pixel_size_a;
  return p;
}

void CtfParams::validate() const {
  if (!(voltage_kv > 0.0)) throw std::invalid_argument("CtfParams: voltage_kv must be > 0");
  if (!(pixel_size_a > 0.0)) throw std::invalid_argument("CtfParams: pixel_size_a must be > 0");
  if (!(amplitude_contrast >= 0.0 && amplitude_contrast < 1.0)) {
    throw std::invalid_argument("CtfParams: amplitude_contrast must lie in [0, 1)");
  }
  if (!(b_factor_a2 >= 0.0)) throw std::invalid_argument("CtfParams: b_factor_a2 must be >= 0");
  if (!std::isfinite(defocus_um) || !std::isfinite(cs_mm)) {
    throw std::invalid_argument("CtfParams: defocus and Cs must be finite");
  }
}

double electron_wavelength(double voltage_kv) {
  const double volts = voltage_kv * 1e3;
  return 12.2643 / std::sqrt(volts * (1.0 + volts * 0.978466e-6));
}

double ctf_phase(const CtfParams& p, double s) {
  const double wavelength = electron_wavelength(p.voltage_kv);
  const double defocus = p.defocus_um * 1e4;  // A
  const double cs = p.cs_mm * 1e7;            // A
  const double s2 = s * s;
  return std::numbers::pi * wavelength * defocus * s2 -
         0.5 * std::numbers::pi * cs * wavelength * wavelength * wavelength * s2 * s2;
}

double eval_ctf(const CtfParams& p, double s) {
  if (p.model == CtfModel::kNone) return 1.0;
  const double w = p.amplitude_contrast;
  const double chi = ctf_phase(p, s);
  const double envelope = std::exp(-p.b_factor_a2 * s * s / 4.0);
  return -(std::sqrt(1.0 - w * w) * std::sin(chi) + w * std::cos(chi)) * envelope;
}

double basis_frequency(double lambda, int grid_size, double pixel_size_a) {
  return lambda / (2.0 * std::numbers::pi * (grid_size / 2.0) * pixel_size_a);
}

RadialWeightVec ctf_to_weights(const CtfParams& p, const BasisSpec& basis) {
  p.validate();
  if (p.model == CtfModel::kNone) return RadialWeightVec::Ones(basis.size());
  const int L = basis.grid_size();
  return radial_weights(basis, [&](double lambda) {
    return eval_ctf(p, basis_frequency(lambda, L, p.pixel_size_a));
  });
}

Wellposedness check_wellposedness(std::span<const RadialWeightVec> weights,
                                  const BasisSpec& basis, std::span<const double> multiplicity,
                                  double warn_threshold) {
  if (weights.empty()) throw std::invalid_argument("check_wellposedness: empty weight list");
  if (!multiplicity.empty() && multiplicity.size() != weights.size()) {
    throw std::invalid_argument("check_wellposedness: multiplicity size mismatch");
  }
  // One representative position per distinct lambda: the (n >= 0, k) entries.
  std::vector<std::pair<double, std::size_t>> distinct;
  for (std::size_t p = 0; p < basis.size(); ++p) {
    if (basis.indices()[p].n >= 0) distinct.emplace_back(basis.lambdas()[p], p);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end(),
                             [](const auto& a, const auto& b) { return a.first == b.first; }),
                 distinct.end());

  const auto count = static_cast<Eigen::Index>(distinct.size());
  Eigen::MatrixXd squared(static_cast<Eigen::Index>(weights.size()), count);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (static_cast<std::size_t>(weights[i].size()) != basis.size()) {
      throw std::invalid_argument("check_wellposedness: weight vector not aligned with basis");
    }
    for (Eigen::Index c = 0; c < count; ++c) {
      const double w = weights[i][static_cast<Eigen::Index>(distinct[c].second)];
      squared(static_cast<Eigen::Index>(i), c) = w * w;
    }
  }
  Eigen::VectorXd mult = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t i = 0; i < multiplicity.size(); ++i) mult[static_cast<Eigen::Index>(i)] = multiplicity[i];

  const Eigen::MatrixXd sums = squared.transpose() * mult.asDiagonal() * squared;

  Wellposedness out;
  out.lambdas.reserve(distinct.size());
  for (const auto& [lambda, pos] : distinct) out.lambdas.push_back(lambda);
  out.delta = sums.minCoeff();
  out.log10_heatmap = sums.unaryExpr([](double v) {
    return v > 0.0 ? std::log10(v) : -std::numeric_limits<double>::infinity();
  });
  out.warning = out.delta <= warn_threshold;
  return out;
}

}  // namespace scov
