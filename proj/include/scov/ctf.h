#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "scov/fb_basis.h"

namespace scov {

enum class CtfModel {
  kWeakPhase,  // standard radial weak-phase CTF
  kNone,       // identity filter, all weights 1
};

// Radial contrast transfer function parameters. Units follow the parameter
// file field names.
struct CtfParams {
  double defocus_um = 2.0;  // underfocus positive
  double voltage_kv = 300.0;
  double cs_mm = 2.0;
  double amplitude_contrast = 0.07;
  double pixel_size_a = 1.0;
  double b_factor_a2 = 0.0;
  CtfModel model = CtfModel::kWeakPhase;

  static CtfParams identity(double pixel_size_a);
  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

// Relativistic electron wavelength in Angstrom.
double electron_wavelength(double voltage_kv);

// Aberration phase chi(s) = pi lambda d s^2 - pi/2 Cs lambda^3 s^4 (s in 1/A).
double ctf_phase(const CtfParams& p, double s);

// CTF(s) = -[sqrt(1 - w^2) sin chi + w cos chi] exp(-B s^2 / 4).
double eval_ctf(const CtfParams& p, double s);

// Spatial frequency (1/A) of basis eigenvalue lambda: the unit disk spans
// the physical half-width L/2 * pixel_size.
double basis_frequency(double lambda, int grid_size, double pixel_size_a);

RadialWeightVec ctf_to_weights(const CtfParams& p, const BasisSpec& basis);

struct Wellposedness {
  // min over lambda pairs of sum_i w_i(xi)^2 w_i(eta)^2.
  double delta = 0.0;
  // Distinct lambda values (ascending) indexing the heatmap.
  std::vector<double> lambdas;
  // log10 of the pair sums; -inf where a sum vanishes.
  Eigen::MatrixXd log10_heatmap;
  bool warning = false;
};

// Margin of the identifiability condition over the basis eigenvalues.
// `multiplicity[i]` counts how many images share weights[i] (default 1),
// so per-group weights give the same margin as per-image weights.
Wellposedness check_wellposedness(std::span<const RadialWeightVec> weights,
                                  const BasisSpec& basis,
                                  std::span<const double> multiplicity = {},
                                  double warn_threshold = 1e-6);

}  // namespace scov
