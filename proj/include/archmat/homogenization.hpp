#pragma once

#include <cstdint>
#include <memory>

#include "archmat/fem_core.hpp"

namespace archmat {

/// Homogenized plane elasticity in Voigt order, in units of E1.
struct EffectiveElasticity {
  Mat3 d_bar = Mat3::Zero();
  Mat3 c_bar = Mat3::Zero();
  double e_bar = 0.0;      ///< 1 / C11
  double kappa_bar = 0.0;  ///< (D11 + D12) / 2

  static EffectiveElasticity from_matrix(const Mat3& d);
};

/// Fluctuation fields of the three unit-strain cell problems (columns).
struct UnitStrainSolutions {
  Mat chi;  ///< periodic dofs x 3
  Mat f;    ///< periodic dofs x 3
};

/// Everything the downstream analyses reuse from one homogenization: the
/// factorized stiffness, the unit-strain solutions and a fingerprint of the
/// modulus field they were computed for.
struct Homogenization {
  EffectiveElasticity effective;
  UnitStrainSolutions solutions;
  Vec moduli;
  std::uint64_t fingerprint = 0;
  std::shared_ptr<const PeriodicSolver> solver;
};

/// Assembled condensed unit-strain loads f_alpha (periodic dofs x 3).
Mat unit_strain_loads(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli);

Homogenization homogenize(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli);

/// Per-unit-modulus energy matrix of one element,
///   q_ab = int (e_a - B chi_a)^T D0 (e_b - B chi_b) dY,
/// so that D_bar = sum_e E_e q_e / |Y|.
Mat3 element_energy(const ElementMatrices& elem, const Mat83& chi_e);

/// Element block of the unit-strain solutions (8 x 3).
Mat83 element_chi(const PeriodicMesh& mesh, const Mat& chi, int e);

/// Upper bound on the Young's modulus of a void/solid composite, f / (2 - f),
/// in units of E1.
double hs_bound(double volume_fraction);
/// Same bound written with mass densities, rho / (2 rho1 - rho).
double hs_bound_density(double rho, double rho1);

/// Order-independent 64-bit fingerprint of a field (FNV-1a over the bytes).
std::uint64_t fingerprint(const Vec& field);

}  // namespace archmat
