#pragma once

#include <memory>
#include <string>

#include "archmat/fem_core.hpp"

namespace archmat {

/// SIMP penalization, void floor E0/E1 and stress relaxation.
struct InterpolationParams {
  double p = 3.0;
  double e0_ratio = 1e-5;
  double eps_relax = 0.002;

  void validate() const;
};

/// Which modulus interpolation a field feeds.
enum class Branch {
  stiffness,  ///< K0 and unit-strain loads: rho^p (E1 - E0) + E0
  geometric,  ///< stress stiffness: rho^p E1
  stress,     ///< von Mises stress: rho / (eps (1 - rho) + rho) E1
};

Branch parse_branch(const std::string& name);

/// Per-element modulus for the given branch, in units of e1.
Vec interpolate(const Vec& rho_bar, const InterpolationParams& params, Branch branch, double e1 = 1.0);
/// Elementwise derivative of interpolate() with respect to rho_bar.
Vec interpolate_derivative(const Vec& rho_bar, const InterpolationParams& params, Branch branch, double e1 = 1.0);

/// Helmholtz filter (-l^2 lap + 1) rho_tilde = rho with l = r / (2 sqrt 3),
/// discretized with bilinear scalar elements on the periodic node grid.
/// The factorization is computed once per (mesh, radius).
class DensityFilter {
 public:
  DensityFilter(const PeriodicMesh& mesh, double radius);
  ~DensityFilter();
  DensityFilter(DensityFilter&&) noexcept;
  DensityFilter& operator=(DensityFilter&&) noexcept;

  Vec apply(const Vec& rho) const;
  /// Transpose of apply(); with congruent elements the filter is symmetric.
  Vec apply_transpose(const Vec& grad) const;

  double radius() const noexcept { return radius_; }
  double length() const noexcept;
  const PeriodicMesh& mesh() const noexcept { return mesh_; }

 private:
  struct Impl;
  PeriodicMesh mesh_;
  double radius_;
  std::unique_ptr<Impl> impl_;
};

Vec pde_filter(const PeriodicMesh& mesh, const Vec& rho, double radius);

/// Smoothed Heaviside threshold projection.
Vec project(const Vec& rho_tilde, double eta, double beta);
Vec project_derivative(const Vec& rho_tilde, double eta, double beta);

struct DensityField {
  Vec rho;        ///< design variables
  Vec rho_tilde;  ///< filtered
  Vec rho_bar;    ///< projected (physical)
  double eta = 0.5;
  double beta = 1.0;
};

DensityField realize(const DensityFilter& filter, const Vec& rho, double eta, double beta);

/// Eroded, intermediate and dilated realizations of one design.
struct RobustTriple {
  DensityField eroded;
  DensityField intermediate;
  DensityField dilated;
  double delta_eta = 0.05;
};

RobustTriple robust_realizations(const DensityFilter& filter, const Vec& rho, double beta, double delta_eta);

/// Averages a per-element field over the 8-element dihedral orbit of the
/// square cell (reflections about the mid-lines and the diagonals).
/// Self-adjoint and idempotent.
Vec enforce_symmetry(const PeriodicMesh& mesh, const Vec& rho);

double volume_fraction(const PeriodicMesh& mesh, const Vec& rho_bar);

/// 0/1 field: 1 where rho_bar >= level.
Vec threshold(const Vec& rho_bar, double level = 0.5);

}  // namespace archmat
