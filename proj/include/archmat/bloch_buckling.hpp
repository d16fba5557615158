#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "archmat/eigensolver.hpp"
#include "archmat/stress_yield.hpp"

namespace archmat {

/// Bloch wave vector in radians per cell.
struct WaveVector {
  double k1 = 0.0;
  double k2 = 0.0;

  bool in_zone() const;
  bool is_zero() const { return k1 == 0.0 && k2 == 0.0; }
};

/// Geometric stiffness from element stresses sigma_e = E_e D0 s_e, with E_e
/// the stress-stiffness moduli.
Mat8 element_stress_stiffness(const ElementMatrices& elem, double modulus, const Vec3& strain);
SpMat stress_stiffness(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_geo,
                       const MicrostressState& state);
SpMat stress_stiffness_full(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_geo,
                            const MicrostressState& state);

/// Dense Bloch reduction matrix T(k): full dof space x periodic dof space,
/// T(slave, master) = exp(i k . wrap).
CSpMat bloch_reduction(const PeriodicMesh& mesh, const WaveVector& k);

/// T(k)^H K T(k) for a matrix assembled in full dof space. Throws domain-error
/// for k outside [-pi, pi]^2.
CSpMat bloch_transform(const PeriodicMesh& mesh, const SpMat& k_full, const WaveVector& k);

/// Fast repeated Bloch reductions of one full-space matrix: the entries are
/// split by the cell offset they couple across, so K(k) = sum_d exp(i k . d) K_d
/// on a fixed sparsity pattern.
class BlochAssembler {
 public:
  BlochAssembler(const PeriodicMesh& mesh, const SpMat& k_full);

  CSpMat at(const WaveVector& k) const;
  /// The k = 0 reduction as a real matrix.
  SpMat periodic() const;

 private:
  CSpMat pattern_;
  std::array<std::vector<double>, 9> parts_;
};

struct BandSolution {
  Vec tau;      ///< descending
  CMat modes;   ///< K0-normalized columns
  bool converged = true;
  double max_imag = 0.0;  ///< largest |Im| of the Rayleigh quotients relative to |tau|
};

/// m largest tau of -K_sigma phi = tau K0 phi. Throws solver-failure if K0 is
/// not positive definite.
BandSolution solve_band(const CSpMat& k0, const CSpMat& k_sigma, int m, const KrylovOptions& options = {},
                        SparseCholesky<Complex>* cache = nullptr);
BandSolution solve_band(const SpMat& k0, const SpMat& k_sigma, int m, const KrylovOptions& options = {},
                        SparseCholesky<double>* cache = nullptr);

/// Closed boundary path of the quarter zone [0, pi]^2 starting at (0, 0) with
/// n_seg segments per edge; the closing point is not repeated.
std::vector<WaveVector> ibz_path(int n_seg);

enum class ModeClass { none, cell_periodic, long_wavelength, boundary };
std::string to_string(ModeClass c);

/// What an eigen solve represents.
enum class SampleKind {
  path,             ///< a path point k != 0
  long_wavelength,  ///< k = 0 evaluated at a small offset
  cell_periodic,    ///< k = 0 with one node pinned
};

struct EigenSolve {
  WaveVector k;
  SampleKind kind = SampleKind::path;
  int path_index = 0;
  Vec tau;
  /// Modes in periodic dof space (pinned dofs zero for cell-periodic solves).
  CMat modes;
  bool converged = true;
  double max_imag = 0.0;
};

struct BandDiagram {
  std::vector<WaveVector> path;
  std::vector<double> arclength;
  /// Per path point, the m largest tau (k = 0 merges its three solves).
  std::vector<Vec> tau;
  std::vector<EigenSolve> solves;

  /// CSV with columns path_arclength, k1, k2, band_index, lambda. Bands with
  /// tau <= 0 have no finite buckling load and are written as inf.
  void write_csv(std::ostream& os) const;
};

struct BucklingOptions {
  int bands = 6;
  int n_seg = 10;
  double k_offset = 1e-3;
  KrylovOptions eigen;
};

struct BucklingResult {
  bool buckles = false;
  double sigma_c = 0.0;         ///< min lambda; infinity when nothing buckles
  double tau_max = 0.0;
  WaveVector critical_k;
  int critical_solve = -1;
  int critical_band = -1;
  ModeClass mode_class = ModeClass::none;
  double critical_residual = 0.0;  ///< relative eigen-residual of the critical pair
  bool all_converged = true;
};

struct BucklingAnalysis {
  BucklingResult result;
  BandDiagram diagram;
};

/// Everything operator-level needed to sweep k for one density snapshot.
class BucklingProblem {
 public:
  BucklingProblem(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_stiff,
                  const Vec& moduli_geo, const MicrostressState& state);

  EigenSolve solve_at(const WaveVector& k, int m, const KrylovOptions& options, SampleKind kind) const;
  EigenSolve solve_cell_periodic(int m, const KrylovOptions& options) const;

  /// Normwise backward error |(tau K0(k) + Ks(k)) phi| / ((|tau| |K0|_1 + |Ks|_1) |phi|).
  double residual(const EigenSolve& s, int band) const;

  /// Largest tau treated as roundoff, 1e-10 max|Ks| / max|K0| amplified by
  /// the 1 / k^2 conditioning of the long-wavelength solves.
  double tau_floor(double k_offset) const;

  const PeriodicMesh& mesh() const { return mesh_; }

 private:
  PeriodicMesh mesh_;
  BlochAssembler k0_;
  BlochAssembler ks_;
  mutable SparseCholesky<Complex> complex_cache_;
  mutable SparseCholesky<double> real_cache_;
};

/// Sweeps the path (with the k = 0 point replaced by two offset solves and
/// the pinned cell-periodic solve) and reports sigma_c = 1 / max tau.
BucklingAnalysis buckling_strength(const BucklingProblem& problem, const std::vector<WaveVector>& path,
                                   const BucklingOptions& options);
BucklingAnalysis buckling_strength(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_stiff,
                                   const Vec& moduli_geo, const MicrostressState& state,
                                   const BucklingOptions& options = {});

}  // namespace archmat
