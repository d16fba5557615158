#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "archmat/types.hpp"

namespace archmat {

/// Structured square unit cell of n x n square elements with periodic node
/// identification.
///
/// Two node numberings are used:
///  - periodic: node (i, j) with i, j in [0, n), id = i + n * j;
///  - full: node (i, j) with i, j in [0, n], id = i + (n + 1) * j, the
///    numbering before the right/top boundary is folded onto left/bottom.
/// Element (ex, ey) has id ex + n * ey; its local nodes run counterclockwise
/// from the lower left corner. Dof 2 * node is the x component.
class PeriodicMesh {
 public:
  PeriodicMesh() = default;

  int n() const noexcept { return n_; }
  /// Element side length; the cell itself has unit size.
  double h() const noexcept { return 1.0 / n_; }
  double cell_size() const noexcept { return 1.0; }

  int element_count() const noexcept { return n_ * n_; }
  int node_count() const noexcept { return n_ * n_; }
  int dof_count() const noexcept { return 2 * n_ * n_; }
  int full_node_count() const noexcept { return (n_ + 1) * (n_ + 1); }
  int full_dof_count() const noexcept { return 2 * full_node_count(); }

  int element_index(int ex, int ey) const noexcept { return ex + n_ * ey; }
  double element_volume() const noexcept { return h() * h(); }
  Vec element_volumes() const { return Vec::Constant(element_count(), element_volume()); }

  std::array<int, 4> element_nodes(int e) const noexcept;
  std::array<int, 4> element_full_nodes(int e) const noexcept;
  std::array<int, 8> element_dofs(int e) const noexcept;
  std::array<int, 8> element_full_dofs(int e) const noexcept;

  /// Periodic master of a full node (the periodic dof map at node level).
  int master_node(int full_node) const noexcept;
  /// Number of cell periods crossed from the master: (1, 0) for right-edge
  /// nodes, (0, 1) for top-edge nodes, (1, 1) for the top-right corner.
  std::array<int, 2> wrap(int full_node) const noexcept;

 private:
  friend PeriodicMesh build_mesh(int n);
  int n_ = 0;
};

/// Throws invalid-mesh unless n is even and >= 4.
PeriodicMesh build_mesh(int n);

/// Plane-stress isotropic elasticity matrix in Voigt order (xx, yy, xy).
Mat3 plane_stress_matrix(double young, double nu);

/// Q6 element quantities per unit Young's modulus for the congruent square
/// elements of a mesh. Incompatible modes are 1 - xi^2 and 1 - eta^2 for each
/// displacement component, condensed out statically.
struct ElementMatrices {
  double nu = 1.0 / 3.0;
  double h = 0.0;
  double volume = 0.0;
  Mat3 d0;        ///< plane-stress matrix, E = 1
  Mat8 k0;        ///< condensed stiffness
  Mat38 b_center; ///< condensed strain-displacement at the element center
  Mat83 f0;       ///< unit-strain load vectors, column alpha
  /// Geometric stiffness for unit stress components (xx, yy, xy); the
  /// element geometric stiffness is sum_c sigma_c * kg[c].
  std::array<Mat8, 3> kg;

  Mat8 stress_stiffness(const Vec3& stress) const {
    return stress(0) * kg[0] + stress(1) * kg[1] + stress(2) * kg[2];
  }
};

ElementMatrices element_matrices(double nu, double h);

/// Compatible (bilinear) strain-displacement matrix at local coordinates.
Mat38 bilinear_b(double xi, double eta, double h);

/// Assembles per-element 8x8 matrices into the periodic dof space.
SpMat assemble_periodic(const PeriodicMesh& mesh, const std::function<Mat8(int)>& element_matrix);
/// Assembles per-element 8x8 matrices into the full (unfolded) dof space.
SpMat assemble_full(const PeriodicMesh& mesh, const std::function<Mat8(int)>& element_matrix);

/// Condensed global elastic stiffness in periodic dof space. Throws if any
/// modulus is nonpositive.
SpMat assemble_k0(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli);
SpMat assemble_k0_full(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli);

/// Gathers the 8 element dofs of a periodic-space vector.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, 8, 1> gather(const PeriodicMesh& mesh, int e,
                                                    const Eigen::MatrixBase<Derived>& u) {
  Eigen::Matrix<typename Derived::Scalar, 8, 1> out;
  const auto dofs = mesh.element_dofs(e);
  for (int a = 0; a < 8; ++a) out(a) = u(dofs[a]);
  return out;
}

/// Indices kept after pinning both dofs of one node of the periodic space.
std::vector<int> free_dofs(const PeriodicMesh& mesh, int pinned_node = 0);

/// Sub-matrix of a square sparse matrix on the given sorted index set.
template <class Scalar>
Eigen::SparseMatrix<Scalar> restrict_matrix(const Eigen::SparseMatrix<Scalar>& a,
                                            const std::vector<int>& keep);

/// Periodic linear solver for matrices with the two-translation nullspace:
/// both dofs of one node are pinned and the reduced SPD system is factorized
/// once, so any number of right-hand sides reuse the factorization.
class PeriodicSolver {
 public:
  PeriodicSolver(const PeriodicMesh& mesh, const SpMat& k_periodic, int pinned_node = 0);
  ~PeriodicSolver();
  PeriodicSolver(PeriodicSolver&&) noexcept;
  PeriodicSolver& operator=(PeriodicSolver&&) noexcept;

  /// Solves K x = rhs. Each column must be orthogonal to rigid translations.
  /// Throws solver-failure if the relative residual exceeds 1e-9.
  Mat solve(const Mat& rhs) const;
  Vec solve(const Vec& rhs) const;

  const SpMat& matrix() const noexcept { return k_; }

  static constexpr double residual_tolerance = 1e-9;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SpMat k_;
};

}  // namespace archmat
