#include "archmat/fem_core.hpp"

#include <cmath>
#include <sstream>

#include "archmat/sparse_cholesky.hpp"

namespace archmat {

namespace {

constexpr std::array<double, 4> kNodeXi{-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kNodeEta{-1.0, -1.0, 1.0, 1.0};

// Strain-displacement matrix of the four incompatible modes, internal dof
// order (u:1-xi^2, u:1-eta^2, v:1-xi^2, v:1-eta^2).
Eigen::Matrix<double, 3, 4> incompatible_b(double xi, double eta, double h) {
  const double dx = -4.0 * xi / h;   // d(1 - xi^2)/dx
  const double dy = -4.0 * eta / h;  // d(1 - eta^2)/dy
  Eigen::Matrix<double, 3, 4> b = Eigen::Matrix<double, 3, 4>::Zero();
  b(0, 0) = dx;
  b(2, 1) = dy;
  b(2, 2) = dx;
  b(1, 3) = dy;
  return b;
}

// Displacement-gradient operator rows (u_x, u_y, v_x, v_y).
Eigen::Matrix<double, 4, 8> gradient_operator(double xi, double eta, double h) {
  Eigen::Matrix<double, 4, 8> g = Eigen::Matrix<double, 4, 8>::Zero();
  for (int a = 0; a < 4; ++a) {
    const double dndx = 0.25 * kNodeXi[a] * (1.0 + eta * kNodeEta[a]) * 2.0 / h;
    const double dndy = 0.25 * kNodeEta[a] * (1.0 + xi * kNodeXi[a]) * 2.0 / h;
    g(0, 2 * a) = dndx;
    g(1, 2 * a) = dndy;
    g(2, 2 * a + 1) = dndx;
    g(3, 2 * a + 1) = dndy;
  }
  return g;
}

SpMat assemble_impl(const PeriodicMesh& mesh, bool periodic, int ndof,
                    const std::function<Mat8(int)>& element_matrix) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.element_count()) * 64);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Mat8 ke = element_matrix(e);
    const auto dofs = periodic ? mesh.element_dofs(e) : mesh.element_full_dofs(e);
    for (int b = 0; b < 8; ++b)
      for (int a = 0; a < 8; ++a) trip.emplace_back(dofs[a], dofs[b], ke(a, b));
  }
  SpMat k(ndof, ndof);
  k.setFromTriplets(trip.begin(), trip.end());
  k.makeCompressed();
  return k;
}

void check_moduli(const PeriodicMesh& mesh, const Vec& moduli) {
  if (moduli.size() != mesh.element_count())
    throw domain_error("modulus field has " + std::to_string(moduli.size()) + " entries, mesh has " +
                       std::to_string(mesh.element_count()) + " elements");
  for (Eigen::Index e = 0; e < moduli.size(); ++e)
    if (!(moduli(e) > 0.0))
      throw domain_error("nonpositive modulus " + std::to_string(moduli(e)) + " at element " + std::to_string(e));
}

}  // namespace

std::array<int, 4> PeriodicMesh::element_nodes(int e) const noexcept {
  const int ex = e % n_, ey = e / n_;
  const int ex1 = (ex + 1) % n_, ey1 = (ey + 1) % n_;
  return {ex + n_ * ey, ex1 + n_ * ey, ex1 + n_ * ey1, ex + n_ * ey1};
}

std::array<int, 4> PeriodicMesh::element_full_nodes(int e) const noexcept {
  const int ex = e % n_, ey = e / n_;
  const int m = n_ + 1;
  return {ex + m * ey, ex + 1 + m * ey, ex + 1 + m * (ey + 1), ex + m * (ey + 1)};
}

std::array<int, 8> PeriodicMesh::element_dofs(int e) const noexcept {
  const auto nodes = element_nodes(e);
  std::array<int, 8> d{};
  for (int a = 0; a < 4; ++a) {
    d[2 * a] = 2 * nodes[a];
    d[2 * a + 1] = 2 * nodes[a] + 1;
  }
  return d;
}

std::array<int, 8> PeriodicMesh::element_full_dofs(int e) const noexcept {
  const auto nodes = element_full_nodes(e);
  std::array<int, 8> d{};
  for (int a = 0; a < 4; ++a) {
    d[2 * a] = 2 * nodes[a];
    d[2 * a + 1] = 2 * nodes[a] + 1;
  }
  return d;
}

int PeriodicMesh::master_node(int full_node) const noexcept {
  const int i = full_node % (n_ + 1), j = full_node / (n_ + 1);
  return (i % n_) + n_ * (j % n_);
}

std::array<int, 2> PeriodicMesh::wrap(int full_node) const noexcept {
  const int i = full_node % (n_ + 1), j = full_node / (n_ + 1);
  return {i / n_, j / n_};
}

PeriodicMesh build_mesh(int n) {
  if (n < 4) throw invalid_mesh("mesh needs at least 4 elements per side, got " + std::to_string(n));
  if (n % 2 != 0) throw invalid_mesh("element count per side must be even, got " + std::to_string(n));
  PeriodicMesh mesh;
  mesh.n_ = n;
  return mesh;
}

Mat3 plane_stress_matrix(double young, double nu) {
  Mat3 d;
  d << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu);
  return young / (1.0 - nu * nu) * d;
}

Mat38 bilinear_b(double xi, double eta, double h) {
  const auto g = gradient_operator(xi, eta, h);
  Mat38 b;
  b.row(0) = g.row(0);
  b.row(1) = g.row(3);
  b.row(2) = g.row(1) + g.row(2);
  return b;
}

ElementMatrices element_matrices(double nu, double h) {
  if (!(nu >= 0.0 && nu < 0.5)) throw invalid_material("Poisson ratio must lie in [0, 0.5), got " + std::to_string(nu));
  if (!(h > 0.0)) throw invalid_mesh("element size must be positive");

  ElementMatrices em;
  em.nu = nu;
  em.h = h;
  em.volume = h * h;
  em.d0 = plane_stress_matrix(1.0, nu);

  const double gp = 1.0 / std::sqrt(3.0);
  const double det_j = 0.25 * h * h;
  Mat8 kcc = Mat8::Zero();
  Eigen::Matrix<double, 8, 4> kci = Eigen::Matrix<double, 8, 4>::Zero();
  Eigen::Matrix4d kii = Eigen::Matrix4d::Zero();
  for (double xi : {-gp, gp})
    for (double eta : {-gp, gp}) {
      const Mat38 bc = bilinear_b(xi, eta, h);
      const auto bi = incompatible_b(xi, eta, h);
      kcc += bc.transpose() * em.d0 * bc * det_j;
      kci += bc.transpose() * em.d0 * bi * det_j;
      kii += bi.transpose() * em.d0 * bi * det_j;
    }
  const Eigen::Matrix<double, 4, 8> recover = kii.ldlt().solve(kci.transpose());
  em.k0 = kcc - kci * recover;
  em.k0 = 0.5 * (em.k0 + em.k0.transpose()).eval();
  em.b_center = bilinear_b(0.0, 0.0, h) - incompatible_b(0.0, 0.0, h) * recover;

  em.f0.setZero();
  for (double xi : {-gp, gp})
    for (double eta : {-gp, gp}) {
      const Mat38 bhat = bilinear_b(xi, eta, h) - incompatible_b(xi, eta, h) * recover;
      em.f0 += bhat.transpose() * em.d0 * det_j;
    }

  for (int c = 0; c < 3; ++c) {
    Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
    if (c == 0) s(0, 0) = 1.0;
    if (c == 1) s(1, 1) = 1.0;
    if (c == 2) s(0, 1) = s(1, 0) = 1.0;
    Eigen::Matrix4d s4 = Eigen::Matrix4d::Zero();
    s4.topLeftCorner<2, 2>() = s;
    s4.bottomRightCorner<2, 2>() = s;
    em.kg[c].setZero();
    for (double xi : {-gp, gp})
      for (double eta : {-gp, gp}) {
        const auto g = gradient_operator(xi, eta, h);
        em.kg[c] += g.transpose() * s4 * g * det_j;
      }
  }
  return em;
}

SpMat assemble_periodic(const PeriodicMesh& mesh, const std::function<Mat8(int)>& element_matrix) {
  return assemble_impl(mesh, true, mesh.dof_count(), element_matrix);
}

SpMat assemble_full(const PeriodicMesh& mesh, const std::function<Mat8(int)>& element_matrix) {
  return assemble_impl(mesh, false, mesh.full_dof_count(), element_matrix);
}

SpMat assemble_k0(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli) {
  check_moduli(mesh, moduli);
  return assemble_periodic(mesh, [&](int e) -> Mat8 { return moduli(e) * elem.k0; });
}

SpMat assemble_k0_full(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli) {
  check_moduli(mesh, moduli);
  return assemble_full(mesh, [&](int e) -> Mat8 { return moduli(e) * elem.k0; });
}

std::vector<int> free_dofs(const PeriodicMesh& mesh, int pinned_node) {
  std::vector<int> keep;
  keep.reserve(mesh.dof_count() - 2);
  for (int d = 0; d < mesh.dof_count(); ++d)
    if (d / 2 != pinned_node) keep.push_back(d);
  return keep;
}

template <class Scalar>
Eigen::SparseMatrix<Scalar> restrict_matrix(const Eigen::SparseMatrix<Scalar>& a, const std::vector<int>& keep) {
  std::vector<int> map(a.rows(), -1);
  for (size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
  std::vector<Eigen::Triplet<Scalar>> trip;
  trip.reserve(a.nonZeros());
  for (int c = 0; c < a.outerSize(); ++c)
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(a, c); it; ++it) {
      const int r = map[it.row()], cc = map[it.col()];
      if (r >= 0 && cc >= 0) trip.emplace_back(r, cc, it.value());
    }
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::SparseMatrix<Scalar> out(m, m);
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

template SpMat restrict_matrix<double>(const SpMat&, const std::vector<int>&);
template CSpMat restrict_matrix<Complex>(const CSpMat&, const std::vector<int>&);

struct PeriodicSolver::Impl {
  std::vector<int> keep;
  SpMat reduced;
  SparseCholesky<double> llt;
};

PeriodicSolver::PeriodicSolver(const PeriodicMesh& mesh, const SpMat& k_periodic, int pinned_node)
    : impl_(std::make_unique<Impl>()), k_(k_periodic) {
  if (k_periodic.rows() != mesh.dof_count() || k_periodic.cols() != mesh.dof_count())
    throw domain_error("periodic matrix size does not match the mesh");
  impl_->keep = free_dofs(mesh, pinned_node);
  impl_->reduced = restrict_matrix(k_periodic, impl_->keep);
  if (!impl_->llt.factorize(impl_->reduced)) {
    std::ostringstream msg;
    msg << "pinned periodic matrix is not positive definite (n=" << mesh.n() << ", dofs=" << impl_->reduced.rows()
        << ", nnz=" << impl_->reduced.nonZeros() << "); the stiffness is singular beyond the translation nullspace";
    throw solver_error(msg.str());
  }
}

PeriodicSolver::~PeriodicSolver() = default;
PeriodicSolver::PeriodicSolver(PeriodicSolver&&) noexcept = default;
PeriodicSolver& PeriodicSolver::operator=(PeriodicSolver&&) noexcept = default;

Mat PeriodicSolver::solve(const Mat& rhs_in) const {
  // Loads that vanish up to roundoff (e.g. a homogeneous cell) are measured
  // against a floor proportional to the matrix scale.
  const double floor = 1e-10 * k_.coeffs().cwiseAbs().maxCoeff() * std::sqrt(static_cast<double>(k_.rows()));

  // Remove the roundoff-level translation component so the pinned rows are
  // consistent; a genuine translation load is an error.
  Mat rhs = rhs_in;
  const auto nodes = rhs.rows() / 2;
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    const double tol = std::max(1e-8 * rhs.col(c).norm(), floor);
    for (int comp = 0; comp < 2; ++comp) {
      double mean = 0.0;
      for (Eigen::Index i = comp; i < rhs.rows(); i += 2) mean += rhs(i, c);
      mean /= static_cast<double>(nodes);
      if (std::abs(mean) * std::sqrt(static_cast<double>(nodes)) > tol)
        throw solver_error("periodic load is not orthogonal to rigid translations");
      for (Eigen::Index i = comp; i < rhs.rows(); i += 2) rhs(i, c) -= mean;
    }
  }

  const auto m = static_cast<Eigen::Index>(impl_->keep.size());
  Mat reduced_rhs(m, rhs.cols());
  for (Eigen::Index i = 0; i < m; ++i) reduced_rhs.row(i) = rhs.row(impl_->keep[i]);
  Mat y = impl_->llt.solve(reduced_rhs);
  // Iterative refinement absorbs roundoff from void-floor conditioning.
  for (int pass = 0; pass < 2; ++pass) {
    const Mat r = reduced_rhs - impl_->reduced * y;
    if (r.norm() <= 1e-13 * std::max(reduced_rhs.norm(), 1e-300)) break;
    y += impl_->llt.solve(r);
  }
  Mat x = Mat::Zero(rhs.rows(), rhs.cols());
  for (Eigen::Index i = 0; i < m; ++i) x.row(impl_->keep[i]) = y.row(i);

  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    const double fnorm = std::max(rhs.col(c).norm(), floor);
    const double res = (k_ * x.col(c) - rhs.col(c)).norm() / fnorm;
    if (!(res <= residual_tolerance)) {
      std::ostringstream msg;
      msg << "periodic solve residual " << res << " exceeds " << residual_tolerance << " for right-hand side " << c
          << " (n=" << nodes << " nodes, matrix nnz=" << k_.nonZeros() << ")";
      throw solver_error(msg.str());
    }
  }
  return x;
}

Vec PeriodicSolver::solve(const Vec& rhs) const {
  Mat m = rhs;
  return solve(m).col(0);
}

}  // namespace archmat
