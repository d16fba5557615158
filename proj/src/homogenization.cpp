#include "archmat/homogenization.hpp"

#include <cstring>

namespace archmat {

EffectiveElasticity EffectiveElasticity::from_matrix(const Mat3& d) {
  EffectiveElasticity out;
  out.d_bar = 0.5 * (d + d.transpose());
  const Eigen::FullPivLU<Mat3> lu(out.d_bar);
  if (!lu.isInvertible()) throw analysis_error("effective elasticity matrix is singular");
  out.c_bar = lu.inverse();
  out.e_bar = 1.0 / out.c_bar(0, 0);
  out.kappa_bar = 0.5 * (out.d_bar(0, 0) + out.d_bar(0, 1));
  return out;
}

Mat unit_strain_loads(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli) {
  if (moduli.size() != mesh.element_count()) throw domain_error("modulus field size does not match the mesh");
  Mat f = Mat::Zero(mesh.dof_count(), 3);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto dofs = mesh.element_dofs(e);
    for (int a = 0; a < 8; ++a) f.row(dofs[a]) += moduli(e) * elem.f0.row(a);
  }
  return f;
}

Mat83 element_chi(const PeriodicMesh& mesh, const Mat& chi, int e) {
  Mat83 out;
  const auto dofs = mesh.element_dofs(e);
  for (int a = 0; a < 8; ++a) out.row(a) = chi.row(dofs[a]);
  return out;
}

Mat3 element_energy(const ElementMatrices& elem, const Mat83& chi_e) {
  const Mat3 fx = elem.f0.transpose() * chi_e;
  return elem.volume * elem.d0 - fx - fx.transpose() + chi_e.transpose() * elem.k0 * chi_e;
}

Homogenization homogenize(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli) {
  Homogenization out;
  out.moduli = moduli;
  out.fingerprint = fingerprint(moduli);
  auto solver = std::make_shared<PeriodicSolver>(mesh, assemble_k0(mesh, elem, moduli));
  out.solutions.f = unit_strain_loads(mesh, elem, moduli);
  out.solutions.chi = solver->solve(out.solutions.f);
  out.solver = std::move(solver);

  Mat3 d = Mat3::Zero();
  for (int e = 0; e < mesh.element_count(); ++e)
    d += moduli(e) * element_energy(elem, element_chi(mesh, out.solutions.chi, e));
  out.effective = EffectiveElasticity::from_matrix(d / mesh.cell_size());
  return out;
}

double hs_bound(double f) {
  if (!(f > 0.0 && f <= 1.0)) throw domain_error("volume fraction must lie in (0, 1], got " + std::to_string(f));
  return f / (2.0 - f);
}

double hs_bound_density(double rho, double rho1) {
  if (!(rho1 > 0.0)) throw domain_error("base material density must be positive");
  return hs_bound(rho / rho1);
}

std::uint64_t fingerprint(const Vec& field) {
  std::uint64_t h = 1469598103934665603ull;
  for (Eigen::Index i = 0; i < field.size(); ++i) {
    std::uint64_t bits = 0;
    const double v = field(i);
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace archmat
