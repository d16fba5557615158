#include "archmat/sensitivities.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace archmat {

namespace {

void check_current(const Homogenization& hom, const Vec& moduli) {
  if (fingerprint(moduli) != hom.fingerprint)
    throw analysis_error("unit-strain solutions are stale: they were computed for a different density field");
}

void check_size(const PeriodicMesh& mesh, const Vec& v, const char* what) {
  if (v.size() != mesh.element_count()) throw domain_error(std::string(what) + " size does not match the mesh");
}

}  // namespace

std::vector<Mat3> grad_elasticity(const PeriodicMesh& mesh, const ElementMatrices& elem, const Homogenization& hom,
                                  const Vec& moduli_stiff, const Vec& dmoduli_stiff) {
  check_current(hom, moduli_stiff);
  check_size(mesh, dmoduli_stiff, "modulus derivative");
  std::vector<Mat3> out(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e)
    out[e] = dmoduli_stiff(e) * element_energy(elem, element_chi(mesh, hom.solutions.chi, e)) / mesh.cell_size();
  return out;
}

Vec grad_ebar(const std::vector<Mat3>& grad_d, const EffectiveElasticity& eff) {
  const Mat3& c = eff.c_bar;
  const double e2 = eff.e_bar * eff.e_bar;
  Vec out(static_cast<Eigen::Index>(grad_d.size()));
  for (size_t e = 0; e < grad_d.size(); ++e) {
    const double dc11 = -c.row(0).dot(grad_d[e] * c.col(0));
    out(static_cast<Eigen::Index>(e)) = -e2 * dc11;
  }
  return out;
}

StrainSensitivity StrainSensitivity::zero(int elements) {
  return {Mat::Zero(3, elements), Vec::Zero(elements)};
}

StrainSensitivity& StrainSensitivity::operator+=(const StrainSensitivity& other) {
  a += other.a;
  direct += other.direct;
  return *this;
}

StrainSensitivity vm_sensitivity(const ElementMatrices& elem, const MicrostressState& state, const Vec& moduli_vm,
                                 const Vec& dmoduli_vm, const Vec& weights) {
  const auto ne = static_cast<int>(state.element_strain.cols());
  if (moduli_vm.size() != ne || dmoduli_vm.size() != ne || weights.size() != ne)
    throw domain_error("stress sensitivity inputs differ in size");
  const Mat3 dmd = elem.d0 * von_mises_matrix() * elem.d0;
  StrainSensitivity out = StrainSensitivity::zero(ne);
  for (int e = 0; e < ne; ++e) {
    if (weights(e) == 0.0) continue;
    const Vec3 s = state.element_strain.col(e);
    const Vec3 g = dmd * s;
    const double m = std::sqrt(std::max(0.0, s.dot(g)));
    if (!(m > 0.0)) continue;
    out.a.col(e) = weights(e) * moduli_vm(e) / m * g;
    out.direct(e) = weights(e) * dmoduli_vm(e) * m;
  }
  return out;
}

ModeForms mode_forms(const PeriodicMesh& mesh, const ElementMatrices& elem, const WaveVector& k, const CVec& mode) {
  if (mode.size() != mesh.dof_count()) throw domain_error("mode size does not match the mesh");
  std::array<Complex, 4> corner_phase;
  ModeForms out{Mat(3, mesh.element_count()), Vec(mesh.element_count())};
  Eigen::Matrix<Complex, 8, 1> phi;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto full = mesh.element_full_nodes(e);
    for (int a = 0; a < 4; ++a) {
      const auto w = mesh.wrap(full[a]);
      corner_phase[a] = (w[0] == 0 && w[1] == 0) ? Complex(1.0) : std::polar(1.0, k.k1 * w[0] + k.k2 * w[1]);
      const int master = mesh.master_node(full[a]);
      phi(2 * a) = mode(2 * master) * corner_phase[a];
      phi(2 * a + 1) = mode(2 * master + 1) * corner_phase[a];
    }
    for (int c = 0; c < 3; ++c) out.gamma(c, e) = std::real(phi.dot(elem.kg[c] * phi));
    out.energy(e) = std::real(phi.dot(elem.k0 * phi));
  }
  return out;
}

StrainSensitivity tau_sensitivity(const PeriodicMesh& mesh, const ElementMatrices& elem, const MicrostressState& state,
                                  const Vec& moduli_geo, const Vec& dmoduli_geo, const Vec& dmoduli_stiff,
                                  const BandDiagram& diagram, const std::vector<Vec>& weights) {
  const int ne = mesh.element_count();
  check_size(mesh, moduli_geo, "geometric modulus");
  check_size(mesh, dmoduli_geo, "geometric modulus derivative");
  check_size(mesh, dmoduli_stiff, "stiffness modulus derivative");
  if (weights.size() != diagram.solves.size()) throw domain_error("one weight vector per eigen solve is required");
  double wmax = 0.0;
  for (const auto& w : weights) wmax = std::max(wmax, w.size() ? w.cwiseAbs().maxCoeff() : 0.0);

  StrainSensitivity out = StrainSensitivity::zero(ne);
  const Mat unit_stress = elem.d0 * state.element_strain;  // 3 x N
  for (size_t j = 0; j < diagram.solves.size(); ++j) {
    const EigenSolve& s = diagram.solves[j];
    if (weights[j].size() != s.tau.size()) throw domain_error("weight count differs from the band count");
    for (Eigen::Index b = 0; b < s.tau.size(); ++b) {
      const double w = weights[j](b);
      if (w == 0.0 || std::abs(w) < 1e-14 * wmax) continue;
      const ModeForms f = mode_forms(mesh, elem, s.k, s.modes.col(b));
      for (int e = 0; e < ne; ++e) {
        out.a.col(e) -= w * moduli_geo(e) * (elem.d0 * f.gamma.col(e));
        out.direct(e) -= w * (dmoduli_geo(e) * unit_stress.col(e).dot(f.gamma.col(e)) +
                              s.tau(b) * dmoduli_stiff(e) * f.energy(e));
      }
    }
  }
  return out;
}

Vec adjoint_gradient(const PeriodicMesh& mesh, const ElementMatrices& elem, const Homogenization& hom,
                     const Vec& moduli_stiff, const Vec& dmoduli_stiff, const Vec3& eps0,
                     const StrainSensitivity& sens) {
  check_current(hom, moduli_stiff);
  check_size(mesh, dmoduli_stiff, "modulus derivative");
  const int ne = mesh.element_count();
  if (sens.a.rows() != 3 || sens.a.cols() != ne || sens.direct.size() != ne)
    throw domain_error("strain sensitivity does not match the mesh");

  const Mat& chi = hom.solutions.chi;
  Vec g = Vec::Zero(mesh.dof_count());
  Vec3 h = sens.a.rowwise().sum();
  for (int e = 0; e < ne; ++e) {
    const Vec8 ge = elem.b_center.transpose() * sens.a.col(e);
    const auto dofs = mesh.element_dofs(e);
    for (int a = 0; a < 8; ++a) g(dofs[a]) += ge(a);
  }
  h -= chi.transpose() * g;
  const Vec lambda = hom.solver->solve(g);
  const Vec u = chi * eps0;
  const Vec3 ch = hom.effective.c_bar * h;  // C symmetric: h^T C q eps0 = (C h)^T q eps0

  const Vec8 f0e = elem.f0 * eps0;
  Vec out = sens.direct;
  for (int e = 0; e < ne; ++e) {
    const Mat3 q = element_energy(elem, element_chi(mesh, chi, e)) / mesh.cell_size();
    const Vec8 ue = gather(mesh, e, u);
    const Vec8 le = gather(mesh, e, lambda);
    out(e) += dmoduli_stiff(e) * (le.dot(elem.k0 * ue - f0e) - ch.dot(q * eps0));
  }
  return out;
}

Vec chain_to_design(const DensityFilter& filter, const DensityField& field, const Vec& d_by_drho_bar,
                    bool symmetric) {
  const Vec dproj = project_derivative(field.rho_tilde, field.eta, field.beta);
  Vec out = filter.apply_transpose(d_by_drho_bar.cwiseProduct(dproj));
  if (symmetric) out = enforce_symmetry(filter.mesh(), out);
  return out;
}

void write_gradient_csv(std::ostream& os, const PeriodicMesh& mesh, const Vec& analytic, const Vec* reference) {
  check_size(mesh, analytic, "gradient");
  const auto prec = os.precision();
  os << std::setprecision(15);
  os << "element,ex,ey,analytic";
  if (reference) os << ",reference,rel_err";
  os << '\n';
  for (int e = 0; e < mesh.element_count(); ++e) {
    os << e << ',' << e % mesh.n() << ',' << e / mesh.n() << ',' << analytic(e);
    if (reference) {
      const double r = (*reference)(e);
      os << ',' << r << ',' << std::abs(analytic(e) - r) / std::max(std::abs(r), 1e-300);
    }
    os << '\n';
  }
  os.precision(prec);
}

}  // namespace archmat
