#include "archmat/stress_yield.hpp"

#include <cmath>

namespace archmat {

Vec3 MacroLoad::direction() const {
  validate();
  return sigma0 / sigma0.norm();
}

void MacroLoad::validate() const {
  if (!(sigma0.norm() > 0.0) || !sigma0.allFinite()) throw domain_error("macroscopic stress must be nonzero");
}

Mat3 von_mises_matrix() {
  Mat3 m;
  m << 1.0, -0.5, 0.0, -0.5, 1.0, 0.0, 0.0, 0.0, 3.0;
  return m;
}

double von_mises(const Vec3& s) {
  return std::sqrt(std::max(0.0, s(0) * s(0) - s(0) * s(1) + s(1) * s(1) + 3.0 * s(2) * s(2)));
}

Vec3 macro_strain(const EffectiveElasticity& eff, const MacroLoad& load) {
  if (!eff.c_bar.allFinite()) throw analysis_error("effective compliance is not finite");
  return eff.c_bar * load.sigma0;
}

MicrostressState element_stresses(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_vm,
                                  const UnitStrainSolutions& chi, const Vec3& eps0) {
  const int ne = mesh.element_count();
  if (moduli_vm.size() != ne) throw domain_error("stress modulus field size does not match the mesh");
  if (chi.chi.rows() != mesh.dof_count() || chi.chi.cols() != 3)
    throw domain_error("unit-strain solutions do not match the mesh");

  MicrostressState st;
  st.eps0 = eps0;
  st.element_strain.resize(3, ne);
  st.element_stress.resize(3, ne);
  st.vm.resize(ne);
  const Vec u = chi.chi * eps0;
  for (int e = 0; e < ne; ++e) {
    const Vec3 strain = eps0 - elem.b_center * gather(mesh, e, u);
    st.element_strain.col(e) = strain;
    st.element_stress.col(e) = moduli_vm(e) * (elem.d0 * strain);
    st.vm(e) = von_mises(st.element_stress.col(e));
  }
  Eigen::Index arg = 0;
  st.max_vm = st.vm.maxCoeff(&arg);
  st.argmax = static_cast<int>(arg);
  return st;
}

double yield_strength(const MicrostressState& state, double sigma1_rel) {
  if (!(sigma1_rel > 0.0)) throw domain_error("relative yield strength must be positive");
  if (!(state.max_vm > 0.0)) throw analysis_error("maximum von Mises stress is zero; yield strength undefined");
  return sigma1_rel / state.max_vm;
}

}  // namespace archmat
