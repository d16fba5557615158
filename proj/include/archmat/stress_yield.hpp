#pragma once

#include "archmat/homogenization.hpp"

namespace archmat {

/// Prescribed macroscopic stress, in units of E1.
struct MacroLoad {
  Vec3 sigma0 = Vec3(-1.0, 0.0, 0.0);

  static MacroLoad uniaxial_compression() { return {}; }
  /// Unit loading direction n = sigma0 / |sigma0|.
  Vec3 direction() const;
  void validate() const;
};

/// Voigt-form von Mises weight matrix, vm^2 = s^T M s.
Mat3 von_mises_matrix();
double von_mises(const Vec3& stress);

/// eps0 = C_bar sigma0.
Vec3 macro_strain(const EffectiveElasticity& eff, const MacroLoad& load);

/// Element-center stresses under a macroscopic stress. The strain s_e =
/// (I - B X_e) eps0 is kept alongside so that other interpolations of the
/// same snapshot (e.g. the stress stiffness) can reuse it.
struct MicrostressState {
  Vec3 eps0 = Vec3::Zero();
  Mat element_strain;  ///< 3 x N
  Mat element_stress;  ///< 3 x N, from the relaxed stress moduli
  Vec vm;              ///< N
  double max_vm = 0.0;
  int argmax = -1;
};

MicrostressState element_stresses(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_vm,
                                  const UnitStrainSolutions& chi, const Vec3& eps0);

/// sigma_y / E1 = (sigma1 / E1) / max_e vm_e. Throws analysis-failure when
/// max_vm is zero.
double yield_strength(const MicrostressState& state, double sigma1_rel);

}  // namespace archmat
