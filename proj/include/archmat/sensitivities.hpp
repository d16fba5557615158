#pragma once

#include <iosfwd>
#include <vector>

#include "archmat/bloch_buckling.hpp"
#include "archmat/design_param.hpp"

namespace archmat {

/// Per-element dD_bar / d rho_bar_e for a stiffness interpolation with
/// elementwise derivative dmoduli. Throws analysis-failure if the
/// homogenization was computed for a different modulus field.
std::vector<Mat3> grad_elasticity(const PeriodicMesh& mesh, const ElementMatrices& elem, const Homogenization& hom,
                                  const Vec& moduli_stiff, const Vec& dmoduli_stiff);

/// dE_bar / d rho_bar = -E_bar^2 dC11, dC = -C dD C.
Vec grad_ebar(const std::vector<Mat3>& grad_d, const EffectiveElasticity& eff);

/// A functional of the element strains s_e and the densities, linearized as
/// dF = sum_e a_e . ds_e + direct_e d rho_bar_e.
struct StrainSensitivity {
  Mat a;       ///< 3 x N
  Vec direct;  ///< N

  static StrainSensitivity zero(int elements);
  StrainSensitivity& operator+=(const StrainSensitivity& other);
};

/// Linearization of sum_e w_e vm_e; elements with zero stress get the zero
/// subgradient.
StrainSensitivity vm_sensitivity(const ElementMatrices& elem, const MicrostressState& state, const Vec& moduli_vm,
                                 const Vec& dmoduli_vm, const Vec& weights);

/// Per-element quadratic forms of one mode, gathered with its Bloch phases:
/// gamma(c, e) = Re phi_e^H kg_c phi_e and energy(e) = Re phi_e^H k0 phi_e.
struct ModeForms {
  Mat gamma;   ///< 3 x N
  Vec energy;  ///< N
};
ModeForms mode_forms(const PeriodicMesh& mesh, const ElementMatrices& elem, const WaveVector& k, const CVec& mode);

/// Linearization of sum w tau over the eigenpairs of a band diagram;
/// weights[j](b) belongs to band b of diagram.solves[j].
StrainSensitivity tau_sensitivity(const PeriodicMesh& mesh, const ElementMatrices& elem, const MicrostressState& state,
                                  const Vec& moduli_geo, const Vec& dmoduli_geo, const Vec& dmoduli_stiff,
                                  const BandDiagram& diagram, const std::vector<Vec>& weights);

/// Total derivative with respect to rho_bar, accounting for the dependence
/// of the strains on the unit-strain solutions and on eps0 = C_bar sigma0.
/// One adjoint solve with the factorized stiffness.
Vec adjoint_gradient(const PeriodicMesh& mesh, const ElementMatrices& elem, const Homogenization& hom,
                     const Vec& moduli_stiff, const Vec& dmoduli_stiff, const Vec3& eps0,
                     const StrainSensitivity& sens);

/// Chains a physical-density gradient through the projection, the filter
/// and (optionally) the symmetry averaging to the design variables.
Vec chain_to_design(const DensityFilter& filter, const DensityField& field, const Vec& d_by_drho_bar,
                    bool symmetric);

/// Per-element gradient dump: element, ex, ey, analytic[, reference, rel_err].
void write_gradient_csv(std::ostream& os, const PeriodicMesh& mesh, const Vec& analytic, const Vec* reference = nullptr);

}  // namespace archmat
