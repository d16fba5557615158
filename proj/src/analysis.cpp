#include "archmat/analysis.hpp"

#include <limits>

namespace archmat {

double DesignReport::sigma_y(double sigma1_over_e1) const {
  if (!(sigma1_over_e1 > 0.0)) throw domain_error("relative yield strength must be positive");
  if (!(max_vm > 0.0)) throw analysis_error("maximum von Mises stress is zero; yield strength undefined");
  return sigma1_over_e1 / max_vm;
}

DesignReport analyze_design(const PeriodicMesh& mesh, const Vec& rho_bar, const AnalysisOptions& opt) {
  if (rho_bar.size() != mesh.element_count()) throw domain_error("density field size does not match the mesh");
  if (rho_bar.minCoeff() < 0.0 || rho_bar.maxCoeff() > 1.0) throw domain_error("physical densities must lie in [0, 1]");
  opt.interp.validate();
  opt.load.validate();
  const ElementMatrices elem = element_matrices(opt.nu, mesh.h());
  const Vec ek = interpolate(rho_bar, opt.interp, Branch::stiffness);
  const Vec eg = interpolate(rho_bar, opt.interp, Branch::geometric);
  const Vec es = interpolate(rho_bar, opt.interp, Branch::stress);

  DesignReport r;
  r.volume_fraction = volume_fraction(mesh, rho_bar);
  const Homogenization hom = homogenize(mesh, elem, ek);
  r.effective = hom.effective;
  const MicrostressState st = element_stresses(mesh, elem, es, hom.solutions, macro_strain(hom.effective, opt.load));
  r.max_vm = st.max_vm;
  if (opt.buckling) {
    BucklingAnalysis b = buckling_strength(mesh, elem, ek, eg, st, opt.bloch);
    r.buckles = b.result.buckles;
    r.tau_max = b.result.tau_max;
    r.sigma_c = b.result.sigma_c;
    r.critical_k = b.result.critical_k;
    r.mode_class = b.result.mode_class;
    r.diagram = std::move(b.diagram);
  } else {
    r.sigma_c = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace archmat
