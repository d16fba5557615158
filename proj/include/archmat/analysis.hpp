#pragma once

#include "archmat/bloch_buckling.hpp"
#include "archmat/design_param.hpp"
#include "archmat/materials.hpp"

namespace archmat {

/// Effective properties of one physical density field, all per unit E1 and
/// per unit macroscopic stress magnitude.
struct DesignReport {
  double volume_fraction = 0.0;
  EffectiveElasticity effective;
  double max_vm = 0.0;       ///< peak element von Mises stress per unit macro stress
  bool buckles = false;
  double tau_max = 0.0;
  double sigma_c = 0.0;      ///< buckling strength / E1
  WaveVector critical_k;
  ModeClass mode_class = ModeClass::none;
  BandDiagram diagram;

  /// sigma_y / E1 for a base material with the given sigma1 / E1.
  double sigma_y(double sigma1_over_e1) const;
  double sigma_y(const BaseMaterial& m) const { return sigma_y(m.sigma1_over_e1); }
};

struct AnalysisOptions {
  InterpolationParams interp;
  double nu = 1.0 / 3.0;
  MacroLoad load;
  bool buckling = true;
  BucklingOptions bloch;
};

DesignReport analyze_design(const PeriodicMesh& mesh, const Vec& rho_bar, const AnalysisOptions& options = {});

}  // namespace archmat
