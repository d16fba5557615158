#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace archmat {

struct GradientCheckOptions {
  std::vector<int> sizes{4, 8};
  std::uint64_t seed = 1;
  int samples = 20;     ///< elements per size (all elements if fewer)
  double step = 1e-6;      ///< central difference step in density
  double step_tau = 1e-4;  ///< step for quantities involving eigenvalues
  double tol = 1e-4;
  double tol_tau = 1e-3;
};

struct GradientCheckEntry {
  std::string quantity;
  int n = 0;
  int element = 0;
  double analytic = 0.0;
  double fd = 0.0;
  double rel_err = 0.0;
  double tol = 0.0;

  bool pass() const { return rel_err < tol; }
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;

  bool all_pass() const;
  /// Largest relative error of one quantity over all sizes.
  double max_rel_err(const std::string& quantity) const;
  std::vector<std::string> quantities() const;
};

/// Central finite differences against the analytic gradients on random
/// density fields: E_bar, KS of von Mises, KS of the buckling eigenvalues
/// (all with respect to the physical density) and the objective and
/// constraints of a mixed strength-stiffness problem with respect to the
/// design variables. rel_err = |a - fd| / max(|a|, |fd|, 1e-3 max_e |a_e|).
GradientCheckReport check_gradients(const GradientCheckOptions& options = {});

void write_gradient_check_csv(std::ostream& os, const GradientCheckReport& report);

}  // namespace archmat
