#pragma once

#include <string>
#include <vector>

namespace archmat {

struct BaseMaterial {
  std::string name;
  double e1_gpa = 0.0;         ///< Young's modulus
  double rho1 = 0.0;           ///< mass density, kg/m^3
  double sigma1_over_e1 = 0.0; ///< relative yield strength

  void validate() const;
};

/// Steel, Epoxy, PC, PC-Nano and TPU.
const std::vector<BaseMaterial>& material_db();
/// Case-sensitive lookup; throws config-error for unknown names.
const BaseMaterial& find_material(const std::string& name);

}  // namespace archmat
