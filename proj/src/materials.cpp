#include "archmat/materials.hpp"

#include "archmat/types.hpp"

namespace archmat {

void BaseMaterial::validate() const {
  if (!(e1_gpa > 0.0) || !(rho1 > 0.0)) throw invalid_material("modulus and density of '" + name + "' must be positive");
  if (!(sigma1_over_e1 > 0.0 && sigma1_over_e1 < 1.0))
    throw invalid_material("relative yield strength of '" + name + "' must lie in (0, 1)");
}

const std::vector<BaseMaterial>& material_db() {
  static const std::vector<BaseMaterial> db{
      {"Steel", 215.0, 7800.0, 0.002},
      {"Epoxy", 3.08, 1400.0, 0.023},
      {"PC", 62.0, 1400.0, 0.044},
      {"PC-Nano", 350.0, 2600.0, 0.113},
      {"TPU", 0.012, 1190.0, 0.333},
  };
  return db;
}

const BaseMaterial& find_material(const std::string& name) {
  for (const auto& m : material_db())
    if (m.name == name) return m;
  std::string known;
  for (const auto& m : material_db()) known += (known.empty() ? "" : ", ") + m.name;
  throw config_error("unknown material '" + name + "' (known: " + known + ")");
}

}  // namespace archmat
