#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "archmat/analysis.hpp"
#include "archmat/optimizer.hpp"

namespace archmat {

// ---- density grids -------------------------------------------------------

struct DensityGrid {
  int n = 0;
  Vec values;  ///< element order ex + n * ey
};

/// Header "n_x n_y", then n_y rows (ey = 0 first) of n_x values.
void write_grid(std::ostream& os, const DensityGrid& grid);
DensityGrid read_grid(std::istream& is);
void save_grid(const std::filesystem::path& path, const DensityGrid& grid);
DensityGrid load_grid(const std::filesystem::path& path);
/// 8-bit binary PGM, solid black, top row = largest ey.
void save_pgm(const std::filesystem::path& path, const DensityGrid& grid);

// ---- run configuration ---------------------------------------------------

struct RunConfig {
  int n = 64;
  OptimizationProblem problem;
  /// Analysis of the final design.
  BucklingOptions final_buckling;
  std::string seed_design = "bars";  ///< "bars" or a grid file
  std::filesystem::path output_dir = "out";
  std::uint64_t rng_seed = 0x5eed5eedULL;
};

/// Parses a JSON object; unknown keys and wrong types are config errors.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Documented defaults as a JSON object, usable as a config template.
std::string default_config_json();

/// Thread count from ARCHMAT_NUM_THREADS (default 1).
int thread_count_from_env();

// ---- failure classification and scaling ----------------------------------

enum class FailureMode { yield, buckling, simultaneous };
std::string to_string(FailureMode m);

/// simultaneous when |sigma_c - sigma_y| / min <= tie, else the smaller one.
FailureMode classify_failure(double sigma_c, double sigma_y, double tie = 0.02);

struct MaterialStrength {
  BaseMaterial material;
  double sigma_y = 0.0;  ///< / E1
  double sigma_c = 0.0;  ///< / E1
  double min_strength = 0.0;
  FailureMode mode = FailureMode::yield;
};

std::vector<MaterialStrength> classify_materials(const DesignReport& report,
                                                 const std::vector<BaseMaterial>& materials);

struct ScalingFit {
  double c0 = 0.0;
  double n0 = 0.0;
};

/// Two-point log-log fit through the two lowest-density points.
ScalingFit fit_scaling(std::vector<std::pair<double, double>> points);

// ---- tables --------------------------------------------------------------

struct SweepRow {
  std::string design;
  MaterialStrength strength;
  double volume_fraction = 0.0;
  double e_bar = 0.0;
  ModeClass mode_class = ModeClass::none;
};

void write_sweep_header(std::ostream& os);
void write_sweep_row(std::ostream& os, const SweepRow& row);

/// Reads a table with a header row; returns fits per material. Columns used:
/// material (optional), f, min_strength.
std::vector<std::pair<std::string, ScalingFit>> fit_table(std::istream& is);

/// JSON report of one evaluated design for one material.
std::string evaluation_json(const DesignReport& report, const BaseMaterial& material);

/// Machine-readable error object written to stderr by the CLI.
std::string error_json(const Error& e);

/// Round-trip double formatting.
std::string format_double(double v);

}  // namespace archmat
