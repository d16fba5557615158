#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "archmat/analysis.hpp"
#include "archmat/mma.hpp"
#include "archmat/sensitivities.hpp"

namespace archmat {

/// (1/zeta) ln sum exp(zeta v), evaluated with a max shift. Throws on an
/// empty list or nonpositive zeta.
double ks(const Vec& values, double zeta);
/// dKS/dv, the softmax weights of zeta v.
Vec ks_weights(const Vec& values, double zeta);

struct KSParams {
  double zeta = 100.0;
  bool kappa1 = true;  ///< von Mises stresses enter the strength KS
  bool kappa2 = true;  ///< buckling eigenvalues enter the strength KS

  void validate() const;
};

struct OptimizationProblem {
  double gamma1 = 0.0;      ///< 0: stiffness, 1: strength
  double sigma_star = 0.0;  ///< yield-strength lower bound / E1; 0 disables
  double e_star = 0.0;      ///< stiffness lower bound / E1; 0 disables
  double f_star = 0.2;
  MacroLoad load;
  BaseMaterial material = find_material("PC");
  KSParams ks;
  InterpolationParams interp;
  double nu = 1.0 / 3.0;
  double filter_radius = 0.03;
  double delta_eta = 0.05;
  std::vector<double> beta_schedule{1.0, 2.0, 4.0, 8.0};
  int beta_interval = 50;
  int max_iterations = 400;
  double tolerance = 1e-3;
  int volume_update_interval = 20;
  int checkpoint_interval = 25;
  bool symmetric = true;
  MmaParams mma;
  /// Bloch sweep used inside the loop.
  BucklingOptions buckling{.bands = 6, .n_seg = 2, .k_offset = 1e-3, .eigen = {.deflation_check = false}};

  bool needs_buckling() const { return gamma1 > 0.0 && ks.kappa2; }
  bool needs_stress() const { return (gamma1 > 0.0 && ks.kappa1) || sigma_star > 0.0; }
  double beta_at(int iteration) const;
  void validate() const;
};

/// One aggregation as performed: values normalized by their maximum.
struct KSRecord {
  std::string name;
  double max = 0.0;
  double value = 0.0;
  int count = 0;
  double zeta = 0.0;
  double scale = 1.0;  ///< S, the normalization of the aggregated values

  /// max <= KS <= max + ln(count) / zeta.
  bool bounds_hold() const;
};

struct Evaluation {
  double objective = 0.0;  ///< unnormalized
  Vec d_objective;         ///< design space
  std::vector<std::string> constraint_names;
  Vec constraints;         ///< <= 0 when satisfied
  Mat d_constraints;       ///< constraints x design variables

  double e_bar = 0.0;
  double sigma_y = 0.0;  ///< eroded design, / E1
  double sigma_c = 0.0;  ///< eroded design, / E1; NaN when not analyzed
  double f_eroded = 0.0;
  double f_intermediate = 0.0;
  double f_dilated = 0.0;
  std::vector<KSRecord> ks_records;
  RobustTriple fields;
};

/// Mesh, element matrices and filter shared by all evaluations of a run.
class ProblemContext {
 public:
  ProblemContext(const OptimizationProblem& problem, const PeriodicMesh& mesh);

  const OptimizationProblem& problem() const { return problem_; }
  const PeriodicMesh& mesh() const { return mesh_; }
  const ElementMatrices& elem() const { return elem_; }
  const DensityFilter& filter() const { return filter_; }

 private:
  OptimizationProblem problem_;
  PeriodicMesh mesh_;
  ElementMatrices elem_;
  DensityFilter filter_;
};

/// Objective, constraints and design-space gradients at design x. The
/// strength and stiffness measures use the eroded realization, the volume
/// constraint the dilated one with bound f_dil_star. Each aggregation is
/// S KS(v / S) with S = max |v| unless frozen_scales supplies S in the order
/// of Evaluation::ks_records.
Evaluation evaluate_problem(const ProblemContext& ctx, const Vec& x, double beta, double f_dil_star,
                            bool gradients = true, const std::vector<double>* frozen_scales = nullptr);

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;  ///< normalized by the first iteration
  double e_bar = 0.0;
  double sigma_y = 0.0;
  double sigma_c = 0.0;
  double f_intermediate = 0.0;
  double beta = 0.0;
  Vec constraints;
  double change = 0.0;
  std::vector<KSRecord> ks_records;
};

struct OptimizationResult {
  Vec x;
  RobustTriple fields;  ///< realizations of the final design at the final beta
  std::vector<IterationRecord> history;
  std::vector<std::string> constraint_names;
  bool converged = false;
};

struct OptimizeCallbacks {
  /// Receives every iteration as it is completed.
  std::function<void(const IterationRecord&)> on_iteration;
  /// Called with the current intermediate physical density every
  /// checkpoint_interval iterations and before an aborted run rethrows.
  std::function<void(int iter, const Vec& rho_bar)> checkpoint;
};

/// Orthogonal bar lattice of volume fraction f aligned with the cell axes
/// (bar width 1 - sqrt(1 - f)).
Vec bar_lattice_seed(const PeriodicMesh& mesh, double f);

OptimizationResult optimize(const OptimizationProblem& problem, const PeriodicMesh& mesh, const Vec& seed,
                            const OptimizeCallbacks& callbacks = {});

/// Iteration log, one row per iteration with fixed formatting.
void write_log_header(std::ostream& os, const std::vector<std::string>& constraint_names);
void write_log_row(std::ostream& os, const IterationRecord& rec);

}  // namespace archmat
