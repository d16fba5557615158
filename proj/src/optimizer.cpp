#include "archmat/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace archmat {

double ks(const Vec& values, double zeta) {
  if (values.size() == 0) throw domain_error("KS aggregation of an empty list");
  if (!(zeta > 0.0)) throw domain_error("KS sharpness must be positive");
  const double vmax = values.maxCoeff();
  const double s = (zeta * (values.array() - vmax)).exp().sum();
  return vmax + std::log(s) / zeta;
}

Vec ks_weights(const Vec& values, double zeta) {
  if (values.size() == 0) throw domain_error("KS aggregation of an empty list");
  if (!(zeta > 0.0)) throw domain_error("KS sharpness must be positive");
  const double vmax = values.maxCoeff();
  Vec w = (zeta * (values.array() - vmax)).exp().matrix();
  return w / w.sum();
}

void KSParams::validate() const {
  if (!(zeta > 0.0)) throw config_error("KS sharpness zeta must be positive");
  if (!kappa1 && !kappa2) throw config_error("kappa1 and kappa2 cannot both be 0");
}

bool KSRecord::bounds_hold() const {
  return value >= max && value <= max + std::log(static_cast<double>(count)) / zeta;
}

double OptimizationProblem::beta_at(int iteration) const {
  const auto stage = static_cast<size_t>(iteration / beta_interval);
  return beta_schedule[std::min(stage, beta_schedule.size() - 1)];
}

void OptimizationProblem::validate() const {
  if (!(gamma1 >= 0.0 && gamma1 <= 1.0)) throw config_error("gamma1 must lie in [0, 1]");
  if (!(f_star > 0.0 && f_star < 1.0)) throw config_error("f_star must lie in (0, 1)");
  if (!(sigma_star >= 0.0) || !(e_star >= 0.0)) throw config_error("sigma_star and e_star must be nonnegative");
  load.validate();
  material.validate();
  if (gamma1 > 0.0) ks.validate();
  if (!(ks.zeta > 0.0)) throw config_error("KS sharpness zeta must be positive");
  interp.validate();
  if (!(nu >= 0.0 && nu < 0.5)) throw config_error("Poisson ratio must lie in [0, 0.5)");
  if (!(filter_radius > 0.0)) throw config_error("filter radius must be positive");
  if (!(delta_eta >= 0.0 && delta_eta < 0.5)) throw config_error("delta_eta must lie in [0, 0.5)");
  if (beta_schedule.empty()) throw config_error("beta schedule must not be empty");
  for (double b : beta_schedule)
    if (!(b > 0.0)) throw config_error("beta values must be positive");
  if (beta_interval < 1 || max_iterations < 1 || volume_update_interval < 1 || checkpoint_interval < 1)
    throw config_error("iteration intervals must be positive");
  if (!(tolerance > 0.0)) throw config_error("convergence tolerance must be positive");
  if (!(mma.move > 0.0 && mma.move <= 1.0)) throw config_error("move limit must lie in (0, 1]");
  if (buckling.bands < 1) throw config_error("band count must be at least 1");
  if (buckling.n_seg < 2) throw config_error("k-path needs at least 2 segments per edge");
}

ProblemContext::ProblemContext(const OptimizationProblem& problem, const PeriodicMesh& mesh)
    : problem_(problem),
      mesh_(mesh),
      elem_(element_matrices(problem.nu, mesh.h())),
      filter_(mesh, problem.filter_radius) {
  problem_.validate();
}

namespace {

struct Aggregate {
  double value = 0.0;
  Vec weights;  ///< dvalue / dv
  KSRecord record;
};

// S * KS(v / S) with S = max |v| frozen for differentiation.
Aggregate aggregate(const std::string& name, const Vec& v, double zeta, const std::vector<double>* frozen,
                    size_t slot) {
  Aggregate a;
  double scale = v.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  if (frozen) {
    if (slot >= frozen->size()) throw domain_error("too few frozen KS scales");
    scale = (*frozen)[slot];
  }
  const Vec vn = v / scale;
  const double k = ks(vn, zeta);
  a.value = scale * k;
  a.weights = ks_weights(vn, zeta);
  a.record = {name, vn.maxCoeff(), k, static_cast<int>(v.size()), zeta, scale};
  return a;
}

}  // namespace

Evaluation evaluate_problem(const ProblemContext& ctx, const Vec& x, double beta, double f_dil_star, bool gradients,
                            const std::vector<double>* frozen_scales) {
  const OptimizationProblem& prm = ctx.problem();
  const PeriodicMesh& mesh = ctx.mesh();
  const ElementMatrices& elem = ctx.elem();
  const int ne = mesh.element_count();
  if (x.size() != ne) throw domain_error("design vector size does not match the mesh");
  if (!(f_dil_star > 0.0)) throw domain_error("dilated volume bound must be positive");

  Evaluation ev;
  const Vec rho = prm.symmetric ? enforce_symmetry(mesh, x) : x;
  ev.fields = robust_realizations(ctx.filter(), rho, beta, prm.delta_eta);
  const DensityField& er = ev.fields.eroded;
  ev.f_eroded = volume_fraction(mesh, er.rho_bar);
  ev.f_intermediate = volume_fraction(mesh, ev.fields.intermediate.rho_bar);
  ev.f_dilated = volume_fraction(mesh, ev.fields.dilated.rho_bar);

  const Vec ek = interpolate(er.rho_bar, prm.interp, Branch::stiffness);
  const Vec dek = interpolate_derivative(er.rho_bar, prm.interp, Branch::stiffness);
  const Vec es = interpolate(er.rho_bar, prm.interp, Branch::stress);
  const Vec des = interpolate_derivative(er.rho_bar, prm.interp, Branch::stress);
  const Homogenization hom = homogenize(mesh, elem, ek);
  ev.e_bar = hom.effective.e_bar;
  const Vec3 eps0 = macro_strain(hom.effective, prm.load);
  const MicrostressState st = element_stresses(mesh, elem, es, hom.solutions, eps0);
  const double s1 = prm.material.sigma1_over_e1;
  ev.sigma_y = s1 / st.max_vm;
  ev.sigma_c = std::numeric_limits<double>::quiet_NaN();
  const Vec vm_rel = st.vm / s1;

  Vec grad_e;
  if (gradients) grad_e = grad_ebar(grad_elasticity(mesh, elem, hom, ek, dek), hom.effective);

  // Objective.
  Vec dobj = Vec::Zero(ne);
  double obj = 0.0;
  if (prm.gamma1 < 1.0) {
    obj += (1.0 - prm.gamma1) / ev.e_bar;
    if (gradients) dobj -= (1.0 - prm.gamma1) / (ev.e_bar * ev.e_bar) * grad_e;
  }
  if (prm.gamma1 > 0.0) {
    Vec eg, deg;
    BucklingAnalysis ba;
    std::vector<Eigen::Index> tau_offset;
    Eigen::Index count = prm.ks.kappa1 ? ne : 0;
    if (prm.ks.kappa2) {
      eg = interpolate(er.rho_bar, prm.interp, Branch::geometric);
      deg = interpolate_derivative(er.rho_bar, prm.interp, Branch::geometric);
      const BucklingProblem bp(mesh, elem, ek, eg, st);
      ba = buckling_strength(bp, ibz_path(prm.buckling.n_seg), prm.buckling);
      ev.sigma_c = ba.result.sigma_c;
      for (const auto& s : ba.diagram.solves) {
        tau_offset.push_back(count);
        count += s.tau.size();
      }
    }
    Vec values(count);
    if (prm.ks.kappa1) values.head(ne) = vm_rel;
    for (size_t j = 0; j < tau_offset.size(); ++j)
      values.segment(tau_offset[j], ba.diagram.solves[j].tau.size()) = ba.diagram.solves[j].tau;
    const Aggregate agg = aggregate("strength", values, prm.ks.zeta, frozen_scales, ev.ks_records.size());
    obj += prm.gamma1 * agg.value;
    ev.ks_records.push_back(agg.record);
    if (gradients) {
      StrainSensitivity sens = StrainSensitivity::zero(ne);
      if (prm.ks.kappa1) sens += vm_sensitivity(elem, st, es, des, agg.weights.head(ne) / s1);
      if (prm.ks.kappa2) {
        std::vector<Vec> w;
        for (size_t j = 0; j < tau_offset.size(); ++j)
          w.push_back(agg.weights.segment(tau_offset[j], ba.diagram.solves[j].tau.size()));
        sens += tau_sensitivity(mesh, elem, st, eg, deg, dek, ba.diagram, w);
      }
      dobj += prm.gamma1 * adjoint_gradient(mesh, elem, hom, ek, dek, eps0, sens);
    }
  }
  ev.objective = obj;
  if (gradients) ev.d_objective = chain_to_design(ctx.filter(), er, dobj, prm.symmetric);

  // Constraints.
  std::vector<Vec> dcons;
  std::vector<double> cons;
  if (prm.sigma_star > 0.0) {
    const Aggregate agg = aggregate("yield", vm_rel, prm.ks.zeta, frozen_scales, ev.ks_records.size());
    ev.ks_records.push_back(agg.record);
    ev.constraint_names.push_back("yield");
    cons.push_back(prm.sigma_star * agg.value - 1.0);
    if (gradients) {
      const StrainSensitivity sens = vm_sensitivity(elem, st, es, des, agg.weights / s1);
      const Vec g = prm.sigma_star * adjoint_gradient(mesh, elem, hom, ek, dek, eps0, sens);
      dcons.push_back(chain_to_design(ctx.filter(), er, g, prm.symmetric));
    }
  }
  if (prm.e_star > 0.0) {
    ev.constraint_names.push_back("stiffness");
    cons.push_back(1.0 - ev.e_bar / prm.e_star);
    if (gradients) dcons.push_back(chain_to_design(ctx.filter(), er, -grad_e / prm.e_star, prm.symmetric));
  }
  ev.constraint_names.push_back("volume");
  cons.push_back(ev.f_dilated / f_dil_star - 1.0);
  if (gradients) {
    const Vec g = mesh.element_volumes() / (mesh.cell_size() * f_dil_star);
    dcons.push_back(chain_to_design(ctx.filter(), ev.fields.dilated, g, prm.symmetric));
  }
  ev.constraints = Eigen::Map<Vec>(cons.data(), static_cast<Eigen::Index>(cons.size()));
  if (gradients) {
    ev.d_constraints.resize(static_cast<Eigen::Index>(dcons.size()), ne);
    for (size_t i = 0; i < dcons.size(); ++i) ev.d_constraints.row(static_cast<Eigen::Index>(i)) = dcons[i].transpose();
  }
  return ev;
}

Vec bar_lattice_seed(const PeriodicMesh& mesh, double f) {
  if (!(f > 0.0 && f < 1.0)) throw domain_error("seed volume fraction must lie in (0, 1)");
  const int n = mesh.n();
  const double t = 1.0 - std::sqrt(1.0 - f);
  Vec x(mesh.element_count());
  for (int ey = 0; ey < n; ++ey)
    for (int ex = 0; ex < n; ++ex) {
      // Fraction of each element covered by the central bars, in x and y.
      auto cover = [&](int i) {
        const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
        const double a = std::max(lo, 0.5 - 0.5 * t), b = std::min(hi, 0.5 + 0.5 * t);
        return std::max(0.0, b - a) * n;
      };
      const double cx = cover(ex), cy = cover(ey);
      x(mesh.element_index(ex, ey)) = cx + cy - cx * cy;
    }
  return x;
}

namespace {

void format_value(std::ostream& os, double v) {
  char buf[32];
  if (std::isnan(v))
    std::snprintf(buf, sizeof buf, "nan");
  else if (std::isinf(v))
    std::snprintf(buf, sizeof buf, v > 0 ? "inf" : "-inf");
  else
    std::snprintf(buf, sizeof buf, "%.10e", v);
  os << buf;
}

}  // namespace

void write_log_header(std::ostream& os, const std::vector<std::string>& constraint_names) {
  os << "iter,objective,e_bar,sigma_y,sigma_c,f_intermediate,beta";
  for (const auto& c : constraint_names) os << ",g_" << c;
  os << ",change,ks_name,ks_max,ks_value,ks_count,ks_zeta\n";
}

void write_log_row(std::ostream& os, const IterationRecord& r) {
  os << r.iter;
  for (double v : {r.objective, r.e_bar, r.sigma_y, r.sigma_c, r.f_intermediate, r.beta}) {
    os << ',';
    format_value(os, v);
  }
  for (Eigen::Index i = 0; i < r.constraints.size(); ++i) {
    os << ',';
    format_value(os, r.constraints(i));
  }
  os << ',';
  format_value(os, r.change);
  // Several aggregations per iteration are joined with '|'.
  std::string names;
  for (const auto& k : r.ks_records) names += (names.empty() ? "" : "|") + k.name;
  os << ',' << names;
  for (int field = 0; field < 4; ++field) {
    os << ',';
    for (size_t j = 0; j < r.ks_records.size(); ++j) {
      if (j) os << '|';
      const KSRecord& k = r.ks_records[j];
      if (field == 0) format_value(os, k.max);
      if (field == 1) format_value(os, k.value);
      if (field == 2) os << k.count;
      if (field == 3) format_value(os, k.zeta);
    }
  }
  os << '\n';
}

OptimizationResult optimize(const OptimizationProblem& problem, const PeriodicMesh& mesh, const Vec& seed,
                            const OptimizeCallbacks& cb) {
  const ProblemContext ctx(problem, mesh);
  const int ne = mesh.element_count();
  if (seed.size() != ne) throw domain_error("seed design size does not match the mesh");
  if (seed.minCoeff() < 0.0 || seed.maxCoeff() > 1.0) throw domain_error("seed design must lie in [0, 1]");

  OptimizationResult out;
  Vec x = problem.symmetric ? enforce_symmetry(mesh, seed) : seed;
  const int m = (problem.sigma_star > 0.0 ? 1 : 0) + (problem.e_star > 0.0 ? 1 : 0) + 1;
  Mma mma(ne, m, Vec::Zero(ne), Vec::Ones(ne), problem.mma);
  double f_dil_star = problem.f_star;
  double j0 = 0.0;
  const double beta_final = problem.beta_schedule.back();
  int iter = 0;
  Evaluation ev;
  try {
    for (iter = 0; iter < problem.max_iterations; ++iter) {
      const double beta = problem.beta_at(iter);
      if (iter == 0) {
        const RobustTriple seed_fields = robust_realizations(ctx.filter(), x, beta, problem.delta_eta);
        f_dil_star = problem.f_star * volume_fraction(mesh, seed_fields.dilated.rho_bar) /
                     volume_fraction(mesh, seed_fields.intermediate.rho_bar);
      } else if (iter % problem.volume_update_interval == 0) {
        f_dil_star = problem.f_star * ev.f_dilated / ev.f_intermediate;
      }
      ev = evaluate_problem(ctx, x, beta, f_dil_star, true);
      if (iter == 0) {
        j0 = ev.objective;
        out.constraint_names = ev.constraint_names;
        if (!(std::abs(j0) > 0.0) || !std::isfinite(j0)) throw analysis_error("initial objective is not usable");
      }
      const Vec xnew = mma.update(x, ev.objective / j0, ev.d_objective / j0, ev.constraints, ev.d_constraints);
      const double change = (xnew - x).cwiseAbs().maxCoeff();

      IterationRecord rec;
      rec.iter = iter;
      rec.objective = ev.objective / j0;
      rec.e_bar = ev.e_bar;
      rec.sigma_y = ev.sigma_y;
      rec.sigma_c = ev.sigma_c;
      rec.f_intermediate = ev.f_intermediate;
      rec.beta = beta;
      rec.constraints = ev.constraints;
      rec.change = change;
      rec.ks_records = ev.ks_records;
      if (cb.on_iteration) cb.on_iteration(rec);
      out.history.push_back(std::move(rec));
      if (cb.checkpoint && (iter + 1) % problem.checkpoint_interval == 0)
        cb.checkpoint(iter + 1, ev.fields.intermediate.rho_bar);

      x = xnew;
      if (beta == beta_final && problem.beta_at(iter + 1) == beta_final && change < problem.tolerance) {
        out.converged = true;
        ++iter;
        break;
      }
    }
  } catch (const Error& e) {
    if (cb.checkpoint && ev.fields.intermediate.rho_bar.size() == ne) cb.checkpoint(iter, ev.fields.intermediate.rho_bar);
    throw Error(e.kind(), e.code(), "iteration " + std::to_string(iter) + ": " + e.what());
  }
  out.x = x;
  const Vec rho = problem.symmetric ? enforce_symmetry(mesh, x) : x;
  out.fields = robust_realizations(ctx.filter(), rho, problem.beta_at(std::max(iter - 1, 0)), problem.delta_eta);
  return out;
}

}  // namespace archmat
