#include "archmat/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "archmat/cli_io.hpp"
#include "archmat/optimizer.hpp"
#include "archmat/sensitivities.hpp"

namespace archmat {

bool GradientCheckReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradientCheckEntry& e) { return e.pass(); });
}

double GradientCheckReport::max_rel_err(const std::string& q) const {
  double m = 0.0;
  for (const auto& e : entries)
    if (e.quantity == q) m = std::max(m, e.rel_err);
  return m;
}

std::vector<std::string> GradientCheckReport::quantities() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (std::find(out.begin(), out.end(), e.quantity) == out.end()) out.push_back(e.quantity);
  return out;
}

namespace {

struct PhysicalValues {
  double ebar = 0.0;
  double ks_vm = 0.0;
  double ks_tau = 0.0;
  double scale_vm = 1.0;
  double scale_tau = 1.0;
  Vec g_ebar, g_vm, g_tau;
};

constexpr double zeta = 100.0;

BucklingOptions check_buckling() {
  BucklingOptions b;
  b.bands = 4;
  b.n_seg = 2;
  b.k_offset = 1e-2;
  b.eigen.dense_threshold = 1 << 20;
  return b;
}

// Values with the KS scales taken from `frozen` when given.
PhysicalValues physical(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& rho,
                        const PhysicalValues* frozen, bool gradients) {
  const InterpolationParams ip;
  const MacroLoad load;
  const Vec ek = interpolate(rho, ip, Branch::stiffness), dek = interpolate_derivative(rho, ip, Branch::stiffness);
  const Vec es = interpolate(rho, ip, Branch::stress), des = interpolate_derivative(rho, ip, Branch::stress);
  const Vec eg = interpolate(rho, ip, Branch::geometric), deg = interpolate_derivative(rho, ip, Branch::geometric);
  const Homogenization hom = homogenize(mesh, elem, ek);
  const Vec3 eps0 = macro_strain(hom.effective, load);
  const MicrostressState st = element_stresses(mesh, elem, es, hom.solutions, eps0);
  const BucklingProblem bp(mesh, elem, ek, eg, st);
  const BucklingOptions bo = check_buckling();
  const BucklingAnalysis ba = buckling_strength(bp, ibz_path(bo.n_seg), bo);

  PhysicalValues v;
  v.ebar = hom.effective.e_bar;
  v.scale_vm = frozen ? frozen->scale_vm : st.vm.cwiseAbs().maxCoeff();
  v.ks_vm = v.scale_vm * ks(st.vm / v.scale_vm, zeta);
  std::vector<double> taus;
  for (const auto& s : ba.diagram.solves) taus.insert(taus.end(), s.tau.data(), s.tau.data() + s.tau.size());
  const Vec tau = Eigen::Map<const Vec>(taus.data(), static_cast<Eigen::Index>(taus.size()));
  v.scale_tau = frozen ? frozen->scale_tau : tau.cwiseAbs().maxCoeff();
  v.ks_tau = v.scale_tau * ks(tau / v.scale_tau, zeta);
  if (!gradients) return v;

  v.g_ebar = grad_ebar(grad_elasticity(mesh, elem, hom, ek, dek), hom.effective);
  v.g_vm = adjoint_gradient(mesh, elem, hom, ek, dek, eps0,
                            vm_sensitivity(elem, st, es, des, ks_weights(st.vm / v.scale_vm, zeta)));
  const Vec w = ks_weights(tau / v.scale_tau, zeta);
  std::vector<Vec> ws;
  Eigen::Index off = 0;
  for (const auto& s : ba.diagram.solves) {
    ws.push_back(w.segment(off, s.tau.size()));
    off += s.tau.size();
  }
  v.g_tau = adjoint_gradient(mesh, elem, hom, ek, dek, eps0, tau_sensitivity(mesh, elem, st, eg, deg, dek, ba.diagram, ws));
  return v;
}

double rel_err(double a, double fd, double floor) {
  return std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
}

}  // namespace

GradientCheckReport check_gradients(const GradientCheckOptions& opt) {
  if (opt.samples < 1) throw config_error("gradient check needs at least one sample element");
  if (!(opt.step > 0.0) || !(opt.step_tau > 0.0)) throw config_error("finite difference step must be positive");
  GradientCheckReport report;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.2, 0.8);

  for (int n : opt.sizes) {
    const PeriodicMesh mesh = build_mesh(n);
    const ElementMatrices elem = element_matrices(1.0 / 3.0, mesh.h());
    const int ne = mesh.element_count();
    std::vector<int> idx(ne);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(ne, opt.samples));

    auto record = [&](const std::string& q, int e, double a, double fd, double floor, double tol) {
      report.entries.push_back({q, n, e, a, fd, rel_err(a, fd, floor), tol});
    };

    // Physical-density gradients.
    Vec rho(ne);
    for (auto& r : rho) r = uni(rng);
    const PhysicalValues base = physical(mesh, elem, rho, nullptr, true);
    auto perturbed = [&](int e, double h) {
      Vec rp = rho, rm = rho;
      rp[e] += h;
      rm[e] -= h;
      return std::pair{physical(mesh, elem, rp, &base, false), physical(mesh, elem, rm, &base, false)};
    };
    for (int e : idx) {
      const auto [p, m] = perturbed(e, opt.step);
      const double h2 = 2.0 * opt.step;
      record("e_bar", e, base.g_ebar[e], (p.ebar - m.ebar) / h2, 1e-3 * base.g_ebar.cwiseAbs().maxCoeff(), opt.tol);
      record("ks_vm", e, base.g_vm[e], (p.ks_vm - m.ks_vm) / h2, 1e-3 * base.g_vm.cwiseAbs().maxCoeff(), opt.tol);
      const auto [pt, mt] = perturbed(e, opt.step_tau);
      record("ks_tau", e, base.g_tau[e], (pt.ks_tau - mt.ks_tau) / (2.0 * opt.step_tau),
             1e-3 * base.g_tau.cwiseAbs().maxCoeff(), opt.tol_tau);
    }

    // Full chain to the design variables.
    OptimizationProblem prm;
    prm.gamma1 = 0.5;
    prm.sigma_star = 0.5;
    prm.e_star = 0.05;
    prm.symmetric = false;
    prm.filter_radius = 1.5 * mesh.h();
    prm.buckling = check_buckling();
    const ProblemContext ctx(prm, mesh);
    const double beta = 4.0, f_dil = 0.6;
    Vec x(ne);
    for (auto& r : x) r = uni(rng);
    const Evaluation ev = evaluate_problem(ctx, x, beta, f_dil, true);
    std::vector<double> scales;
    for (const auto& k : ev.ks_records) scales.push_back(k.scale);
    const double obj_floor = 1e-3 * ev.d_objective.cwiseAbs().maxCoeff();
    auto shifted = [&](int e, double h) {
      Vec xp = x, xm = x;
      xp[e] += h;
      xm[e] -= h;
      return std::pair{evaluate_problem(ctx, xp, beta, f_dil, false, &scales),
                       evaluate_problem(ctx, xm, beta, f_dil, false, &scales)};
    };
    for (int e : idx) {
      const auto [pt, mt] = shifted(e, opt.step_tau);
      record("chain_objective", e, ev.d_objective[e], (pt.objective - mt.objective) / (2.0 * opt.step_tau), obj_floor,
             opt.tol_tau);
      const auto [p, m] = shifted(e, opt.step);
      const double h2 = 2.0 * opt.step;
      for (Eigen::Index c = 0; c < ev.constraints.size(); ++c) {
        const double floor = 1e-3 * ev.d_constraints.row(c).cwiseAbs().maxCoeff();
        record("chain_" + ev.constraint_names[static_cast<size_t>(c)], e, ev.d_constraints(c, e),
               (p.constraints[c] - m.constraints[c]) / h2, floor, opt.tol);
      }
    }
  }
  return report;
}

void write_gradient_check_csv(std::ostream& os, const GradientCheckReport& r) {
  os << "quantity,n,element,analytic,fd,rel_err,tol,pass\n";
  for (const auto& e : r.entries)
    os << e.quantity << ',' << e.n << ',' << e.element << ',' << format_double(e.analytic) << ','
       << format_double(e.fd) << ',' << format_double(e.rel_err) << ',' << format_double(e.tol) << ','
       << (e.pass() ? "true" : "false") << '\n';
}

}  // namespace archmat
