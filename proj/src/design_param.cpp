#include "archmat/design_param.hpp"

#include <algorithm>
#include <cmath>

#include "archmat/sparse_cholesky.hpp"

namespace archmat {

void InterpolationParams::validate() const {
  if (!(p >= 1.0)) throw config_error("SIMP penalization must be >= 1");
  if (!(e0_ratio > 0.0 && e0_ratio < 1e-2)) throw config_error("void floor E0/E1 must lie in (0, 1e-2)");
  if (!(eps_relax > 0.0)) throw config_error("stress relaxation must be positive");
}

Branch parse_branch(const std::string& name) {
  if (name == "stiffness") return Branch::stiffness;
  if (name == "geometric") return Branch::geometric;
  if (name == "stress") return Branch::stress;
  throw domain_error("unknown interpolation branch '" + name + "'");
}

Vec interpolate(const Vec& rho_bar, const InterpolationParams& prm, Branch branch, double e1) {
  Vec out(rho_bar.size());
  for (Eigen::Index e = 0; e < rho_bar.size(); ++e) {
    const double r = rho_bar(e);
    switch (branch) {
      case Branch::stiffness: out(e) = (std::pow(r, prm.p) * (1.0 - prm.e0_ratio) + prm.e0_ratio) * e1; break;
      case Branch::geometric: out(e) = std::pow(r, prm.p) * e1; break;
      case Branch::stress: out(e) = r / (prm.eps_relax * (1.0 - r) + r) * e1; break;
    }
  }
  return out;
}

Vec interpolate_derivative(const Vec& rho_bar, const InterpolationParams& prm, Branch branch, double e1) {
  Vec out(rho_bar.size());
  for (Eigen::Index e = 0; e < rho_bar.size(); ++e) {
    const double r = rho_bar(e);
    switch (branch) {
      case Branch::stiffness: out(e) = prm.p * std::pow(r, prm.p - 1.0) * (1.0 - prm.e0_ratio) * e1; break;
      case Branch::geometric: out(e) = prm.p * std::pow(r, prm.p - 1.0) * e1; break;
      case Branch::stress: {
        const double den = prm.eps_relax * (1.0 - r) + r;
        out(e) = prm.eps_relax / (den * den) * e1;
        break;
      }
    }
  }
  return out;
}

struct DensityFilter::Impl {
  SpMat system;
  SparseCholesky<double> llt;
};

DensityFilter::DensityFilter(const PeriodicMesh& mesh, double radius)
    : mesh_(mesh), radius_(radius), impl_(std::make_unique<Impl>()) {
  if (!(radius > 0.0)) throw domain_error("filter radius must be positive, got " + std::to_string(radius));
  const double l = length();
  const double h = mesh.h();
  const double gp = 1.0 / std::sqrt(3.0);
  const std::array<double, 4> xi_n{-1, 1, 1, -1}, eta_n{-1, -1, 1, 1};
  Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
  for (double xi : {-gp, gp})
    for (double eta : {-gp, gp}) {
      Eigen::Vector4d n, dx, dy;
      for (int a = 0; a < 4; ++a) {
        n(a) = 0.25 * (1 + xi * xi_n[a]) * (1 + eta * eta_n[a]);
        dx(a) = 0.25 * xi_n[a] * (1 + eta * eta_n[a]) * 2.0 / h;
        dy(a) = 0.25 * eta_n[a] * (1 + xi * xi_n[a]) * 2.0 / h;
      }
      ke += (l * l * (dx * dx.transpose() + dy * dy.transpose()) + n * n.transpose()) * 0.25 * h * h;
    }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.element_count()) * 16);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) trip.emplace_back(nodes[a], nodes[b], ke(a, b));
  }
  impl_->system.resize(mesh.node_count(), mesh.node_count());
  impl_->system.setFromTriplets(trip.begin(), trip.end());
  impl_->system.makeCompressed();
  if (!impl_->llt.factorize(impl_->system)) throw solver_error("filter matrix factorization failed");
}

DensityFilter::~DensityFilter() = default;
DensityFilter::DensityFilter(DensityFilter&&) noexcept = default;
DensityFilter& DensityFilter::operator=(DensityFilter&&) noexcept = default;

double DensityFilter::length() const noexcept { return radius_ / (2.0 * std::sqrt(3.0)); }

Vec DensityFilter::apply(const Vec& rho) const {
  if (rho.size() != mesh_.element_count()) throw domain_error("density field size does not match the mesh");
  const double quarter_area = 0.25 * mesh_.element_volume();
  Vec rhs = Vec::Zero(mesh_.node_count());
  for (int e = 0; e < mesh_.element_count(); ++e)
    for (int node : mesh_.element_nodes(e)) rhs(node) += quarter_area * rho(e);
  const Vec nodal = impl_->llt.solve(rhs);
  Vec out(mesh_.element_count());
  for (int e = 0; e < mesh_.element_count(); ++e) {
    double s = 0.0;
    for (int node : mesh_.element_nodes(e)) s += nodal(node);
    out(e) = 0.25 * s;
  }
  return out;
}

Vec DensityFilter::apply_transpose(const Vec& grad) const {
  if (grad.size() != mesh_.element_count()) throw domain_error("gradient size does not match the mesh");
  // F = V^-1 T^T A^-1 T, so F^T = T^T A^-1 T V^-1.
  Vec rhs = Vec::Zero(mesh_.node_count());
  for (int e = 0; e < mesh_.element_count(); ++e)
    for (int node : mesh_.element_nodes(e)) rhs(node) += 0.25 * grad(e);
  const Vec nodal = impl_->llt.solve(rhs);
  const double quarter_area = 0.25 * mesh_.element_volume();
  Vec out(mesh_.element_count());
  for (int e = 0; e < mesh_.element_count(); ++e) {
    double s = 0.0;
    for (int node : mesh_.element_nodes(e)) s += nodal(node);
    out(e) = quarter_area * s;
  }
  return out;
}

Vec pde_filter(const PeriodicMesh& mesh, const Vec& rho, double radius) { return DensityFilter(mesh, radius).apply(rho); }

Vec project(const Vec& rho_tilde, double eta, double beta) {
  if (!(eta > 0.0 && eta < 1.0)) throw domain_error("projection threshold must lie in (0, 1)");
  if (!(beta > 0.0)) throw domain_error("projection sharpness must be positive");
  const double a = std::tanh(beta * eta);
  const double den = a + std::tanh(beta * (1.0 - eta));
  Vec out(rho_tilde.size());
  for (Eigen::Index e = 0; e < rho_tilde.size(); ++e)
    out(e) = std::clamp((a + std::tanh(beta * (rho_tilde(e) - eta))) / den, 0.0, 1.0);
  return out;
}

Vec project_derivative(const Vec& rho_tilde, double eta, double beta) {
  const double den = std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta));
  Vec out(rho_tilde.size());
  for (Eigen::Index e = 0; e < rho_tilde.size(); ++e) {
    const double t = std::tanh(beta * (rho_tilde(e) - eta));
    out(e) = beta * (1.0 - t * t) / den;
  }
  return out;
}

DensityField realize(const DensityFilter& filter, const Vec& rho, double eta, double beta) {
  DensityField f;
  f.rho = rho;
  f.rho_tilde = filter.apply(rho);
  f.rho_bar = project(f.rho_tilde, eta, beta);
  f.eta = eta;
  f.beta = beta;
  return f;
}

RobustTriple robust_realizations(const DensityFilter& filter, const Vec& rho, double beta, double delta_eta) {
  if (!(delta_eta >= 0.0 && delta_eta < 0.5)) throw domain_error("threshold offset must lie in [0, 0.5)");
  RobustTriple t;
  t.delta_eta = delta_eta;
  t.intermediate = realize(filter, rho, 0.5, beta);
  t.eroded = t.intermediate;
  t.eroded.eta = 0.5 + delta_eta;
  t.eroded.rho_bar = project(t.eroded.rho_tilde, t.eroded.eta, beta);
  t.dilated = t.intermediate;
  t.dilated.eta = 0.5 - delta_eta;
  t.dilated.rho_bar = project(t.dilated.rho_tilde, t.dilated.eta, beta);
  return t;
}

Vec enforce_symmetry(const PeriodicMesh& mesh, const Vec& rho) {
  const int n = mesh.n();
  if (rho.size() != mesh.element_count()) throw domain_error("field size does not match the mesh");
  Vec out(rho.size());
  for (int ey = 0; ey < n; ++ey)
    for (int ex = 0; ex < n; ++ex) {
      const int rx = n - 1 - ex, ry = n - 1 - ey;
      const double s = rho(mesh.element_index(ex, ey)) + rho(mesh.element_index(rx, ey)) +
                       rho(mesh.element_index(ex, ry)) + rho(mesh.element_index(rx, ry)) +
                       rho(mesh.element_index(ey, ex)) + rho(mesh.element_index(ry, ex)) +
                       rho(mesh.element_index(ey, rx)) + rho(mesh.element_index(ry, rx));
      out(mesh.element_index(ex, ey)) = 0.125 * s;
    }
  return out;
}

Vec threshold(const Vec& rho_bar, double level) {
  if (!(level > 0.0 && level < 1.0)) throw domain_error("threshold level must lie in (0, 1)");
  return (rho_bar.array() >= level).cast<double>();
}

double volume_fraction(const PeriodicMesh& mesh, const Vec& rho_bar) {
  const Vec v = mesh.element_volumes();
  return v.dot(rho_bar) / v.sum();
}

}  // namespace archmat
