#include "archmat/bloch_buckling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace archmat {

namespace {

constexpr double pi = std::numbers::pi;

void check_k(const WaveVector& k) {
  if (!k.in_zone())
    throw domain_error("wave vector (" + std::to_string(k.k1) + ", " + std::to_string(k.k2) +
                       ") lies outside [-pi, pi]^2");
}

void check_snapshot(const PeriodicMesh& mesh, const Vec& moduli, const MicrostressState& state) {
  if (moduli.size() != mesh.element_count()) throw domain_error("modulus field size does not match the mesh");
  if (state.element_strain.cols() != mesh.element_count() || state.element_strain.rows() != 3)
    throw domain_error("microstress state does not match the mesh");
}

int offset_slot(int dx, int dy) { return (dx + 1) + 3 * (dy + 1); }

double norm1(const CSpMat& a) {
  double best = 0.0;
  for (int c = 0; c < a.outerSize(); ++c) {
    double s = 0.0;
    for (CSpMat::InnerIterator it(a, c); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

double backward_error(const CSpMat& k0, const CSpMat& ks, double tau, const CVec& x) {
  const CVec r = tau * (k0 * x) + ks * x;
  const double den = (std::abs(tau) * norm1(k0) + norm1(ks)) * x.norm();
  return r.norm() / std::max(den, 1e-300);
}

}  // namespace

bool WaveVector::in_zone() const {
  const double lim = pi * (1.0 + 1e-12);
  return std::isfinite(k1) && std::isfinite(k2) && std::abs(k1) <= lim && std::abs(k2) <= lim;
}

Mat8 element_stress_stiffness(const ElementMatrices& elem, double modulus, const Vec3& strain) {
  const Vec3 sigma = modulus * (elem.d0 * strain);
  return elem.stress_stiffness(sigma);
}

SpMat stress_stiffness(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_geo,
                       const MicrostressState& state) {
  check_snapshot(mesh, moduli_geo, state);
  return assemble_periodic(mesh, [&](int e) -> Mat8 {
    return element_stress_stiffness(elem, moduli_geo(e), state.element_strain.col(e));
  });
}

SpMat stress_stiffness_full(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_geo,
                            const MicrostressState& state) {
  check_snapshot(mesh, moduli_geo, state);
  return assemble_full(mesh, [&](int e) -> Mat8 {
    return element_stress_stiffness(elem, moduli_geo(e), state.element_strain.col(e));
  });
}

CSpMat bloch_reduction(const PeriodicMesh& mesh, const WaveVector& k) {
  check_k(k);
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(mesh.full_dof_count());
  for (int node = 0; node < mesh.full_node_count(); ++node) {
    const auto w = mesh.wrap(node);
    const Complex phase = std::polar(1.0, k.k1 * w[0] + k.k2 * w[1]);
    const int master = mesh.master_node(node);
    for (int c = 0; c < 2; ++c) trip.emplace_back(2 * node + c, 2 * master + c, phase);
  }
  CSpMat t(mesh.full_dof_count(), mesh.dof_count());
  t.setFromTriplets(trip.begin(), trip.end());
  return t;
}

CSpMat bloch_transform(const PeriodicMesh& mesh, const SpMat& k_full, const WaveVector& k) {
  if (k_full.rows() != mesh.full_dof_count() || k_full.cols() != mesh.full_dof_count())
    throw domain_error("matrix is not assembled in the full dof space of the mesh");
  const CSpMat t = bloch_reduction(mesh, k);
  const CSpMat kc = k_full.cast<Complex>();
  CSpMat out = CSpMat(t.adjoint()) * kc * t;
  out.makeCompressed();
  return out;
}

BlochAssembler::BlochAssembler(const PeriodicMesh& mesh, const SpMat& k_full) {
  if (k_full.rows() != mesh.full_dof_count() || k_full.cols() != mesh.full_dof_count())
    throw domain_error("matrix is not assembled in the full dof space of the mesh");
  const int nd = mesh.dof_count();
  auto fold = [&](int dof) { return 2 * mesh.master_node(dof / 2) + dof % 2; };

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(k_full.nonZeros());
  for (int c = 0; c < k_full.outerSize(); ++c)
    for (SpMat::InnerIterator it(k_full, c); it; ++it) trip.emplace_back(fold(it.row()), fold(it.col()), 1.0);
  pattern_.resize(nd, nd);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();
  for (auto& p : parts_) p.assign(pattern_.nonZeros(), 0.0);

  const auto* outer = pattern_.outerIndexPtr();
  const auto* inner = pattern_.innerIndexPtr();
  for (int c = 0; c < k_full.outerSize(); ++c)
    for (SpMat::InnerIterator it(k_full, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int p = fold(r), q = fold(c);
      const auto wr = mesh.wrap(r / 2), wc = mesh.wrap(c / 2);
      const int slot = offset_slot(wc[0] - wr[0], wc[1] - wr[1]);
      const auto* first = inner + outer[q];
      const auto* last = inner + outer[q + 1];
      const auto pos = std::lower_bound(first, last, p) - inner;
      parts_[slot][pos] += it.value();
    }
}

CSpMat BlochAssembler::at(const WaveVector& k) const {
  check_k(k);
  std::array<Complex, 9> phase;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) phase[offset_slot(dx, dy)] = std::polar(1.0, k.k1 * dx + k.k2 * dy);
  CSpMat out = pattern_;
  Complex* val = out.valuePtr();
  const auto nnz = pattern_.nonZeros();
  for (Eigen::Index i = 0; i < nnz; ++i) {
    Complex s = 0.0;
    for (int d = 0; d < 9; ++d)
      if (parts_[d][i] != 0.0) s += parts_[d][i] * phase[d];
    val[i] = s;
  }
  return out;
}

SpMat BlochAssembler::periodic() const {
  SpMat out = pattern_.real();
  double* val = out.valuePtr();
  for (Eigen::Index i = 0; i < out.nonZeros(); ++i) {
    double s = 0.0;
    for (const auto& p : parts_) s += p[i];
    val[i] = s;
  }
  return out;
}

namespace {

template <class Scalar>
BandSolution solve_band_impl(const Eigen::SparseMatrix<Scalar>& k0, const Eigen::SparseMatrix<Scalar>& ks, int m,
                             const KrylovOptions& options, SparseCholesky<Scalar>* cache) {
  if (m < 1) throw domain_error("band count must be at least 1");
  if (k0.rows() != ks.rows() || k0.cols() != ks.cols()) throw domain_error("pencil matrices differ in size");
  KrylovOptions opt = options;
  opt.nev = std::min<int>(m, static_cast<int>(k0.rows()));
  const Eigen::SparseMatrix<Scalar> a = -ks;
  const auto res = largest_eigenpairs<Scalar>(a, k0, opt, cache);
  BandSolution out;
  out.tau = res.values;
  out.modes = res.vectors.template cast<Complex>();
  out.converged = res.converged;
  // Im of the Rayleigh quotient comes from the skew-Hermitian parts alone.
  const Eigen::SparseMatrix<Scalar> a_skew = (a - Eigen::SparseMatrix<Scalar>(a.adjoint())) * 0.5;
  const Eigen::SparseMatrix<Scalar> b_skew = (k0 - Eigen::SparseMatrix<Scalar>(k0.adjoint())) * 0.5;
  for (Eigen::Index i = 0; i < res.vectors.cols(); ++i) {
    const auto x = res.vectors.col(i);
    const double num_re = std::real(Complex(x.dot(a * x)));
    const double den_re = std::real(Complex(x.dot(k0 * x)));
    const double num_im = std::imag(Complex(x.dot(a_skew * x)));
    const double den_im = std::imag(Complex(x.dot(b_skew * x)));
    const double rq_imag = std::abs(num_im * den_re - num_re * den_im) / (den_re * den_re + den_im * den_im);
    out.max_imag = std::max(out.max_imag, rq_imag / std::max(std::abs(res.values(i)), 1e-300));
  }
  return out;
}

}  // namespace

BandSolution solve_band(const CSpMat& k0, const CSpMat& k_sigma, int m, const KrylovOptions& options,
                        SparseCholesky<Complex>* cache) {
  return solve_band_impl<Complex>(k0, k_sigma, m, options, cache);
}

BandSolution solve_band(const SpMat& k0, const SpMat& k_sigma, int m, const KrylovOptions& options,
                        SparseCholesky<double>* cache) {
  return solve_band_impl<double>(k0, k_sigma, m, options, cache);
}

std::vector<WaveVector> ibz_path(int n_seg) {
  if (n_seg < 2) throw domain_error("the path needs at least 2 segments per edge");
  const std::array<WaveVector, 5> v{{{0, 0}, {pi, 0}, {pi, pi}, {0, pi}, {0, 0}}};
  std::vector<WaveVector> path;
  path.reserve(4 * n_seg);
  for (int edge = 0; edge < 4; ++edge)
    for (int s = 0; s < n_seg; ++s) {
      const double t = static_cast<double>(s) / n_seg;
      WaveVector k{v[edge].k1 + t * (v[edge + 1].k1 - v[edge].k1), v[edge].k2 + t * (v[edge + 1].k2 - v[edge].k2)};
      // Snap to the exact vertex coordinates so that corners compare equal.
      if (s == 0) k = v[edge];
      path.push_back(k);
    }
  return path;
}

std::string to_string(ModeClass c) {
  switch (c) {
    case ModeClass::cell_periodic: return "cell-periodic";
    case ModeClass::long_wavelength: return "long-wavelength";
    case ModeClass::boundary: return "boundary";
    case ModeClass::none: break;
  }
  return "none";
}

void BandDiagram::write_csv(std::ostream& os) const {
  os << "path_arclength,k1,k2,band_index,lambda\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(12);
  for (size_t i = 0; i < path.size(); ++i)
    for (Eigen::Index b = 0; b < tau[i].size(); ++b) {
      const double t = tau[i](b);
      os << arclength[i] << ',' << path[i].k1 << ',' << path[i].k2 << ',' << b << ',';
      if (t > 0.0)
        os << 1.0 / t;
      else
        os << "inf";
      os << '\n';
    }
  os.flags(flags);
  os.precision(prec);
}

BucklingProblem::BucklingProblem(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_stiff,
                                 const Vec& moduli_geo, const MicrostressState& state)
    : mesh_(mesh),
      k0_(mesh, assemble_k0_full(mesh, elem, moduli_stiff)),
      ks_(mesh, stress_stiffness_full(mesh, elem, moduli_geo, state)) {}

EigenSolve BucklingProblem::solve_at(const WaveVector& k, int m, const KrylovOptions& options, SampleKind kind) const {
  if (k.is_zero()) throw domain_error("k = 0 is singular; use the offset or pinned cell-periodic solves");
  const BandSolution b = solve_band(k0_.at(k), ks_.at(k), m, options, &complex_cache_);
  EigenSolve s;
  s.k = k;
  s.kind = kind;
  s.tau = b.tau;
  s.modes = b.modes;
  s.converged = b.converged;
  s.max_imag = b.max_imag;
  return s;
}

EigenSolve BucklingProblem::solve_cell_periodic(int m, const KrylovOptions& options) const {
  const auto keep = free_dofs(mesh_, 0);
  const SpMat k0 = restrict_matrix(k0_.periodic(), keep);
  const SpMat ks = restrict_matrix(ks_.periodic(), keep);
  const BandSolution b = solve_band(k0, ks, m, options, &real_cache_);
  EigenSolve s;
  s.kind = SampleKind::cell_periodic;
  s.tau = b.tau;
  s.modes = CMat::Zero(mesh_.dof_count(), b.modes.cols());
  for (size_t i = 0; i < keep.size(); ++i) s.modes.row(keep[i]) = b.modes.row(static_cast<Eigen::Index>(i));
  s.converged = b.converged;
  s.max_imag = b.max_imag;
  return s;
}

double BucklingProblem::tau_floor(double k_offset) const {
  const double k0 = k0_.periodic().coeffs().cwiseAbs().maxCoeff();
  const double ks = ks_.periodic().coeffs().cwiseAbs().maxCoeff();
  return k0 > 0.0 ? 1e-10 * ks / k0 / std::min(1.0, k_offset * k_offset) : 0.0;
}

double BucklingProblem::residual(const EigenSolve& s, int band) const {
  CSpMat k0, ks;
  if (s.kind == SampleKind::cell_periodic) {
    const auto keep = free_dofs(mesh_, 0);
    k0 = restrict_matrix(CSpMat(k0_.periodic().cast<Complex>()), keep);
    ks = restrict_matrix(CSpMat(ks_.periodic().cast<Complex>()), keep);
    CVec x(keep.size());
    for (size_t i = 0; i < keep.size(); ++i) x(static_cast<Eigen::Index>(i)) = s.modes(keep[i], band);
    return backward_error(k0, ks, s.tau(band), x);
  }
  k0 = k0_.at(s.k);
  ks = ks_.at(s.k);
  return backward_error(k0, ks, s.tau(band), s.modes.col(band));
}

BucklingAnalysis buckling_strength(const BucklingProblem& problem, const std::vector<WaveVector>& path,
                                   const BucklingOptions& options) {
  if (options.bands < 1) throw config_error("band count must be at least 1");
  if (!(options.k_offset > 0.0 && options.k_offset < 0.1)) throw config_error("k offset must lie in (0, 0.1)");
  BucklingAnalysis out;
  BandDiagram& diag = out.diagram;
  diag.path = path;
  diag.arclength.resize(path.size());
  double arc = 0.0;
  for (size_t i = 0; i < path.size(); ++i) {
    if (i > 0) arc += std::hypot(path[i].k1 - path[i - 1].k1, path[i].k2 - path[i - 1].k2);
    diag.arclength[i] = arc;
  }

  const int m = options.bands;
  for (size_t i = 0; i < path.size(); ++i) {
    const WaveVector& k = path[i];
    if (!k.is_zero()) {
      EigenSolve s = problem.solve_at(k, m, options.eigen, SampleKind::path);
      s.path_index = static_cast<int>(i);
      diag.tau.push_back(s.tau);
      diag.solves.push_back(std::move(s));
      continue;
    }
    const size_t first = diag.solves.size();
    for (const WaveVector& off : {WaveVector{options.k_offset, 0.0}, WaveVector{0.0, options.k_offset}}) {
      EigenSolve s = problem.solve_at(off, m, options.eigen, SampleKind::long_wavelength);
      s.path_index = static_cast<int>(i);
      diag.solves.push_back(std::move(s));
    }
    EigenSolve cp = problem.solve_cell_periodic(m, options.eigen);
    cp.path_index = static_cast<int>(i);
    diag.solves.push_back(std::move(cp));
    std::vector<double> all;
    for (size_t j = first; j < diag.solves.size(); ++j)
      for (Eigen::Index b = 0; b < diag.solves[j].tau.size(); ++b) all.push_back(diag.solves[j].tau(b));
    std::sort(all.begin(), all.end(), std::greater<>());
    all.resize(std::min<size_t>(all.size(), static_cast<size_t>(m)));
    diag.tau.push_back(Eigen::Map<Vec>(all.data(), static_cast<Eigen::Index>(all.size())));
  }

  BucklingResult& r = out.result;
  r.tau_max = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < diag.solves.size(); ++j) {
    const EigenSolve& s = diag.solves[j];
    r.all_converged = r.all_converged && s.converged;
    for (Eigen::Index b = 0; b < s.tau.size(); ++b)
      if (s.tau(b) > r.tau_max) {
        r.tau_max = s.tau(b);
        r.critical_solve = static_cast<int>(j);
        r.critical_band = static_cast<int>(b);
      }
  }
  r.buckles = r.tau_max > problem.tau_floor(options.k_offset);
  if (!r.buckles) {
    r.sigma_c = std::numeric_limits<double>::infinity();
    r.mode_class = ModeClass::none;
    return out;
  }
  r.sigma_c = 1.0 / r.tau_max;
  const EigenSolve& crit = diag.solves[r.critical_solve];
  r.critical_k = crit.k;
  switch (crit.kind) {
    case SampleKind::path: r.mode_class = ModeClass::boundary; break;
    case SampleKind::cell_periodic: r.mode_class = ModeClass::cell_periodic; break;
    case SampleKind::long_wavelength: {
      // The offset solve may just be the continuation of a cell-periodic mode.
      double pinned = -std::numeric_limits<double>::infinity();
      for (const auto& s : diag.solves)
        if (s.kind == SampleKind::cell_periodic && s.tau.size() > 0) pinned = std::max(pinned, s.tau(0));
      r.mode_class = pinned >= r.tau_max * (1.0 - 1e-3) ? ModeClass::cell_periodic : ModeClass::long_wavelength;
      break;
    }
  }
  r.critical_residual = problem.residual(crit, r.critical_band);
  return out;
}

BucklingAnalysis buckling_strength(const PeriodicMesh& mesh, const ElementMatrices& elem, const Vec& moduli_stiff,
                                   const Vec& moduli_geo, const MicrostressState& state,
                                   const BucklingOptions& options) {
  const BucklingProblem problem(mesh, elem, moduli_stiff, moduli_geo, state);
  return buckling_strength(problem, ibz_path(options.n_seg), options);
}

}  // namespace archmat
