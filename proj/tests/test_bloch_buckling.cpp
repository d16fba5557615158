#include <numbers>

#include "archmat/bloch_buckling.hpp"
#include "archmat/design_param.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace archmat;

namespace {

constexpr double pi = std::numbers::pi;

struct Cell {
  PeriodicMesh mesh;
  ElementMatrices em;
  Vec ek, eg;
  Homogenization hom;
  MicrostressState state;
};

Cell make_cell(int n, const Vec& rho, const MacroLoad& load = {}) {
  Cell c{build_mesh(n), element_matrices(1.0 / 3.0, 1.0 / n), {}, {}, {}, {}};
  const InterpolationParams ip;
  c.ek = interpolate(rho, ip, Branch::stiffness);
  c.eg = interpolate(rho, ip, Branch::geometric);
  c.hom = homogenize(c.mesh, c.em, c.ek);
  const Vec es = interpolate(rho, ip, Branch::stress);
  c.state = element_stresses(c.mesh, c.em, es, c.hom.solutions, macro_strain(c.hom.effective, load));
  return c;
}

// Per-element geometric matrices from the oracle, in full dof space.
Mat oracle_ks_full(const Cell& c) {
  const Eigen::Matrix3d d0 = oracle::plane_stress(1.0, 1.0 / 3.0);
  return oracle::assemble_dense_full(c.mesh, [&](int e) {
    const Eigen::Vector3d sig = c.eg(e) * d0 * Eigen::Vector3d(c.state.element_strain.col(e));
    return oracle::geometric_element(sig, c.mesh.h());
  });
}

Mat oracle_k0_full(const Cell& c) {
  const oracle::Q6 q = oracle::q6_element(1.0 / 3.0, c.mesh.h());
  return oracle::assemble_dense_full(c.mesh, [&](int e) { return (c.ek(e) * q.k).eval(); });
}

Eigen::MatrixXcd reduce(const Cell& c, const Mat& full, double k1, double k2) {
  const Eigen::MatrixXcd t = oracle::bloch_t(c.mesh, k1, k2);
  return t.adjoint() * full.cast<Complex>() * t;
}

}  // namespace

TEST_SUITE("bloch-buckling") {

TEST_CASE("stress stiffness against per-element quadrature") {
  const Cell c = make_cell(4, oracle::random_field(16, 31, 0.2, 1.0));
  const Mat ref = oracle_ks_full(c);
  const SpMat ks = stress_stiffness_full(c.mesh, c.em, c.eg, c.state);
  CHECK((Mat(ks) - ref).norm() <= 1e-10 * ref.norm());
  CHECK((Mat(ks) - Mat(ks).transpose()).norm() == 0.0);

  // The periodic fold is the k = 0 reduction of the same matrix.
  const Mat refp = reduce(c, ref, 0, 0).real();
  CHECK((Mat(stress_stiffness(c.mesh, c.em, c.eg, c.state)) - refp).norm() <= 1e-10 * refp.norm());
}

TEST_CASE("stress stiffness is linear in the stress and vanishes without it") {
  const Vec rho = oracle::random_field(16, 32, 0.2, 1.0);
  MacroLoad twice;
  twice.sigma0 = 2.0 * MacroLoad{}.sigma0;
  const Cell a = make_cell(4, rho), b = make_cell(4, rho, twice);
  const Mat ka = Mat(stress_stiffness(a.mesh, a.em, a.eg, a.state));
  const Mat kb = Mat(stress_stiffness(b.mesh, b.em, b.eg, b.state));
  CHECK((kb - 2.0 * ka).norm() <= 1e-12 * kb.norm());

  MicrostressState zero = a.state;
  zero.element_strain.setZero();
  CHECK(Mat(stress_stiffness(a.mesh, a.em, a.eg, zero)).norm() == 0.0);
}

TEST_CASE("Bloch transform at k = 0, Hermiticity and the zone check") {
  const Cell c = make_cell(4, oracle::random_field(16, 33, 0.2, 1.0));
  const SpMat k0f = assemble_k0_full(c.mesh, c.em, c.ek);
  const SpMat k0p = assemble_k0(c.mesh, c.em, c.ek);
  const Eigen::MatrixXcd at0 = Eigen::MatrixXcd(bloch_transform(c.mesh, k0f, WaveVector{0, 0}));
  CHECK((at0.real() - Mat(k0p)).norm() <= 1e-14 * Mat(k0p).norm());
  CHECK(at0.imag().norm() == 0.0);

  const Mat o0 = oracle_k0_full(c);
  for (auto [k1, k2] : {std::pair{0.7, -2.1}, std::pair{pi, pi / 3}, std::pair{-1.3, 0.4}}) {
    const Eigen::MatrixXcd m = Eigen::MatrixXcd(bloch_transform(c.mesh, k0f, WaveVector{k1, k2}));
    CHECK((m - m.adjoint()).norm() <= 1e-12 * m.norm());
    CHECK((m - reduce(c, o0, k1, k2)).norm() <= 1e-12 * m.norm());
    const BlochAssembler asm0(c.mesh, k0f);
    CHECK((Eigen::MatrixXcd(asm0.at(WaveVector{k1, k2})) - m).norm() <= 1e-13 * m.norm());
  }
  CHECK_THROWS_AS(bloch_transform(c.mesh, k0f, WaveVector{3.5, 0}), Error);
  CHECK_THROWS_AS(bloch_transform(c.mesh, k0f, WaveVector{0, -3.2}), Error);
}

TEST_CASE("eigenvalues at k and -k coincide") {
  const Cell c = make_cell(4, oracle::random_field(16, 34, 0.3, 1.0));
  const Mat k0 = oracle_k0_full(c), ks = oracle_ks_full(c);
  for (auto [k1, k2] : {std::pair{0.9, 0.4}, std::pair{2.5, -1.7}}) {
    const Vec a = oracle::dense_band(reduce(c, k0, k1, k2), reduce(c, ks, k1, k2), 6);
    const Vec b = oracle::dense_band(reduce(c, k0, -k1, -k2), reduce(c, ks, -k1, -k2), 6);
    CHECK((a - b).norm() <= 1e-10 * a.norm());
  }
}

TEST_CASE("solve_band against the dense pencil at (pi, 0)") {
  const Cell c = make_cell(8, Vec::Ones(64));
  const Mat k0 = oracle_k0_full(c), ks = oracle_ks_full(c);
  const WaveVector k{pi, 0};
  const CSpMat k0k = bloch_transform(c.mesh, assemble_k0_full(c.mesh, c.em, c.ek), k);
  const CSpMat ksk = bloch_transform(c.mesh, stress_stiffness_full(c.mesh, c.em, c.eg, c.state), k);
  KrylovOptions opt;
  opt.dense_threshold = 0;
  const BandSolution s = solve_band(k0k, ksk, 6, opt);
  const Vec ref = oracle::dense_band(reduce(c, k0, pi, 0), reduce(c, ks, pi, 0), 6);
  CHECK(s.converged);
  CHECK((s.tau - ref).cwiseAbs().maxCoeff() <= 1e-8 * ref.cwiseAbs().maxCoeff());
  CHECK(s.max_imag <= 1e-9);
  // K0-normalized modes.
  const Eigen::MatrixXcd gram = s.modes.adjoint() * Eigen::MatrixXcd(k0k) * s.modes;
  CHECK((gram - Eigen::MatrixXcd::Identity(6, 6)).norm() <= 1e-8);

  // Pencil linearity and the zero stress stiffness.
  const BandSolution s3 = solve_band(k0k, CSpMat(3.0 * ksk), 6, opt);
  CHECK((s3.tau - 3.0 * s.tau).cwiseAbs().maxCoeff() <= 1e-8 * s3.tau.cwiseAbs().maxCoeff());
  CSpMat z(ksk.rows(), ksk.cols());
  CHECK(solve_band(k0k, z, 4).tau.cwiseAbs().maxCoeff() <= 1e-12);

  // A skew perturbation shows up in the realness diagnostic.
  Eigen::MatrixXcd skew = Eigen::MatrixXcd::Zero(ksk.rows(), ksk.cols());
  skew.diagonal().setConstant(Complex(0.0, 1e-6));
  const BandSolution bad = solve_band(k0k, CSpMat(ksk + skew.sparseView()), 6, opt);
  CHECK(bad.max_imag > 1e-9);
}

TEST_CASE("solve_band rejects an indefinite stiffness") {
  const Cell c = make_cell(4, Vec::Ones(16));
  const SpMat k0f = assemble_k0_full(c.mesh, c.em, c.ek);
  const CSpMat k0k = bloch_transform(c.mesh, k0f, WaveVector{1.0, 0.0});
  const CSpMat ksk = bloch_transform(c.mesh, stress_stiffness_full(c.mesh, c.em, c.eg, c.state), WaveVector{1.0, 0.0});
  CHECK_THROWS_AS(solve_band(CSpMat(-1.0 * k0k), ksk, 4), Error);
}

TEST_CASE("ibz_path") {
  const auto p = ibz_path(2);
  CHECK(p.size() == 8);
  int corners = 0;
  for (const WaveVector& k : p) {
    CHECK(k.k1 >= 0.0);
    CHECK(k.k1 <= pi);
    CHECK(k.k2 >= 0.0);
    CHECK(k.k2 <= pi);
    const bool c1 = k.k1 == 0.0 || k.k1 == pi, c2 = k.k2 == 0.0 || k.k2 == pi;
    if (c1 && c2) ++corners;
  }
  CHECK(corners == 4);
  CHECK(p.front().is_zero());
  CHECK(ibz_path(10).size() == 40);
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = i + 1; j < p.size(); ++j) CHECK((p[i].k1 != p[j].k1 || p[i].k2 != p[j].k2));
  CHECK_THROWS_AS(ibz_path(1), Error);
}

TEST_CASE("buckling of a uniform cell under compression") {
  const Cell c = make_cell(8, Vec::Ones(64));
  BucklingOptions bo;
  bo.n_seg = 4;
  bo.bands = 4;
  const BucklingAnalysis a = buckling_strength(c.mesh, c.em, c.ek, c.eg, c.state, bo);
  CHECK(a.result.buckles);
  CHECK(a.result.sigma_c > 0.0);
  CHECK(a.result.sigma_c == doctest::Approx(1.0 / a.result.tau_max).epsilon(1e-15));
  CHECK(a.result.all_converged);
  CHECK(a.result.critical_residual <= 1e-7);
  for (const EigenSolve& s : a.diagram.solves) CHECK(s.max_imag <= 1e-9);
  CHECK(a.diagram.tau.size() == a.diagram.path.size());

  // The CSV has one row per path point and band.
  std::ostringstream csv;
  a.diagram.write_csv(csv);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 16 * 4);
}

TEST_CASE("a cell in tension does not buckle") {
  MacroLoad tension;
  tension.sigma0 = Vec3(1, 0, 0);
  const Cell c = make_cell(4, Vec::Ones(16), tension);
  BucklingOptions bo;
  bo.n_seg = 2;
  bo.bands = 2;
  const BucklingAnalysis a = buckling_strength(c.mesh, c.em, c.ek, c.eg, c.state, bo);
  CHECK_FALSE(a.result.buckles);
  CHECK(std::isinf(a.result.sigma_c));
  CHECK(a.result.mode_class == ModeClass::none);
}

}  // TEST_SUITE
