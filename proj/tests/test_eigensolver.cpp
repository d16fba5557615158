#include <Eigen/Eigenvalues>
#include <random>

#include "archmat/eigensolver.hpp"
#include "doctest.h"

using namespace archmat;

namespace {

// Banded Hermitian A and diagonally dominant Hermitian positive definite B.
template <class Scalar>
std::pair<Eigen::SparseMatrix<Scalar>, Eigen::SparseMatrix<Scalar>> pencil(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Triplet<Scalar>> ta, tb;
  for (int i = 0; i < n; ++i) {
    ta.emplace_back(i, i, Scalar(detail::random_scalar<double>(rng) * 3.0));
    tb.emplace_back(i, i, Scalar(4.0 + std::abs(detail::random_scalar<double>(rng))));
    for (int d = 1; d <= 3 && i + d < n; ++d) {
      const Scalar va = detail::random_scalar<Scalar>(rng), vb = 0.3 * detail::random_scalar<Scalar>(rng);
      ta.emplace_back(i, i + d, va);
      ta.emplace_back(i + d, i, Eigen::numext::conj(va));
      tb.emplace_back(i, i + d, vb);
      tb.emplace_back(i + d, i, Eigen::numext::conj(vb));
    }
  }
  Eigen::SparseMatrix<Scalar> a(n, n), b(n, n);
  a.setFromTriplets(ta.begin(), ta.end());
  b.setFromTriplets(tb.begin(), tb.end());
  return {a, b};
}

template <class Scalar>
void check_against_dense(int n, std::uint64_t seed) {
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto [a, b] = pencil<Scalar>(n, seed);
  KrylovOptions opt;
  opt.nev = 5;
  opt.dense_threshold = 0;
  const auto r = largest_eigenpairs(a, b, opt);
  Eigen::GeneralizedSelfAdjointEigenSolver<Dense> es(Dense(a), Dense(b), Eigen::EigenvaluesOnly);
  CHECK(r.converged);
  for (int i = 0; i < 5; ++i) CHECK(r.values(i) == doctest::Approx(es.eigenvalues()(n - 1 - i)).epsilon(1e-9));
  const Dense gram = r.vectors.adjoint() * Dense(b) * r.vectors;
  CHECK((gram - Dense::Identity(5, 5)).norm() <= 1e-9);
  for (int i = 0; i < 5; ++i) {
    const auto v = r.vectors.col(i);
    CHECK((Dense(a) * v - r.values(i) * (Dense(b) * v)).norm() <= 1e-7 * std::abs(r.values(i)));
  }
}

}  // namespace

TEST_SUITE("eigensolver") {

TEST_CASE("Krylov-Schur against the dense pencil, real") { check_against_dense<double>(300, 1); }

TEST_CASE("Krylov-Schur against the dense pencil, complex") { check_against_dense<Complex>(240, 2); }

TEST_CASE("dense path and deterministic restarts") {
  const auto [a, b] = pencil<double>(200, 3);
  KrylovOptions opt;
  opt.nev = 4;
  opt.dense_threshold = 0;
  const auto r1 = largest_eigenpairs(a, b, opt);
  const auto r2 = largest_eigenpairs(a, b, opt);
  CHECK((r1.values.array() == r2.values.array()).all());
  opt.dense_threshold = 1000;
  const auto d = largest_eigenpairs(a, b, opt);
  CHECK((r1.values - d.values).cwiseAbs().maxCoeff() <= 1e-9 * d.values.cwiseAbs().maxCoeff());
}

TEST_CASE("repeated eigenvalues are found with their multiplicity") {
  const int n = 200;
  std::vector<Eigen::Triplet<double>> ta, tb;
  for (int i = 0; i < n; ++i) {
    ta.emplace_back(i, i, i % 50 == 7 ? 10.0 : std::sin(1.0 + i));
    tb.emplace_back(i, i, 1.0);
  }
  Eigen::SparseMatrix<double> a(n, n), b(n, n);
  a.setFromTriplets(ta.begin(), ta.end());
  b.setFromTriplets(tb.begin(), tb.end());
  KrylovOptions opt;
  opt.nev = 6;
  opt.dense_threshold = 0;
  const auto r = largest_eigenpairs(a, b, opt);
  for (int i = 0; i < 4; ++i) CHECK(r.values(i) == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(r.values(4) < 1.0);
  CHECK((r.vectors.transpose() * r.vectors - Mat::Identity(6, 6)).norm() <= 1e-9);
}

TEST_CASE("indefinite B and bad requests") {
  auto [a, b] = pencil<double>(100, 4);
  KrylovOptions opt;
  opt.dense_threshold = 0;
  const Eigen::SparseMatrix<double> neg = -b;
  CHECK_THROWS_AS(largest_eigenpairs(a, neg, opt), Error);
  opt.dense_threshold = 1000;
  CHECK_THROWS_AS(largest_eigenpairs(a, neg, opt), Error);
  opt.nev = 0;
  CHECK_THROWS_AS(largest_eigenpairs(a, b, opt), Error);
}

}  // TEST_SUITE
