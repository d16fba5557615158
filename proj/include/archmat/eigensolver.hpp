#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "archmat/sparse_cholesky.hpp"
#include "archmat/types.hpp"

namespace archmat {

struct KrylovOptions {
  int nev = 6;
  int ncv = 0;              ///< Krylov subspace size; 0 picks max(2 nev + 8, 24)
  double tol = 1e-9;        ///< relative Ritz residual
  int max_restarts = 400;
  std::uint64_t seed = 0x5eed5eedULL;
  /// Below this dimension the pencil is solved densely.
  int dense_threshold = 96;
  /// Search the complement of the converged vectors for missed copies of
  /// repeated eigenvalues.
  bool deflation_check = true;
};

template <class Scalar>
struct GeneralizedEigenResult {
  Vec values;  ///< descending
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;  ///< B-orthonormal columns
  bool converged = false;
  int restarts = 0;
  int applications = 0;
};

/// The nev algebraically largest eigenpairs of a x = theta b x for Hermitian
/// a and Hermitian positive definite b, by thick-restart (Krylov-Schur)
/// Lanczos on b^-1 a in the b inner product with full reorthogonalization.
/// Throws solver-failure if b is not positive definite.
template <class Scalar>
GeneralizedEigenResult<Scalar> largest_eigenpairs(const Eigen::SparseMatrix<Scalar>& a,
                                                  const Eigen::SparseMatrix<Scalar>& b, const KrylovOptions& opt,
                                                  SparseCholesky<Scalar>* factor_cache = nullptr);

namespace detail {

template <class Scalar>
Scalar random_scalar(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if constexpr (std::is_same_v<Scalar, double>) {
    return u(rng);
  } else {
    const double re = u(rng);
    return Scalar(re, u(rng));
  }
}

template <class Scalar>
GeneralizedEigenResult<Scalar> dense_pencil(const Eigen::SparseMatrix<Scalar>& a, const Eigen::SparseMatrix<Scalar>& b,
                                            int nev) {
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Dense ad = Dense(a);
  const Dense bd = Dense(b);
  Eigen::LLT<Dense> llt(bd);
  if (llt.info() != Eigen::Success) throw solver_error("pencil matrix is not positive definite");
  // L^-1 A L^-H
  Dense c = llt.matrixL().solve(ad);
  c = llt.matrixL().solve(c.adjoint()).adjoint().eval();
  c = (0.5 * (c + c.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<Dense> es(c);
  const auto n = static_cast<int>(ad.rows());
  const int k = std::min(nev, n);
  GeneralizedEigenResult<Scalar> out;
  out.values.resize(k);
  out.vectors.resize(n, k);
  for (int i = 0; i < k; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = llt.matrixU().solve(es.eigenvectors().col(n - 1 - i));
  }
  out.converged = true;
  return out;
}

}  // namespace detail

namespace detail {

/// Krylov-Schur iteration restricted to the b-orthogonal complement of the
/// columns of locked (lz = b * locked).
template <class Scalar>
GeneralizedEigenResult<Scalar> krylov_schur(const Eigen::SparseMatrix<Scalar>& a, const Eigen::SparseMatrix<Scalar>& b,
                                            const SparseCholesky<Scalar>& llt, const KrylovOptions& opt, int nev,
                                            const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& locked,
                                            const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& lz,
                                            std::mt19937_64& rng) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  const int n = static_cast<int>(a.rows());
  const int nl = static_cast<int>(locked.cols());
  const int p = std::min(n - nl - 1, opt.ncv > 0 ? opt.ncv : std::max(2 * nev + 8, 24));

  Dense v(n, p + 1);   // B-orthonormal basis
  Dense z(n, p + 1);   // B * basis
  Dense h = Dense::Zero(p + 1, p);
  GeneralizedEigenResult<Scalar> out;

  auto deflate = [&](Vector& w) {
    if (nl > 0) w.noalias() -= locked * (lz.adjoint() * w);
  };
  auto b_orthonormalize = [&](Vector& w, int cols) -> double {
    for (int pass = 0; pass < 2; ++pass) {
      deflate(w);
      if (cols == 0) continue;
      const Vector c = z.leftCols(cols).adjoint() * w;
      w.noalias() -= v.leftCols(cols) * c;
    }
    const Vector bw = b * w;
    return std::sqrt(std::max(0.0, std::real(w.dot(bw))));
  };

  auto fresh_vector = [&](int cols) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vector w(n);
      for (int i = 0; i < n; ++i) w(i) = detail::random_scalar<Scalar>(rng);
      const double nrm = b_orthonormalize(w, cols);
      if (nrm > 0.0) {
        v.col(cols) = w / nrm;
        z.col(cols) = b * v.col(cols);
        return;
      }
    }
    throw solver_error("could not extend the Krylov basis");
  };

  fresh_vector(0);
  int k = 0;  // columns already carrying a (restarted) Rayleigh quotient
  double op_scale = 0.0;
  std::vector<double> history;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    for (int j = k; j < p; ++j) {
      const Vector y = a * v.col(j);
      Vector w = llt.solve(y);
      ++out.applications;
      deflate(w);
      Vector coef = v.leftCols(j + 1).adjoint() * y;
      w.noalias() -= v.leftCols(j + 1) * coef;
      const Vector c2 = z.leftCols(j + 1).adjoint() * w;
      w.noalias() -= v.leftCols(j + 1) * c2;
      coef += c2;
      const Vector bw = b * w;
      const double beta = std::sqrt(std::max(0.0, std::real(w.dot(bw))));
      h.col(j).head(j + 1) = coef;
      op_scale = std::max(op_scale, coef.cwiseAbs().maxCoeff());
      if (beta > 1e-12 * std::max(op_scale, 1e-300)) {
        h(j + 1, j) = beta;
        v.col(j + 1) = w / beta;
        z.col(j + 1) = bw / beta;
      } else {
        // Invariant subspace: continue with a new direction, no coupling.
        h(j + 1, j) = Scalar(0);
        fresh_vector(j + 1);
      }
    }

    Dense s = h.topRows(p);
    s = (0.5 * (s + s.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Dense> es(s);
    // Descending order.
    Vec theta(p);
    Dense y(p, p);
    for (int i = 0; i < p; ++i) {
      theta(i) = es.eigenvalues()(p - 1 - i);
      y.col(i) = es.eigenvectors().col(p - 1 - i);
    }
    const double scale = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);
    const Scalar beta_p = h(p, p - 1);
    double worst = 0.0;
    for (int i = 0; i < nev; ++i) worst = std::max(worst, std::abs(beta_p * y(p - 1, i)) / scale);
    bool done = worst <= opt.tol;
    // Residuals of nearly singular pencils stagnate at the rounding floor.
    history.push_back(worst);
    if (!done && restart >= 20 && worst <= 1e-6) {
      const double earlier = *std::min_element(history.begin(), history.end() - 10);
      done = worst > 0.5 * earlier;
    }
    if (done || restart == opt.max_restarts) {
      const int m = std::min(nev, p);
      out.values = theta.head(m);
      out.vectors = v.leftCols(p) * y.leftCols(m);
      out.converged = done;
      out.restarts = restart;
      return out;
    }

    // Thick restart on the leading Ritz vectors.
    k = std::min(p - 1, nev + (p - nev) / 2);
    const Dense vk = v.leftCols(p) * y.leftCols(k);
    const Dense zk = z.leftCols(p) * y.leftCols(k);
    v.col(k) = v.col(p);
    z.col(k) = z.col(p);
    v.leftCols(k) = vk;
    z.leftCols(k) = zk;
    h.setZero();
    for (int i = 0; i < k; ++i) {
      h(i, i) = theta(i);
      h(k, i) = beta_p * y(p - 1, i);
    }
  }
  return out;
}

}  // namespace detail

template <class Scalar>
GeneralizedEigenResult<Scalar> largest_eigenpairs(const Eigen::SparseMatrix<Scalar>& a,
                                                  const Eigen::SparseMatrix<Scalar>& b, const KrylovOptions& opt,
                                                  SparseCholesky<Scalar>* factor_cache) {
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.rows() != n || b.cols() != n) throw domain_error("pencil matrices must be square and equal-sized");
  if (opt.nev < 1) throw domain_error("at least one eigenpair must be requested");
  if (n <= opt.dense_threshold || n <= 3 * opt.nev + 48) return detail::dense_pencil(a, b, opt.nev);

  SparseCholesky<Scalar> local;
  SparseCholesky<Scalar>& llt = factor_cache ? *factor_cache : local;
  if (!llt.factorize(b)) throw solver_error("pencil matrix is not positive definite");
  std::mt19937_64 rng(opt.seed);

  GeneralizedEigenResult<Scalar> out = detail::krylov_schur(a, b, llt, opt, opt.nev, Dense(n, 0), Dense(n, 0), rng);
  if (!opt.deflation_check) return out;

  // A single Krylov sequence can miss copies of a repeated eigenvalue: search
  // the complement of the accepted vectors until it holds nothing larger.
  const int m = static_cast<int>(out.values.size());
  for (int pass = 0; pass < m; ++pass) {
    const Dense lz = b * out.vectors;
    const auto extra = detail::krylov_schur(a, b, llt, opt, 1, out.vectors, lz, rng);
    out.applications += extra.applications;
    const double scale = std::max(out.values.cwiseAbs().maxCoeff(), 1e-300);
    if (!(extra.values(0) > out.values(m - 1) + opt.tol * scale)) break;
    int pos = m - 1;
    while (pos > 0 && out.values(pos - 1) < extra.values(0)) --pos;
    for (int i = m - 1; i > pos; --i) {
      out.values(i) = out.values(i - 1);
      out.vectors.col(i) = out.vectors.col(i - 1);
    }
    out.values(pos) = extra.values(0);
    out.vectors.col(pos) = extra.vectors.col(0);
    out.converged = out.converged && extra.converged;
  }
  return out;
}

}  // namespace archmat
