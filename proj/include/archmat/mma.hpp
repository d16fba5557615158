#pragma once

#include "archmat/types.hpp"

namespace archmat {

/// Method of moving asymptotes (Svanberg) for
///   min f0(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
///   s.t. f_i(x) - a_i z - y_i <= 0, xmin <= x <= xmax, y, z >= 0.
struct MmaParams {
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double asymin = 1e-5;  ///< closest asymptote distance relative to the box
  double move = 0.1;
  double albefa = 0.1;
  double raa0 = 1e-5;
  double a0 = 1.0;
  double c = 1000.0;
  double d = 1.0;
  double epsimin = 1e-9;
};

class Mma {
 public:
  Mma(int n, int m, Vec xmin, Vec xmax, MmaParams params = {});

  /// One outer iteration: builds the convex approximation at x and returns
  /// its minimizer. df0 has length n, fval length m, dfdx is m x n.
  Vec update(const Vec& x, double f0, const Vec& df0, const Vec& fval, const Mat& dfdx);

  int iteration() const noexcept { return iter_; }
  const Vec& low() const noexcept { return low_; }
  const Vec& upp() const noexcept { return upp_; }
  /// Lagrange multipliers of the last subproblem solve.
  const Vec& multipliers() const noexcept { return lam_; }
  /// True when the last update had to fall back to a plain move-limited step.
  bool fallback_used() const noexcept { return fallback_; }

 private:
  int n_, m_;
  Vec xmin_, xmax_;
  MmaParams prm_;
  int iter_ = 0;
  Vec xold1_, xold2_, low_, upp_, lam_;
  bool fallback_ = false;
};

/// Norm of the KKT residual of the original problem at (x, lam), for the
/// bound-constrained formulation without elastic variables.
double mma_kkt_residual(const Vec& x, const Vec& xmin, const Vec& xmax, const Vec& df0, const Vec& fval,
                        const Mat& dfdx, const Vec& lam);

}  // namespace archmat
