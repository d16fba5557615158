#pragma once

#include <Eigen/CholmodSupport>

#include "archmat/types.hpp"

namespace archmat {

/// Supernodal sparse Cholesky (CHOLMOD) for real symmetric or complex
/// Hermitian positive definite matrices. The symbolic analysis is kept
/// between factorizations of matrices sharing one sparsity pattern.
template <class Scalar>
class SparseCholesky {
 public:
  using Matrix = Eigen::SparseMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  /// Factorizes a; returns false if the matrix is not positive definite.
  bool factorize(const Matrix& a) {
    if (!analyzed_ || a.rows() != rows_ || a.nonZeros() != nnz_) {
      llt_.analyzePattern(a);
      analyzed_ = true;
      rows_ = a.rows();
      nnz_ = a.nonZeros();
    }
    llt_.factorize(a);
    return llt_.info() == Eigen::Success;
  }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Dense solve(const Dense& b) const { return llt_.solve(b); }

 private:
  Eigen::CholmodSupernodalLLT<Matrix, Eigen::Lower> llt_;
  bool analyzed_ = false;
  Eigen::Index rows_ = -1;
  Eigen::Index nnz_ = -1;
};

}  // namespace archmat
