#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace archmat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<double>;
using CSpMat = Eigen::SparseMatrix<Complex>;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat38 = Eigen::Matrix<double, 3, 8>;
using Mat83 = Eigen::Matrix<double, 8, 3>;

/// Error categories, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
  config = 2,      ///< invalid input, configuration or domain
  analysis = 3,    ///< analysis-level failure (no buckling, undefined strength, ...)
  solver = 4,      ///< linear or eigen solver failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable identifier, e.g. "invalid-mesh".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error invalid_mesh(const std::string& msg) { return {ErrorKind::config, "invalid-mesh", msg}; }
inline Error invalid_material(const std::string& msg) { return {ErrorKind::config, "invalid-material", msg}; }
inline Error domain_error(const std::string& msg) { return {ErrorKind::config, "domain-error", msg}; }
inline Error config_error(const std::string& msg) { return {ErrorKind::config, "config-error", msg}; }
inline Error analysis_error(const std::string& msg) { return {ErrorKind::analysis, "analysis-failure", msg}; }
inline Error solver_error(const std::string& msg) { return {ErrorKind::solver, "solver-failure", msg}; }

}  // namespace archmat
