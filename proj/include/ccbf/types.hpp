#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include <stdexcept>
#include <string>

namespace ccbf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Forward-mode scalar used to differentiate residuals exactly.
using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Thrown when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

/// Central-path parameter (N*m). Relaxes gamma * phi = 0 into gamma * phi = kappa.
class CentralPath {
 public:
  explicit CentralPath(double kappa) : kappa_(kappa) {
    require(kappa > 0.0, "central-path parameter must be positive");
  }
  double kappa() const { return kappa_; }

 private:
  double kappa_;
};

/// Value of a double, or of the value part of an AD scalar.
inline double value_of(double x) { return x; }
inline double value_of(const AD& x) { return x.value(); }

template <typename Derived>
VectorXd values_of(const Eigen::MatrixBase<Derived>& v) {
  VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = value_of(v(i));
  return out;
}

/// Promote a double vector to AD with zero derivatives of length n_seed,
/// seeding entries [0, v.size()) at offset seed_offset when seed is true.
inline VecX<AD> to_ad(const VectorXd& v, Eigen::Index n_seed, Eigen::Index seed_offset = -1) {
  VecX<AD> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(i).value() = v(i);
    out(i).derivatives() = VectorXd::Zero(n_seed);
    if (seed_offset >= 0) out(i).derivatives()(seed_offset + i) = 1.0;
  }
  return out;
}

inline AD ad_constant(double x, Eigen::Index n_seed) {
  return AD(x, VectorXd::Zero(n_seed));
}

}  // namespace ccbf
