#pragma once

#include "ccbf/contact_core.hpp"

namespace ccbf {

/// Local sensitivities of a converged step.
///
/// theta stacks the problem data as [q_prev, q_curr, u]. J_gamma is the
/// gamma-row, u-column block of dw_dtheta (contacts x inputs).
struct SensitivityResult {
  MatrixXd dw_dtheta;
  VectorXd dw_dkappa;
  MatrixXd J_gamma;
};

/// Raised when dr/dw is too ill-conditioned for the implicit function theorem.
class SingularJacobian : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// dw/dxi = -(dr/dw)^{-1} dr/dxi for xi in {theta, kappa}, one factorization.
SensitivityResult implicit_jacobian(const ContactSolution& w_star, const ContactStep& step,
                                    const CentralPath& cp, const SystemModel& model);

/// Central-difference dgamma/du from re-solving the step at u +- h e_j.
/// Throws std::runtime_error if a perturbed solve fails.
MatrixXd finite_diff_force_jacobian(const ContactStep& step, const CentralPath& cp,
                                    const SystemModel& model, const SolverSettings& settings,
                                    double h);

}  // namespace ccbf
