#include "ccbf/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

namespace ccbf {

SensitivityResult implicit_jacobian(const ContactSolution& w_star, const ContactStep& step,
                                    const CentralPath& cp, const SystemModel& model) {
  const VariableLayout layout(model);
  const int n = layout.size(), nq = model.nq(), nu = model.nu();
  require(step.q_prev.size() == nq && step.q_curr.size() == nq && step.u.size() == nu,
          "step data has wrong dimension");
  const int n_theta = 2 * nq + nu;
  const int n_seed = n + n_theta + 1;

  const VecX<AD> r = contact_residual<AD>(
      model, layout, to_ad(layout.pack(w_star), n_seed, 0), to_ad(step.q_prev, n_seed, n),
      to_ad(step.q_curr, n_seed, n + nq), to_ad(step.u, n_seed, n + 2 * nq),
      AD(cp.kappa(), VectorXd::Unit(n_seed, n_seed - 1)), step.dt);

  MatrixXd full = MatrixXd::Zero(n, n_seed);
  for (int i = 0; i < n; ++i)
    if (r(i).derivatives().size() == n_seed) full.row(i) = r(i).derivatives().transpose();

  // Row equilibration keeps the condition estimate meaningful when force and
  // complementarity rows differ by many orders of magnitude.
  for (int i = 0; i < n; ++i) {
    const double s = full.row(i).head(n).cwiseAbs().maxCoeff();
    if (s > 0.0) full.row(i) /= s;
  }
  const Eigen::PartialPivLU<MatrixXd> lu(full.leftCols(n));
  if (!(lu.rcond() >= kSingularRcond))
    throw SingularJacobian("residual Jacobian is singular at the solution");

  const MatrixXd dw = -lu.solve(full.rightCols(n_theta + 1));
  SensitivityResult out;
  out.dw_dtheta = dw.leftCols(n_theta);
  out.dw_dkappa = dw.col(n_theta);
  out.J_gamma.resize(layout.contact_count(), nu);
  for (int c = 0; c < layout.contact_count(); ++c)
    out.J_gamma.row(c) = out.dw_dtheta.row(layout.gamma(c)).tail(nu);
  return out;
}

MatrixXd finite_diff_force_jacobian(const ContactStep& step, const CentralPath& cp,
                                    const SystemModel& model, const SolverSettings& settings,
                                    double h) {
  require(h > 0.0, "finite-difference step must be positive");
  const SolveOutcome base = solve_step(step, cp, model, settings);
  if (!base.converged()) throw std::runtime_error("baseline solve failed: " + to_string(base.status));
  const int nu = static_cast<int>(step.u.size());
  MatrixXd jac(model.contact_count(), nu);
  for (int j = 0; j < nu; ++j) {
    ContactStep plus = step, minus = step;
    plus.u(j) += h;
    minus.u(j) -= h;
    const SolveOutcome sp = solve_step(plus, cp, model, settings, base.solution);
    const SolveOutcome sm = solve_step(minus, cp, model, settings, base.solution);
    if (!sp.converged() || !sm.converged())
      throw std::runtime_error("perturbed solve failed");
    jac.col(j) = (sp.solution->gamma - sm.solution->gamma) / (2.0 * h);
  }
  return jac;
}

}  // namespace ccbf
