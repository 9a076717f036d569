#include "ccbf/contact_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccbf {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::LineSearchFail: return "LineSearchFail";
    case SolveStatus::Singular: return "Singular";
  }
  return "Unknown";
}

VariableLayout::VariableLayout(const SystemModel& model) : nq_(model.nq()) {
  int offset = nq_;
  for (const auto& c : model.contacts()) {
    blocks_.push_back({offset, c.frictional});
    offset += c.frictional ? 8 : 2;
  }
  size_ = offset;
  for (int c = 0; c < contact_count(); ++c) {
    positive_.push_back(gamma(c));
    positive_.push_back(gap_slack(c));
    pairs_.emplace_back(gamma(c), gap_slack(c));
    if (frictional(c)) {
      for (int k = beta_plus(c); k <= eta_minus(c); ++k) positive_.push_back(k);
      pairs_.emplace_back(cone_dual(c), cone_slack(c));
      pairs_.emplace_back(eta_plus(c), beta_plus(c));
      pairs_.emplace_back(eta_minus(c), beta_minus(c));
    }
  }
}

VectorXd VariableLayout::pack(const ContactSolution& sol) const {
  require(sol.q_next.size() == nq_, "q_next has wrong dimension");
  require(sol.gamma.size() == contact_count(), "gamma has wrong dimension");
  require(sol.slacks.size() == size_ - nq_ - contact_count(), "slacks have wrong dimension");
  VectorXd w(size_);
  w.head(nq_) = sol.q_next;
  int s = 0;
  for (int c = 0; c < contact_count(); ++c) {
    w(gamma(c)) = sol.gamma(c);
    w(gap_slack(c)) = sol.slacks(s++);
    if (frictional(c))
      for (int k = beta_plus(c); k <= eta_minus(c); ++k) w(k) = sol.slacks(s++);
  }
  return w;
}

ContactSolution VariableLayout::unpack(const VectorXd& w) const {
  require(w.size() == size_, "packed solution has wrong dimension");
  ContactSolution sol;
  sol.q_next = w.head(nq_);
  sol.gamma.resize(contact_count());
  sol.beta = VectorXd::Zero(contact_count());
  sol.slacks.resize(size_ - nq_ - contact_count());
  int s = 0;
  for (int c = 0; c < contact_count(); ++c) {
    sol.gamma(c) = w(gamma(c));
    sol.slacks(s++) = w(gap_slack(c));
    if (frictional(c)) {
      sol.beta(c) = w(beta_plus(c)) - w(beta_minus(c));
      for (int k = beta_plus(c); k <= eta_minus(c); ++k) sol.slacks(s++) = w(k);
    }
  }
  return sol;
}

template <typename Scalar>
VecX<Scalar> contact_residual(const SystemModel& model, const VariableLayout& layout,
                              const VecX<Scalar>& w, const VecX<Scalar>& q_prev,
                              const VecX<Scalar>& q_curr, const VecX<Scalar>& u,
                              const Scalar& kappa, double dt) {
  const int nq = layout.nq();
  const VecX<Scalar> q_next = w.head(nq);
  const VecX<Scalar> v_curr = (q_curr - q_prev) / dt;
  const VecX<Scalar> v_next = (q_next - q_curr) / dt;

  const MatX<Scalar> normal = model.normal_jacobian(q_next);
  const MatX<Scalar> tangent = model.tangent_jacobian(q_next);
  const VecX<Scalar> phi = model.sdf(q_next);
  const VecX<Scalar> applied = model.applied_force(q_curr, v_curr, u);

  VecX<Scalar> r(layout.size());
  VecX<Scalar> momentum = model.mass_matrix() * (v_next - v_curr) - applied * dt;
  for (int c = 0; c < layout.contact_count(); ++c) {
    momentum -= normal.row(c).transpose() * (w(layout.gamma(c)) * dt);
    if (layout.frictional(c))
      momentum -= tangent.row(c).transpose() *
                  (w(layout.beta_plus(c)) - w(layout.beta_minus(c)));
  }
  r.head(nq) = momentum;

  const auto& contacts = model.contacts();
  for (int c = 0; c < layout.contact_count(); ++c) {
    const Scalar& gamma = w(layout.gamma(c));
    const Scalar& gap = w(layout.gap_slack(c));
    r(layout.gamma(c)) = gap - phi(c);
    r(layout.gap_slack(c)) = gamma * gap - kappa;
    if (!layout.frictional(c)) continue;

    const Scalar v_t = tangent.row(c).dot(v_next);
    const Scalar& bp = w(layout.beta_plus(c));
    const Scalar& bm = w(layout.beta_minus(c));
    const Scalar& psi = w(layout.cone_dual(c));
    const Scalar& sc = w(layout.cone_slack(c));
    const Scalar& ep = w(layout.eta_plus(c));
    const Scalar& em = w(layout.eta_minus(c));
    r(layout.beta_plus(c)) = v_t + psi - ep;
    r(layout.beta_minus(c)) = -v_t + psi - em;
    r(layout.cone_dual(c)) = sc - (contacts[c].mu * dt) * gamma + bp + bm;
    r(layout.cone_slack(c)) = psi * sc - kappa;
    r(layout.eta_plus(c)) = ep * bp - kappa;
    r(layout.eta_minus(c)) = em * bm - kappa;
  }
  return r;
}

template VecX<double> contact_residual<double>(const SystemModel&, const VariableLayout&,
                                               const VecX<double>&, const VecX<double>&,
                                               const VecX<double>&, const VecX<double>&,
                                               const double&, double);
template VecX<AD> contact_residual<AD>(const SystemModel&, const VariableLayout&,
                                       const VecX<AD>&, const VecX<AD>&, const VecX<AD>&,
                                       const VecX<AD>&, const AD&, double);

namespace {

void check_step(const ContactStep& step, const SystemModel& model) {
  require(step.dt > 0.0, "step duration must be positive");
  require(step.q_prev.size() == model.nq() && step.q_curr.size() == model.nq(),
          "configuration dimension mismatch");
  require(step.u.size() == model.nu(), "input dimension mismatch");
}

double inf_norm(const VectorXd& r) { return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff(); }

VectorXd eval_residual(const VectorXd& w, const ContactStep& step, double kappa,
                       const SystemModel& model, const VariableLayout& layout) {
  return contact_residual<double>(model, layout, w, step.q_prev, step.q_curr, step.u, kappa,
                                  step.dt);
}

VectorXd cold_start(const ContactStep& step, double kappa, const SystemModel& model,
                    const VariableLayout& layout) {
  VectorXd w(layout.size());
  const VectorXd q = 2.0 * step.q_curr - step.q_prev;
  w.head(layout.nq()) = q;
  const VectorXd phi = model.sdf(q);
  const double floor = std::sqrt(kappa);
  for (int c = 0; c < layout.contact_count(); ++c) {
    const double gap = std::max(phi(c), floor);
    const double gamma = kappa / gap;
    w(layout.gamma(c)) = gamma;
    w(layout.gap_slack(c)) = gap;
    if (!layout.frictional(c)) continue;
    const double cone = model.contacts()[c].mu * gamma * step.dt;
    w(layout.beta_plus(c)) = 0.25 * cone;
    w(layout.beta_minus(c)) = 0.25 * cone;
    w(layout.cone_slack(c)) = 0.5 * cone;
    w(layout.cone_dual(c)) = kappa / (0.5 * cone);
    w(layout.eta_plus(c)) = kappa / (0.25 * cone);
    w(layout.eta_minus(c)) = kappa / (0.25 * cone);
  }
  return w;
}

bool interior(const VectorXd& w, const VariableLayout& layout) {
  for (int k : layout.positive_indices())
    if (!(w(k) > 0.0)) return false;
  return true;
}

double max_step_to_boundary(const VectorXd& w, const VectorXd& dw, const VariableLayout& layout,
                            double tau) {
  double alpha = 1.0;
  for (int k : layout.positive_indices())
    if (dw(k) < 0.0) alpha = std::min(alpha, -tau * w(k) / dw(k));
  return alpha;
}

struct NewtonDirection {
  VectorXd dw;
  bool singular = false;
};

NewtonDirection newton_direction(const VectorXd& w, const VectorXd& r, const ContactStep& step,
                                 const CentralPath& cp, const SystemModel& model,
                                 const VariableLayout& layout) {
  MatrixXd jac = residual_jacobian(w, step, cp, model, layout);
  VectorXd rhs = -r;
  for (Eigen::Index i = 0; i < jac.rows(); ++i) {
    const double scale = jac.row(i).cwiseAbs().maxCoeff();
    if (scale > 0.0) {
      jac.row(i) /= scale;
      rhs(i) /= scale;
    }
  }
  Eigen::PartialPivLU<MatrixXd> lu(jac);
  if (!(lu.rcond() >= kSingularRcond)) return {VectorXd(), true};
  return {lu.solve(rhs), false};
}

}  // namespace

VectorXd assemble_residual(const ContactSolution& w, const ContactStep& step,
                           const CentralPath& cp, const SystemModel& model) {
  check_step(step, model);
  const VariableLayout layout(model);
  return eval_residual(layout.pack(w), step, cp.kappa(), model, layout);
}

MatrixXd residual_jacobian(const VectorXd& w, const ContactStep& step, const CentralPath& cp,
                           const SystemModel& model, const VariableLayout& layout) {
  const Eigen::Index n = layout.size();
  const VecX<AD> r = contact_residual<AD>(model, layout, to_ad(w, n, 0), to_ad(step.q_prev, n),
                                          to_ad(step.q_curr, n), to_ad(step.u, n),
                                          ad_constant(cp.kappa(), n), step.dt);
  MatrixXd jac(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r(i).derivatives().size() == n)
      jac.row(i) = r(i).derivatives().transpose();
    else
      jac.row(i).setZero();
  }
  return jac;
}

namespace {

SolveOutcome newton_solve(VectorXd w, const ContactStep& step, const CentralPath& cp,
                          const SystemModel& model, const SolverSettings& settings,
                          const VariableLayout& layout) {
  const double kappa = cp.kappa();
  const double tol = settings.residual_tol * std::max(1.0, kappa);
  SolveOutcome out;
  VectorXd r = eval_residual(w, step, kappa, model, layout);
  double merit = r.norm();
  for (int it = 0;; ++it) {
    out.residual_norm = inf_norm(r);
    if (out.residual_norm <= tol) {
      out.status = SolveStatus::Converged;
      // One extra full step pushes the residual toward round-off, which keeps
      // finite-difference checks of the solution map meaningful.
      const NewtonDirection polish = newton_direction(w, r, step, cp, model, layout);
      if (!polish.singular) {
        const double alpha =
            max_step_to_boundary(w, polish.dw, layout, settings.fraction_to_boundary);
        const VectorXd w_try = w + alpha * polish.dw;
        const VectorXd r_try = eval_residual(w_try, step, kappa, model, layout);
        if (r_try.allFinite() && inf_norm(r_try) < out.residual_norm) {
          w = w_try;
          out.residual_norm = inf_norm(r_try);
        }
      }
      break;
    }
    if (it >= settings.max_newton_iters) {
      out.status = SolveStatus::MaxIters;
      break;
    }
    const NewtonDirection dir = newton_direction(w, r, step, cp, model, layout);
    if (dir.singular) {
      out.status = SolveStatus::Singular;
      break;
    }
    double alpha = max_step_to_boundary(w, dir.dw, layout, settings.fraction_to_boundary);
    bool accepted = false;
    while (alpha >= settings.min_step) {
      const VectorXd w_try = w + alpha * dir.dw;
      VectorXd r_try = eval_residual(w_try, step, kappa, model, layout);
      const double merit_try = r_try.norm();
      if (std::isfinite(merit_try) && merit_try <= (1.0 - 1e-4 * alpha) * merit) {
        w = w_try;
        r = std::move(r_try);
        merit = merit_try;
        accepted = true;
        break;
      }
      alpha *= settings.line_search_shrink;
    }
    ++out.iters;
    if (!accepted) {
      out.status = SolveStatus::LineSearchFail;
      break;
    }
  }
  if (out.status == SolveStatus::Converged) out.solution = layout.unpack(w);
  return out;
}

}  // namespace

SolveOutcome solve_step(const ContactStep& step, const CentralPath& cp, const SystemModel& model,
                        const SolverSettings& settings,
                        const std::optional<ContactSolution>& warm_start) {
  check_step(step, model);
  require(settings.residual_tol > 0.0 && settings.max_newton_iters >= 1, "invalid settings");
  const VariableLayout layout(model);
  if (warm_start) {
    VectorXd w = layout.pack(*warm_start);
    if (interior(w, layout)) {
      SolveOutcome out = newton_solve(std::move(w), step, cp, model, settings, layout);
      if (out.converged()) return out;
    }
  }
  // A failed warm start falls back to the cold start.
  return newton_solve(cold_start(step, cp.kappa(), model, layout), step, cp, model, settings,
                      layout);
}

VectorXd check_complementarity(const ContactSolution& w, const ContactStep& step,
                               const CentralPath& cp, const SystemModel& model) {
  require(w.q_next.size() == model.nq() && w.gamma.size() == model.contact_count(),
          "solution dimension mismatch");
  (void)step;
  const VectorXd phi = model.sdf(w.q_next);
  return (w.gamma.cwiseProduct(phi).array() - cp.kappa()).abs().matrix();
}

VectorXd normal_velocity(const ContactSolution& w, const ContactStep& step,
                         const SystemModel& model) {
  return model.normal_jacobian(w.q_next) * ((w.q_next - step.q_curr) / step.dt);
}

}  // namespace ccbf
