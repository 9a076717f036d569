#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccbf/contact_core.hpp"

namespace ccbf {

/// h = gamma_max - gamma with decay gain alpha and robust tightening delta.
/// delta_smooth is added to delta only when set (unsmoothed-target mode).
struct BarrierSpec {
  double gamma_max = 1.0;
  double alpha = 0.95;
  double delta = 0.0;
  std::optional<double> delta_smooth;

  void validate() const;
  double effective_delta() const { return delta + delta_smooth.value_or(0.0); }
};

double barrier(double gamma, double gamma_max);

/// gamma_hat = gamma_nom + J (u - u_nom).
VectorXd predict_force(const VectorXd& gamma_nom, const MatrixXd& J, const VectorXd& u,
                       const VectorXd& u_nom);

/// a . u <= b
struct LinearConstraint {
  VectorXd a;
  double b = 0.0;
};

/// Infinite entries mean the side is unbounded.
struct InputBounds {
  VectorXd lower;
  VectorXd upper;

  static InputBounds unbounded(int n);
};

/// Optimal: feasible minimizer. Clamped: feasible, no linear constraint
/// active, only the box moved u_nom. Infeasible: least-max-violation fallback.
enum class QpStatus { Optimal, Infeasible, Clamped };

std::string to_string(QpStatus status);

struct QpResult {
  VectorXd u;
  QpStatus status = QpStatus::Optimal;
  std::vector<bool> active;  // per linear constraint
  double max_violation = 0.0;
};

/// argmin 0.5 |u - u_nom|^2 subject to the constraints and the box, by
/// enumerating active sets of at most dim(u) rows.
QpResult solve_qp(const VectorXd& u_nom, const std::vector<LinearConstraint>& constraints,
                  const InputBounds& bounds);

struct FilterStepInput {
  VectorXd u_nom;
  double h_k = 0.0;
  VectorXd gamma_nom_next;  // one entry per constrained contact
  MatrixXd J_gamma;         // constrained contacts x inputs
  VectorXd u_min;
  VectorXd u_max;
};

struct FilterStepOutput {
  VectorXd u_star;
  std::vector<bool> active;
  QpStatus qp_status = QpStatus::Optimal;
  double predicted_h_next = 0.0;
};

/// Robust discrete-time CBF-QP: one affine row per constrained contact,
/// J_i u <= (gamma_max - gamma_nom_i) + J_i u_nom - (1 - alpha) h_k - delta_eff.
FilterStepOutput filter(const FilterStepInput& input, const BarrierSpec& spec);

/// (m_eff / dt) * max_i |v_n,i(kappa0) - v_n,i(kappa)| over the safety contacts,
/// or nullopt when either solve fails.
std::optional<double> estimate_smoothing_margin(const SystemModel& model, const ContactStep& step,
                                                const CentralPath& cp,
                                                const SolverSettings& settings,
                                                double kappa0 = 1e-9);

}  // namespace ccbf
