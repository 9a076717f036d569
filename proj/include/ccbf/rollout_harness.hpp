#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccbf/contact_core.hpp"
#include "ccbf/safety_filter.hpp"

namespace ccbf {

enum class ControllerKind { Nominal, CBF, RobustCBF };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& name);

struct RolloutConfig {
  ControllerKind controller = ControllerKind::Nominal;
  double kappa = 1e-4;
  double alpha = 0.95;
  double delta = 0.0;  // used by RobustCBF only
  bool smoothing_margin = false;
  int horizon = 0;  // 0 runs the full plan
  Scenario scenario;
  SolverSettings settings;
};

/// Row k describes the transition q_k -> q_{k+1}: gamma, h and delta_h are
/// the next-step quantities produced by u_star.
struct StepRecord {
  int step = 0;
  double time = 0.0;
  VectorXd q;
  VectorXd v;
  VectorXd u_nom;
  VectorXd u_star;
  VectorXd gamma;
  double h_k = 0.0;
  double h = 0.0;
  double h_hat_next = 0.0;
  double delta_h = 0.0;
  double gamma_hat_max = 0.0;  // largest predicted safety-contact force
  std::optional<QpStatus> qp_status;  // empty when the filter did not run
  SolveStatus solver_status = SolveStatus::Converged;
  bool filter_active = false;
};

struct RolloutRecord {
  std::string system;
  ControllerKind controller = ControllerKind::Nominal;
  double dt = 0.0;
  double kappa = 0.0;
  double gamma_max = 0.0;
  double delta = 0.0;
  double h0 = 0.0;
  std::vector<StepRecord> steps;
  std::vector<VectorXd> trajectory;  // q_0 .. q_H
  int solver_failures = 0;
};

/// Violations and peaks count the safety contacts only.
struct Metrics {
  double viol_rate = 0.0;
  double max_overshoot = 0.0;
  double peak = 0.0;
  double dev = 0.0;
  double min_margin = 0.0;
  TaskOutcome success = TaskOutcome::NotApplicable;
};

struct RolloutResult {
  RolloutRecord record;
  Metrics metrics;
};

/// h_k = gamma_max - max over safety contacts.
double margin(const SystemModel& model, const VectorXd& gamma);

RolloutResult run_rollout(const SystemModel& model, const RolloutConfig& config);

Metrics compute_metrics(const RolloutRecord& record, const SystemModel& model);

struct SweepPoint {
  double kappa = 0.0;
  Metrics metrics;
  bool violated = false;
  int solver_failures = 0;
};

std::vector<SweepPoint> kappa_sweep(const SystemModel& model, const RolloutConfig& base,
                                    const std::vector<double>& grid);

/// Closed-loop next-step gap and margin versus kappa at one step of a rollout.
struct GapSensitivity {
  double kappa = 0.0;
  double Phi_next = 0.0;
  double h_next = 0.0;
  double gamma_next = 0.0;
  double A_phi = 0.0;
  double dh_dlogk = 0.0;
  double identity_residual = 0.0;
  bool active = false;    // CBF constraint active at the evaluated step
  bool interior = false;  // both grid neighbours available
};

/// Runs the configured rollout at each grid kappa up to eval_step and
/// central-differences log Phi and h in log kappa at the safety contact that
/// sets the margin.
std::vector<GapSensitivity> gap_sensitivity_scan(const SystemModel& model,
                                                 const RolloutConfig& base,
                                                 const std::vector<double>& grid, int eval_step);

/// n log-spaced points from lo to hi inclusive.
std::vector<double> logspace(double lo, double hi, int n);

void write_rollout_csv(std::ostream& os, const RolloutRecord& record);

}  // namespace ccbf
