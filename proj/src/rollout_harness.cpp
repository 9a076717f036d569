#include "ccbf/rollout_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ccbf/sensitivity.hpp"
#include "ccbf/systems.hpp"

namespace ccbf {

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Nominal: return "nominal";
    case ControllerKind::CBF: return "cbf";
    case ControllerKind::RobustCBF: return "rcbf";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(const std::string& name) {
  if (name == "nominal" || name == "Nominal") return ControllerKind::Nominal;
  if (name == "cbf" || name == "CBF") return ControllerKind::CBF;
  if (name == "rcbf" || name == "RobustCBF" || name == "robust") return ControllerKind::RobustCBF;
  throw ContractViolation("unknown controller '" + name + "'");
}

double margin(const SystemModel& model, const VectorXd& gamma) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int i : model.safety_contacts()) worst = std::max(worst, gamma(i));
  return barrier(worst, model.gamma_max());
}

namespace {

// Previous solution with q_next extrapolated, as the next warm start.
ContactSolution shifted(ContactSolution sol, const VectorXd& q_prev, const VectorXd& q_curr) {
  sol.q_next = 2.0 * q_curr - q_prev;
  return sol;
}

VectorXd select_rows(const VectorXd& v, const std::vector<int>& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

MatrixXd select_rows(const MatrixXd& m, const std::vector<int>& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

}  // namespace

RolloutResult run_rollout(const SystemModel& model, const RolloutConfig& cfg) {
  const CentralPath cp(cfg.kappa);
  const NominalController ctrl = model.make_controller(cfg.scenario);
  const int horizon = cfg.horizon > 0 ? std::min(cfg.horizon, ctrl.plan.horizon) : ctrl.plan.horizon;
  const double dt = model.dt();
  const bool filtered = cfg.controller != ControllerKind::Nominal;

  BarrierSpec spec;
  spec.gamma_max = model.gamma_max();
  spec.alpha = cfg.alpha;
  spec.delta = cfg.controller == ControllerKind::RobustCBF ? cfg.delta : 0.0;
  spec.validate();

  RolloutRecord rec;
  rec.system = model.name();
  rec.controller = cfg.controller;
  rec.dt = dt;
  rec.kappa = cfg.kappa;
  rec.gamma_max = model.gamma_max();
  rec.delta = spec.delta;

  VectorXd q_prev = model.initial_configuration(cfg.kappa, cfg.scenario);
  VectorXd q_curr = q_prev;
  rec.trajectory.push_back(q_curr);

  // Resting forces of the initial configuration define h_0.
  std::optional<ContactSolution> warm;
  VectorXd gamma_curr = VectorXd::Zero(model.contact_count());
  {
    const SolveOutcome init =
        solve_step({q_prev, q_curr, VectorXd::Zero(model.nu()), dt}, cp, model, cfg.settings);
    if (init.converged()) {
      gamma_curr = init.solution->gamma;
      warm = init.solution;
    }
  }
  double h_curr = margin(model, gamma_curr);
  rec.h0 = h_curr;
  VectorXd u_last = VectorXd::Zero(model.nu());

  for (int k = 0; k < horizon; ++k) {
    StepRecord row;
    row.step = k;
    row.time = k * dt;
    row.q = q_curr;
    row.v = (q_curr - q_prev) / dt;
    row.h_k = h_curr;
    row.u_nom = nominal_input(ctrl, model, q_prev, q_curr, k);
    const std::optional<ContactSolution> guess =
        warm ? std::optional(shifted(*warm, q_prev, q_curr)) : std::nullopt;

    ContactStep step{q_prev, q_curr, row.u_nom, dt};
    std::optional<ContactSolution> next;
    SolveStatus status = SolveStatus::Converged;

    if (!filtered) {
      row.u_star = row.u_nom;
      const SolveOutcome s = solve_step(step, cp, model, cfg.settings, guess);
      status = s.status;
      if (s.converged()) next = s.solution;
    } else {
      const SolveOutcome nom = solve_step(step, cp, model, cfg.settings, guess);
      status = nom.status;
      std::optional<SensitivityResult> sens;
      if (nom.converged()) {
        try {
          sens = implicit_jacobian(*nom.solution, step, cp, model);
        } catch (const SingularJacobian&) {
          status = SolveStatus::Singular;
        }
      }
      if (sens) {
        FilterStepInput in;
        in.u_nom = row.u_nom;
        in.h_k = h_curr;
        in.gamma_nom_next = select_rows(nom.solution->gamma, model.safety_contacts());
        in.J_gamma = select_rows(sens->J_gamma, model.safety_contacts());
        in.u_min = ctrl.u_min;
        in.u_max = ctrl.u_max;
        BarrierSpec step_spec = spec;
        if (cfg.smoothing_margin)
          step_spec.delta_smooth = estimate_smoothing_margin(model, step, cp, cfg.settings);
        const FilterStepOutput out = filter(in, step_spec);
        row.u_star = out.u_star;
        row.qp_status = out.qp_status;
        row.h_hat_next = out.predicted_h_next;
        row.gamma_hat_max = spec.gamma_max - out.predicted_h_next;
        row.filter_active = std::any_of(out.active.begin(), out.active.end(), [](bool a) { return a; });
        if (row.u_star == row.u_nom) {
          next = nom.solution;
        } else {
          step.u = row.u_star;
          const SolveOutcome s = solve_step(step, cp, model, cfg.settings, nom.solution);
          status = s.status;
          if (s.converged()) next = s.solution;
        }
      } else {
        row.u_star = u_last;
      }
    }

    // Failure policy: retry with the last applied input, then freeze.
    if (!next) {
      ++rec.solver_failures;
      row.solver_status = status;
      if (row.u_star != u_last) {
        row.u_star = u_last;
        step.u = u_last;
        const SolveOutcome s = solve_step(step, cp, model, cfg.settings, guess);
        if (s.converged()) next = s.solution;
      }
      row.qp_status.reset();
    } else {
      row.solver_status = SolveStatus::Converged;
    }

    VectorXd q_next;
    VectorXd gamma_next;
    if (next) {
      q_next = next->q_next;
      gamma_next = next->gamma;
      warm = next;
    } else {
      q_next = q_curr;
      gamma_next = gamma_curr;
    }
    row.gamma = gamma_next;
    row.h = margin(model, gamma_next);
    if (!filtered || !row.qp_status) {
      row.h_hat_next = row.h;
      row.gamma_hat_max = spec.gamma_max - row.h;
    }
    row.delta_h = row.h - row.h_hat_next;
    rec.steps.push_back(std::move(row));

    u_last = rec.steps.back().u_star;
    q_prev = q_curr;
    q_curr = q_next;
    gamma_curr = gamma_next;
    h_curr = rec.steps.back().h;
    rec.trajectory.push_back(q_curr);
  }

  RolloutResult result;
  result.metrics = compute_metrics(rec, model);
  result.record = std::move(rec);
  return result;
}

Metrics compute_metrics(const RolloutRecord& rec, const SystemModel& model) {
  Metrics m;
  if (rec.steps.empty()) return m;
  int violations = 0;
  double peak = -std::numeric_limits<double>::infinity();
  double dev = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : rec.steps) {
    const double g = rec.gamma_max - s.h;
    if (g > rec.gamma_max) ++violations;
    peak = std::max(peak, g);
    dev += (s.u_star - s.u_nom).norm();
    min_margin = std::min(min_margin, s.h);
  }
  const double n = static_cast<double>(rec.steps.size());
  m.viol_rate = violations / n;
  m.peak = peak;
  m.max_overshoot = std::max(0.0, peak - rec.gamma_max);
  m.dev = dev / n;
  m.min_margin = min_margin;
  m.success = model.task_success(rec.trajectory);
  return m;
}

std::vector<SweepPoint> kappa_sweep(const SystemModel& model, const RolloutConfig& base,
                                    const std::vector<double>& grid) {
  require(!grid.empty(), "kappa grid is empty");
  std::vector<SweepPoint> out;
  for (double kappa : grid) {
    RolloutConfig cfg = base;
    cfg.kappa = kappa;
    const RolloutResult r = run_rollout(model, cfg);
    out.push_back({kappa, r.metrics, r.metrics.viol_rate > 0.0, r.record.solver_failures});
  }
  return out;
}

std::vector<GapSensitivity> gap_sensitivity_scan(const SystemModel& model,
                                                 const RolloutConfig& base,
                                                 const std::vector<double>& grid, int eval_step) {
  require(grid.size() >= 3, "gap scan needs at least three kappa values");
  require(std::is_sorted(grid.begin(), grid.end()), "kappa grid must be increasing");
  require(eval_step >= 0, "evaluation step must be nonnegative");
  std::vector<GapSensitivity> out;
  for (double kappa : grid) {
    RolloutConfig cfg = base;
    cfg.kappa = kappa;
    cfg.horizon = eval_step + 1;
    const RolloutResult r = run_rollout(model, cfg);
    require(static_cast<int>(r.record.steps.size()) == eval_step + 1, "rollout ended early");
    const StepRecord& s = r.record.steps.back();
    // Safety contact that attains the margin.
    int arg = model.safety_contacts().front();
    for (int i : model.safety_contacts())
      if (s.gamma(i) > s.gamma(arg)) arg = i;
    const VectorXd phi = model.sdf(r.record.trajectory.back());
    GapSensitivity g;
    g.kappa = kappa;
    g.Phi_next = phi(arg);
    g.gamma_next = s.gamma(arg);
    g.h_next = s.h;
    g.active = s.filter_active && s.solver_status == SolveStatus::Converged;
    out.push_back(g);
  }
  for (size_t i = 1; i + 1 < out.size(); ++i) {
    auto& g = out[i];
    const double dlk = std::log(out[i + 1].kappa) - std::log(out[i - 1].kappa);
    g.interior = out[i - 1].Phi_next > 0.0 && out[i + 1].Phi_next > 0.0;
    if (!g.interior) continue;
    g.A_phi = (std::log(out[i + 1].Phi_next) - std::log(out[i - 1].Phi_next)) / dlk;
    g.dh_dlogk = (out[i + 1].h_next - out[i - 1].h_next) / dlk;
    g.identity_residual = g.dh_dlogk - g.gamma_next * (g.A_phi - 1.0);
  }
  return out;
}

std::vector<double> logspace(double lo, double hi, int n) {
  require(lo > 0.0 && hi > 0.0 && n >= 1, "logspace needs positive bounds and n >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) out[i] = std::pow(10.0, a + (b - a) * i / (n - 1));
  out.back() = hi;
  return out;
}

void write_rollout_csv(std::ostream& os, const RolloutRecord& rec) {
  require(!rec.steps.empty(), "empty rollout");
  const auto& first = rec.steps.front();
  os << "step,time";
  auto header = [&](const char* name, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << name << i;
  };
  header("q", first.q.size());
  header("v", first.v.size());
  header("u_nom", first.u_nom.size());
  header("u_star", first.u_star.size());
  header("gamma", first.gamma.size());
  os << ",h,h_hat_next,delta_h,qp_status,solver_status\n";
  os.precision(17);
  for (const auto& s : rec.steps) {
    os << s.step << ',' << s.time;
    for (const VectorXd* v : {&s.q, &s.v, &s.u_nom, &s.u_star, &s.gamma})
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << (*v)(i);
    os << ',' << s.h << ',' << s.h_hat_next << ',' << s.delta_h << ','
       << (s.qp_status ? to_string(*s.qp_status) : "None") << ',' << to_string(s.solver_status)
       << '\n';
  }
}

}  // namespace ccbf
