#include "ccbf/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccbf {

namespace {

constexpr double kFeasTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// All rows in a . u <= b form, box sides included.
struct Rows {
  MatrixXd A;
  VectorXd b;
  int linear = 0;
};

Rows stack_rows(const std::vector<LinearConstraint>& constraints, const InputBounds& bounds,
                int n) {
  std::vector<std::pair<VectorXd, double>> rows;
  for (const auto& c : constraints) rows.emplace_back(c.a, c.b);
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(bounds.upper(j))) rows.emplace_back(VectorXd::Unit(n, j), bounds.upper(j));
    if (std::isfinite(bounds.lower(j))) rows.emplace_back(-VectorXd::Unit(n, j), -bounds.lower(j));
  }
  Rows out;
  out.linear = static_cast<int>(constraints.size());
  out.A.resize(static_cast<Eigen::Index>(rows.size()), n);
  out.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    out.A.row(i) = rows[i].first.transpose();
    out.b(i) = rows[i].second;
  }
  return out;
}

double tolerance(const Rows& rows, int i, const VectorXd& u) {
  return kFeasTol * std::max({1.0, std::abs(rows.b(i)), rows.A.row(i).cwiseAbs().dot(u.cwiseAbs())});
}

bool feasible(const Rows& rows, const VectorXd& u) {
  for (Eigen::Index i = 0; i < rows.A.rows(); ++i)
    if (rows.A.row(i).dot(u) - rows.b(i) > tolerance(rows, static_cast<int>(i), u)) return false;
  return true;
}

// Calls fn(subset) for every subset of {0..m-1} with at most k elements.
template <typename Fn>
void for_each_subset(int m, int k, Fn&& fn) {
  std::vector<int> subset;
  auto rec = [&](auto&& self, int start) -> void {
    fn(subset);
    if (static_cast<int>(subset.size()) == k) return;
    for (int i = start; i < m; ++i) {
      subset.push_back(i);
      self(self, i + 1);
      subset.pop_back();
    }
  };
  rec(rec, 0);
}

// Projection of u_nom onto the rows of `rows`; nullopt if no KKT point exists.
std::optional<VectorXd> project(const VectorXd& u_nom, const Rows& rows) {
  const int n = static_cast<int>(u_nom.size());
  const int m = static_cast<int>(rows.A.rows());
  std::optional<VectorXd> best;
  double best_cost = kInf;
  for_each_subset(m, n, [&](const std::vector<int>& s) {
    VectorXd u = u_nom;
    if (!s.empty()) {
      const int k = static_cast<int>(s.size());
      MatrixXd A(k, n);
      VectorXd b(k);
      for (int i = 0; i < k; ++i) {
        A.row(i) = rows.A.row(s[i]);
        b(i) = rows.b(s[i]);
      }
      const MatrixXd G = A * A.transpose();
      const Eigen::FullPivLU<MatrixXd> lu(G);
      if (lu.rank() < k) return;
      const VectorXd lambda = lu.solve(A * u_nom - b);
      if ((lambda.array() < -1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff())).any()) return;
      u = u_nom - A.transpose() * lambda;
    }
    if (!feasible(rows, u)) return;
    const double cost = (u - u_nom).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = u;
    }
  });
  return best;
}

double max_violation(const Rows& rows, int count, const VectorXd& u) {
  double v = -kInf;
  for (int i = 0; i < count; ++i) v = std::max(v, rows.A.row(i).dot(u) - rows.b(i));
  return v;
}

// Point of the box minimizing the largest linear-constraint violation.
VectorXd least_violation_point(const Rows& rows, const InputBounds& bounds, int n) {
  const int m = static_cast<int>(rows.A.rows());
  // Rows in (u, t): linear rows get -t, box rows do not.
  MatrixXd At(m, n + 1);
  At.leftCols(n) = rows.A;
  At.col(n).setZero();
  At.col(n).head(rows.linear).setConstant(-1.0);
  VectorXd best = VectorXd::Zero(n).cwiseMax(bounds.lower).cwiseMin(bounds.upper);
  double best_t = max_violation(rows, rows.linear, best);
  for_each_subset(m, n + 1, [&](const std::vector<int>& s) {
    if (s.empty()) return;
    const int k = static_cast<int>(s.size());
    MatrixXd A(k, n + 1);
    VectorXd b(k);
    for (int i = 0; i < k; ++i) {
      A.row(i) = At.row(s[i]);
      b(i) = rows.b(s[i]);
    }
    const VectorXd x = A.completeOrthogonalDecomposition().solve(b);
    if (((A * x - b).array().abs() > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())).any()) return;
    const VectorXd u = x.head(n);
    bool in_box = true;
    for (int j = 0; j < n; ++j)
      in_box = in_box && u(j) >= bounds.lower(j) - kFeasTol && u(j) <= bounds.upper(j) + kFeasTol;
    if (!in_box) return;
    const VectorXd uc = u.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
    const double t = max_violation(rows, rows.linear, uc);
    if (t < best_t) {
      best_t = t;
      best = uc;
    }
  });
  return best;
}

}  // namespace

void BarrierSpec::validate() const {
  require(gamma_max > 0.0, "gamma_max must be positive");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(delta >= 0.0, "delta must be nonnegative");
  require(!delta_smooth || *delta_smooth >= 0.0, "delta_smooth must be nonnegative");
}

double barrier(double gamma, double gamma_max) { return gamma_max - gamma; }

VectorXd predict_force(const VectorXd& gamma_nom, const MatrixXd& J, const VectorXd& u,
                       const VectorXd& u_nom) {
  require(J.rows() == gamma_nom.size() && J.cols() == u.size() && u.size() == u_nom.size(),
          "prediction dimensions are inconsistent");
  return gamma_nom + J * (u - u_nom);
}

InputBounds InputBounds::unbounded(int n) {
  return {VectorXd::Constant(n, -kInf), VectorXd::Constant(n, kInf)};
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Clamped: return "Clamped";
  }
  return "Unknown";
}

QpResult solve_qp(const VectorXd& u_nom, const std::vector<LinearConstraint>& constraints,
                  const InputBounds& bounds) {
  const int n = static_cast<int>(u_nom.size());
  require(bounds.lower.size() == n && bounds.upper.size() == n, "bounds have wrong dimension");
  require((bounds.lower.array() <= bounds.upper.array()).all(), "box bounds are empty");
  require(u_nom.allFinite(), "nominal input must be finite");
  for (const auto& c : constraints)
    require(c.a.size() == n && c.a.allFinite() && std::isfinite(c.b), "invalid constraint");

  Rows rows = stack_rows(constraints, bounds, n);
  QpResult out;
  std::optional<VectorXd> u = project(u_nom, rows);
  if (u) {
    out.u = *u;
    out.status = QpStatus::Optimal;
  } else {
    // Relax every linear row by the least achievable violation, then project.
    const VectorXd anchor = least_violation_point(rows, bounds, n);
    const double t = std::max(0.0, max_violation(rows, rows.linear, anchor));
    Rows relaxed = rows;
    for (int i = 0; i < rows.linear; ++i) relaxed.b(i) += t + tolerance(rows, i, anchor);
    u = project(u_nom, relaxed);
    out.u = u ? *u : anchor;
    out.status = QpStatus::Infeasible;
  }
  out.u = out.u.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
  out.active.resize(constraints.size());
  bool any_active = false;
  for (int i = 0; i < rows.linear; ++i) {
    out.active[i] = rows.A.row(i).dot(out.u) - rows.b(i) >= -tolerance(rows, i, out.u) * 1e3;
    any_active = any_active || out.active[i];
  }
  out.max_violation = std::max(0.0, max_violation(rows, rows.linear, out.u));
  if (out.status == QpStatus::Optimal && !any_active && (out.u - u_nom).norm() > 0.0)
    out.status = QpStatus::Clamped;
  return out;
}

FilterStepOutput filter(const FilterStepInput& in, const BarrierSpec& spec) {
  spec.validate();
  const int n = static_cast<int>(in.u_nom.size());
  const int m = static_cast<int>(in.gamma_nom_next.size());
  require(in.J_gamma.rows() == m && in.J_gamma.cols() == n, "J_gamma has wrong shape");
  require(in.u_min.size() == n && in.u_max.size() == n, "input bounds have wrong dimension");

  const double delta = spec.effective_delta();
  std::vector<LinearConstraint> rows;
  for (int i = 0; i < m; ++i) {
    const VectorXd a = in.J_gamma.row(i).transpose();
    const double b = (spec.gamma_max - in.gamma_nom_next(i)) + a.dot(in.u_nom) -
                     (1.0 - spec.alpha) * in.h_k - delta;
    rows.push_back({a, b});
  }
  const QpResult qp = solve_qp(in.u_nom, rows, {in.u_min, in.u_max});

  FilterStepOutput out;
  out.u_star = qp.u;
  out.active = qp.active;
  out.qp_status = qp.status;
  const VectorXd gamma_hat = predict_force(in.gamma_nom_next, in.J_gamma, qp.u, in.u_nom);
  out.predicted_h_next = m > 0 ? barrier(gamma_hat.maxCoeff(), spec.gamma_max) : spec.gamma_max;
  return out;
}

std::optional<double> estimate_smoothing_margin(const SystemModel& model, const ContactStep& step,
                                                const CentralPath& cp,
                                                const SolverSettings& settings, double kappa0) {
  const SolveOutcome smooth = solve_step(step, cp, model, settings);
  const SolveOutcome sharp = solve_step(step, CentralPath(kappa0), model, settings, smooth.solution);
  if (!smooth.converged() || !sharp.converged()) return std::nullopt;
  const VectorXd dv = normal_velocity(*sharp.solution, step, model) -
                      normal_velocity(*smooth.solution, step, model);
  double worst = 0.0;
  for (int i : model.safety_contacts()) worst = std::max(worst, std::abs(dv(i)));
  return model.effective_mass() / step.dt * worst;
}

}  // namespace ccbf
