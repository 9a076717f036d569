#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ccbf/safety_filter.hpp"
#include "ccbf/systems.hpp"
#include "qp_oracle.hpp"

using namespace ccbf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FilterStepInput scalar_input(double u_nom, double h_k, double gamma_nom) {
  FilterStepInput in;
  in.u_nom = VectorXd::Constant(1, u_nom);
  in.h_k = h_k;
  in.gamma_nom_next = VectorXd::Constant(1, gamma_nom);
  in.J_gamma = MatrixXd::Constant(1, 1, 1.0);
  in.u_min = VectorXd::Constant(1, -kInf);
  in.u_max = VectorXd::Constant(1, kInf);
  return in;
}

}  // namespace

TEST(SafetyFilter, Barrier) {
  EXPECT_DOUBLE_EQ(barrier(0.25, 0.25), 0.0);
  EXPECT_NEAR(barrier(0.3033, 0.25), -0.0533, 1e-12);
  EXPECT_DOUBLE_EQ(barrier(0.0, 0.25), 0.25);
}

TEST(SafetyFilter, PredictForce) {
  const VectorXd g = VectorXd::Constant(1, 0.2);
  const MatrixXd J = MatrixXd::Constant(1, 1, -1.0);
  const VectorXd u_nom = VectorXd::Constant(1, 0.3);
  EXPECT_DOUBLE_EQ(predict_force(g, J, u_nom, u_nom)(0), 0.2);
  EXPECT_NEAR(predict_force(g, J, VectorXd::Constant(1, 0.31), u_nom)(0), 0.19, 1e-15);
}

TEST(SafetyFilter, ScalarExample) {
  BarrierSpec spec{0.25, 0.95, 0.0, std::nullopt};
  auto out = filter(scalar_input(0.5, 0.02, 0.26), spec);
  EXPECT_NEAR(out.u_star(0), 0.489, 1e-12);
  EXPECT_EQ(out.qp_status, QpStatus::Optimal);
  EXPECT_TRUE(out.active[0]);
  spec.delta = 0.005;
  out = filter(scalar_input(0.5, 0.02, 0.26), spec);
  EXPECT_NEAR(out.u_star(0), 0.484, 1e-12);
}

TEST(SafetyFilter, SlackConstraintKeepsNominal) {
  BarrierSpec spec{0.25, 0.95, 0.0, std::nullopt};
  const auto out = filter(scalar_input(0.1, 0.1, 0.1), spec);
  EXPECT_DOUBLE_EQ(out.u_star(0), 0.1);
  EXPECT_FALSE(out.active[0]);
  EXPECT_NEAR(out.predicted_h_next, 0.15, 1e-15);
}

TEST(SafetyFilter, ClampedWhenOnlyTheBoxActs) {
  BarrierSpec spec{0.25, 0.95, 0.0, std::nullopt};
  FilterStepInput in = scalar_input(2.0, 0.1, 0.1);
  in.u_max(0) = 1.0;
  const auto out = filter(in, spec);
  EXPECT_EQ(out.qp_status, QpStatus::Clamped);
  EXPECT_DOUBLE_EQ(out.u_star(0), 1.0);
}

TEST(SafetyFilter, InfeasibleFallsBackToLeastViolation) {
  // Need u <= -0.5 but u >= 0.
  const QpResult r = solve_qp(VectorXd::Constant(1, 0.3), {{VectorXd::Constant(1, 1.0), -0.5}},
                              {VectorXd::Zero(1), VectorXd::Constant(1, 1.0)});
  EXPECT_EQ(r.status, QpStatus::Infeasible);
  EXPECT_NEAR(r.u(0), 0.0, 1e-12);
  EXPECT_NEAR(r.max_violation, 0.5, 1e-12);
}

TEST(SafetyFilter, ProjectionOntoHyperplane) {
  const Eigen::Vector2d a(1.0, 2.0);
  const double b = 1.0;
  const Eigen::Vector2d u_nom(1.0, 1.0);
  const QpResult r = solve_qp(u_nom, {{a, b}}, InputBounds::unbounded(2));
  const Eigen::Vector2d expect = u_nom - (a.dot(u_nom) - b) / a.squaredNorm() * a;
  EXPECT_NEAR((r.u - expect).norm(), 0.0, 1e-12);
}

TEST(SafetyFilter, NoConstraintsClampsToBox) {
  const QpResult r = solve_qp(Eigen::Vector2d(2.0, -3.0), {},
                              {Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(1.0, 1.0)});
  EXPECT_DOUBLE_EQ(r.u(0), 1.0);
  EXPECT_DOUBLE_EQ(r.u(1), -1.0);
}

TEST(SafetyFilter, MatchesEnumerationOracle) {
  std::mt19937 rng(42);
  int compared = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto inst = testing_oracle::random_instance(rng);
    const auto expect = testing_oracle::brute_force_qp(inst);
    const QpResult r = solve_qp(inst.u_nom, inst.constraints, inst.bounds);
    if (!expect) {
      EXPECT_EQ(r.status, QpStatus::Infeasible);
      continue;
    }
    EXPECT_NE(r.status, QpStatus::Infeasible);
    EXPECT_LE((r.u - *expect).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    ++compared;
  }
  EXPECT_GT(compared, 1000);
}

TEST(SafetyFilter, PredictedMarginGuarantee) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    BarrierSpec spec{1.0, 0.95, 0.01 * (U(rng) + 1.0), std::nullopt};
    FilterStepInput in;
    in.u_nom = Eigen::Vector2d(U(rng), U(rng));
    in.h_k = 0.5 * (U(rng) + 1.0);
    in.gamma_nom_next = Eigen::Vector2d(1.0 + 0.2 * U(rng), 1.0 + 0.2 * U(rng));
    in.J_gamma = MatrixXd::NullaryExpr(2, 2, [&] { return U(rng); });
    in.u_min = Eigen::Vector2d::Constant(-2.0);
    in.u_max = Eigen::Vector2d::Constant(2.0);
    const auto out = filter(in, spec);
    if (out.qp_status == QpStatus::Infeasible) continue;
    const VectorXd g_hat = predict_force(in.gamma_nom_next, in.J_gamma, out.u_star, in.u_nom);
    const double h_hat = spec.gamma_max - g_hat.maxCoeff();
    EXPECT_NEAR(out.predicted_h_next, h_hat, 1e-12);
    EXPECT_GE(h_hat, (1.0 - spec.alpha) * in.h_k + spec.delta - 1e-9);
  }
}

TEST(SafetyFilter, ZeroDeltaIsStandardCbf) {
  FilterStepInput in = scalar_input(0.5, 0.02, 0.26);
  in.J_gamma(0, 0) = -0.7;
  in.u_nom(0) = -0.2;
  const BarrierSpec spec{0.25, 0.95, 0.0, std::nullopt};
  const auto out = filter(in, spec);
  // J u <= (gamma_max - gamma_nom) + J u_nom - (1 - alpha) h_k
  const double b = (0.25 - 0.26) + in.J_gamma(0, 0) * in.u_nom(0) - 0.05 * 0.02;
  const QpResult r = solve_qp(in.u_nom, {{in.J_gamma.row(0).transpose(), b}}, InputBounds::unbounded(1));
  EXPECT_EQ(out.u_star(0), r.u(0));
}

TEST(SafetyFilter, SlackGrowsWithDelta) {
  FilterStepInput in;
  in.u_nom = Eigen::Vector2d(0.4, -0.1);
  in.h_k = 0.05;
  in.gamma_nom_next = Eigen::Vector2d(0.27, 0.24);
  in.J_gamma = (MatrixXd(2, 2) << 1.0, 0.3, -0.2, 0.8).finished();
  in.u_min = Eigen::Vector2d::Constant(-kInf);
  in.u_max = Eigen::Vector2d::Constant(kInf);
  Eigen::Vector2d last_slack = Eigen::Vector2d::Constant(-kInf);
  for (double delta : {0.0, 0.002, 0.005, 0.01, 0.02}) {
    const BarrierSpec spec{0.25, 0.95, delta, std::nullopt};
    const auto out = filter(in, spec);
    ASSERT_NE(out.qp_status, QpStatus::Infeasible);
    const VectorXd g_hat = predict_force(in.gamma_nom_next, in.J_gamma, out.u_star, in.u_nom);
    const Eigen::Vector2d slack = (Eigen::Vector2d::Constant(0.25) - g_hat).array() - 0.05 * in.h_k;
    EXPECT_TRUE((slack.array() >= last_slack.array() - 1e-12).all()) << delta;
    last_slack = slack;
  }
}

TEST(SafetyFilter, SmoothingMarginAddsWhenSet) {
  BarrierSpec spec{0.25, 0.95, 0.004, 0.001};
  EXPECT_DOUBLE_EQ(spec.effective_delta(), 0.005);
  const auto out = filter(scalar_input(0.5, 0.02, 0.26), spec);
  EXPECT_NEAR(out.u_star(0), 0.484, 1e-12);
  spec.alpha = 1.5;
  EXPECT_THROW(spec.validate(), ContractViolation);
}

TEST(SafetyFilter, SmoothingMarginEstimate) {
  const auto box = make_system("box1d");
  const SolverSettings settings;
  const double kappa = 1e-4;
  const double z = kappa / (0.01 * 9.81);
  ContactStep step{VectorXd::Constant(1, z), VectorXd::Constant(1, z), VectorXd::Constant(1, -0.1), 0.01};
  // Identical solves give zero.
  EXPECT_NEAR(*estimate_smoothing_margin(*box, step, CentralPath(kappa), settings, kappa), 0.0, 1e-15);

  // Two-solve oracle: (m_eff / dt) |v_n(kappa0) - v_n(kappa)|.
  const auto a = solve_step(step, CentralPath(1e-9), *box, settings);
  const auto b = solve_step(step, CentralPath(kappa), *box, settings);
  ASSERT_TRUE(a.converged() && b.converged());
  const double dv = (a.solution->q_next(0) - b.solution->q_next(0)) / step.dt;
  EXPECT_NEAR(*estimate_smoothing_margin(*box, step, CentralPath(kappa), settings),
              0.01 / step.dt * std::abs(dv), 1e-12);

  // Airborne at unit gap the force is kappa / gap, so the margin is about kappa - kappa0.
  ContactStep air{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 1.0), VectorXd::Zero(1), 0.01};
  EXPECT_NEAR(*estimate_smoothing_margin(*box, air, CentralPath(1e-6), settings), 1e-6 - 1e-9, 1e-8);
}
