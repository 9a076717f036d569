#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ccbf/rollout_harness.hpp"
#include "ccbf/sensitivity.hpp"
#include "ccbf/systems.hpp"

using namespace ccbf;

namespace {

ContactStep box_step(double z, double u) {
  return {VectorXd::Constant(1, z), VectorXd::Constant(1, z), VectorXd::Constant(1, u), 0.01};
}

// d gamma / d u of the closed-form 1D box step.
double box_dgamma_du(double z, double u, double kappa) {
  const double m = 0.01, g = 9.81, dt = 0.01;
  const double a = dt * dt / m;
  const double c = z + a * (u - m * g);
  const double root = std::sqrt(c * c + 4.0 * a * kappa);
  const double zn = 0.5 * (c + root);
  const double dz_dc = 0.5 * (1.0 + c / root);
  return -kappa / (zn * zn) * dz_dc * a;
}

// Steps visited by a nominal rollout, with the input jittered around u_nom.
std::vector<ContactStep> sample_steps(const SystemModel& model, double kappa, int count,
                                      std::mt19937& rng) {
  RolloutConfig cfg;
  cfg.kappa = kappa;
  const RolloutResult r = run_rollout(model, cfg);
  const auto& traj = r.record.trajectory;
  std::uniform_int_distribution<int> pick(1, static_cast<int>(traj.size()) - 2);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::vector<ContactStep> out;
  for (int i = 0; i < count; ++i) {
    const int k = pick(rng);
    ContactStep s{traj[k - 1], traj[k], r.record.steps[k].u_nom, model.dt()};
    for (Eigen::Index j = 0; j < s.u.size(); ++j) s.u(j) += jitter(rng);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Sensitivity, BoxJacobianMatchesClosedForm) {
  const auto box = make_system("box1d");
  for (double kappa : {1e-6, 1e-5, 1e-4, 1e-3}) {
    for (double u : {-0.3, 0.0, 0.09, 0.2}) {
      for (double z : {1e-4, 2e-3}) {
        const auto step = box_step(z, u);
        const CentralPath cp(kappa);
        const auto out = solve_step(step, cp, *box, SolverSettings{});
        ASSERT_TRUE(out.converged());
        const auto sens = implicit_jacobian(*out.solution, step, cp, *box);
        EXPECT_NEAR(sens.J_gamma(0, 0), box_dgamma_du(z, u, kappa), 1e-8);
      }
    }
  }
}

TEST(Sensitivity, AirborneJacobianVanishes) {
  const auto box = make_system("box1d");
  const auto step = box_step(1.0, 0.0);
  const CentralPath cp(1e-6);
  const auto out = solve_step(step, cp, *box, SolverSettings{});
  ASSERT_TRUE(out.converged());
  const auto sens = implicit_jacobian(*out.solution, step, cp, *box);
  EXPECT_LT(std::abs(sens.J_gamma(0, 0)), 1e-4);
}

TEST(Sensitivity, ContactReleaseSharpensWithSmallerKappa) {
  // Box touching the ground, lifted by an upward force ramp: J goes from the
  // in-contact value towards 0 once the force exceeds the weight.
  const auto box = make_system("box1d");
  double last_width = std::numeric_limits<double>::infinity();
  for (double kappa : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const CentralPath cp(kappa);
    auto jac = [&](double u) {
      const auto step = box_step(0.0, u);
      const auto out = solve_step(step, cp, *box, SolverSettings{});
      EXPECT_TRUE(out.converged());
      return std::abs(implicit_jacobian(*out.solution, step, cp, *box).J_gamma(0, 0));
    };
    const double plateau = jac(-5.0);  // firmly pressed
    EXPECT_NEAR(plateau, 1.0, 0.05);
    const int n = 5000;
    int inside = 0;
    for (int i = 0; i <= n; ++i) {
      const double j = jac(0.5 * i / n);
      if (j >= 0.1 * plateau && j <= 0.9 * plateau) ++inside;
    }
    const double width = 0.5 * inside / n;
    EXPECT_LT(width, last_width) << kappa;
    last_width = width;
  }
}

TEST(Sensitivity, MatchesFiniteDifferencesOnAllSystems) {
  std::mt19937 rng(7);
  SolverSettings settings;
  for (const char* name : {"box1d", "planar_push", "box_pivot", "hopper"}) {
    const auto model = make_system(name);
    for (double kappa : {1e-6, 1e-5, 1e-4, 1e-3}) {
      int checked = 0;
      for (const auto& step : sample_steps(*model, kappa, 100, rng)) {
        const CentralPath cp(kappa);
        const auto out = solve_step(step, cp, *model, settings);
        ASSERT_TRUE(out.converged()) << name;
        const MatrixXd J = implicit_jacobian(*out.solution, step, cp, *model).J_gamma;
        const double h = 1e-6 * std::max(1.0, step.u.cwiseAbs().maxCoeff());
        const MatrixXd J_fd = finite_diff_force_jacobian(step, cp, *model, settings, h);
        const double err = (J - J_fd).norm() / std::max(1.0, J.norm());
        EXPECT_LE(err, 1e-4) << name << " kappa " << kappa;
        ++checked;
      }
      EXPECT_EQ(checked, 100);
    }
  }
}

TEST(Sensitivity, KappaDerivativeMatchesFiniteDifferences) {
  std::mt19937 rng(11);
  SolverSettings settings;
  for (const char* name : {"box1d", "planar_push", "box_pivot", "hopper"}) {
    const auto model = make_system(name);
    for (double kappa : {1e-5, 1e-4}) {
      for (const auto& step : sample_steps(*model, kappa, 10, rng)) {
        const auto base = solve_step(step, CentralPath(kappa), *model, settings);
        ASSERT_TRUE(base.converged());
        const auto sens = implicit_jacobian(*base.solution, step, CentralPath(kappa), *model);
        const auto up = solve_step(step, CentralPath(1.01 * kappa), *model, settings, base.solution);
        const auto dn = solve_step(step, CentralPath(0.99 * kappa), *model, settings, base.solution);
        ASSERT_TRUE(up.converged() && dn.converged());
        const VariableLayout layout(*model);
        const VectorXd fd =
            (layout.pack(*up.solution) - layout.pack(*dn.solution)) / (0.02 * kappa);
        const VectorXd exact = sens.dw_dkappa;
        EXPECT_LE((fd - exact).norm(), 1e-3 * std::max(exact.norm(), 1e-12)) << name;
      }
    }
  }
}

TEST(Sensitivity, CentralDifferenceErrorShrinksWithStep) {
  const auto box = make_system("box1d");
  const double kappa = 1e-4;
  const auto step = box_step(kappa / (0.01 * 9.81), 0.09);
  const CentralPath cp(kappa);
  const auto out = solve_step(step, cp, *box, SolverSettings{});
  ASSERT_TRUE(out.converged());
  const double exact = implicit_jacobian(*out.solution, step, cp, *box).J_gamma(0, 0);
  const double e1 = std::abs(finite_diff_force_jacobian(step, cp, *box, SolverSettings{}, 4e-3)(0, 0) - exact);
  const double e2 = std::abs(finite_diff_force_jacobian(step, cp, *box, SolverSettings{}, 2e-3)(0, 0) - exact);
  EXPECT_LT(e2, 0.35 * e1);
}

TEST(Sensitivity, TaylorErrorIsQuadraticInInputStep) {
  const auto box = make_system("box1d");
  const double kappa = 1e-4;
  const double z = kappa / (0.01 * 9.81);
  const double u_nom = -0.15;
  const CentralPath cp(kappa);
  const auto base = solve_step(box_step(z, u_nom), cp, *box, SolverSettings{});
  ASSERT_TRUE(base.converged());
  const double J = implicit_jacobian(*base.solution, box_step(z, u_nom), cp, *box).J_gamma(0, 0);
  double c_max = 0.0, c_min = std::numeric_limits<double>::infinity();
  for (double du : {0.0025, 0.005, 0.01, 0.015}) {
    const auto out = solve_step(box_step(z, u_nom + du), cp, *box, SolverSettings{});
    ASSERT_TRUE(out.converged());
    const double err = std::abs(out.solution->gamma(0) - (base.solution->gamma(0) + J * du));
    c_max = std::max(c_max, err / (du * du));
    c_min = std::min(c_min, err / (du * du));
  }
  EXPECT_LT(c_max, 2.0 * c_min);
}
