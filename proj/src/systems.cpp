#include "ccbf/systems.hpp"

#include <algorithm>
#include <cmath>

namespace ccbf {

double min_jerk(double tau) {
  tau = std::clamp(tau, 0.0, 1.0);
  return tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

double min_jerk_accel(double tau) {
  if (tau <= 0.0 || tau >= 1.0) return 0.0;
  return 60.0 * tau - 180.0 * tau * tau + 120.0 * tau * tau * tau;
}

double min_jerk_rate(double tau) {
  if (tau <= 0.0 || tau >= 1.0) return 0.0;
  return 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
}

namespace {

using std::cos;
using std::sin;
using std::sqrt;
using std::tanh;

ReferencePlan empty_plan(int horizon, int nu) {
  ReferencePlan plan;
  plan.horizon = horizon;
  plan.y_ref = MatrixXd::Zero(horizon, nu);
  plan.ydot_ref = MatrixXd::Zero(horizon, nu);
  plan.u_ff = MatrixXd::Zero(horizon, nu);
  return plan;
}

VectorXd offset_or_zero(const Scenario& s, int nq) {
  if (s.q0_offset.size() == 0) return VectorXd::Zero(nq);
  require(s.q0_offset.size() == nq, "scenario offset has wrong dimension");
  return s.q0_offset;
}

int horizon_of(const ParameterSet& p) {
  const double h = p.get("horizon");
  require(h >= 1.0, "horizon must be at least one step");
  return static_cast<int>(std::lround(h));
}

// Vertical box on a plane. q = [z], u = upward force.
class BoxContact1D final : public SystemModelT<BoxContact1D> {
 public:
  explicit BoxContact1D(ParameterSet p)
      : SystemModelT(SystemKind::BoxContact1D, "box1d", std::move(p)) {
    mass_ = params().get("mass");
    require(mass_ > 0.0, "mass must be positive");
    set_structure(MatrixXd::Constant(1, 1, mass_), 1, {{"ground", 0.0, false}}, {0});
  }

  template <typename S>
  VecX<S> sdf_impl(const VecX<S>& q) const {
    VecX<S> phi(1);
    phi(0) = q(0);
    return phi;
  }
  template <typename S>
  MatX<S> normal_jacobian_impl(const VecX<S>&) const {
    MatX<S> n(1, 1);
    n(0, 0) = S(1.0);
    return n;
  }
  template <typename S>
  MatX<S> tangent_jacobian_impl(const VecX<S>&) const {
    MatX<S> t(1, 1);
    t(0, 0) = S(0.0);
    return t;
  }
  template <typename S>
  VecX<S> applied_force_impl(const VecX<S>&, const VecX<S>&, const VecX<S>& u) const {
    VecX<S> f(1);
    f(0) = u(0) - mass_ * gravity();
    return f;
  }

  VectorXd task_coordinates(const VectorXd& q) const override { return q; }

  VectorXd initial_configuration(double kappa, const Scenario& s) const override {
    VectorXd q(1);
    q(0) = kappa / (mass_ * gravity());
    return q + offset_or_zero(s, 1);
  }

  // Press-to-depth: the reference sinks below the surface along a
  // minimum-jerk ramp and holds, so the pressing force grows with the
  // tracking error the contact allows.
  NominalController make_controller(const Scenario& s) const override {
    const auto& p = params();
    const int horizon = horizon_of(p);
    NominalController ctrl;
    ctrl.kp = VectorXd::Constant(1, p.get("kp"));
    ctrl.kd = VectorXd::Constant(1, p.get("kd"));
    ctrl.u_min = VectorXd::Constant(1, p.get("u_min"));
    ctrl.u_max = VectorXd::Constant(1, p.get("u_max"));
    ctrl.plan = empty_plan(horizon, 1);
    const double t0 = p.get("t_start"), ramp = p.get("t_ramp");
    const double depth = p.get("press_depth") * s.aggressiveness;
    for (int k = 0; k < horizon; ++k) {
      const double tau = (k * dt() - t0) / ramp;
      ctrl.plan.y_ref(k, 0) = -depth * min_jerk(tau);
      ctrl.plan.ydot_ref(k, 0) = -depth * min_jerk_rate(tau) / ramp;
    }
    return ctrl;
  }

 private:
  double mass_;
};

// Pusher on a rail pressing a slider that rests on frictional ground.
// q = [x_pusher, x_slider, z_slider], u = horizontal pusher force.
class PlanarPush final : public SystemModelT<PlanarPush> {
 public:
  explicit PlanarPush(ParameterSet p)
      : SystemModelT(SystemKind::PlanarPush, "planar_push", std::move(p)) {
    m_pusher_ = params().get("pusher_mass");
    m_slider_ = params().get("slider_mass");
    half_width_ = params().get("contact_offset");
    require(m_pusher_ > 0.0 && m_slider_ > 0.0, "masses must be positive");
    VectorXd m(3);
    m << m_pusher_, m_slider_, m_slider_;
    const double mu = params().get("mu");
    set_structure(m.asDiagonal(), 1,
                  {{"pusher_slider", 0.0, false}, {"slider_ground", mu, mu > 0.0}}, {0});
  }

  template <typename S>
  VecX<S> sdf_impl(const VecX<S>& q) const {
    VecX<S> phi(2);
    phi(0) = q(1) - q(0) - half_width_;
    phi(1) = q(2);
    return phi;
  }
  template <typename S>
  MatX<S> normal_jacobian_impl(const VecX<S>&) const {
    MatX<S> n = MatX<S>::Zero(2, 3);
    n(0, 0) = S(-1.0);
    n(0, 1) = S(1.0);
    n(1, 2) = S(1.0);
    return n;
  }
  template <typename S>
  MatX<S> tangent_jacobian_impl(const VecX<S>&) const {
    MatX<S> t = MatX<S>::Zero(2, 3);
    t(1, 1) = S(1.0);
    return t;
  }
  template <typename S>
  VecX<S> applied_force_impl(const VecX<S>&, const VecX<S>&, const VecX<S>& u) const {
    VecX<S> f(3);
    f(0) = u(0);
    f(1) = S(0.0);
    f(2) = S(-m_slider_ * gravity());
    return f;
  }

  VectorXd task_coordinates(const VectorXd& q) const override {
    return VectorXd::Constant(1, q(0));
  }

  VectorXd initial_configuration(double kappa, const Scenario& s) const override {
    const double preload = params().get("preload");
    VectorXd q(3);
    q(1) = 0.0;
    q(2) = kappa / (m_slider_ * gravity());
    q(0) = q(1) - half_width_ - kappa / preload;
    return q + offset_or_zero(s, 3);
  }

  // Push-to-goal: the pusher follows a minimum-jerk path from the touching
  // position, with friction and inertia feedforward while moving.
  NominalController make_controller(const Scenario& s) const override {
    const auto& p = params();
    const int horizon = horizon_of(p);
    NominalController ctrl;
    ctrl.kp = VectorXd::Constant(1, p.get("kp"));
    ctrl.kd = VectorXd::Constant(1, p.get("kd"));
    ctrl.u_min = VectorXd::Constant(1, p.get("u_min"));
    ctrl.u_max = VectorXd::Constant(1, p.get("u_max"));
    ctrl.plan = empty_plan(horizon, 1);
    const double t0 = p.get("t_start"), T = p.get("t_move");
    const double goal = p.get("goal") * s.aggressiveness;
    const double friction = p.get("mu") * m_slider_ * gravity();
    const double preload = p.get("preload");
    for (int k = 0; k < horizon; ++k) {
      const double tau = (k * dt() - t0) / T;
      ctrl.plan.y_ref(k, 0) = -half_width_ + goal * min_jerk(tau);
      ctrl.plan.ydot_ref(k, 0) = goal * min_jerk_rate(tau) / T;
      const double accel = goal * min_jerk_accel(tau) / (T * T);
      const bool moving = tau > 0.0 && tau < 1.0;
      ctrl.plan.u_ff(k, 0) = moving ? friction + (m_pusher_ + m_slider_) * accel : preload;
    }
    return ctrl;
  }

 private:
  double m_pusher_, m_slider_, half_width_;
};

// Box hinged at its right bottom corner, tipped by a finger pushing its left face.
// q = [theta (clockwise tilt), x_finger], u = horizontal finger force.
class BoxPivot final : public SystemModelT<BoxPivot> {
 public:
  explicit BoxPivot(ParameterSet p) : SystemModelT(SystemKind::BoxPivot, "box_pivot", std::move(p)) {
    mass_ = params().get("mass");
    width_ = params().get("width");
    height_ = params().get("height");
    finger_height_ = params().get("finger_height");
    require(mass_ > 0.0 && width_ > 0.0 && height_ > 0.0, "box dimensions must be positive");
    VectorXd m(2);
    m << mass_ * (width_ * width_ + height_ * height_) / 3.0, params().get("finger_mass");
    require(m(1) > 0.0, "finger mass must be positive");
    set_structure(m.asDiagonal(), 1, {{"corner_ground", 0.0, false}, {"finger_face", 0.0, false}},
                  {0, 1});
  }

  template <typename S>
  VecX<S> sdf_impl(const VecX<S>& q) const {
    VecX<S> phi(2);
    phi(0) = width_ * sin(q(0));
    phi(1) = -q(1) * cos(q(0)) + finger_height_ * sin(q(0)) - width_;
    return phi;
  }
  template <typename S>
  MatX<S> normal_jacobian_impl(const VecX<S>& q) const {
    MatX<S> n(2, 2);
    n(0, 0) = width_ * cos(q(0));
    n(0, 1) = S(0.0);
    n(1, 0) = q(1) * sin(q(0)) + finger_height_ * cos(q(0));
    n(1, 1) = -cos(q(0));
    return n;
  }
  template <typename S>
  MatX<S> tangent_jacobian_impl(const VecX<S>&) const {
    return MatX<S>::Zero(2, 2);
  }
  template <typename S>
  VecX<S> applied_force_impl(const VecX<S>& q, const VecX<S>&, const VecX<S>& u) const {
    VecX<S> f(2);
    f(0) = -mass_ * gravity() * (0.5 * width_ * cos(q(0)) - 0.5 * height_ * sin(q(0)));
    f(1) = u(0);
    return f;
  }

  VectorXd task_coordinates(const VectorXd& q) const override {
    return VectorXd::Constant(1, q(0));
  }

  VectorXd initial_configuration(double kappa, const Scenario& s) const override {
    const double preload = params().get("preload");
    const double corner_force =
        (0.5 * mass_ * gravity() * width_ - preload * finger_height_) / width_;
    VectorXd q(2);
    q(0) = std::asin(std::min(1.0, kappa / (corner_force * width_)));
    // Place the finger so that its gap carries the preload.
    const double gap = kappa / preload;
    q(1) = (finger_height_ * sin(q(0)) - width_ - gap) / cos(q(0));
    return q + offset_or_zero(s, 2);
  }

  // Pivot-to-angle: minimum-jerk tilt with gravity and inertia feedforward.
  NominalController make_controller(const Scenario& s) const override {
    const auto& p = params();
    const int horizon = horizon_of(p);
    NominalController ctrl;
    ctrl.kp = VectorXd::Constant(1, p.get("kp"));
    ctrl.kd = VectorXd::Constant(1, p.get("kd"));
    ctrl.u_min = VectorXd::Constant(1, p.get("u_min"));
    ctrl.u_max = VectorXd::Constant(1, p.get("u_max"));
    ctrl.plan = empty_plan(horizon, 1);
    const double t0 = p.get("t_start"), T = p.get("t_move");
    const double target = p.get("target_angle") * s.aggressiveness;
    const double preload = p.get("preload"), t_load = p.get("t_load");
    for (int k = 0; k < horizon; ++k) {
      const double tau = (k * dt() - t0) / T;
      const double th = target * min_jerk(tau);
      ctrl.plan.y_ref(k, 0) = th;
      ctrl.plan.ydot_ref(k, 0) = target * min_jerk_rate(tau) / T;
      const double accel = target * min_jerk_accel(tau) / (T * T);
      const double torque = mass_ * gravity() * (0.5 * width_ * cos(th) - 0.5 * height_ * sin(th)) +
                            mass_matrix()(0, 0) * accel;
      const double hold = std::max(preload, torque / (finger_height_ * cos(th)));
      // Load the finger up to the holding force before the tilt starts.
      const double load = min_jerk((k * dt() - t0 + t_load) / t_load);
      ctrl.plan.u_ff(k, 0) = tau <= 0.0 ? preload + load * (hold - preload) : hold;
    }
    return ctrl;
  }

  TaskOutcome task_success(std::span<const VectorXd> traj) const override {
    if (traj.empty()) return TaskOutcome::Failure;
    const double err = std::abs(traj.back()(0) - params().get("target_angle"));
    return err <= params().get("success_tol") ? TaskOutcome::Success : TaskOutcome::Failure;
  }

 private:
  double mass_, width_, height_, finger_height_;
};

// Planar two-mass hopper: body point mass and foot point mass joined by a
// prismatic leg with an axial force and a hip couple. Terrain drops by
// drop_depth around x = drop_x. q = [x_b, z_b, x_f, z_f], u = [leg force, hip torque].
class Hopper final : public SystemModelT<Hopper> {
 public:
  explicit Hopper(ParameterSet p) : SystemModelT(SystemKind::Hopper, "hopper", std::move(p)) {
    m_body_ = params().get("body_mass");
    m_foot_ = params().get("foot_mass");
    drop_x_ = params().get("drop_x");
    drop_depth_ = params().get("drop_depth");
    drop_width_ = params().get("drop_width");
    require(m_body_ > 0.0 && m_foot_ > 0.0, "masses must be positive");
    require(drop_width_ > 0.0, "drop width must be positive");
    VectorXd m(4);
    m << m_body_, m_body_, m_foot_, m_foot_;
    const double mu = params().get("mu");
    set_structure(m.asDiagonal(), 2, {{"foot_ground", mu, mu > 0.0}}, {0});
  }

  template <typename S>
  S terrain(const S& x) const {
    return -0.5 * drop_depth_ * (1.0 + tanh((x - drop_x_) / drop_width_));
  }
  template <typename S>
  S terrain_slope(const S& x) const {
    const S th = tanh((x - drop_x_) / drop_width_);
    return -0.5 * drop_depth_ * (1.0 - th * th) / drop_width_;
  }

  template <typename S>
  VecX<S> sdf_impl(const VecX<S>& q) const {
    VecX<S> phi(1);
    phi(0) = q(3) - terrain(q(2));
    return phi;
  }
  template <typename S>
  MatX<S> normal_jacobian_impl(const VecX<S>& q) const {
    MatX<S> n = MatX<S>::Zero(1, 4);
    n(0, 2) = -terrain_slope(q(2));
    n(0, 3) = S(1.0);
    return n;
  }
  template <typename S>
  MatX<S> tangent_jacobian_impl(const VecX<S>&) const {
    MatX<S> t = MatX<S>::Zero(1, 4);
    t(0, 2) = S(1.0);
    return t;
  }
  template <typename S>
  VecX<S> applied_force_impl(const VecX<S>& q, const VecX<S>&, const VecX<S>& u) const {
    const S dx = q(0) - q(2);
    const S dz = q(1) - q(3);
    const S len = sqrt(dx * dx + dz * dz);
    const S ex = dx / len, ez = dz / len;
    const S hip = u(1) / len;
    const S fx = u(0) * ex + hip * ez;
    const S fz = u(0) * ez - hip * ex;
    VecX<S> f(4);
    f(0) = fx;
    f(1) = fz - m_body_ * gravity();
    f(2) = -fx;
    f(3) = -fz - m_foot_ * gravity();
    return f;
  }

  /// [leg length, leg angle from vertical (positive when the body leads)].
  VectorXd task_coordinates(const VectorXd& q) const override {
    const double dx = q(0) - q(2), dz = q(1) - q(3);
    VectorXd y(2);
    y << std::sqrt(dx * dx + dz * dz), std::atan2(dx, dz);
    return y;
  }

  VectorXd initial_configuration(double kappa, const Scenario& s) const override {
    const double weight = (m_body_ + m_foot_) * gravity();
    VectorXd q(4);
    q(2) = 0.0;
    q(3) = terrain(0.0) + kappa / weight;
    q(0) = 0.0;
    q(1) = q(3) + params().get("leg_length");
    return q + offset_or_zero(s, 4);
  }

  // Periodic hop: each cycle thrusts the leaning leg out with constant
  // acceleration, then retracts it and swings the foot to the landing angle.
  NominalController make_controller(const Scenario& s) const override {
    const auto& p = params();
    const int horizon = horizon_of(p);
    NominalController ctrl;
    ctrl.kp = Eigen::Vector2d(p.get("kp_leg"), p.get("kp_hip"));
    ctrl.kd = Eigen::Vector2d(p.get("kd_leg"), p.get("kd_hip"));
    ctrl.u_min = Eigen::Vector2d(p.get("u_leg_min"), -p.get("u_hip_max"));
    ctrl.u_max = Eigen::Vector2d(p.get("u_leg_max"), p.get("u_hip_max"));
    ctrl.plan = empty_plan(horizon, 2);
    const double l0 = p.get("leg_length");
    const double period = p.get("hop_period");
    const double t0 = p.get("t_start");
    const double t_thrust = p.get("thrust_time");
    const double t_retract = p.get("retract_time");
    const double ext = p.get("thrust_extension") * s.aggressiveness;
    const double lean = p.get("lean_angle");
    const double landing = p.get("landing_angle");
    const double support = m_body_ * gravity();
    const double thrust_accel = 2.0 * ext / (t_thrust * t_thrust);
    const int hops = static_cast<int>(p.get("hop_count"));
    for (int k = 0; k < horizon; ++k) {
      const double t = k * dt() - t0;
      double l = l0, ldot = 0.0, a = 0.0, adot = 0.0, uff = support;
      const int cycle = t < 0.0 ? -1 : static_cast<int>(t / period);
      if (cycle >= 0 && cycle < hops) {
        const double tc = t - cycle * period;
        if (tc < t_thrust) {
          const double tau = tc / t_thrust;
          l = l0 + ext * tau * tau;
          ldot = 2.0 * ext * tau / t_thrust;
          a = lean;
          uff = m_body_ * (gravity() + thrust_accel);
        } else {
          const double tau = (tc - t_thrust) / t_retract;
          l = l0 + ext * (1.0 - min_jerk(tau));
          ldot = -ext * min_jerk_rate(tau) / t_retract;
          a = lean + (landing - lean) * min_jerk(tau);
          adot = (landing - lean) * min_jerk_rate(tau) / t_retract;
          uff = tau < 1.0 ? 0.0 : support;
        }
      }
      ctrl.plan.y_ref.row(k) << l, a;
      ctrl.plan.ydot_ref.row(k) << ldot, adot;
      ctrl.plan.u_ff.row(k) << uff, 0.0;
    }
    return ctrl;
  }

  TaskOutcome task_success(std::span<const VectorXd> traj) const override {
    if (traj.empty()) return TaskOutcome::Failure;
    const double l0 = params().get("leg_length");
    double max_height = -1e9;
    for (const auto& q : traj) {
      const double leg_z = q(1) - q(3);
      if (leg_z < 0.5 * l0) return TaskOutcome::Failure;  // fell over or collapsed
      max_height = std::max(max_height, q(3) - terrain(q(2)));
    }
    const double advance = traj.back()(0) - traj.front()(0);
    const bool hopped = max_height >= params().get("min_clearance");
    return (hopped && advance >= params().get("success_distance")) ? TaskOutcome::Success
                                                                    : TaskOutcome::Failure;
  }

 private:
  double m_body_, m_foot_, drop_x_, drop_depth_, drop_width_;
};

}  // namespace

ParameterSet default_parameters(SystemKind kind) {
  switch (kind) {
    case SystemKind::BoxContact1D:
      return {{"dt", 0.01},       {"gravity", 9.81}, {"gamma_max", 0.25}, {"m_eff", 0.01},
              {"mass", 0.01},     {"kp", 100.0},     {"kd", 0.2},         {"u_min", -1.0},
              {"u_max", 1.0},     {"horizon", 200},  {"t_start", 0.2},    {"t_ramp", 0.6},
              {"press_depth", 0.00142}};
    case SystemKind::PlanarPush:
      return {{"dt", 0.01},          {"gravity", 9.81},    {"gamma_max", 0.245},
              {"m_eff", 0.02},       {"pusher_mass", 0.05}, {"slider_mass", 0.04},
              {"mu", 0.5},           {"contact_offset", 0.05}, {"preload", 0.15},
              {"kp", 20.0},          {"kd", 1.0},          {"u_min", -1.0},
              {"u_max", 1.0},        {"horizon", 200},     {"t_start", 0.2},
              {"t_move", 1.0},       {"goal", 0.3}};
    case SystemKind::BoxPivot:
      return {{"dt", 0.01},          {"gravity", 9.81},       {"gamma_max", 0.9},
              {"m_eff", 0.02},       {"mass", 0.1},           {"width", 0.1},
              {"height", 0.1},       {"finger_height", 0.08}, {"finger_mass", 0.02},
              {"preload", 0.05},     {"kp", 8.0},             {"kd", 0.5},
              {"u_min", 0.0},        {"u_max", 3.0},          {"horizon", 200},
              {"t_start", 0.3},      {"t_load", 0.2},         {"t_move", 0.2},
              {"target_angle", 0.35},
              {"success_tol", 0.05}};
    case SystemKind::Hopper:
      return {{"dt", 0.01},           {"gravity", 9.81},        {"gamma_max", 1.3},
              {"m_eff", 0.006},       {"body_mass", 0.06},      {"foot_mass", 0.006},
              {"mu", 0.8},            {"leg_length", 0.15},     {"drop_x", 0.2},
              {"drop_depth", 0.02},   {"drop_width", 0.003},    {"kp_leg", 40.0},
              {"kd_leg", 1.0},        {"kp_hip", 0.5},          {"kd_hip", 0.02},
              {"u_leg_min", -1.0},    {"u_leg_max", 3.0},       {"u_hip_max", 0.2},
              {"horizon", 250},       {"t_start", 0.2},         {"hop_period", 0.45},
              {"hop_count", 4},       {"thrust_time", 0.08},    {"retract_time", 0.1},
              {"thrust_extension", 0.03}, {"lean_angle", 0.2},  {"landing_angle", 0.0},
              {"min_clearance", 0.005}, {"success_distance", 0.2}};
    case SystemKind::Custom: break;
  }
  throw ContractViolation("no default parameters for system kind " + to_string(kind));
}

SystemKind parse_system_kind(const std::string& name) {
  if (name == "box1d" || name == "BoxContact1D" || name == "box_contact") return SystemKind::BoxContact1D;
  if (name == "planar_push" || name == "PlanarPush") return SystemKind::PlanarPush;
  if (name == "box_pivot" || name == "BoxPivot") return SystemKind::BoxPivot;
  if (name == "hopper" || name == "Hopper") return SystemKind::Hopper;
  throw ContractViolation("unknown system '" + name + "'");
}

SystemModelPtr make_system(SystemKind kind, const std::map<std::string, double>& overrides) {
  ParameterSet params = default_parameters(kind);
  for (const auto& [key, value] : overrides) {
    require(std::isfinite(value), "override '" + key + "' is not finite");
    params.set(key, value);
  }
  switch (kind) {
    case SystemKind::BoxContact1D: return std::make_shared<BoxContact1D>(std::move(params));
    case SystemKind::PlanarPush: return std::make_shared<PlanarPush>(std::move(params));
    case SystemKind::BoxPivot: return std::make_shared<BoxPivot>(std::move(params));
    case SystemKind::Hopper: return std::make_shared<Hopper>(std::move(params));
    case SystemKind::Custom: break;
  }
  throw ContractViolation("cannot build a custom system by kind");
}

SystemModelPtr make_system(const std::string& name, const std::map<std::string, double>& overrides) {
  return make_system(parse_system_kind(name), overrides);
}

double default_kappa(SystemKind kind) {
  switch (kind) {
    case SystemKind::BoxContact1D: return 1e-4;
    case SystemKind::PlanarPush: return 1e-5;
    case SystemKind::BoxPivot: return 1e-4;
    case SystemKind::Hopper: return 1e-3;
    case SystemKind::Custom: break;
  }
  return 1e-4;
}

VectorXd nominal_input(const NominalController& ctrl, const VectorXd& y, const VectorXd& ydot,
                       int k) {
  require(k >= 0 && k < ctrl.plan.horizon, "step index outside the plan horizon");
  const VectorXd yr = ctrl.plan.y_ref.row(k).transpose();
  const VectorXd ydr = ctrl.plan.ydot_ref.row(k).transpose();
  const VectorXd uff = ctrl.plan.u_ff.row(k).transpose();
  const VectorXd u = uff + ctrl.kp.cwiseProduct(yr - y) + ctrl.kd.cwiseProduct(ydr - ydot);
  return u.cwiseMax(ctrl.u_min).cwiseMin(ctrl.u_max);
}

VectorXd nominal_input(const NominalController& ctrl, const SystemModel& model,
                       const VectorXd& q_prev, const VectorXd& q_curr, int k) {
  const VectorXd y = model.task_coordinates(q_curr);
  const VectorXd ydot = (y - model.task_coordinates(q_prev)) / model.dt();
  return nominal_input(ctrl, y, ydot, k);
}

}  // namespace ccbf
