#pragma once

#include <map>
#include <string>

#include "ccbf/system_model.hpp"

namespace ccbf {

/// Accepts "box1d", "planar_push", "box_pivot", "hopper" and the long
/// spellings "BoxContact1D", "PlanarPush", "BoxPivot", "Hopper".
SystemKind parse_system_kind(const std::string& name);

/// Builds a benchmark system with default parameters, then applies overrides.
/// Unknown override keys and non-finite values throw ContractViolation.
SystemModelPtr make_system(SystemKind kind, const std::map<std::string, double>& overrides = {});
SystemModelPtr make_system(const std::string& name,
                           const std::map<std::string, double>& overrides = {});

/// Default parameter set of a system (documentation and config echo).
ParameterSet default_parameters(SystemKind kind);

/// Central-path parameter the benchmark scenarios are tuned for. Planar push
/// uses a smaller value because friction smoothing lets the slider creep at
/// larger kappa.
double default_kappa(SystemKind kind);

/// u = clamp(u_ff + kp (y_ref - y) + kd (ydot_ref - ydot), u_min, u_max).
VectorXd nominal_input(const NominalController& ctrl, const VectorXd& y, const VectorXd& ydot,
                       int k);

/// Same, with task coordinates taken from two consecutive configurations.
VectorXd nominal_input(const NominalController& ctrl, const SystemModel& model,
                       const VectorXd& q_prev, const VectorXd& q_curr, int k);

/// Quintic minimum-jerk blend from 0 to 1 over tau in [0, 1], and its first
/// two derivatives in tau.
double min_jerk(double tau);
double min_jerk_rate(double tau);
double min_jerk_accel(double tau);

}  // namespace ccbf
