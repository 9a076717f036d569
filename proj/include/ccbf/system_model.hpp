#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccbf/types.hpp"

namespace ccbf {

enum class SystemKind { BoxContact1D, PlanarPush, BoxPivot, Hopper, Custom };

std::string to_string(SystemKind kind);

/// Ordered key/value parameters. Keys are fixed at construction; setting an
/// unknown key is an error so that config typos surface immediately.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(std::initializer_list<std::pair<std::string, double>> entries);

  double get(const std::string& key) const;
  void set(const std::string& key, double value);
  bool contains(const std::string& key) const;
  void add(const std::string& key, double value);

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

struct ContactSpec {
  std::string name;
  double mu = 0.0;
  /// Friction is modelled only where a tangent direction exists and mu > 0.
  bool frictional = false;
};

/// One member of a rollout set: a scaled reference and a perturbed start.
struct Scenario {
  double aggressiveness = 1.0;
  VectorXd q0_offset;  // empty means no perturbation
  std::string label = "default";
};

/// Scripted reference in task coordinates, one row per step.
struct ReferencePlan {
  int horizon = 0;
  MatrixXd y_ref;
  MatrixXd ydot_ref;
  MatrixXd u_ff;
};

struct NominalController {
  VectorXd kp;
  VectorXd kd;
  ReferencePlan plan;
  VectorXd u_min;
  VectorXd u_max;
};

enum class TaskOutcome { Success, Failure, NotApplicable };

std::string to_string(TaskOutcome outcome);

/// A planar contact system: constant mass matrix, per-contact signed distance,
/// applied generalized forces, plus the task definition used by the harness.
///
/// Geometry and force maps are provided for double and AD scalars so the
/// contact residual can be differentiated exactly.
class SystemModel {
 public:
  SystemModel(SystemKind kind, std::string name, ParameterSet params);
  virtual ~SystemModel() = default;

  SystemKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const ParameterSet& params() const { return params_; }

  int nq() const { return static_cast<int>(mass_.rows()); }
  int nu() const { return nu_; }
  int contact_count() const { return static_cast<int>(contacts_.size()); }
  const std::vector<ContactSpec>& contacts() const { return contacts_; }
  const MatrixXd& mass_matrix() const { return mass_; }

  double dt() const { return params_.get("dt"); }
  double gravity() const { return params_.get("gravity"); }
  double gamma_max() const { return params_.get("gamma_max"); }
  /// Effective mass along the contact normal used by the smoothing margin.
  double effective_mass() const { return params_.get("m_eff"); }
  /// Contacts whose normal force is bounded by gamma_max.
  const std::vector<int>& safety_contacts() const { return safety_contacts_; }

  virtual VectorXd sdf(const VectorXd& q) const = 0;
  virtual VecX<AD> sdf(const VecX<AD>& q) const = 0;
  /// Rows: contacts, columns: coordinates. Row i is the gradient of sdf_i.
  virtual MatrixXd normal_jacobian(const VectorXd& q) const = 0;
  virtual MatX<AD> normal_jacobian(const VecX<AD>& q) const = 0;
  /// Rows for frictionless contacts are zero.
  virtual MatrixXd tangent_jacobian(const VectorXd& q) const = 0;
  virtual MatX<AD> tangent_jacobian(const VecX<AD>& q) const = 0;
  /// Gravity plus actuation, evaluated at the current state.
  virtual VectorXd applied_force(const VectorXd& q, const VectorXd& v,
                                 const VectorXd& u) const = 0;
  virtual VecX<AD> applied_force(const VecX<AD>& q, const VecX<AD>& v,
                                 const VecX<AD>& u) const = 0;

  /// Coordinates tracked by the nominal PD controller (one per input).
  virtual VectorXd task_coordinates(const VectorXd& q) const = 0;
  /// Approximately resting start for the given smoothing level.
  virtual VectorXd initial_configuration(double kappa, const Scenario& scenario) const = 0;
  virtual NominalController make_controller(const Scenario& scenario) const = 0;
  virtual TaskOutcome task_success(std::span<const VectorXd> trajectory) const {
    (void)trajectory;
    return TaskOutcome::NotApplicable;
  }

 protected:
  void set_structure(MatrixXd mass, int nu, std::vector<ContactSpec> contacts,
                     std::vector<int> safety_contacts);

 private:
  SystemKind kind_;
  std::string name_;
  ParameterSet params_;
  MatrixXd mass_;
  int nu_ = 0;
  std::vector<ContactSpec> contacts_;
  std::vector<int> safety_contacts_;
};

/// Forwards the scalar-generic virtuals to templated *_impl members of Derived.
template <class Derived>
class SystemModelT : public SystemModel {
 public:
  using SystemModel::SystemModel;

  VectorXd sdf(const VectorXd& q) const final { return self().template sdf_impl<double>(q); }
  VecX<AD> sdf(const VecX<AD>& q) const final { return self().template sdf_impl<AD>(q); }
  MatrixXd normal_jacobian(const VectorXd& q) const final {
    return self().template normal_jacobian_impl<double>(q);
  }
  MatX<AD> normal_jacobian(const VecX<AD>& q) const final {
    return self().template normal_jacobian_impl<AD>(q);
  }
  MatrixXd tangent_jacobian(const VectorXd& q) const final {
    return self().template tangent_jacobian_impl<double>(q);
  }
  MatX<AD> tangent_jacobian(const VecX<AD>& q) const final {
    return self().template tangent_jacobian_impl<AD>(q);
  }
  VectorXd applied_force(const VectorXd& q, const VectorXd& v, const VectorXd& u) const final {
    return self().template applied_force_impl<double>(q, v, u);
  }
  VecX<AD> applied_force(const VecX<AD>& q, const VecX<AD>& v, const VecX<AD>& u) const final {
    return self().template applied_force_impl<AD>(q, v, u);
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

using SystemModelPtr = std::shared_ptr<const SystemModel>;

}  // namespace ccbf
