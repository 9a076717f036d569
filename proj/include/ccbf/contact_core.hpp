#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccbf/system_model.hpp"
#include "ccbf/types.hpp"

namespace ccbf {

/// Problem data of one step: two configurations and the input.
struct ContactStep {
  VectorXd q_prev;
  VectorXd q_curr;
  VectorXd u;
  double dt = 0.0;
};

/// Unknowns of one step. beta is the net tangential impulse (N*s).
///
/// slacks holds, per contact, the gap slack followed (for frictional contacts)
/// by beta+, beta-, cone dual, cone slack, eta+, eta-.
struct ContactSolution {
  VectorXd q_next;
  VectorXd gamma;
  VectorXd beta;
  VectorXd slacks;
};

struct SolverSettings {
  int max_newton_iters = 50;
  double residual_tol = 1e-10;
  double line_search_shrink = 0.5;
  double min_step = 1e-10;
  double fraction_to_boundary = 0.95;
};

enum class SolveStatus { Converged, MaxIters, LineSearchFail, Singular };

std::string to_string(SolveStatus status);

struct SolveOutcome {
  std::optional<ContactSolution> solution;
  SolveStatus status = SolveStatus::MaxIters;
  double residual_norm = 0.0;
  int iters = 0;

  bool converged() const { return status == SolveStatus::Converged; }
};

/// Index map between ContactSolution and the packed Newton vector.
class VariableLayout {
 public:
  explicit VariableLayout(const SystemModel& model);

  int size() const { return size_; }
  int nq() const { return nq_; }
  int contact_count() const { return static_cast<int>(blocks_.size()); }
  bool frictional(int c) const { return blocks_[c].frictional; }

  int gamma(int c) const { return blocks_[c].offset; }
  int gap_slack(int c) const { return blocks_[c].offset + 1; }
  int beta_plus(int c) const { return blocks_[c].offset + 2; }
  int beta_minus(int c) const { return blocks_[c].offset + 3; }
  int cone_dual(int c) const { return blocks_[c].offset + 4; }
  int cone_slack(int c) const { return blocks_[c].offset + 5; }
  int eta_plus(int c) const { return blocks_[c].offset + 6; }
  int eta_minus(int c) const { return blocks_[c].offset + 7; }

  /// Every entry that must stay strictly positive (all but q_next).
  const std::vector<int>& positive_indices() const { return positive_; }
  /// Index pairs (a, b) with a * b = kappa on the central path.
  const std::vector<std::pair<int, int>>& complementarity_pairs() const { return pairs_; }

  VectorXd pack(const ContactSolution& sol) const;
  ContactSolution unpack(const VectorXd& w) const;

 private:
  struct Block {
    int offset;
    bool frictional;
  };
  int nq_;
  int size_;
  std::vector<Block> blocks_;
  std::vector<int> positive_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Stacked residual: momentum balance, then per contact the gap definition,
/// gamma * s = kappa and, for frictional contacts, the maximum-dissipation
/// stationarity and relaxed cone complementarity rows.
template <typename Scalar>
VecX<Scalar> contact_residual(const SystemModel& model, const VariableLayout& layout,
                              const VecX<Scalar>& w, const VecX<Scalar>& q_prev,
                              const VecX<Scalar>& q_curr, const VecX<Scalar>& u,
                              const Scalar& kappa, double dt);

VectorXd assemble_residual(const ContactSolution& w, const ContactStep& step,
                           const CentralPath& cp, const SystemModel& model);

/// Jacobian of the residual with respect to the packed unknowns.
MatrixXd residual_jacobian(const VectorXd& w, const ContactStep& step, const CentralPath& cp,
                           const SystemModel& model, const VariableLayout& layout);

SolveOutcome solve_step(const ContactStep& step, const CentralPath& cp, const SystemModel& model,
                        const SolverSettings& settings,
                        const std::optional<ContactSolution>& warm_start = std::nullopt);

/// |gamma_i * phi_i(q_next) - kappa| per contact.
VectorXd check_complementarity(const ContactSolution& w, const ContactStep& step,
                               const CentralPath& cp, const SystemModel& model);

/// Normal velocity (q_next - q_curr)/dt projected on each contact normal.
VectorXd normal_velocity(const ContactSolution& w, const ContactStep& step,
                         const SystemModel& model);

/// Reciprocal condition estimate below which dr/dw is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

}  // namespace ccbf
