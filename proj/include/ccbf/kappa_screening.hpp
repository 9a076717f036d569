#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccbf/rollout_harness.hpp"

namespace ccbf {

struct ScreeningConfig {
  std::vector<double> candidates = logspace(1e-6, 1e-3, 20);
  std::vector<Scenario> rollouts;  // empty: default_scenarios(model, seed)
  int horizon = 0;                 // 0 runs the full plan
  double p = 0.10;
  double beta_q = 0.10;
  double alpha = 0.95;
  double band = 0.8;  // boundary band: predicted force >= band * gamma_max
  std::uint64_t seed = 0;
  SolverSettings settings;

  void validate() const;
};

struct RemainderSample {
  double h_hat_next = 0.0;
  double h_next = 0.0;
  double delta_h = 0.0;
  bool boundary = false;
  bool failed = false;
};

struct SampleSet {
  std::vector<RemainderSample> samples;  // filtered steps of every rollout
  double fail_rate = 0.0;
  int rollouts = 0;
};

struct KappaStats {
  double kappa = 0.0;
  double rho = 0.0;
  double score = 0.0;
  double fail_rate = 0.0;
  int sample_count = 0;
};

enum class SelectionPath { Compatible, FallbackMinFail };

std::string to_string(SelectionPath path);

struct KappaSelection {
  double kappa = 0.0;
  SelectionPath path = SelectionPath::Compatible;
  std::vector<double> compatible;
};

struct ScreeningReport {
  std::vector<KappaStats> stats;
  std::vector<double> excluded;  // candidates without boundary samples
  std::vector<double> compatible;
  double selected = 0.0;
  SelectionPath path = SelectionPath::Compatible;
};

/// Nearest-rank empirical quantile: the ceil(q n)-th smallest value.
double nearest_rank(std::vector<double> values, double q);

/// The seeded scenario set: the default plan, aggressiveness 1.1, 1.2 and 1.3,
/// and two default-aggressiveness runs with perturbed initial configurations.
std::vector<Scenario> default_scenarios(const SystemModel& model, std::uint64_t seed);

/// Standard-CBF rollouts over the scenario set. Samples are the steps where
/// the filter ran; boundary marks predicted force >= band * gamma_max.
SampleSet collect_samples(const SystemModel& model, double kappa, const ScreeningConfig& config);

/// rho = Q_{1-beta_q}((-dh)+), score = Q_p(h_hat) - rho over the given samples.
KappaStats stats(const std::vector<RemainderSample>& samples, double p, double beta_q);

KappaSelection select_kappa(const std::vector<KappaStats>& table);

/// Max, or a nearest-rank quantile, of (-dh)+.
struct DeltaMode {
  enum Kind { Zero, Quantile, Max } kind = Max;
  double q = 1.0;

  static DeltaMode parse(const std::string& name);  // zero, q85, q90, max
  std::string name() const;
};

double choose_delta(const std::vector<RemainderSample>& samples, const DeltaMode& mode);

/// Boundary-band samples only.
std::vector<RemainderSample> boundary_samples(const std::vector<RemainderSample>& samples);

ScreeningReport screen(const SystemModel& model, const ScreeningConfig& config);

void write_report_json(std::ostream& os, const ScreeningReport& report);

}  // namespace ccbf
