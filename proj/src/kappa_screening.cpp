#include "ccbf/kappa_screening.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

namespace ccbf {

void ScreeningConfig::validate() const {
  require(!candidates.empty(), "no kappa candidates");
  for (double k : candidates) require(k > 0.0, "kappa candidates must be positive");
  require(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
  require(beta_q > 0.0 && beta_q < 1.0, "beta_q must lie in (0, 1)");
  require(band > 0.0, "boundary band must be positive");
}

std::string to_string(SelectionPath path) {
  return path == SelectionPath::Compatible ? "Compatible" : "FallbackMinFail";
}

double nearest_rank(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const long rank = std::max(1L, static_cast<long>(std::ceil(q * n - 1e-12)));
  return values[static_cast<size_t>(rank - 1)];
}

std::vector<Scenario> default_scenarios(const SystemModel& model, std::uint64_t seed) {
  std::vector<Scenario> out;
  out.push_back({});
  for (double a : {1.1, 1.2, 1.3}) {
    Scenario s;
    s.aggressiveness = a;
    s.label = "aggressive" + std::to_string(a).substr(0, 3);
    out.push_back(s);
  }
  // Initial-configuration perturbations, corrected so that no contact gap
  // shrinks and the perturbed start never penetrates.
  const VectorXd q0 = model.initial_configuration(1e-4, {});
  const MatrixXd N = model.normal_jacobian(q0);
  const MatrixXd N_pinv = N.completeOrthogonalDecomposition().pseudoInverse();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1e-4);
  for (int i = 0; i < 2; ++i) {
    VectorXd d = VectorXd::NullaryExpr(model.nq(), [&](Eigen::Index) { return noise(rng); });
    d -= N_pinv * (N * d).cwiseMin(0.0);
    Scenario s;
    s.q0_offset = d;
    s.label = "perturbed" + std::to_string(i);
    out.push_back(s);
  }
  return out;
}

SampleSet collect_samples(const SystemModel& model, double kappa, const ScreeningConfig& config) {
  config.validate();
  const std::vector<Scenario> set =
      config.rollouts.empty() ? default_scenarios(model, config.seed) : config.rollouts;
  SampleSet out;
  int failed_rollouts = 0;
  for (const auto& scenario : set) {
    RolloutConfig rc;
    rc.controller = ControllerKind::CBF;
    rc.kappa = kappa;
    rc.alpha = config.alpha;
    rc.horizon = config.horizon;
    rc.scenario = scenario;
    rc.settings = config.settings;
    const RolloutResult r = run_rollout(model, rc);
    if (r.record.solver_failures > 0) ++failed_rollouts;
    for (const auto& s : r.record.steps) {
      const bool failed = s.solver_status != SolveStatus::Converged;
      if (!s.qp_status && !failed) continue;
      RemainderSample sample;
      sample.h_hat_next = s.h_hat_next;
      sample.h_next = s.h;
      sample.delta_h = s.delta_h;
      sample.failed = failed;
      sample.boundary = !failed && s.gamma_hat_max >= config.band * model.gamma_max();
      out.samples.push_back(sample);
    }
  }
  out.rollouts = static_cast<int>(set.size());
  out.fail_rate = set.empty() ? 0.0 : static_cast<double>(failed_rollouts) / set.size();
  return out;
}

namespace {

std::vector<double> under_predictions(const std::vector<RemainderSample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(std::max(0.0, -s.delta_h));
  return out;
}

}  // namespace

std::vector<RemainderSample> boundary_samples(const std::vector<RemainderSample>& samples) {
  std::vector<RemainderSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [](const RemainderSample& s) { return s.boundary; });
  return out;
}

KappaStats stats(const std::vector<RemainderSample>& samples, double p, double beta_q) {
  require(!samples.empty(), "statistics of an empty sample");
  std::vector<double> h_hat;
  h_hat.reserve(samples.size());
  for (const auto& s : samples) h_hat.push_back(s.h_hat_next);
  KappaStats out;
  out.rho = nearest_rank(under_predictions(samples), 1.0 - beta_q);
  out.score = nearest_rank(h_hat, p) - out.rho;
  out.sample_count = static_cast<int>(samples.size());
  return out;
}

KappaSelection select_kappa(const std::vector<KappaStats>& table) {
  require(!table.empty(), "no candidates to select from");
  KappaSelection out;
  const KappaStats* best = nullptr;
  for (const auto& s : table) {
    if (!(s.fail_rate == 0.0 && s.score >= 0.0)) continue;
    out.compatible.push_back(s.kappa);
    if (!best || s.score > best->score || (s.score == best->score && s.kappa < best->kappa))
      best = &s;
  }
  if (best) {
    out.kappa = best->kappa;
    out.path = SelectionPath::Compatible;
    return out;
  }
  for (const auto& s : table) {
    if (!best || s.fail_rate < best->fail_rate ||
        (s.fail_rate == best->fail_rate &&
         (s.score > best->score || (s.score == best->score && s.kappa < best->kappa))))
      best = &s;
  }
  out.kappa = best->kappa;
  out.path = SelectionPath::FallbackMinFail;
  return out;
}

DeltaMode DeltaMode::parse(const std::string& name) {
  if (name == "zero") return {Zero, 0.0};
  if (name == "max") return {Max, 1.0};
  if (name.size() > 1 && name[0] == 'q') {
    double q = 0.0;
    try {
      q = std::stod(name.substr(1)) / 100.0;
    } catch (const std::exception&) {
      throw ContractViolation("invalid delta mode '" + name + "'");
    }
    require(q > 0.0 && q < 1.0, "delta quantile must lie in (0, 100)");
    return {Quantile, q};
  }
  throw ContractViolation("invalid delta mode '" + name + "'");
}

std::string DeltaMode::name() const {
  switch (kind) {
    case Zero: return "zero";
    case Max: return "max";
    case Quantile: return "q" + std::to_string(static_cast<int>(std::lround(q * 100.0)));
  }
  return "?";
}

double choose_delta(const std::vector<RemainderSample>& samples, const DeltaMode& mode) {
  if (mode.kind == DeltaMode::Zero) return 0.0;
  require(!samples.empty(), "delta from an empty sample");
  const std::vector<double> under = under_predictions(samples);
  if (mode.kind == DeltaMode::Max) return *std::max_element(under.begin(), under.end());
  return nearest_rank(under, mode.q);
}

ScreeningReport screen(const SystemModel& model, const ScreeningConfig& config) {
  config.validate();
  ScreeningReport report;
  for (double kappa : config.candidates) {
    const SampleSet set = collect_samples(model, kappa, config);
    const std::vector<RemainderSample> band = boundary_samples(set.samples);
    if (band.empty()) {
      report.excluded.push_back(kappa);
      continue;
    }
    KappaStats s = stats(band, config.p, config.beta_q);
    s.kappa = kappa;
    s.fail_rate = set.fail_rate;
    report.stats.push_back(s);
  }
  require(!report.stats.empty(), "no candidate reached the boundary band");
  const KappaSelection sel = select_kappa(report.stats);
  report.selected = sel.kappa;
  report.path = sel.path;
  report.compatible = sel.compatible;
  return report;
}

void write_report_json(std::ostream& os, const ScreeningReport& report) {
  nlohmann::ordered_json j;
  j["candidates"] = nlohmann::json::array();
  for (const auto& s : report.stats)
    j["candidates"].push_back({{"kappa", s.kappa},
                               {"rho", s.rho},
                               {"score", s.score},
                               {"fail_rate", s.fail_rate},
                               {"n", s.sample_count}});
  j["excluded"] = report.excluded;
  j["compatible"] = report.compatible;
  j["selected"] = report.selected;
  j["path"] = to_string(report.path);
  os << j.dump(2) << '\n';
}

}  // namespace ccbf
