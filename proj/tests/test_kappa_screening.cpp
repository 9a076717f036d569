#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ccbf/kappa_screening.hpp"
#include "ccbf/systems.hpp"

using namespace ccbf;

namespace {

std::vector<RemainderSample> samples_from(const std::vector<double>& h_hat,
                                          const std::vector<double>& dh) {
  std::vector<RemainderSample> out;
  for (size_t i = 0; i < h_hat.size(); ++i) {
    RemainderSample s;
    s.h_hat_next = h_hat[i];
    s.delta_h = dh[i];
    s.h_next = h_hat[i] + dh[i];
    s.boundary = true;
    out.push_back(s);
  }
  return out;
}

// Sort-based nearest rank: element ceil(q n) of the sorted values (1-based).
double sorted_rank(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  const int rank = std::max(1, static_cast<int>(std::ceil(q * n - 1e-12)));
  return v[rank - 1];
}

KappaStats row(double kappa, double score, double fail) {
  KappaStats s;
  s.kappa = kappa;
  s.score = score;
  s.fail_rate = fail;
  s.sample_count = 1;
  return s;
}

}  // namespace

TEST(KappaScreening, NearestRank) {
  EXPECT_DOUBLE_EQ(nearest_rank({0.0, 0.001, 0.002, 0.003}, 0.75), 0.002);
  EXPECT_DOUBLE_EQ(nearest_rank({0.04, 0.01, 0.03, 0.02}, 0.25), 0.01);
  EXPECT_DOUBLE_EQ(nearest_rank({5.0}, 0.1), 5.0);
  EXPECT_DOUBLE_EQ(nearest_rank({3.0, 1.0, 2.0}, 1.0), 3.0);
  EXPECT_THROW(nearest_rank({}, 0.5), ContractViolation);
}

TEST(KappaScreening, StatsExamples) {
  // (-dh)+ = {0, 0.001, 0.002, 0.003}, beta_q = 0.25: rank ceil(0.75 * 4) = 3.
  auto s = stats(samples_from({0.1, 0.1, 0.1, 0.1}, {0.0, -0.001, -0.002, -0.003}), 0.5, 0.25);
  EXPECT_DOUBLE_EQ(s.rho, 0.002);

  // Nonnegative dh: rho = 0 and the score is the margin quantile.
  s = stats(samples_from({0.01, 0.02, 0.03, 0.04}, {0.0, 0.001, 0.0, 0.002}), 0.25, 0.1);
  EXPECT_DOUBLE_EQ(s.rho, 0.0);
  EXPECT_DOUBLE_EQ(s.score, 0.01);

  // Q_0.25 = 0.01 and rho = 0.005 give S = 0.005.
  s = stats(samples_from({0.01, 0.02, 0.03, 0.04}, {-0.005, -0.005, -0.005, -0.005}), 0.25, 0.1);
  EXPECT_DOUBLE_EQ(s.rho, 0.005);
  EXPECT_NEAR(s.score, 0.005, 1e-15);
  EXPECT_THROW(stats({}, 0.1, 0.1), ContractViolation);
}

TEST(KappaScreening, StatsMatchSortOracle) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(-0.01, 0.01);
  std::uniform_int_distribution<int> N(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = N(rng);
    std::vector<double> h(n), dh(n), under(n);
    for (int i = 0; i < n; ++i) {
      h[i] = U(rng);
      dh[i] = U(rng);
      under[i] = std::max(0.0, -dh[i]);
    }
    const double p = 0.05 + 0.9 * (trial % 10) / 10.0;
    const double beta_q = 0.05 + 0.9 * ((trial / 10) % 10) / 10.0;
    const KappaStats s = stats(samples_from(h, dh), p, beta_q);
    const double rho = sorted_rank(under, 1.0 - beta_q);
    EXPECT_EQ(s.rho, rho);
    EXPECT_EQ(s.score, sorted_rank(h, p) - rho);
    EXPECT_EQ(s.sample_count, n);
  }
}

TEST(KappaScreening, SelectExamples) {
  auto sel = select_kappa({row(1e-5, 0.01, 0.0), row(1e-4, 0.02, 0.0)});
  EXPECT_EQ(sel.kappa, 1e-4);
  EXPECT_EQ(sel.path, SelectionPath::Compatible);

  sel = select_kappa({row(1e-5, 0.02, 0.0), row(1e-4, 0.02, 0.0)});
  EXPECT_EQ(sel.kappa, 1e-5);

  sel = select_kappa({row(1e-6, 0.05, 0.2), row(1e-4, -0.01, 0.1)});
  EXPECT_EQ(sel.kappa, 1e-4);
  EXPECT_EQ(sel.path, SelectionPath::FallbackMinFail);
}

TEST(KappaScreening, FallbackTiebreaks) {
  // Equal failure: larger score wins; equal failure and score: smaller kappa.
  auto sel = select_kappa({row(1e-6, -0.02, 0.0), row(1e-5, -0.01, 0.0), row(1e-4, 0.03, 0.5)});
  EXPECT_EQ(sel.kappa, 1e-5);
  EXPECT_EQ(sel.path, SelectionPath::FallbackMinFail);
  sel = select_kappa({row(1e-4, -0.01, 0.0), row(1e-6, -0.01, 0.0)});
  EXPECT_EQ(sel.kappa, 1e-6);
  // A failing candidate is never compatible even with the best score.
  sel = select_kappa({row(1e-6, 0.5, 0.1), row(1e-3, 0.0, 0.0)});
  EXPECT_EQ(sel.kappa, 1e-3);
  EXPECT_EQ(sel.path, SelectionPath::Compatible);
  EXPECT_THROW(select_kappa({}), ContractViolation);
}

TEST(KappaScreening, ChooseDelta) {
  const auto s = samples_from({0.1, 0.1}, {-0.001, -0.004});
  EXPECT_DOUBLE_EQ(choose_delta(s, DeltaMode::parse("max")), 0.004);
  EXPECT_DOUBLE_EQ(choose_delta(s, DeltaMode::parse("zero")), 0.0);
  EXPECT_DOUBLE_EQ(choose_delta(samples_from({0.1, 0.2}, {0.001, 0.0}), DeltaMode::parse("max")), 0.0);
  EXPECT_THROW(choose_delta({}, DeltaMode::parse("max")), ContractViolation);
  EXPECT_THROW(DeltaMode::parse("q101"), ContractViolation);
  EXPECT_EQ(DeltaMode::parse("q85").name(), "q85");

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> U(-0.01, 0.005);
  std::vector<double> h(50, 0.0), dh(50);
  for (auto& d : dh) d = U(rng);
  const auto many = samples_from(h, dh);
  double last = 0.0;
  for (double q : {0.1, 0.5, 0.85, 0.9, 0.99}) {
    DeltaMode mode{DeltaMode::Quantile, q};
    const double d = choose_delta(many, mode);
    EXPECT_GE(d, last);
    EXPECT_LE(d, choose_delta(many, DeltaMode::parse("max")));
    last = d;
  }
}

TEST(KappaScreening, ScenarioSet) {
  const auto box = make_system("box1d");
  const auto a = default_scenarios(*box, 3);
  const auto b = default_scenarios(*box, 3);
  ASSERT_GE(a.size(), 5u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].aggressiveness, b[i].aggressiveness);
    EXPECT_EQ(a[i].q0_offset.size(), b[i].q0_offset.size());
    if (a[i].q0_offset.size()) EXPECT_TRUE((a[i].q0_offset.array() == b[i].q0_offset.array()).all());
  }
}

TEST(KappaScreening, SamplesAreConsistent) {
  const auto box = make_system("box1d");
  ScreeningConfig cfg;
  const SampleSet set = collect_samples(*box, 1e-4, cfg);
  EXPECT_EQ(set.rollouts, static_cast<int>(default_scenarios(*box, cfg.seed).size()));
  EXPECT_EQ(set.fail_rate, 0.0);
  ASSERT_FALSE(set.samples.empty());
  for (const auto& s : set.samples) {
    EXPECT_EQ(s.delta_h, s.h_next - s.h_hat_next);
    EXPECT_EQ(s.boundary, box->gamma_max() - s.h_hat_next >= cfg.band * box->gamma_max());
  }
}

TEST(KappaScreening, BoxUnderPredictionShrinksWithKappa) {
  const auto box = make_system("box1d");
  ScreeningConfig cfg;
  double last = std::numeric_limits<double>::infinity();
  int inversions = 0;
  const auto grid = logspace(1e-6, 1e-3, 20);
  for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
    double worst = 0.0;
    for (const auto& s : boundary_samples(collect_samples(*box, *it, cfg).samples))
      worst = std::max(worst, std::abs(s.delta_h));
    if (worst > last) ++inversions;
    last = worst;
  }
  EXPECT_LE(inversions, 2);
}

TEST(KappaScreening, ScreeningIsDeterministic) {
  const auto box = make_system("box1d");
  ScreeningConfig cfg;
  cfg.candidates = logspace(1e-5, 1e-3, 5);
  cfg.seed = 17;
  std::ostringstream a, b;
  write_report_json(a, screen(*box, cfg));
  write_report_json(b, screen(*box, cfg));
  EXPECT_EQ(a.str(), b.str());
}

TEST(KappaScreening, InvalidConfigRejected) {
  ScreeningConfig cfg;
  cfg.p = 1.0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg.p = 0.1;
  cfg.beta_q = 0.0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg.beta_q = 0.1;
  cfg.candidates = {1e-4, -1.0};
  EXPECT_THROW(cfg.validate(), ContractViolation);
}

TEST(KappaScreening, MaxDeltaProtectsSampledBoundarySteps) {
  // Re-running the screening scenarios with delta = max under-prediction keeps
  // h_{k+1} >= (1 - alpha) h_k at each step that was a boundary sample.
  for (const char* name : {"box1d", "hopper"}) {
    const auto model = make_system(name);
    const double kappa = default_kappa(model->kind());
    ScreeningConfig cfg;
    const auto band = boundary_samples(collect_samples(*model, kappa, cfg).samples);
    ASSERT_FALSE(band.empty());
    RolloutConfig rc;
    rc.controller = ControllerKind::RobustCBF;
    rc.kappa = kappa;
    rc.delta = choose_delta(band, DeltaMode::parse("max"));
    for (const auto& scenario : default_scenarios(*model, cfg.seed)) {
      rc.scenario = scenario;
      const RolloutResult r = run_rollout(*model, rc);
      for (const auto& s : r.record.steps) {
        if (!s.qp_status || *s.qp_status != QpStatus::Optimal) continue;
        if (s.gamma_hat_max < cfg.band * model->gamma_max()) continue;
        if (-s.delta_h > rc.delta) continue;
        EXPECT_GE(s.h, (1.0 - rc.alpha) * s.h_k - 1e-9) << name << ' ' << scenario.label;
      }
    }
  }
}
