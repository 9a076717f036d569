// ccbf: rollouts, kappa sweeps, kappa screening and controller comparisons.
//
// Precedence: built-in defaults < --config file < command-line flags.
// Exit codes: 0 ok, 1 configuration error, 2 a contact solve failed (outputs
// are still written).

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccbf/kappa_screening.hpp"
#include "ccbf/rollout_harness.hpp"
#include "ccbf/systems.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ccbf;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverFailure = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string system;  // empty: box1d, or all systems for compare
  std::string controller = "cbf";
  std::optional<double> kappa;
  std::string grid = "1e-6:1e-3:20";
  double alpha = 0.95;
  std::string delta_mode = "max";
  int horizon = 0;
  std::uint64_t seed = 0;
  double p = 0.10;
  double beta_q = 0.10;
  std::string out = "runs";
  std::map<std::string, double> params;
};

// Values given on the command line; unset ones fall back to the config file.
struct Flags {
  std::optional<std::string> system, controller, grid, delta_mode, out, config;
  std::optional<double> kappa, alpha, p, beta_q;
  std::optional<int> horizon;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> set;
};

void apply_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config file: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "system") cfg.system = v.get<std::string>();
      else if (key == "controller") cfg.controller = v.get<std::string>();
      else if (key == "kappa") cfg.kappa = v.get<double>();
      else if (key == "grid") cfg.grid = v.get<std::string>();
      else if (key == "alpha") cfg.alpha = v.get<double>();
      else if (key == "delta_mode") cfg.delta_mode = v.get<std::string>();
      else if (key == "horizon") cfg.horizon = v.get<int>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "p") cfg.p = v.get<double>();
      else if (key == "beta_q") cfg.beta_q = v.get<double>();
      else if (key == "out") cfg.out = v.get<std::string>();
      else if (key == "params") {
        if (!v.is_object()) throw ConfigError("'params' must be an object");
        for (const auto& [pk, pv] : v.items()) cfg.params[pk] = pv.get<double>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad config value: " + std::string(e.what()));
  }
}

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig cfg;
  if (f.config) apply_file(cfg, *f.config);
  if (f.system) cfg.system = *f.system;
  if (f.controller) cfg.controller = *f.controller;
  if (f.kappa) cfg.kappa = *f.kappa;
  if (f.grid) cfg.grid = *f.grid;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.delta_mode) cfg.delta_mode = *f.delta_mode;
  if (f.horizon) cfg.horizon = *f.horizon;
  if (f.seed) cfg.seed = *f.seed;
  if (f.p) cfg.p = *f.p;
  if (f.beta_q) cfg.beta_q = *f.beta_q;
  if (f.out) cfg.out = *f.out;
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    try {
      std::size_t used = 0;
      const std::string value = kv.substr(eq + 1);
      cfg.params[kv.substr(0, eq)] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw ConfigError("--set value is not a number: '" + kv + "'");
    }
  }
  return cfg;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 3) throw ConfigError("grid must be lo:hi:n, got '" + spec + "'");
  double lo = 0.0, hi = 0.0;
  int n = 0;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    n = std::stoi(parts[2]);
  } catch (const std::logic_error&) {
    throw ConfigError("grid must be lo:hi:n, got '" + spec + "'");
  }
  if (n < 1) throw ConfigError("grid is empty");
  if (!(lo > 0.0 && hi >= lo)) throw ConfigError("grid needs 0 < lo <= hi");
  return logspace(lo, hi, n);
}

std::vector<std::string> system_list(const std::string& name) {
  if (name == "all") return {"box1d", "planar_push", "box_pivot", "hopper"};
  return {to_string(parse_system_kind(name))};
}

void validate(const ExperimentConfig& cfg) {
  try {
    for (const auto& s : system_list(cfg.system)) make_system(s, cfg.params);
    parse_controller_kind(cfg.controller);
    DeltaMode::parse(cfg.delta_mode);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (cfg.kappa && !(*cfg.kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (cfg.horizon < 0) throw ConfigError("horizon must be nonnegative");
  if (!(cfg.p > 0.0 && cfg.p < 1.0) || !(cfg.beta_q > 0.0 && cfg.beta_q < 1.0))
    throw ConfigError("quantile levels p and beta_q must lie in (0, 1)");
  parse_grid(cfg.grid);
}

json to_json(const ExperimentConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["system"] = cfg.system;
  j["controller"] = cfg.controller;
  j["kappa"] = cfg.kappa ? json(*cfg.kappa) : json(nullptr);
  j["grid"] = cfg.grid;
  j["alpha"] = cfg.alpha;
  j["delta_mode"] = cfg.delta_mode;
  j["horizon"] = cfg.horizon;
  j["seed"] = cfg.seed;
  j["p"] = cfg.p;
  j["beta_q"] = cfg.beta_q;
  j["params"] = cfg.params;
  return j;
}

// FNV-1a over the resolved config; names the output directory.
std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path output_dir(const ExperimentConfig& cfg, const json& echo) {
  const std::string cmd = echo["command"].get<std::string>();
  fs::path dir = fs::path(cfg.out) / (cmd + "-" + config_hash(echo).substr(0, 12));
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  os << std::setw(2) << j << '\n';
}

json to_json(const Metrics& m) {
  json j;
  j["viol_rate"] = m.viol_rate;
  j["max_overshoot"] = m.max_overshoot;
  j["peak"] = m.peak;
  j["dev"] = m.dev;
  j["min_margin"] = m.min_margin;
  j["success"] = to_string(m.success);
  return j;
}

ScreeningConfig screening_config(const ExperimentConfig& cfg) {
  ScreeningConfig sc;
  sc.candidates = parse_grid(cfg.grid);
  sc.horizon = cfg.horizon;
  sc.p = cfg.p;
  sc.beta_q = cfg.beta_q;
  sc.alpha = cfg.alpha;
  sc.seed = cfg.seed;
  return sc;
}

double kappa_for(const ExperimentConfig& cfg, const SystemModel& model) {
  return cfg.kappa ? *cfg.kappa : default_kappa(model.kind());
}

// delta from the boundary-band under-predictions of standard-CBF screening
// rollouts at kappa.
double screened_delta(const SystemModel& model, double kappa, const ExperimentConfig& cfg,
                      const DeltaMode& mode) {
  if (mode.kind == DeltaMode::Zero) return 0.0;
  const auto band = boundary_samples(collect_samples(model, kappa, screening_config(cfg)).samples);
  return band.empty() ? 0.0 : choose_delta(band, mode);
}

RolloutConfig rollout_config(const ExperimentConfig& cfg, ControllerKind kind, double kappa) {
  RolloutConfig rc;
  rc.controller = kind;
  rc.kappa = kappa;
  rc.alpha = cfg.alpha;
  rc.horizon = cfg.horizon;
  return rc;
}

int cmd_rollout(const ExperimentConfig& cfg) {
  const auto model = make_system(system_list(cfg.system).front(), cfg.params);
  const ControllerKind kind = parse_controller_kind(cfg.controller);
  RolloutConfig rc = rollout_config(cfg, kind, kappa_for(cfg, *model));
  if (kind == ControllerKind::RobustCBF)
    rc.delta = screened_delta(*model, rc.kappa, cfg, DeltaMode::parse(cfg.delta_mode));
  const RolloutResult r = run_rollout(*model, rc);

  json echo = to_json(cfg, "rollout");
  const fs::path dir = output_dir(cfg, echo);
  {
    std::ofstream os(dir / "rollout.csv");
    write_rollout_csv(os, r.record);
  }
  json j;
  j["config"] = echo;
  j["kappa"] = rc.kappa;
  j["delta"] = rc.delta;
  j["gamma_max"] = model->gamma_max();
  j["steps"] = r.record.steps.size();
  j["solver_failures"] = r.record.solver_failures;
  j["metrics"] = to_json(r.metrics);
  write_json(dir / "metrics.json", j);
  std::cout << dir.string() << '\n'
            << "viol_rate " << r.metrics.viol_rate << "  max_overshoot " << r.metrics.max_overshoot
            << "  peak " << r.metrics.peak << "  success " << to_string(r.metrics.success) << '\n';
  return r.record.solver_failures > 0 ? kSolverFailure : kOk;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const auto model = make_system(system_list(cfg.system).front(), cfg.params);
  const ControllerKind kind = parse_controller_kind(cfg.controller);
  const auto grid = parse_grid(cfg.grid);
  RolloutConfig rc = rollout_config(cfg, kind, grid.front());
  if (kind == ControllerKind::RobustCBF)
    rc.delta = screened_delta(*model, kappa_for(cfg, *model), cfg, DeltaMode::parse(cfg.delta_mode));
  const auto points = kappa_sweep(*model, rc, grid);

  json echo = to_json(cfg, "sweep");
  const fs::path dir = output_dir(cfg, echo);
  std::ofstream csv(dir / "sweep.csv");
  csv.precision(10);
  csv << "kappa,min_margin,violated,viol_rate,max_overshoot,peak,solver_failures\n";
  int failures = 0;
  for (const auto& pt : points) {
    csv << pt.kappa << ',' << pt.metrics.min_margin << ',' << (pt.violated ? 1 : 0) << ','
        << pt.metrics.viol_rate << ',' << pt.metrics.max_overshoot << ',' << pt.metrics.peak << ','
        << pt.solver_failures << '\n';
    failures += pt.solver_failures;
  }
  json j;
  j["config"] = echo;
  j["delta"] = rc.delta;
  j["points"] = points.size();
  j["solver_failures"] = failures;
  write_json(dir / "sweep.json", j);
  std::cout << dir.string() << '\n';
  return failures > 0 ? kSolverFailure : kOk;
}

int cmd_screen(const ExperimentConfig& cfg, bool print_table) {
  const auto model = make_system(system_list(cfg.system).front(), cfg.params);
  const ScreeningConfig sc = screening_config(cfg);
  const ScreeningReport report = screen(*model, sc);
  const auto band = boundary_samples(collect_samples(*model, report.selected, sc).samples);

  json j;
  j["config"] = to_json(cfg, "screen");
  {
    std::ostringstream os;
    write_report_json(os, report);
    j["report"] = json::parse(os.str());
  }
  json deltas;
  for (const char* mode : {"q85", "q90", "max"})
    deltas[mode] = band.empty() ? 0.0 : choose_delta(band, DeltaMode::parse(mode));
  j["delta"] = deltas;

  const fs::path dir = output_dir(cfg, j["config"]);
  write_json(dir / "screening.json", j);
  std::cout << dir.string() << '\n'
            << "kappa* " << report.selected << " (" << to_string(report.path) << ")\n"
            << "delta  q85 " << deltas["q85"].get<double>() << "  q90 "
            << deltas["q90"].get<double>() << "  max " << deltas["max"].get<double>() << '\n';
  if (print_table) {
    std::cout << "kappa,rho,score,fail_rate,samples\n";
    for (const auto& s : report.stats)
      std::cout << s.kappa << ',' << s.rho << ',' << s.score << ',' << s.fail_rate << ','
                << s.sample_count << '\n';
  }
  return kOk;
}

int cmd_compare(const ExperimentConfig& cfg, bool delta_table) {
  std::vector<std::string> systems = system_list(cfg.system);
  if (delta_table && cfg.system == "all") systems = {"hopper", "planar_push"};

  json echo = to_json(cfg, delta_table ? "compare-delta" : "compare");
  json rows = json::array();
  std::ostringstream table;
  table.setf(std::ios::fixed);
  int failures = 0;
  if (!delta_table) {
    table << "system,controller,viol,max_over,peak,succ\n";
    for (const auto& name : systems) {
      const auto model = make_system(name, cfg.params);
      const double kappa = kappa_for(cfg, *model);
      const double delta = screened_delta(*model, kappa, cfg, DeltaMode::parse(cfg.delta_mode));
      for (ControllerKind kind : {ControllerKind::Nominal, ControllerKind::CBF, ControllerKind::RobustCBF}) {
        RolloutConfig rc = rollout_config(cfg, kind, kappa);
        rc.delta = delta;
        const RolloutResult r = run_rollout(*model, rc);
        failures += r.record.solver_failures;
        const auto& m = r.metrics;
        table << name << ',' << to_string(kind) << ',' << std::setprecision(3) << m.viol_rate << ','
              << std::setprecision(4) << m.max_overshoot << ',' << m.peak << ','
              << to_string(m.success) << '\n';
        json row = to_json(m);
        row["system"] = name;
        row["controller"] = to_string(kind);
        row["kappa"] = kappa;
        row["delta"] = kind == ControllerKind::RobustCBF ? delta : 0.0;
        rows.push_back(row);
      }
    }
  } else {
    table << "system,metric,0,rho85,rho90,max\n";
    for (const auto& name : systems) {
      const auto model = make_system(name, cfg.params);
      const double kappa = kappa_for(cfg, *model);
      const auto band = boundary_samples(collect_samples(*model, kappa, screening_config(cfg)).samples);
      std::vector<Metrics> ms;
      for (const char* mode : {"zero", "q85", "q90", "max"}) {
        RolloutConfig rc = rollout_config(cfg, ControllerKind::RobustCBF, kappa);
        rc.delta = band.empty() ? 0.0 : choose_delta(band, DeltaMode::parse(mode));
        const RolloutResult r = run_rollout(*model, rc);
        failures += r.record.solver_failures;
        ms.push_back(r.metrics);
        json row = to_json(r.metrics);
        row["system"] = name;
        row["delta_mode"] = mode;
        row["kappa"] = kappa;
        row["delta"] = rc.delta;
        rows.push_back(row);
      }
      table << name << ",viol" << std::setprecision(3);
      for (const auto& m : ms) table << ',' << m.viol_rate;
      table << '\n' << name << ",dev" << std::setprecision(4);
      for (const auto& m : ms) table << ',' << m.dev;
      table << '\n';
    }
  }
  const fs::path dir = output_dir(cfg, echo);
  std::ofstream(dir / "table.csv") << table.str();
  json j;
  j["config"] = echo;
  j["rows"] = rows;
  j["solver_failures"] = failures;
  write_json(dir / "table.json", j);
  std::cout << dir.string() << '\n' << table.str();
  return failures > 0 ? kSolverFailure : kOk;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--system", f.system, "box1d, planar_push, box_pivot, hopper (compare: also all)");
  cmd->add_option("--controller", f.controller, "nominal, cbf, rcbf");
  cmd->add_option("--kappa", f.kappa, "central-path parameter (default: per-system value)");
  cmd->add_option("--grid", f.grid, "kappa grid lo:hi:n, log-spaced");
  cmd->add_option("--alpha", f.alpha, "barrier decay rate");
  cmd->add_option("--delta-mode", f.delta_mode, "zero, q85, q90, max");
  cmd->add_option("--horizon", f.horizon, "steps (0 = full plan)");
  cmd->add_option("--seed", f.seed, "scenario seed");
  cmd->add_option("--p", f.p, "screening margin quantile");
  cmd->add_option("--beta-q", f.beta_q, "screening remainder tail level");
  cmd->add_option("--out", f.out, "output root directory");
  cmd->add_option("--set", f.set, "system parameter override key=value")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Force-limiting CBF filter over smoothed implicit contact dynamics"};
  app.require_subcommand(1);
  Flags f;
  bool report = false, delta_table = false;
  auto* rollout = app.add_subcommand("rollout", "one closed-loop rollout: CSV trajectory + metrics JSON");
  auto* sweep = app.add_subcommand("sweep", "kappa sweep: per-kappa metrics CSV");
  auto* screening = app.add_subcommand("screen", "boundary-focused kappa screening");
  auto* compare = app.add_subcommand("compare", "nominal / CBF / robust CBF comparison table");
  for (auto* cmd : {rollout, sweep, screening, compare}) add_common(cmd, f);
  screening->add_flag("--report", report, "print the per-kappa table");
  compare->add_flag("--delta-table", delta_table, "robust CBF over delta in {0, rho85, rho90, max}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  ExperimentConfig cfg;
  try {
    cfg = resolve(f);
    if (cfg.system.empty()) cfg.system = *compare ? "all" : "box1d";
    validate(cfg);
    if (!cfg.kappa && cfg.system != "all") cfg.kappa = default_kappa(parse_system_kind(cfg.system));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*rollout) return cmd_rollout(cfg);
    if (*sweep) return cmd_sweep(cfg);
    if (*screening) return cmd_screen(cfg, report);
    return cmd_compare(cfg, delta_table);
  } catch (const ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}
