#include "ccbf/system_model.hpp"

#include <algorithm>

namespace ccbf {

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::BoxContact1D: return "box1d";
    case SystemKind::PlanarPush: return "planar_push";
    case SystemKind::BoxPivot: return "box_pivot";
    case SystemKind::Hopper: return "hopper";
    case SystemKind::Custom: return "custom";
  }
  return "unknown";
}

std::string to_string(TaskOutcome outcome) {
  switch (outcome) {
    case TaskOutcome::Success: return "Y";
    case TaskOutcome::Failure: return "N";
    case TaskOutcome::NotApplicable: return "-";
  }
  return "?";
}

ParameterSet::ParameterSet(std::initializer_list<std::pair<std::string, double>> entries)
    : entries_(entries) {}

double ParameterSet::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ContractViolation("unknown parameter '" + key + "'");
}

void ParameterSet::set(const std::string& key, double value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  throw ContractViolation("unknown parameter '" + key + "'");
}

bool ParameterSet::contains(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

void ParameterSet::add(const std::string& key, double value) {
  require(!contains(key), "duplicate parameter '" + key + "'");
  entries_.emplace_back(key, value);
}

SystemModel::SystemModel(SystemKind kind, std::string name, ParameterSet params)
    : kind_(kind), name_(std::move(name)), params_(std::move(params)) {
  for (const char* key : {"dt", "gravity", "gamma_max", "m_eff"})
    require(params_.contains(key), "system parameters must define '" + std::string(key) + "'");
  require(dt() > 0.0, "dt must be positive");
  require(gamma_max() > 0.0, "gamma_max must be positive");
}

void SystemModel::set_structure(MatrixXd mass, int nu, std::vector<ContactSpec> contacts,
                                std::vector<int> safety_contacts) {
  require(mass.rows() == mass.cols() && mass.rows() > 0, "mass matrix must be square");
  require(!contacts.empty(), "a system needs at least one contact");
  for (const auto& c : contacts) require(c.mu >= 0.0, "friction coefficient must be >= 0");
  for (int i : safety_contacts)
    require(i >= 0 && i < static_cast<int>(contacts.size()), "safety contact out of range");
  mass_ = std::move(mass);
  nu_ = nu;
  contacts_ = std::move(contacts);
  safety_contacts_ = std::move(safety_contacts);
}

}  // namespace ccbf
