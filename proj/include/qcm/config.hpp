// Run configuration: flat key=value files plus command-line overrides of the
// same form. Unknown keys are rejected by name; values are validated on entry.
#pragma once

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qcm/errors.hpp"
#include "qcm/models.hpp"
#include "qcm/timeseries.hpp"

namespace qcm {

struct RunConfig {
  std::string model_name;
  std::map<std::string, double> model_params;
  std::string rho0_system = "xplus";
  double t_max = 5.0;
  double h = 0.01;
  int traj_n = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  double root_tol = 1e-9;
  std::vector<int> dump;
  std::string out_prefix = "out";
  double backflow_tol = 1e-9;
  std::vector<double> laplace_u = {0.1, 1.0, 10.0};
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_number(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    throw config_error("config key " + key + ": '" + value + "' is not a number");
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  const long long n = std::llround(v);
  if (std::abs(v - static_cast<double>(n)) > 1e-9)
    throw config_error("config key " + key + ": '" + value + "' is not an integer");
  return n;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream is(value);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_integer;
  using detail::parse_number;
  if (key == "model.name") {
    cfg.model_name = value;
  } else if (key.rfind("model.", 0) == 0) {
    const std::string param = key.substr(6);
    if (param.empty()) throw config_error("config key '" + key + "' has no parameter name");
    cfg.model_params[param] = parse_number(key, value);
  } else if (key == "rho0.system") {
    cfg.rho0_system = value;
  } else if (key == "grid.t_max") {
    cfg.t_max = parse_number(key, value);
  } else if (key == "grid.h") {
    cfg.h = parse_number(key, value);
  } else if (key == "traj.n") {
    const long long n = parse_integer(key, value);
    if (n < 1) throw config_error("config key traj.n: need at least one trajectory");
    cfg.traj_n = static_cast<int>(n);
  } else if (key == "traj.seed") {
    const long long s = parse_integer(key, value);
    if (s < 0) throw config_error("config key traj.seed: must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  } else if (key == "traj.threads") {
    const long long t = parse_integer(key, value);
    if (t < 1 || t > 64) throw config_error("config key traj.threads: must lie in [1,64]");
    cfg.threads = static_cast<int>(t);
  } else if (key == "traj.root_tol") {
    cfg.root_tol = parse_number(key, value);
    if (!(cfg.root_tol > 0)) throw config_error("config key traj.root_tol: must be positive");
  } else if (key == "traj.dump") {
    cfg.dump.clear();
    for (const auto& cell : detail::split_list(value)) {
      const long long idx = parse_integer(key, cell);
      if (idx < 0) throw config_error("config key traj.dump: indices must be nonnegative");
      cfg.dump.push_back(static_cast<int>(idx));
    }
  } else if (key == "out.prefix") {
    cfg.out_prefix = value;
  } else if (key == "backflow.tol") {
    cfg.backflow_tol = parse_number(key, value);
    if (!(cfg.backflow_tol > 0)) throw config_error("config key backflow.tol: must be positive");
  } else if (key == "laplace.u") {
    cfg.laplace_u.clear();
    for (const auto& cell : detail::split_list(value)) {
      const double u = parse_number(key, cell);
      if (!(u > 0)) throw config_error("config key laplace.u: values must be positive");
      cfg.laplace_u.push_back(u);
    }
    if (cfg.laplace_u.empty()) throw config_error("config key laplace.u: empty list");
  } else {
    throw config_error("unknown config key '" + key + "'");
  }
}

// key = value lines; '#' starts a comment, blank lines are skipped.
inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
    apply_config_entry(cfg, key, value);
  }
}

// "key=value" items from the command line, applied after any file.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& items) {
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw config_error("override '" + item + "': expected key=value");
    apply_config_entry(cfg, detail::trim(item.substr(0, eq)), detail::trim(item.substr(eq + 1)));
  }
}

inline ModelSpec build_model(const RunConfig& cfg) {
  if (cfg.model_name.empty())
    throw config_error("no model selected (set model.name)");
  // The system dimension of every built-in model is 2.
  const ComplexMatrix rho0s = named_system_state(cfg.rho0_system, 2);
  return make_model(cfg.model_name, cfg.model_params, rho0s);
}

inline TimeGrid config_grid(const RunConfig& cfg) { return make_grid(cfg.t_max, cfg.h); }

}  // namespace qcm
