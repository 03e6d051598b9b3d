// qcm: command-line front end for the collision-model simulation engine.
//
// Subcommands map one-to-one onto the library commands:
//   evolve        master-equation and convolution routes -> CSV
//   trajectories  quantum-jump ensemble -> mean/jumps/per-trajectory CSV
//   kernel        memory kernel time series and Laplace table
//   wtd           waiting-time density and survival probability
//   backflow      relative-entropy series and backflow report
//   verify        acceptance suite (line-oriented key=value report)
//
// Exit codes: 0 success, 1 verification failure, 2 config error, 3 numeric
// failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qcm/verify.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string model;
  std::string out;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("config", opts.config_path,
                  "run configuration file (flat `key = value` lines, # comments)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides,
                  "override a config entry, e.g. --set grid.h=0.005 (repeatable)");
  cmd->add_option("--model", opts.model, "model name (shorthand for --set model.name=NAME)");
  cmd->add_option("--seed", opts.seed, "trajectory seed (shorthand for --set traj.seed=N)");
  cmd->add_option("--out", opts.out, "output file prefix (shorthand for --set out.prefix=P)");
}

qcm::RunConfig build_config(const CommonOpts& opts) {
  qcm::RunConfig cfg;
  if (!opts.config_path.empty()) qcm::apply_config_file(cfg, opts.config_path);
  qcm::apply_overrides(cfg, opts.overrides);
  if (!opts.model.empty()) qcm::apply_config_entry(cfg, "model.name", opts.model);
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (!opts.out.empty()) cfg.out_prefix = opts.out;
  return cfg;
}

std::string self_executable() {
  std::error_code ec;
  const auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::string{} : p.string();
}

int dispatch(const std::string& name, const CommonOpts& opts) {
  if (name == "verify") return qcm::cmd_verify(std::cout, self_executable());
  const qcm::RunConfig cfg = build_config(opts);
  if (name == "evolve") return qcm::cmd_evolve(cfg, std::cout);
  if (name == "trajectories") return qcm::cmd_trajectories(cfg, std::cout);
  if (name == "kernel") return qcm::cmd_kernel(cfg, std::cout);
  if (name == "wtd") return qcm::cmd_wtd(cfg, std::cout);
  if (name == "backflow") return qcm::cmd_backflow(cfg, std::cout);
  throw qcm::config_error("unknown command: " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collision-model simulation engine"};
  app.require_subcommand(1);

  CommonOpts opts;
  add_common(app.add_subcommand("evolve", "deterministic evolution along both routes"), opts);
  add_common(app.add_subcommand("trajectories", "quantum-jump ensemble simulation"), opts);
  add_common(app.add_subcommand("kernel", "memory kernel time series"), opts);
  add_common(app.add_subcommand("wtd", "waiting-time density"), opts);
  add_common(app.add_subcommand("backflow", "relative-entropy backflow report"), opts);
  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  bool all = false;
  verify->add_flag("--all", all, "run every check (the default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return dispatch(app.get_subcommands().front()->get_name(), opts);
  } catch (const qcm::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qcm::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
