#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "distret/experiments.hpp"

namespace {

const std::map<std::string, std::string> kHelp{
    {"counterexample", "one-state MDP: one-step, Retrace and the two alternative operators from Dirac inits"},
    {"sweep-offpolicy", "Retrace convergence on random MDPs as the target policy moves away from behavior"},
    {"sweep-trace", "Retrace convergence on random MDPs across trace clipping levels"},
    {"fixed-point-quality", "distance of the projected Retrace fixed point to the projected return distribution"},
    {"uncorrected-bias", "fixed-point error of uncorrected n-step versus Retrace"},
    {"unbiasedness", "Monte-Carlo check of the sampled QR loss, gradient and CE estimates"},
    {"forward-backward", "forward versus backward view updates on the three-state chain"},
};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::vector<std::string> overrides;
};

int run(const std::string& command, const Options& opt) {
  distret::ExperimentConfig cfg = distret::default_config(command);
  if (!opt.config_path.empty()) distret::load_config(opt.config_path, cfg);
  cfg.experiment = command;
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw distret::parameter_error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out) cfg.out = *opt.out;
  if (opt.jobs) cfg.jobs = *opt.jobs;

  const distret::RunResult result = distret::run_experiment(command, cfg);
  if (cfg.out.empty() || cfg.out == "-") {
    std::cout << result.csv;
  } else {
    std::ofstream os(cfg.out, std::ios::binary);
    if (!os) throw distret::parameter_error("cannot write " + cfg.out);
    os << result.csv;
  }
  for (const auto& c : result.checks)
    std::cerr << (c.passed ? "PASS " : "FAIL ") << command << '/' << c.name << ": " << c.detail << '\n';
  return result.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional Retrace experiments"};
  app.set_version_flag("--version", distret::library_version());
  app.require_subcommand(1);

  Options opt;
  std::string chosen;
  for (const auto& name : distret::experiment_names()) {
    const auto help = kHelp.find(name);
    CLI::App* sub = app.add_subcommand(name, help == kHelp.end() ? "" : help->second);
    sub->add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--out", opt.out, "CSV path (default stdout)");
    sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--set", opt.overrides, "extra key=value overrides, applied after --config");
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    return run(chosen, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
