#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "distret/experiments.hpp"

namespace distret {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw parameter_error("config: " + key + " expects a number, got '" + text + "'");
  return v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw parameter_error("config: " + key + " expects an integer, got '" + text + "'");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw parameter_error("config: " + key + " expects a non-empty list");
  return out;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "experiment") experiment = value;
  else if (key == "mdp") mdp = value;
  else if (key == "mdp_file") mdp_file = value;
  else if (key == "num_mdps") num_mdps = to_int<int>(key, value);
  else if (key == "num_states") num_states = to_int<int>(key, value);
  else if (key == "num_actions") num_actions = to_int<int>(key, value);
  else if (key == "dirichlet") dirichlet = to_double(key, value);
  else if (key == "gamma") gamma = to_double(key, value);
  else if (key == "epsilon") epsilon = to_double(key, value);
  else if (key == "epsilon_grid") epsilon_grid = to_list(key, value);
  else if (key == "epsilon_convention") epsilon_convention = value;
  else if (key == "trace") trace = value;
  else if (key == "cbar") cbar = to_double(key, value);
  else if (key == "cbar_grid") cbar_grid = to_list(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "truncation") truncation = to_int<int>(key, value);
  else if (key == "horizon") horizon = to_int<int>(key, value);
  else if (key == "representation") representation = value;
  else if (key == "num_atoms") num_atoms = to_int<int>(key, value);
  else if (key == "vmax") vmax = to_double(key, value);
  else if (key == "iterations") iterations = to_int<int>(key, value);
  else if (key == "fp_tol") fp_tol = to_double(key, value);
  else if (key == "fp_max_iters") fp_max_iters = to_int<int>(key, value);
  else if (key == "truth_atoms") truth_atoms = to_int<int>(key, value);
  else if (key == "truth_iters") truth_iters = to_int<int>(key, value);
  else if (key == "metric_p") metric_p = to_double(key, value);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, value);
  else if (key == "out") out = value;
  else if (key == "runs") runs = to_int<int>(key, value);
  else if (key == "configs") configs = to_int<int>(key, value);
  else if (key == "trajectories") trajectories = to_int<int>(key, value);
  else if (key == "alpha") alpha = to_double(key, value);
  else if (key == "epochs") epochs = to_int<int>(key, value);
  else if (key == "jobs") jobs = to_int<int>(key, value);
  else if (key == "max_atoms") max_atoms = to_int<std::size_t>(key, value);
  else throw parameter_error("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  // `jobs` and `out` are left out: neither changes the numbers produced.
  return {
      {"experiment", experiment},
      {"mdp", mdp},
      {"mdp_file", mdp_file},
      {"num_mdps", std::to_string(num_mdps)},
      {"num_states", std::to_string(num_states)},
      {"num_actions", std::to_string(num_actions)},
      {"dirichlet", fmt(dirichlet)},
      {"gamma", fmt(gamma)},
      {"epsilon", fmt(epsilon)},
      {"epsilon_grid", fmt(epsilon_grid)},
      {"epsilon_convention", epsilon_convention},
      {"trace", trace},
      {"cbar", fmt(cbar)},
      {"cbar_grid", fmt(cbar_grid)},
      {"lambda", fmt(lambda)},
      {"truncation", std::to_string(truncation)},
      {"horizon", std::to_string(horizon)},
      {"representation", representation},
      {"num_atoms", std::to_string(num_atoms)},
      {"vmax", fmt(vmax)},
      {"iterations", std::to_string(iterations)},
      {"fp_tol", fmt(fp_tol)},
      {"fp_max_iters", std::to_string(fp_max_iters)},
      {"truth_atoms", std::to_string(truth_atoms)},
      {"truth_iters", std::to_string(truth_iters)},
      {"metric_p", fmt(metric_p)},
      {"seed", std::to_string(seed)},
      {"runs", std::to_string(runs)},
      {"configs", std::to_string(configs)},
      {"trajectories", std::to_string(trajectories)},
      {"alpha", fmt(alpha)},
      {"epochs", std::to_string(epochs)},
      {"max_atoms", std::to_string(max_atoms)},
  };
}

TraceConfig ExperimentConfig::trace_config() const { return trace_config(cbar); }

TraceConfig ExperimentConfig::trace_config(double cbar_value) const {
  TraceConfig tc;
  if (trace == "constant") tc = TraceConfig::constant(lambda, horizon);
  else if (trace == "clipped") tc = TraceConfig::clipped(cbar_value, horizon);
  else if (trace == "clipped_lambda") tc = TraceConfig::clipped_lambda(lambda, cbar_value, horizon);
  else if (trace == "full_is") tc = TraceConfig::full_is(horizon);
  else if (trace == "truncated_is") tc = TraceConfig::truncated_is(truncation, horizon);
  else throw parameter_error("config: unknown trace '" + trace + "'");
  tc.validate();
  return tc;
}

MixConvention ExperimentConfig::convention() const {
  if (epsilon_convention == "away") return MixConvention::target_moves_away;
  if (epsilon_convention == "toward") return MixConvention::target_moves_toward;
  throw parameter_error("config: epsilon_convention must be 'away' or 'toward'");
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (experiment == "counterexample") {
    cfg.mdp = "counterexample";
    cfg.gamma = 0.5;
    cfg.horizon = 1;
    cfg.cbar = 1.0;
    cfg.representation = "none";
  } else if (experiment == "uncorrected-bias") {
    cfg.epsilon = 0.8;
  } else if (experiment == "forward-backward") {
    cfg.mdp = "chain3";
    cfg.gamma = 0.5;
    cfg.num_atoms = 1;
    cfg.lambda = 1.0;
    cfg.runs = 200;
  } else if (experiment == "unbiasedness") {
    cfg.num_atoms = 51;
  }
  return cfg;
}

void parse_config(std::istream& is, ExperimentConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw parameter_error("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void load_config(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw parameter_error("cannot open config file: " + path);
  parse_config(in, cfg);
}

}  // namespace distret
