#include "distret/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace distret {

namespace {

constexpr double kRowTol = 1e-12;

void check_distribution_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, const char* what) {
  if ((row.array() < 0.0).any())
    throw parameter_error(std::string(what) + ": negative probability");
  if (std::abs(row.sum() - 1.0) > kRowTol)
    throw parameter_error(std::string(what) + ": row does not sum to 1");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

TabularMDP::TabularMDP(int num_states, int num_actions,
                       std::vector<std::vector<RewardOutcome>> rewards, Eigen::MatrixXd transition,
                       double gamma, std::vector<std::optional<double>> terminal_values)
    : num_states_(num_states),
      num_actions_(num_actions),
      rewards_(std::move(rewards)),
      transition_(std::move(transition)),
      gamma_(gamma),
      terminal_(std::move(terminal_values)) {
  if (num_states_ < 1 || num_actions_ < 1) throw parameter_error("mdp: need at least one state and action");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw parameter_error("mdp: gamma must lie in [0, 1)");
  if (static_cast<int>(rewards_.size()) != num_pairs())
    throw parameter_error("mdp: one reward distribution per (state, action) required");
  if (transition_.rows() != num_pairs() || transition_.cols() != num_states_)
    throw parameter_error("mdp: transition matrix must be (states*actions) x states");
  if (terminal_.empty()) terminal_.assign(num_states_, std::nullopt);
  if (static_cast<int>(terminal_.size()) != num_states_)
    throw parameter_error("mdp: terminal list must have one entry per state");

  for (int i = 0; i < num_pairs(); ++i) {
    check_distribution_row(transition_.row(i), "mdp transition");
    const auto& dist = rewards_[i];
    if (dist.empty()) throw parameter_error("mdp: empty reward distribution");
    double total = 0.0;
    for (const auto& o : dist) {
      if (!std::isfinite(o.value)) throw parameter_error("mdp: reward values must be finite");
      if (o.prob < 0.0) throw parameter_error("mdp: negative reward probability");
      total += o.prob;
    }
    if (std::abs(total - 1.0) > kRowTol) throw parameter_error("mdp: reward probabilities do not sum to 1");
  }
}

double TabularMDP::mean_reward(int x, int a) const {
  double m = 0.0;
  for (const auto& o : rewards(x, a)) m += o.value * o.prob;
  return m;
}

double TabularMDP::max_abs_reward() const {
  double r = 0.0;
  for (const auto& dist : rewards_)
    for (const auto& o : dist) r = std::max(r, std::abs(o.value));
  return r;
}

double TabularMDP::return_bound() const {
  double bound = max_abs_reward() / (1.0 - gamma_);
  for (const auto& t : terminal_)
    if (t) bound = std::max(bound, max_abs_reward() / (1.0 - gamma_) + std::abs(*t));
  return bound;
}

bool operator==(const TabularMDP& l, const TabularMDP& r) {
  if (l.num_states_ != r.num_states_ || l.num_actions_ != r.num_actions_ || l.gamma_ != r.gamma_)
    return false;
  if (l.transition_ != r.transition_ || l.terminal_ != r.terminal_) return false;
  for (std::size_t i = 0; i < l.rewards_.size(); ++i) {
    const auto& a = l.rewards_[i];
    const auto& b = r.rewards_[i];
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k].value != b[k].value || a[k].prob != b[k].prob) return false;
  }
  return true;
}

Policy::Policy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() < 1 || probs_.cols() < 1) throw parameter_error("policy: empty matrix");
  for (Eigen::Index x = 0; x < probs_.rows(); ++x) check_distribution_row(probs_.row(x), "policy");
}

TabularMDP make_random_mdp(std::uint64_t seed, int num_states, int num_actions, double dirichlet_conc,
                           double gamma) {
  if (num_states < 1 || num_actions < 1) throw parameter_error("make_random_mdp: invalid dimensions");
  if (!(dirichlet_conc > 0.0)) throw parameter_error("make_random_mdp: concentration must be positive");
  Rng rng(seed);
  Rng reward_rng = rng.split("reward");
  Rng kernel_rng = rng.split("transition");
  const int pairs = num_states * num_actions;
  std::vector<std::vector<RewardOutcome>> rewards(pairs);
  Eigen::MatrixXd transition(pairs, num_states);
  for (int i = 0; i < pairs; ++i) {
    rewards[i] = {{reward_rng.normal(), 1.0}};
    transition.row(i) = kernel_rng.dirichlet(num_states, dirichlet_conc).transpose();
    // Renormalize so the row-sum invariant holds to the last ulp.
    transition.row(i) /= transition.row(i).sum();
  }
  return TabularMDP(num_states, num_actions, std::move(rewards), std::move(transition), gamma);
}

TabularMDP make_counterexample_mdp(double gamma) {
  Eigen::MatrixXd p(1, 1);
  p(0, 0) = 1.0;
  return TabularMDP(1, 1, {{{1.0, 1.0}}}, p, gamma);
}

TabularMDP make_chain3_mdp(double gamma) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 1) = 1.0;
  p(1, 2) = 1.0;
  p(2, 2) = 1.0;
  std::vector<std::vector<RewardOutcome>> r(3, {{0.0, 1.0}});
  return TabularMDP(3, 1, std::move(r), p, gamma, {std::nullopt, std::nullopt, 1.0});
}

Policy uniform_policy(int num_states, int num_actions) {
  if (num_states < 1 || num_actions < 1) throw parameter_error("uniform_policy: invalid dimensions");
  return Policy(Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions));
}

Policy deterministic_policy(const std::vector<int>& actions, int num_actions) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (std::size_t x = 0; x < actions.size(); ++x) {
    if (actions[x] < 0 || actions[x] >= num_actions) throw parameter_error("deterministic_policy: bad action");
    p(static_cast<Eigen::Index>(x), actions[x]) = 1.0;
  }
  return Policy(std::move(p));
}

Policy random_deterministic_policy(int num_states, int num_actions, Rng& rng) {
  std::vector<int> actions(num_states);
  std::uniform_int_distribution<int> pick(0, num_actions - 1);
  for (auto& a : actions) a = pick(rng);
  return deterministic_policy(actions, num_actions);
}

Policy mix_policy(const Policy& pi_d, const Policy& mu, double epsilon, MixConvention convention) {
  if (pi_d.num_states() != mu.num_states() || pi_d.num_actions() != mu.num_actions())
    throw parameter_error("mix_policy: policies have different shapes");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw parameter_error("mix_policy: epsilon must lie in [0, 1]");
  if (epsilon == 0.0) return convention == MixConvention::target_moves_away ? mu : pi_d;
  if (epsilon == 1.0) return convention == MixConvention::target_moves_away ? pi_d : mu;
  const Eigen::MatrixXd& away = pi_d.matrix();
  const Eigen::MatrixXd& base = mu.matrix();
  Eigen::MatrixXd mixed = convention == MixConvention::target_moves_away
                              ? ((1.0 - epsilon) * base + epsilon * away).eval()
                              : ((1.0 - epsilon) * away + epsilon * base).eval();
  for (Eigen::Index x = 0; x < mixed.rows(); ++x) mixed.row(x) /= mixed.row(x).sum();
  return Policy(std::move(mixed));
}

double is_ratio(const Policy& pi, const Policy& mu, int x, int a) {
  const double p = pi(x, a);
  const double m = mu(x, a);
  if (m == 0.0) {
    if (p > 0.0) throw support_error("is_ratio: behavior policy does not cover target action");
    return 0.0;
  }
  return p / m;
}

// --- traces -----------------------------------------------------------------

TraceConfig TraceConfig::constant(double lambda, int horizon) {
  TraceConfig c;
  c.kind = TraceKind::constant;
  c.lambda = lambda;
  c.horizon = horizon;
  return c;
}

TraceConfig TraceConfig::clipped(double cbar, int horizon) {
  TraceConfig c;
  c.kind = TraceKind::clipped_is;
  c.cbar = cbar;
  c.horizon = horizon;
  return c;
}

TraceConfig TraceConfig::clipped_lambda(double lambda, double cbar, int horizon) {
  TraceConfig c;
  c.kind = TraceKind::clipped_is_lambda;
  c.lambda = lambda;
  c.cbar = cbar;
  c.horizon = horizon;
  return c;
}

TraceConfig TraceConfig::full_is(int horizon) {
  TraceConfig c;
  c.kind = TraceKind::full_is;
  c.horizon = horizon;
  return c;
}

TraceConfig TraceConfig::truncated_is(int n, int horizon) {
  TraceConfig c;
  c.kind = TraceKind::truncated_is;
  c.truncation = n;
  c.horizon = horizon;
  return c;
}

bool TraceConfig::guarantees_retrace_condition() const {
  switch (kind) {
    case TraceKind::constant:
      return false;
    case TraceKind::clipped_is:
    case TraceKind::full_is:
    case TraceKind::truncated_is:
      return true;
    case TraceKind::clipped_is_lambda:
      return lambda <= 1.0;
  }
  return false;
}

void TraceConfig::validate() const {
  if (horizon < 1) throw parameter_error("trace: horizon must be >= 1");
  if (lambda < 0.0) throw parameter_error("trace: lambda must be non-negative");
  if (cbar < 0.0) throw parameter_error("trace: cbar must be non-negative");
  if (kind == TraceKind::truncated_is && truncation < 1) throw parameter_error("trace: truncation must be >= 1");
}

std::string TraceConfig::describe() const {
  std::ostringstream os;
  os << std::setprecision(17);
  switch (kind) {
    case TraceKind::constant: os << "constant(lambda=" << lambda << ")"; break;
    case TraceKind::clipped_is: os << "clipped_is(cbar=" << cbar << ")"; break;
    case TraceKind::clipped_is_lambda: os << "clipped_is_lambda(lambda=" << lambda << ",cbar=" << cbar << ")"; break;
    case TraceKind::full_is: os << "full_is"; break;
    case TraceKind::truncated_is: os << "truncated_is(n=" << truncation << ")"; break;
  }
  os << ",horizon=" << horizon;
  return os.str();
}

double trace_coeff(const TraceConfig& cfg, double rho, int t) {
  if (t > cfg.horizon) return 0.0;
  switch (cfg.kind) {
    case TraceKind::constant: return cfg.lambda;
    case TraceKind::clipped_is: return std::min(rho, cfg.cbar);
    case TraceKind::clipped_is_lambda: return cfg.lambda * std::min(rho, cfg.cbar);
    case TraceKind::full_is: return rho;
    case TraceKind::truncated_is: return t < cfg.truncation ? rho : 0.0;
  }
  return 0.0;
}

// --- trajectories -----------------------------------------------------------

namespace {

double sample_reward(const std::vector<RewardOutcome>& dist, Rng& rng) {
  if (dist.size() == 1) return dist.front().value;
  Eigen::VectorXd p(static_cast<Eigen::Index>(dist.size()));
  for (std::size_t k = 0; k < dist.size(); ++k) p[static_cast<Eigen::Index>(k)] = dist[k].prob;
  return dist[static_cast<std::size_t>(rng.categorical(p))].value;
}

}  // namespace

Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& target, const Policy& behavior,
                             StateAction start, int max_len, Rng& rng) {
  if (max_len < 1) throw parameter_error("sample_trajectory: max_len must be >= 1");
  Trajectory traj;
  traj.start = start;
  traj.steps.reserve(static_cast<std::size_t>(max_len));
  int x = start.state;
  int a = start.action;
  for (int t = 0; t < max_len; ++t) {
    Transition step;
    step.state = x;
    step.action = a;
    step.rho = is_ratio(target, behavior, x, a);
    step.reward = sample_reward(mdp.rewards(x, a), rng);
    step.next_state = static_cast<int>(rng.categorical(mdp.transition(x, a).transpose()));
    traj.steps.push_back(step);
    if (mdp.is_terminal(step.next_state)) {
      traj.terminated = true;
      break;
    }
    x = step.next_state;
    a = static_cast<int>(rng.categorical(behavior.row(x).transpose()));
  }
  return traj;
}

// --- plain-text format ------------------------------------------------------

void write_mdp(std::ostream& os, const TabularMDP& mdp) {
  os << "tabular-mdp 1\n";
  os << "states " << mdp.num_states() << "\n";
  os << "actions " << mdp.num_actions() << "\n";
  os << "gamma " << fmt_double(mdp.gamma()) << "\n";
  for (int x = 0; x < mdp.num_states(); ++x)
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const auto& dist = mdp.rewards(x, a);
      os << "reward " << x << " " << a << " " << dist.size();
      for (const auto& o : dist) os << " " << fmt_double(o.value) << " " << fmt_double(o.prob);
      os << "\n";
    }
  for (int x = 0; x < mdp.num_states(); ++x)
    for (int a = 0; a < mdp.num_actions(); ++a) {
      os << "transition " << x << " " << a;
      for (int y = 0; y < mdp.num_states(); ++y) os << " " << fmt_double(mdp.transition(x, a)[y]);
      os << "\n";
    }
  for (int x = 0; x < mdp.num_states(); ++x)
    if (mdp.is_terminal(x)) os << "terminal " << x << " " << fmt_double(mdp.terminal_value(x)) << "\n";
}

TabularMDP read_mdp(std::istream& is) {
  std::string line;
  int states = -1, actions = -1;
  double gamma = -1.0;
  std::vector<std::vector<RewardOutcome>> rewards;
  Eigen::MatrixXd transition;
  std::vector<std::optional<double>> terminal;
  std::vector<char> seen_reward, seen_transition;
  bool header = false;

  auto ensure_dims = [&] {
    if (states < 1 || actions < 1) throw parameter_error("read_mdp: dimensions must precede rows");
    if (rewards.empty()) {
      rewards.resize(static_cast<std::size_t>(states * actions));
      transition = Eigen::MatrixXd::Zero(states * actions, states);
      terminal.assign(static_cast<std::size_t>(states), std::nullopt);
      seen_reward.assign(rewards.size(), 0);
      seen_transition.assign(rewards.size(), 0);
    }
  };
  auto pair_index = [&](int x, int a) {
    if (x < 0 || x >= states || a < 0 || a >= actions) throw parameter_error("read_mdp: index out of range");
    return static_cast<std::size_t>(x * actions + a);
  };

  while (std::getline(is, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "tabular-mdp") {
      int version = 0;
      ls >> version;
      if (version != 1) throw parameter_error("read_mdp: unsupported format version");
      header = true;
    } else if (key == "states") {
      ls >> states;
    } else if (key == "actions") {
      ls >> actions;
    } else if (key == "gamma") {
      ls >> gamma;
    } else if (key == "reward") {
      ensure_dims();
      int x, a;
      std::size_t k;
      if (!(ls >> x >> a >> k) || k == 0) throw parameter_error("read_mdp: malformed reward row");
      auto i = pair_index(x, a);
      rewards[i].clear();
      for (std::size_t j = 0; j < k; ++j) {
        RewardOutcome o;
        if (!(ls >> o.value >> o.prob)) throw parameter_error("read_mdp: malformed reward row");
        rewards[i].push_back(o);
      }
      seen_reward[i] = 1;
    } else if (key == "transition") {
      ensure_dims();
      int x, a;
      if (!(ls >> x >> a)) throw parameter_error("read_mdp: malformed transition row");
      auto i = pair_index(x, a);
      for (int y = 0; y < states; ++y)
        if (!(ls >> transition(static_cast<Eigen::Index>(i), y)))
          throw parameter_error("read_mdp: malformed transition row");
      seen_transition[i] = 1;
    } else if (key == "terminal") {
      ensure_dims();
      int x;
      double v;
      if (!(ls >> x >> v) || x < 0 || x >= states) throw parameter_error("read_mdp: malformed terminal row");
      terminal[static_cast<std::size_t>(x)] = v;
    } else {
      throw parameter_error("read_mdp: unknown key '" + key + "'");
    }
  }
  if (!header) throw parameter_error("read_mdp: missing 'tabular-mdp 1' header");
  ensure_dims();
  if (std::count(seen_reward.begin(), seen_reward.end(), 0) ||
      std::count(seen_transition.begin(), seen_transition.end(), 0))
    throw parameter_error("read_mdp: every (state, action) needs a reward and a transition row");
  return TabularMDP(states, actions, std::move(rewards), std::move(transition), gamma, std::move(terminal));
}

void save_mdp(const std::string& path, const TabularMDP& mdp) {
  std::ofstream os(path);
  if (!os) throw parameter_error("save_mdp: cannot open " + path);
  write_mdp(os, mdp);
}

TabularMDP load_mdp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw parameter_error("load_mdp: cannot open " + path);
  return read_mdp(is);
}

}  // namespace distret
