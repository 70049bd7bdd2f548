#include "wqdil/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wqdil {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& v) {
  std::size_t used = 0;
  const long x = std::stol(v, &used);
  if (used != v.size()) throw std::invalid_argument("not an integer");
  return static_cast<int>(x);
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("not a number");
  return x;
}

bool to_bool(std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<int> to_widths(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::string from_widths(const std::vector<int>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Key {
  std::function<void(HarnessConfig&, const std::string&)> set;
  std::function<std::string(const HarnessConfig&)> get;
};

#define INT_KEY(name, field) \
  {name, {[](HarnessConfig& c, const std::string& v) { c.field = to_int(v); }, \
          [](const HarnessConfig& c) { return std::to_string(c.field); }}}
#define REAL_KEY(name, field) \
  {name, {[](HarnessConfig& c, const std::string& v) { c.field = to_double(v); }, \
          [](const HarnessConfig& c) { return fmt(c.field); }}}
#define BOOL_KEY(name, field) \
  {name, {[](HarnessConfig& c, const std::string& v) { c.field = to_bool(v); }, \
          [](const HarnessConfig& c) { return std::string(c.field ? "true" : "false"); }}}
#define WIDTHS_KEY(name, field) \
  {name, {[](HarnessConfig& c, const std::string& v) { c.field = to_widths(v); }, \
          [](const HarnessConfig& c) { return from_widths(c.field); }}}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table{
      INT_KEY("iterations", qd.iterations),
      INT_KEY("branching", qd.branching),
      REAL_KEY("sigma_g", qd.sigma_g),
      INT_KEY("grid", qd.grid),
      INT_KEY("explorer_resolution", qd.explorer_resolution),
      INT_KEY("eval_episodes", qd.eval_episodes),
      INT_KEY("horizon", qd.horizon),
      {"variant",
       {[](HarnessConfig& c, const std::string& v) { c.qd.variant.kind = reward::parse_reward_kind(v); },
        [](const HarnessConfig& c) { return std::string(reward::to_string(c.qd.variant.kind)); }}},
      BOOL_KEY("bonus", qd.variant.bonus_enabled),
      BOOL_KEY("true_reward", qd.true_reward),
      {"seed",
       {[](HarnessConfig& c, const std::string& v) {
          std::size_t used = 0;
          c.qd.seed = std::stoull(v, &used);
          if (used != v.size()) throw std::invalid_argument("not an integer");
        },
        [](const HarnessConfig& c) { return std::to_string(c.qd.seed); }}},
      INT_KEY("n1", qd.vppo.n1),
      INT_KEY("n2", qd.vppo.n2),
      INT_KEY("n_envs", qd.vppo.n_envs),
      INT_KEY("rollout_length", qd.vppo.rollout_length),
      REAL_KEY("gamma", qd.vppo.gamma),
      REAL_KEY("gae_lambda", qd.vppo.gae_lambda),
      REAL_KEY("ppo_learning_rate", qd.vppo.learning_rate),
      INT_KEY("minibatches", qd.vppo.minibatches),
      INT_KEY("ppo_epochs", qd.vppo.epochs),
      REAL_KEY("clip", qd.vppo.clip),
      REAL_KEY("max_grad_norm", qd.vppo.max_grad_norm),
      REAL_KEY("initial_log_std", qd.vppo.initial_log_std),
      WIDTHS_KEY("policy_hidden", qd.vppo.policy_hidden),
      WIDTHS_KEY("critic_hidden", qd.vppo.critic_hidden),
      BOOL_KEY("learn_log_std", qd.vppo.learn_log_std),
      BOOL_KEY("normalize_rewards", qd.vppo.normalize_rewards),
      WIDTHS_KEY("reward_hidden", qd.reward.hidden),
      INT_KEY("latent_dim", qd.reward.latent_dim),
      REAL_KEY("reward_lambda", qd.reward.lambda),
      REAL_KEY("reward_learning_rate", qd.reward.learning_rate),
      INT_KEY("n_critic", qd.reward.n_critic),
      REAL_KEY("gp_coef", qd.reward.gp_coef),
      REAL_KEY("wgan_gp_coef", qd.reward.wgan_gp_coef),
      INT_KEY("reward_batch_size", qd.reward.batch_size),
      INT_KEY("reward_epochs", qd.reward.epochs),
      INT_KEY("pool_size", pool_size),
      INT_KEY("num_demos", num_demos),
      {"demos",
       {[](HarnessConfig& c, const std::string& v) { c.demos = v; },
        [](const HarnessConfig& c) { return c.demos; }}},
  };
  return table;
}

}  // namespace

void parse_config(std::istream& is, HarnessConfig& config) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys().find(key);
    if (it == keys().end()) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    try {
      it->second.set(config, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": bad value for '" + key +
                               "': " + value);
    }
  }
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  HarnessConfig config;
  parse_config(is, config);
  return config;
}

void write_config(std::ostream& os, const HarnessConfig& config) {
  for (const auto& [name, key] : keys()) os << name << " = " << key.get(config) << '\n';
}

}  // namespace wqdil
