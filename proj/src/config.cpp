#include "wcs/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

#include "wcs/errors.hpp"

namespace wcs::exp {

namespace {

using Field = std::variant<int ExperimentConfig::*, double ExperimentConfig::*, bool ExperimentConfig::*,
                           std::uint64_t ExperimentConfig::*, std::string ExperimentConfig::*,
                           std::vector<int> ExperimentConfig::*>;

struct Key {
  const char* name;
  Field field;
};

// Canonical key order, also used by to_text.
const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> k{
      {"m", &C::m},
      {"p_max", &C::p_max},
      {"lambda_h", &C::lambda_h},
      {"w_obs_var", &C::w_obs_var},
      {"a_min", &C::a_min},
      {"a_max", &C::a_max},
      {"b", &C::b},
      {"process_noise_var", &C::process_noise_var},
      {"r_u", &C::r_u},
      {"x0_std", &C::x0_std},
      {"state_clamp", &C::state_clamp},
      {"T_train", &C::T_train},
      {"T_test", &C::T_test},
      {"gamma", &C::gamma},
      {"alpha", &C::alpha},
      {"N", &C::N},
      {"iterations", &C::iterations},
      {"baseline", &C::baseline},
      {"clip_norm", &C::clip_norm},
      {"hidden_sizes", &C::hidden_sizes},
      {"pretrain", &C::pretrain},
      {"pretrain_target", &C::pretrain_target},
      {"pretrain_samples", &C::pretrain_samples},
      {"pretrain_epochs", &C::pretrain_epochs},
      {"pretrain_alpha", &C::pretrain_alpha},
      {"checkpoint_every", &C::checkpoint_every},
      {"n_eval_seeds", &C::n_eval_seeds},
      {"eval_stochastic", &C::eval_stochastic},
      {"plant_seed", &C::plant_seed},
      {"train_seed", &C::train_seed},
      {"eval_seed", &C::eval_seed},
  };
  return k;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key, "cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void assign(ExperimentConfig& cfg, const Key& key, const std::string& value) {
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, bool>)
          cfg.*member = parse_bool(key.name, value);
        else if constexpr (std::is_same_v<T, std::string>)
          cfg.*member = value;
        else if constexpr (std::is_same_v<T, std::vector<int>>)
          cfg.*member = parse_int_list(key.name, value);
        else
          cfg.*member = parse_number<T>(key.name, value);
      },
      key.field);
}

std::string render(const ExperimentConfig& cfg, const Key& key) {
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(cfg.*member)>;
        const auto& v = cfg.*member;
        if constexpr (std::is_same_v<T, bool>)
          return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>)
          return v;
        else if constexpr (std::is_same_v<T, std::vector<int>>) {
          std::string s;
          for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
          return s;
        } else if constexpr (std::is_same_v<T, double>)
          return format_double(v);
        else
          return std::to_string(v);
      },
      key.field);
}

void require(bool ok, const char* key, const char* what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(c.m >= 1, "m", "must be >= 1");
  require(finite_pos(c.p_max), "p_max", "must be > 0");
  require(finite_pos(c.lambda_h), "lambda_h", "must be > 0");
  require(std::isfinite(c.w_obs_var) && c.w_obs_var >= 0.0, "w_obs_var", "must be >= 0");
  require(std::isfinite(c.a_min), "a_min", "must be finite");
  require(std::isfinite(c.a_max) && c.a_max >= c.a_min, "a_max", "must be >= a_min");
  require(std::isfinite(c.b) && c.b != 0.0, "b", "must be nonzero");
  require(std::isfinite(c.process_noise_var) && c.process_noise_var >= 0.0, "process_noise_var",
          "must be >= 0");
  require(std::isfinite(c.r_u) && c.r_u >= 0.0, "r_u", "must be >= 0");
  require(std::isfinite(c.x0_std) && c.x0_std >= 0.0, "x0_std", "must be >= 0");
  require(finite_pos(c.state_clamp), "state_clamp", "must be > 0");
  require(c.T_train >= 1, "T_train", "must be >= 1");
  require(c.T_test >= 1, "T_test", "must be >= 1");
  require(std::isfinite(c.gamma) && c.gamma > 0.0 && c.gamma <= 1.0, "gamma", "must lie in (0, 1]");
  require(finite_pos(c.alpha), "alpha", "must be > 0");
  require(c.N >= 1, "N", "must be >= 1");
  require(c.iterations >= 0, "iterations", "must be >= 0");
  require(std::isfinite(c.clip_norm) && c.clip_norm >= 0.0, "clip_norm", "must be >= 0 (0 disables)");
  for (int h : c.hidden_sizes) require(h >= 1, "hidden_sizes", "every size must be >= 1");
  require(c.pretrain_target == "control_aware" || c.pretrain_target == "equal", "pretrain_target",
          "must be control_aware or equal");
  require(c.pretrain_samples >= 1, "pretrain_samples", "must be >= 1");
  require(c.pretrain_epochs >= 0, "pretrain_epochs", "must be >= 0");
  require(finite_pos(c.pretrain_alpha), "pretrain_alpha", "must be > 0");
  require(c.checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
  require(c.n_eval_seeds >= 1, "n_eval_seeds", "must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* match = nullptr;
    for (const auto& k : keys())
      if (key == k.name) match = &k;
    if (!match) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
    if (value.empty()) throw ConfigError(key, "missing value");
    assign(cfg, *match, value);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("path", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + render(cfg, k) + "\n";
  return out;
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write config '" + path + "'");
  os << to_text(cfg);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  const std::pair<const char*, std::uint64_t ExperimentConfig::*> vars[] = {
      {"WCS_PLANT_SEED", &ExperimentConfig::plant_seed},
      {"WCS_TRAIN_SEED", &ExperimentConfig::train_seed},
      {"WCS_EVAL_SEED", &ExperimentConfig::eval_seed},
  };
  for (const auto& [name, member] : vars) {
    if (const char* v = std::getenv(name); v && *v)
      cfg.*member = parse_number<std::uint64_t>(name, trim(v));
  }
}

}  // namespace wcs::exp
