#include "rlvr/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlvr {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw std::invalid_argument("config key " + key + ": expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw std::invalid_argument("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_u64(key, v));
}

// Applies one key. algorithm.name is handled by the caller (it swaps in the
// variant's defaults before other keys land).
void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "env.family") cfg.env.family = family_from_name(value);
  else if (key == "env.vocab_size") cfg.env.vocab_size = static_cast<std::uint32_t>(parse_u64(key, value));
  else if (key == "env.episode_len") cfg.env.episode_len = static_cast<std::uint32_t>(parse_u64(key, value));
  else if (key == "env.difficulty") cfg.env.difficulty = static_cast<std::uint32_t>(parse_u64(key, value));
  else if (key == "env.seed") cfg.env.seed = parse_u64(key, value);
  else if (key == "env.n_tasks") cfg.n_tasks = parse_u64(key, value);
  else if (key == "algorithm.n_on") cfg.algorithm.n_on = parse_int(key, value);
  else if (key == "algorithm.n_off") cfg.algorithm.n_off = parse_int(key, value);
  else if (key == "algorithm.clip_epsilon") cfg.algorithm.clip_epsilon = parse_double(key, value);
  else if (key == "algorithm.use_on_policy_clip") cfg.algorithm.use_on_policy_clip = parse_bool(key, value);
  else if (key == "algorithm.use_off_policy_clip") cfg.algorithm.use_off_policy_clip = parse_bool(key, value);
  else if (key == "algorithm.advantage_std_norm") cfg.algorithm.advantage_std_norm = parse_bool(key, value);
  else if (key == "algorithm.length_norm") {
    if (value == "PerTokenZ") cfg.algorithm.length_norm = LengthNorm::PerTokenZ;
    else if (value == "ConstantBudget") cfg.algorithm.length_norm = LengthNorm::ConstantBudget;
    else throw std::invalid_argument("config key algorithm.length_norm: unknown value '" + value + "'");
  } else if (key == "algorithm.shaping_gamma") {
    if (value == "none") cfg.algorithm.shaping_gamma.reset();
    else cfg.algorithm.shaping_gamma = parse_double(key, value);
  } else if (key == "algorithm.entropy_coef") cfg.algorithm.entropy_coef = parse_double(key, value);
  else if (key == "algorithm.entropy_include_off") cfg.algorithm.entropy_include_off = parse_bool(key, value);
  else if (key == "algorithm.temperature") cfg.algorithm.temperature = parse_double(key, value);
  else if (key == "algorithm.learning_rate") cfg.algorithm.learning_rate.value = parse_double(key, value);
  else if (key == "algorithm.lr_schedule") {
    if (value == "Constant") cfg.algorithm.learning_rate.kind = LearningRate::Kind::Constant;
    else if (value == "ConstOverSqrtK") cfg.algorithm.learning_rate.kind = LearningRate::Kind::ConstOverSqrtK;
    else throw std::invalid_argument("config key algorithm.lr_schedule: unknown value '" + value + "'");
  } else if (key == "algorithm.updates_per_batch") cfg.algorithm.updates_per_batch = parse_int(key, value);
  else if (key == "algorithm.seed") cfg.algorithm.seed = parse_u64(key, value);
  else if (key == "train.n_steps") cfg.n_steps = parse_u64(key, value);
  else if (key == "train.n_seeds") cfg.n_seeds = parse_u64(key, value);
  else if (key == "train.output_dir") cfg.output_dir = value;
  else if (key == "train.checkpoint_every") cfg.checkpoint_every = parse_u64(key, value);
  else if (key == "train.oracle_style") {
    if (value == "Minimal") cfg.oracle_style = TraceStyle::Minimal;
    else if (value == "Verbose") cfg.oracle_style = TraceStyle::Verbose;
    else throw std::invalid_argument("config key train.oracle_style: unknown value '" + value + "'");
  } else if (key == "train.oracle_recorded_prob") cfg.oracle_recorded_prob = parse_double(key, value);
  else if (key == "train.sft_split") cfg.sft_split = parse_double(key, value);
  else throw std::invalid_argument("unknown config key: " + key);
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key=value, got '" + line + "'");
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return pairs;
}

// Installs a variant's rollout/clip/shaping defaults while preserving the
// shared optimizer and normalization settings already configured.
void apply_algorithm_name(AlgorithmConfig& a, Algorithm name) {
  AlgorithmConfig nd = AlgorithmConfig::defaults_for(name);
  nd.clip_epsilon = a.clip_epsilon;
  nd.advantage_std_norm = a.advantage_std_norm;
  nd.length_norm = a.length_norm;
  if (name != Algorithm::SftOnly) nd.entropy_coef = a.entropy_coef;
  nd.entropy_include_off = a.entropy_include_off;
  nd.temperature = a.temperature;
  nd.learning_rate = a.learning_rate;
  nd.updates_per_batch = a.updates_per_batch;
  nd.seed = a.seed;
  a = nd;
}

ExperimentConfig from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  ExperimentConfig cfg;
  // algorithm.name first: it installs the variant's defaults, and explicit
  // keys override them regardless of their position in the file.
  for (const auto& [k, v] : pairs) {
    if (k == "algorithm.name") apply_algorithm_name(cfg.algorithm, algorithm_from_name(v));
  }
  for (const auto& [k, v] : pairs) {
    if (k == "algorithm.name") continue;
    apply_key(cfg, k, v);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

RunOptions ExperimentConfig::run_options() const {
  RunOptions opts;
  opts.n_tasks = n_tasks;
  opts.n_steps = n_steps;
  opts.oracle_style = oracle_style;
  opts.oracle_recorded_prob = oracle_recorded_prob;
  opts.sft_split = sft_split;
  return opts;
}

void ExperimentConfig::validate() const {
  env.validate();
  algorithm.validate();
  if (n_tasks < 1) throw std::invalid_argument("config: env.n_tasks must be >= 1");
  if (n_steps < 1) throw std::invalid_argument("config: train.n_steps must be >= 1");
  if (n_seeds < 1) throw std::invalid_argument("config: train.n_seeds must be >= 1");
  if (!(oracle_recorded_prob > 0.0) || oracle_recorded_prob > 1.0)
    throw std::invalid_argument("config: train.oracle_recorded_prob must lie in (0,1]");
  if (!(sft_split >= 0.0) || sft_split > 1.0)
    throw std::invalid_argument("config: train.sft_split must lie in [0,1]");
}

std::vector<std::pair<std::string, std::string>> config_defaults() {
  const ExperimentConfig d;
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : resolved_key_values(d)) out.emplace_back(k, v);
  return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
  return from_pairs(parse_pairs(text));
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value, got '" + key_value + "'");
  const std::string key = trim(key_value.substr(0, eq));
  const std::string value = trim(key_value.substr(eq + 1));
  if (key == "algorithm.name") {
    apply_algorithm_name(cfg.algorithm, algorithm_from_name(value));
  } else {
    apply_key(cfg, key, value);
  }
  // Validation happens after the whole override list has been applied, so an
  // intermediate state may be temporarily inconsistent.
}

std::map<std::string, std::string> resolved_key_values(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["env.family"] = family_name(cfg.env.family);
  kv["env.vocab_size"] = std::to_string(cfg.env.vocab_size);
  kv["env.episode_len"] = std::to_string(cfg.env.episode_len);
  kv["env.difficulty"] = std::to_string(cfg.env.difficulty);
  kv["env.seed"] = std::to_string(cfg.env.seed);
  kv["env.n_tasks"] = std::to_string(cfg.n_tasks);
  kv["algorithm.name"] = algorithm_name(cfg.algorithm.algorithm);
  kv["algorithm.n_on"] = std::to_string(cfg.algorithm.n_on);
  kv["algorithm.n_off"] = std::to_string(cfg.algorithm.n_off);
  kv["algorithm.clip_epsilon"] = fmt_double(cfg.algorithm.clip_epsilon);
  kv["algorithm.use_on_policy_clip"] = cfg.algorithm.use_on_policy_clip ? "true" : "false";
  kv["algorithm.use_off_policy_clip"] = cfg.algorithm.use_off_policy_clip ? "true" : "false";
  kv["algorithm.advantage_std_norm"] = cfg.algorithm.advantage_std_norm ? "true" : "false";
  kv["algorithm.length_norm"] =
      cfg.algorithm.length_norm == LengthNorm::PerTokenZ ? "PerTokenZ" : "ConstantBudget";
  kv["algorithm.shaping_gamma"] =
      cfg.algorithm.shaping_gamma ? fmt_double(*cfg.algorithm.shaping_gamma) : "none";
  kv["algorithm.entropy_coef"] = fmt_double(cfg.algorithm.entropy_coef);
  kv["algorithm.entropy_include_off"] = cfg.algorithm.entropy_include_off ? "true" : "false";
  kv["algorithm.temperature"] = fmt_double(cfg.algorithm.temperature);
  kv["algorithm.learning_rate"] = fmt_double(cfg.algorithm.learning_rate.value);
  kv["algorithm.lr_schedule"] =
      cfg.algorithm.learning_rate.kind == LearningRate::Kind::Constant ? "Constant" : "ConstOverSqrtK";
  kv["algorithm.updates_per_batch"] = std::to_string(cfg.algorithm.updates_per_batch);
  kv["algorithm.seed"] = std::to_string(cfg.algorithm.seed);
  kv["train.n_steps"] = std::to_string(cfg.n_steps);
  kv["train.n_seeds"] = std::to_string(cfg.n_seeds);
  kv["train.output_dir"] = cfg.output_dir;
  kv["train.checkpoint_every"] = std::to_string(cfg.checkpoint_every);
  kv["train.oracle_style"] = cfg.oracle_style == TraceStyle::Minimal ? "Minimal" : "Verbose";
  kv["train.oracle_recorded_prob"] = fmt_double(cfg.oracle_recorded_prob);
  kv["train.sft_split"] = fmt_double(cfg.sft_split);
  return kv;
}

}  // namespace rlvr
