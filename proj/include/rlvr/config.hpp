#pragma once

#include <map>
#include <string>
#include <vector>

#include "rlvr/core.hpp"
#include "rlvr/env.hpp"
#include "rlvr/trainer.hpp"

namespace rlvr {

// One experiment: environment, algorithm variant, and run bookkeeping.
// Parsed from a flat key=value file with dotted section prefixes; every key
// has a default and unknown keys are a hard error.
struct ExperimentConfig {
  EnvSpec env;
  std::uint64_t n_tasks = 16;
  AlgorithmConfig algorithm;
  std::uint64_t n_steps = 200;
  std::uint64_t n_seeds = 1;
  std::string output_dir;
  std::uint64_t checkpoint_every = 0;  // 0 = final checkpoint only
  TraceStyle oracle_style = TraceStyle::Verbose;
  double oracle_recorded_prob = 1.0;
  double sft_split = 0.5;

  RunOptions run_options() const;
  void validate() const;
};

// Known keys with their documented defaults, in canonical order.
std::vector<std::pair<std::string, std::string>> config_defaults();

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// `--set key=value`, applied after file parsing.
void apply_override(ExperimentConfig& cfg, const std::string& key_value);

// The fully resolved configuration, canonically formatted; reparsing it
// reproduces the experiment exactly.
std::map<std::string, std::string> resolved_key_values(const ExperimentConfig& cfg);

}  // namespace rlvr
