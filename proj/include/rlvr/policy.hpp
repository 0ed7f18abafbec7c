#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rlvr/core.hpp"
#include "rlvr/env.hpp"

namespace rlvr {

// Tabular softmax policy: one logit row per encoded state. The row softmax is
// the action distribution; every probability is strictly positive.
struct PolicyTable {
  std::uint32_t n_states = 0;
  std::uint32_t vocab = 0;
  std::vector<double> logits;  // row-major [state][token]
  std::optional<StateEncoder> encoder;

  static PolicyTable zeros(std::uint32_t n_states, std::uint32_t vocab);
  static PolicyTable for_env(const EnvSpec& spec, std::uint32_t n_tasks);

  double logit(std::uint32_t s, std::uint32_t v) const { return logits[std::size_t{s} * vocab + v]; }
  double& logit(std::uint32_t s, std::uint32_t v) { return logits[std::size_t{s} * vocab + v]; }
  std::span<const double> row(std::uint32_t s) const {
    return {logits.data() + std::size_t{s} * vocab, vocab};
  }
};

// softmax(logits[state,:] / temperature); sums to 1.
std::vector<double> action_distribution(const PolicyTable& policy, std::uint32_t state,
                                        double temperature);
void action_distribution_into(const PolicyTable& policy, std::uint32_t state, double temperature,
                              std::span<double> out);

// Roll the environment for episode_len steps, sampling from the policy at the
// given temperature. Records the sampled tokens' rollout-time probabilities
// and visited state indices; deterministic for a fixed rng_seed.
Trajectory sample_trajectory(const PolicyTable& policy, const TaskInstance& inst, double temperature,
                             std::uint64_t rng_seed);

struct SequenceEval {
  double log_prob = 0.0;
  std::vector<double> token_probs;  // per-token pi_theta, importance-ratio numerators
};

SequenceEval sequence_log_prob(const PolicyTable& policy, const Trajectory& traj,
                               double temperature = 1.0);

double entropy(const PolicyTable& policy, std::uint32_t state, double temperature);

// Mean entropy over the (trajectory, position) pairs of a batch.
double batch_mean_entropy(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                          bool include_off_policy, double temperature = 1.0);

// Gradient-ascent step: logits += step_size * grad.
void apply_gradient(PolicyTable& policy, std::span<const double> grad, double step_size);

// Flat snapshot (n_states, vocab, row-major logits); round-trip is bit-exact.
void save_policy(std::ostream& out, const PolicyTable& policy);
PolicyTable load_policy(std::istream& in);

}  // namespace rlvr
