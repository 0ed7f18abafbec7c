#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rlvr {

// Token symbol; valid values are < vocab_size of the owning environment.
using TokenId = std::uint32_t;

enum class Source { OnPolicy, OffPolicy };

// One rollout. Immutable after construction except the one-time reward
// assignment, so it is safe to share read-only across workers.
//
// behavior_probs are the rollout-time probabilities of each token under the
// policy that generated the trajectory: pi_theta_old for on-policy samples,
// pi_phi for off-policy traces (identically 1 in the unit-probability mode).
// states caches the policy-table state index at every position so losses can
// be evaluated without replaying the environment.
struct Trajectory {
  std::uint64_t prompt_id = 0;
  std::vector<TokenId> tokens;
  std::vector<double> behavior_probs;
  std::vector<std::uint32_t> states;
  Source source = Source::OnPolicy;
  std::optional<double> reward;

  std::size_t length() const { return tokens.size(); }
  void validate() const;
};

// Per-prompt group over which advantages are normalized.
struct RolloutGroup {
  std::uint64_t prompt_id = 0;
  std::vector<Trajectory> on_policy;
  std::vector<Trajectory> off_policy;

  std::size_t size() const { return on_policy.size() + off_policy.size(); }
  void validate() const;
};

enum class Algorithm {
  OnPolicyGRPO,
  MixedPolicy,
  Luffy,
  LuffyWithClip,
  SftOnly,
  RlWithSftLoss,
  SftThenRl,
};

enum class LengthNorm { PerTokenZ, ConstantBudget };

struct LearningRate {
  enum class Kind { Constant, ConstOverSqrtK };
  Kind kind = Kind::Constant;
  // Step size for Constant; the constant c of alpha = c / sqrt(K) otherwise.
  double value = 0.05;
};

// Full specification of one training variant.
struct AlgorithmConfig {
  Algorithm algorithm = Algorithm::OnPolicyGRPO;
  int n_on = 8;
  int n_off = 0;
  double clip_epsilon = 0.2;
  bool use_on_policy_clip = true;
  bool use_off_policy_clip = false;
  // false selects mean-only advantages (Dr.GRPO practice); true divides by
  // the group's population std as well.
  bool advantage_std_norm = false;
  LengthNorm length_norm = LengthNorm::ConstantBudget;
  std::optional<double> shaping_gamma;  // unset = linear shaping
  double entropy_coef = 0.01;
  bool entropy_include_off = false;  // extend the entropy bonus to off-policy tokens
  double temperature = 1.0;
  LearningRate learning_rate;
  int updates_per_batch = 1;  // gradient updates per rollout batch
  std::uint64_t seed = 0;

  static AlgorithmConfig defaults_for(Algorithm a);
  void validate() const;
};

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Expected final-answer tokens, matched against the trajectory suffix.
struct AnswerSpec {
  std::vector<TokenId> answer;
};

// Binary verifiable reward: 1 iff the trajectory's answer slot matches the
// truth exactly, 0 otherwise (malformed trajectories score 0). The result is
// also stored on the trajectory so group statistics read one source of truth.
double score_reward(Trajectory& traj, const AnswerSpec& truth);

}  // namespace rlvr
