#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rlvr/core.hpp"
#include "rlvr/policy.hpp"

namespace rlvr {

enum class AdvantageMode { StdNormalized, MeanOnly };

struct AdvantageVector {
  std::vector<double> values;  // aligned with the group's trajectory order
  AdvantageMode mode = AdvantageMode::StdNormalized;
  bool degenerate = false;  // all rewards equal; values are identically zero
};

// Group-relative advantages. StdNormalized divides by the population std of
// the group; MeanOnly subtracts the mean only. A zero-spread group yields the
// all-zero vector with the degenerate flag set instead of dividing by an
// epsilon-floored std.
AdvantageVector group_advantages(const std::vector<double>& rewards, AdvantageMode mode);

struct ClipResult {
  double value = 0.0;
  bool clipped = false;  // the clamped branch was the strict minimizer
};

// PPO-style clipped surrogate: min(ratio*A, clamp(ratio, 1-eps, 1+eps)*A).
ClipResult clip_surrogate(double ratio, double advantage, double epsilon);

// Policy-shaping transform f(x) = x / (x + gamma) and its derivative
// gamma / (x + gamma)^2. f' exceeds 1 exactly for x < sqrt(gamma) - gamma,
// which is what amplifies the gradient weight of low-probability tokens.
double shaping_f(double x, double gamma);
double shaping_f_prime(double x, double gamma);

struct LossReport {
  double objective = 0.0;
  std::vector<double> grad;  // same layout as the policy logits
  double clip_fraction_on = 0.0;
  double mean_off_ratio = 0.0;  // mean of (f-transformed) off-policy ratios
  double entropy_term = 0.0;    // entropy_coef * mean entropy, included in objective
};

// On-policy GRPO objective over purely on-policy groups:
//   (1/G) sum_g (1/Z_g) sum_i sum_t CLIP(r_it, A_i, eps) + entropy bonus.
// The gradient flows through the unclipped branch only.
LossReport grpo_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                     const AlgorithmConfig& cfg);

// Mixed-policy objective: advantages over the on+off union; off-policy term
// uses the ratio pi_theta / pi_phi with pi_phi read from stored behavior
// probabilities, unclipped unless cfg.use_off_policy_clip.
LossReport mixed_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                      const AlgorithmConfig& cfg);

// Shaped objective: off-policy per-token term f(ratio) * A with
// f(x) = x/(x+gamma); on-policy term clipped per cfg.use_on_policy_clip.
LossReport shaped_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                       const AlgorithmConfig& cfg);

// Imitation objective: mean over tokens of log pi_theta(token|state).
LossReport sft_loss(const PolicyTable& policy, std::span<const Trajectory> off_trajs,
                    const AlgorithmConfig& cfg);

// Dispatch on cfg.algorithm (RlWithSftLoss combines the on-policy surrogate
// with an SFT term on the off-policy traces).
LossReport evaluate_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                         const AlgorithmConfig& cfg);

struct BoundCheckReport {
  std::uint64_t checked = 0;     // (token, logit) pairs examined
  std::uint64_t violations = 0;  // |grad| exceeding the bound beyond tolerance
  double max_slack = 0.0;        // max over pairs of |grad| - bound
  double max_abs_grad = 0.0;
};

// Verifies the per-logit gradient bound of the off-policy term in the
// unit-probability mode: |dJ/dM| <= |f'(pi)| * pi * (1 - pi) * |A|
// for every token of the trace and every logit of its state row.
// gamma unset checks the linear-shaping case (f' = 1).
BoundCheckReport gradient_weight_bound_check(const PolicyTable& policy, const Trajectory& off_traj,
                                             double advantage, std::optional<double> gamma);

}  // namespace rlvr
