#include "rlvr/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlvr {

void Trajectory::validate() const {
  if (behavior_probs.size() != tokens.size())
    throw std::invalid_argument("trajectory: behavior_probs/tokens length mismatch");
  if (!states.empty() && states.size() != tokens.size())
    throw std::invalid_argument("trajectory: states/tokens length mismatch");
  for (double p : behavior_probs) {
    if (!(p > 0.0) || p > 1.0)
      throw std::invalid_argument("trajectory: behavior prob outside (0,1]");
  }
}

void RolloutGroup::validate() const {
  if (size() < 2)
    throw std::invalid_argument("rollout group needs at least 2 trajectories");
  for (const auto& t : on_policy) {
    if (t.source != Source::OnPolicy)
      throw std::invalid_argument("rollout group: off-policy trajectory in on-policy list");
    if (t.prompt_id != prompt_id)
      throw std::invalid_argument("rollout group: mixed prompt ids");
  }
  for (const auto& t : off_policy) {
    if (t.source != Source::OffPolicy)
      throw std::invalid_argument("rollout group: on-policy trajectory in off-policy list");
    if (t.prompt_id != prompt_id)
      throw std::invalid_argument("rollout group: mixed prompt ids");
  }
}

AlgorithmConfig AlgorithmConfig::defaults_for(Algorithm a) {
  AlgorithmConfig c;
  c.algorithm = a;
  switch (a) {
    case Algorithm::OnPolicyGRPO:
      c.n_on = 8;
      c.n_off = 0;
      break;
    case Algorithm::MixedPolicy:
      c.n_on = 7;
      c.n_off = 1;
      break;
    case Algorithm::LuffyWithClip:
      c.n_on = 7;
      c.n_off = 1;
      c.shaping_gamma = 0.1;
      break;
    case Algorithm::Luffy:
      c.n_on = 7;
      c.n_off = 1;
      c.shaping_gamma = 0.1;
      c.use_on_policy_clip = false;
      c.use_off_policy_clip = false;
      break;
    case Algorithm::SftOnly:
      c.n_on = 0;
      c.n_off = 1;
      c.entropy_coef = 0.0;
      break;
    case Algorithm::RlWithSftLoss:
      c.n_on = 7;
      c.n_off = 1;
      break;
    case Algorithm::SftThenRl:
      c.n_on = 8;
      c.n_off = 1;
      break;
  }
  return c;
}

void AlgorithmConfig::validate() const {
  if (n_on < 0 || n_off < 0) throw std::invalid_argument("config: negative rollout counts");
  if (!(clip_epsilon > 0.0)) throw std::invalid_argument("config: clip_epsilon must be > 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("config: temperature must be > 0");
  if (entropy_coef < 0.0) throw std::invalid_argument("config: entropy_coef must be >= 0");
  if (!(learning_rate.value > 0.0)) throw std::invalid_argument("config: learning rate must be > 0");
  if (updates_per_batch < 1) throw std::invalid_argument("config: updates_per_batch must be >= 1");
  if (shaping_gamma && (!(*shaping_gamma > 0.0) || *shaping_gamma > 1.0))
    throw std::invalid_argument("config: shaping_gamma must lie in (0,1]");

  switch (algorithm) {
    case Algorithm::OnPolicyGRPO:
      if (n_off != 0) throw std::invalid_argument("OnPolicyGRPO requires n_off == 0");
      if (n_on < 2) throw std::invalid_argument("OnPolicyGRPO requires n_on >= 2");
      break;
    case Algorithm::MixedPolicy:
      if (shaping_gamma) throw std::invalid_argument("MixedPolicy uses linear shaping; unset shaping_gamma");
      if (n_off < 1) throw std::invalid_argument("MixedPolicy requires n_off >= 1");
      if (n_on + n_off < 2) throw std::invalid_argument("MixedPolicy group too small");
      break;
    case Algorithm::Luffy:
      if (!shaping_gamma) throw std::invalid_argument("Luffy requires shaping_gamma");
      if (use_on_policy_clip || use_off_policy_clip)
        throw std::invalid_argument("Luffy runs without clip on either term");
      if (n_off < 1) throw std::invalid_argument("Luffy requires n_off >= 1");
      if (n_on + n_off < 2) throw std::invalid_argument("Luffy group too small");
      break;
    case Algorithm::LuffyWithClip:
      if (!shaping_gamma) throw std::invalid_argument("LuffyWithClip requires shaping_gamma");
      if (!use_on_policy_clip) throw std::invalid_argument("LuffyWithClip keeps the on-policy clip");
      if (n_off < 1) throw std::invalid_argument("LuffyWithClip requires n_off >= 1");
      break;
    case Algorithm::SftOnly:
      if (n_off < 1) throw std::invalid_argument("SftOnly requires n_off >= 1");
      break;
    case Algorithm::RlWithSftLoss:
      if (n_off < 1) throw std::invalid_argument("RlWithSftLoss requires n_off >= 1");
      if (n_on < 2) throw std::invalid_argument("RlWithSftLoss requires n_on >= 2");
      break;
    case Algorithm::SftThenRl:
      if (n_off < 1) throw std::invalid_argument("SftThenRl requires n_off >= 1 for the SFT stage");
      if (n_on < 2) throw std::invalid_argument("SftThenRl requires n_on >= 2 for the RL stage");
      break;
  }
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::OnPolicyGRPO: return "OnPolicyGRPO";
    case Algorithm::MixedPolicy: return "MixedPolicy";
    case Algorithm::Luffy: return "Luffy";
    case Algorithm::LuffyWithClip: return "LuffyWithClip";
    case Algorithm::SftOnly: return "SftOnly";
    case Algorithm::RlWithSftLoss: return "RlWithSftLoss";
    case Algorithm::SftThenRl: return "SftThenRl";
  }
  return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
  for (Algorithm a : {Algorithm::OnPolicyGRPO, Algorithm::MixedPolicy, Algorithm::Luffy,
                      Algorithm::LuffyWithClip, Algorithm::SftOnly, Algorithm::RlWithSftLoss,
                      Algorithm::SftThenRl}) {
    if (name == algorithm_name(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm: " + name);
}

double score_reward(Trajectory& traj, const AnswerSpec& truth) {
  const auto& ans = truth.answer;
  double r = 0.0;
  if (!ans.empty() && traj.tokens.size() >= ans.size() &&
      std::equal(ans.begin(), ans.end(), traj.tokens.end() - static_cast<std::ptrdiff_t>(ans.size()))) {
    r = 1.0;
  }
  traj.reward = r;
  return r;
}

}  // namespace rlvr
