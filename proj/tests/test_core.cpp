#include <doctest.h>

#include <stdexcept>

#include "rlvr/core.hpp"

using namespace rlvr;

namespace {

Trajectory make_traj(std::vector<TokenId> tokens, Source source = Source::OnPolicy) {
  Trajectory t;
  t.tokens = std::move(tokens);
  t.behavior_probs.assign(t.tokens.size(), 0.5);
  t.source = source;
  return t;
}

}  // namespace

TEST_CASE("score_reward matches the designated answer suffix") {
  AnswerSpec truth{{3}};

  auto correct = make_traj({1, 2, 3});
  CHECK(score_reward(correct, truth) == 1.0);
  CHECK(correct.reward == 1.0);

  auto wrong = make_traj({1, 2, 4});
  CHECK(score_reward(wrong, truth) == 0.0);
  CHECK(wrong.reward == 0.0);

  // Reward depends only on the answer slot, not on the reasoning prefix.
  auto bare = make_traj({3});
  CHECK(score_reward(bare, truth) == 1.0);

  auto junk_prefix = make_traj({9, 9, 9, 9, 3});
  CHECK(score_reward(junk_prefix, truth) == 1.0);
}

TEST_CASE("score_reward over multi-token answers requires an exact match") {
  AnswerSpec truth{{1, 2, 3}};
  auto exact = make_traj({1, 2, 3});
  CHECK(score_reward(exact, truth) == 1.0);
  auto off_by_one = make_traj({1, 2, 2});
  CHECK(score_reward(off_by_one, truth) == 0.0);
  auto too_short = make_traj({2, 3});
  CHECK(score_reward(too_short, truth) == 0.0);
}

TEST_CASE("score_reward is pure and strictly binary") {
  AnswerSpec truth{{5}};
  auto t = make_traj({0, 5});
  const double first = score_reward(t, truth);
  const double second = score_reward(t, truth);
  CHECK(first == second);
  CHECK((first == 0.0 || first == 1.0));

  Trajectory empty;
  CHECK(score_reward(empty, truth) == 0.0);  // malformed falls into the 0 branch
}

TEST_CASE("trajectory validation") {
  auto t = make_traj({1, 2});
  CHECK_NOTHROW(t.validate());

  t.behavior_probs.pop_back();
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);

  auto zero_prob = make_traj({1});
  zero_prob.behavior_probs[0] = 0.0;
  CHECK_THROWS_AS(zero_prob.validate(), std::invalid_argument);

  auto over_one = make_traj({1});
  over_one.behavior_probs[0] = 1.5;
  CHECK_THROWS_AS(over_one.validate(), std::invalid_argument);

  auto bad_states = make_traj({1, 2});
  bad_states.states = {0};
  CHECK_THROWS_AS(bad_states.validate(), std::invalid_argument);
}

TEST_CASE("rollout group validation") {
  RolloutGroup g;
  g.prompt_id = 7;
  g.on_policy.push_back(make_traj({1}));
  g.on_policy.back().prompt_id = 7;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // singleton group

  g.off_policy.push_back(make_traj({1}, Source::OffPolicy));
  g.off_policy.back().prompt_id = 7;
  CHECK_NOTHROW(g.validate());

  g.off_policy.back().prompt_id = 8;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // mixed prompts
  g.off_policy.back().prompt_id = 7;

  g.off_policy.back().source = Source::OnPolicy;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);  // wrong source tag
}

TEST_CASE("algorithm defaults follow the 8-rollout budget") {
  const auto grpo = AlgorithmConfig::defaults_for(Algorithm::OnPolicyGRPO);
  CHECK(grpo.n_on == 8);
  CHECK(grpo.n_off == 0);
  CHECK(grpo.use_on_policy_clip);
  CHECK(grpo.clip_epsilon == 0.2);
  CHECK(grpo.entropy_coef == 0.01);
  CHECK(grpo.temperature == 1.0);
  CHECK_FALSE(grpo.advantage_std_norm);
  CHECK(grpo.length_norm == LengthNorm::ConstantBudget);

  const auto luffy = AlgorithmConfig::defaults_for(Algorithm::Luffy);
  CHECK(luffy.n_on == 7);
  CHECK(luffy.n_off == 1);
  CHECK(luffy.n_on + luffy.n_off == grpo.n_on + grpo.n_off);  // matched budget
  CHECK(luffy.shaping_gamma == 0.1);
  CHECK_FALSE(luffy.use_on_policy_clip);
  CHECK_FALSE(luffy.use_off_policy_clip);

  for (auto a : {Algorithm::OnPolicyGRPO, Algorithm::MixedPolicy, Algorithm::Luffy,
                 Algorithm::LuffyWithClip, Algorithm::SftOnly, Algorithm::RlWithSftLoss,
                 Algorithm::SftThenRl}) {
    CHECK_NOTHROW(AlgorithmConfig::defaults_for(a).validate());
  }
}

TEST_CASE("config invariants reject inconsistent variants") {
  auto luffy = AlgorithmConfig::defaults_for(Algorithm::Luffy);
  luffy.use_on_policy_clip = true;
  CHECK_THROWS_AS(luffy.validate(), std::invalid_argument);

  luffy = AlgorithmConfig::defaults_for(Algorithm::Luffy);
  luffy.shaping_gamma.reset();
  CHECK_THROWS_AS(luffy.validate(), std::invalid_argument);

  auto mixed = AlgorithmConfig::defaults_for(Algorithm::MixedPolicy);
  mixed.shaping_gamma = 0.1;
  CHECK_THROWS_AS(mixed.validate(), std::invalid_argument);

  auto grpo = AlgorithmConfig::defaults_for(Algorithm::OnPolicyGRPO);
  grpo.n_off = 1;
  CHECK_THROWS_AS(grpo.validate(), std::invalid_argument);

  grpo = AlgorithmConfig::defaults_for(Algorithm::OnPolicyGRPO);
  grpo.clip_epsilon = 0.0;
  CHECK_THROWS_AS(grpo.validate(), std::invalid_argument);

  grpo = AlgorithmConfig::defaults_for(Algorithm::OnPolicyGRPO);
  grpo.shaping_gamma = 1.5;
  CHECK_THROWS_AS(grpo.validate(), std::invalid_argument);
}

TEST_CASE("algorithm names round-trip") {
  for (auto a : {Algorithm::OnPolicyGRPO, Algorithm::MixedPolicy, Algorithm::Luffy,
                 Algorithm::LuffyWithClip, Algorithm::SftOnly, Algorithm::RlWithSftLoss,
                 Algorithm::SftThenRl}) {
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  }
  CHECK_THROWS_AS(algorithm_from_name("Ppo"), std::invalid_argument);
}
