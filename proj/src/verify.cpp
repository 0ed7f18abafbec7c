#include "rlvr/verify.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>

#include "rlvr/rng.hpp"
#include "rlvr/trainer.hpp"
#include "rlvr/variance.hpp"

namespace rlvr {

GradCheckResult finite_difference_check(const PolicyTable& policy,
                                        const std::function<LossReport(const PolicyTable&)>& loss,
                                        double step) {
  const LossReport analytic = loss(policy);
  GradCheckResult res;
  PolicyTable probe = policy;
  for (std::uint32_t s = 0; s < policy.n_states; ++s) {
    for (std::uint32_t v = 0; v < policy.vocab; ++v) {
      const std::size_t idx = std::size_t{s} * policy.vocab + v;
      const double saved = probe.logits[idx];
      probe.logits[idx] = saved + step;
      const double jp = loss(probe).objective;
      probe.logits[idx] = saved - step;
      const double jm = loss(probe).objective;
      probe.logits[idx] = saved;
      const double numeric = (jp - jm) / (2.0 * step);
      const double a = analytic.grad[idx];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > res.max_rel_err) {
        res.max_rel_err = err;
        res.worst_state = s;
        res.worst_token = v;
        res.analytic_at_worst = a;
        res.numeric_at_worst = numeric;
      }
    }
  }
  return res;
}

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// A random trajectory over synthetic states; losses are pure functions of
// (policy, trajectories-with-states), so gradient checks need no environment.
Trajectory random_trajectory(Rng& rng, std::uint32_t n_states, std::uint32_t vocab,
                             std::uint32_t len, Source source, std::uint64_t prompt_id) {
  Trajectory t;
  t.prompt_id = prompt_id;
  t.source = source;
  for (std::uint32_t k = 0; k < len; ++k) {
    t.states.push_back(static_cast<std::uint32_t>(rng.below(n_states)));
    t.tokens.push_back(static_cast<TokenId>(rng.below(vocab)));
    // On-policy denominators sit away from 0; off-policy traces use the
    // unit-probability mode.
    t.behavior_probs.push_back(source == Source::OnPolicy ? 0.1 + 0.85 * rng.uniform01() : 1.0);
  }
  t.reward = static_cast<double>(rng.below(2));
  return t;
}

PolicyTable random_policy(Rng& rng, std::uint32_t n_states, std::uint32_t vocab) {
  PolicyTable p = PolicyTable::zeros(n_states, vocab);
  for (auto& g : p.logits) g = 3.0 * (rng.uniform01() - 0.5);
  return p;
}

struct GradCase {
  std::string name;
  std::function<LossReport(const PolicyTable&)> loss;
  PolicyTable policy;
};

GradCase make_case(const std::string& which, std::uint64_t seed) {
  Rng rng(seed);
  const auto n_states = static_cast<std::uint32_t>(2 + rng.below(9));  // <= 10
  const auto vocab = static_cast<std::uint32_t>(2 + rng.below(5));     // <= 6
  auto len = [&] { return static_cast<std::uint32_t>(1 + rng.below(5)); };

  GradCase c;
  c.name = which;
  c.policy = random_policy(rng, n_states, vocab);

  if (which == "sft") {
    auto trajs = std::make_shared<std::vector<Trajectory>>();
    const auto n = 2 + rng.below(2);
    for (std::uint64_t i = 0; i < n; ++i)
      trajs->push_back(random_trajectory(rng, n_states, vocab, len(), Source::OffPolicy, 0));
    AlgorithmConfig cfg = AlgorithmConfig::defaults_for(Algorithm::SftOnly);
    c.loss = [trajs, cfg](const PolicyTable& p) { return sft_loss(p, *trajs, cfg); };
    return c;
  }

  auto groups = std::make_shared<std::vector<RolloutGroup>>();
  RolloutGroup g;
  g.prompt_id = 0;
  const bool mixed = which != "grpo";
  const int n_on = mixed ? 3 : 4;
  for (int i = 0; i < n_on; ++i)
    g.on_policy.push_back(random_trajectory(rng, n_states, vocab, len(), Source::OnPolicy, 0));
  if (mixed) g.off_policy.push_back(random_trajectory(rng, n_states, vocab, len(), Source::OffPolicy, 0));
  // Mixed groups carry a positive-reward trace, the usual oracle situation.
  if (mixed) g.off_policy.back().reward = 1.0;
  groups->push_back(std::move(g));

  AlgorithmConfig cfg;
  if (which == "grpo") {
    cfg = AlgorithmConfig::defaults_for(Algorithm::OnPolicyGRPO);
    cfg.n_on = n_on;
  } else if (which == "mixed") {
    cfg = AlgorithmConfig::defaults_for(Algorithm::MixedPolicy);
  } else {
    cfg = AlgorithmConfig::defaults_for(Algorithm::Luffy);
  }
  // Exercise both normalization paths and both advantage modes.
  cfg.advantage_std_norm = rng.below(2) == 0;
  cfg.length_norm = rng.below(2) == 0 ? LengthNorm::PerTokenZ : LengthNorm::ConstantBudget;
  cfg.entropy_coef = 0.01;

  if (which == "grpo") {
    c.loss = [groups, cfg](const PolicyTable& p) { return grpo_loss(p, *groups, cfg); };
  } else if (which == "mixed") {
    c.loss = [groups, cfg](const PolicyTable& p) { return mixed_loss(p, *groups, cfg); };
  } else {
    c.loss = [groups, cfg](const PolicyTable& p) { return shaped_loss(p, *groups, cfg); };
  }
  return c;
}

}  // namespace

SuiteReport verify_gradients(std::uint64_t seed, int instances_per_loss, double tolerance) {
  SuiteReport rep;
  rep.suite = "gradients";
  for (const std::string which : {"grpo", "mixed", "shaped", "sft"}) {
    double worst = 0.0;
    for (int i = 0; i < instances_per_loss; ++i) {
      auto c = make_case(which, mix_seed(seed, std::hash<std::string>{}(which), static_cast<std::uint64_t>(i)));
      const auto res = finite_difference_check(c.policy, c.loss);
      worst = std::max(worst, res.max_rel_err);
    }
    rep.checks.push_back({which + "_loss_fd", worst < tolerance,
                          fmt("max_rel_err=%.3g tol=%.1g", worst, tolerance)});
  }
  return rep;
}

SuiteReport verify_advantages(std::uint64_t seed) {
  SuiteReport rep;
  rep.suite = "advantages";
  Rng rng(mix_seed(seed, 0xadca));

  bool ok = true;
  double worst_mean = 0.0, worst_std = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto n = static_cast<std::size_t>(2 + rng.below(15));
    std::vector<double> rewards(n);
    bool constant = true;
    do {
      for (auto& r : rewards) r = static_cast<double>(rng.below(2));
      constant = true;
      for (double r : rewards)
        if (r != rewards[0]) constant = false;
    } while (constant);

    const auto std_adv = group_advantages(rewards, AdvantageMode::StdNormalized);
    const auto mean_adv = group_advantages(rewards, AdvantageMode::MeanOnly);
    double m = 0.0, m2 = 0.0, mo = 0.0;
    for (double a : std_adv.values) {
      m += a;
      m2 += a * a;
    }
    for (double a : mean_adv.values) mo += a;
    m /= static_cast<double>(n);
    const double sd = std::sqrt(m2 / static_cast<double>(n));
    worst_mean = std::max({worst_mean, std::abs(m), std::abs(mo / static_cast<double>(n))});
    worst_std = std::max(worst_std, std::abs(sd - 1.0));
    if (std::abs(m) > 1e-10 || std::abs(sd - 1.0) > 1e-10) ok = false;
  }
  rep.checks.push_back({"random_vectors", ok,
                        fmt("worst_mean=%.3g worst_std_err=%.3g over 1e4 vectors", worst_mean, worst_std)});

  const auto froz = group_advantages({1, 0, 0, 0}, AdvantageMode::StdNormalized);
  const double root3 = std::sqrt(3.0);
  const double err = std::max(
      std::abs(froz.values[0] - root3),
      std::max({std::abs(froz.values[1] + 1.0 / root3), std::abs(froz.values[2] + 1.0 / root3),
                std::abs(froz.values[3] + 1.0 / root3)}));
  rep.checks.push_back({"one_hot_case", err < 1e-9, fmt("max_abs_err=%.3g", err)});
  return rep;
}

SuiteReport verify_variance(std::uint64_t seed, std::vector<VarianceReport>* reports) {
  SuiteReport rep;
  rep.suite = "variance";
  bool raw_ok = true, less_ok = true, match_ok = true;
  double worst_raw_dev = 0.0, worst_match_dev = 0.0;
  for (double gamma : {0.05, 0.1, 0.3, 0.5}) {
    const auto r = monte_carlo_variance(gamma, 1000000, mix_seed(seed, 0x7a9));
    if (reports) reports->push_back(r);
    const double raw_dev = std::abs(r.mc_var_raw - 1.0) / r.mc_stderr_raw;
    worst_raw_dev = std::max(worst_raw_dev, raw_dev);
    if (raw_dev > 3.0) raw_ok = false;
    if (!(r.mc_var_shaped < r.mc_var_raw)) less_ok = false;
    const double match_dev = std::abs(r.mc_var_shaped - r.closed_form_var) / r.mc_stderr_shaped;
    worst_match_dev = std::max(worst_match_dev, match_dev);
    if (match_dev > 3.0) match_ok = false;
  }
  rep.checks.push_back({"raw_variance_is_one", raw_ok, fmt("worst |dev|=%.2f sigma", worst_raw_dev)});
  rep.checks.push_back({"shaped_below_raw", less_ok, "Var[f(x)] < Var[x] at every gamma"});
  rep.checks.push_back(
      {"matches_closed_form", match_ok, fmt("worst |dev|=%.2f sigma", worst_match_dev)});
  return rep;
}

SuiteReport verify_theorem(std::uint64_t seed) {
  SuiteReport rep;
  rep.suite = "theorem";
  TheoremSpec spec;
  spec.seed = seed;
  double bound100 = 0.0, bound400 = 0.0, bound1600 = 0.0;
  for (std::uint64_t K : {100ull, 400ull, 1600ull}) {
    const auto r = theorem_harness(spec, K);
    if (K == 100) bound100 = r.bound;
    if (K == 400) bound400 = r.bound;
    if (K == 1600) bound1600 = r.bound;
    rep.checks.push_back({fmt("bound_at_K=%g", static_cast<double>(K)), r.passed,
                          fmt("observed=%.4g bound=%.4g stderr=%.2g", r.observed_mean, r.bound,
                              r.observed_stderr)});
  }
  const double h1 = std::abs(bound400 - 0.5 * bound100);
  const double h2 = std::abs(bound1600 - 0.5 * bound400);
  rep.checks.push_back({"bound_halves_when_K_quadruples", h1 < 1e-12 * bound100 && h2 < 1e-12 * bound400,
                        fmt("residuals %.3g, %.3g", h1, h2)});
  return rep;
}

SuiteReport verify_gradient_bound(std::uint64_t seed, int n_pairs) {
  SuiteReport rep;
  rep.suite = "gradient_bound";
  std::uint64_t violations = 0, checked = 0;
  double max_slack = -1.0;
  Rng rng(mix_seed(seed, 0xb0d));
  for (int i = 0; i < n_pairs; ++i) {
    const auto n_states = static_cast<std::uint32_t>(2 + rng.below(9));
    const auto vocab = static_cast<std::uint32_t>(2 + rng.below(7));
    const auto len = static_cast<std::uint32_t>(1 + rng.below(6));
    PolicyTable p = random_policy(rng, n_states, vocab);
    Trajectory t = random_trajectory(rng, n_states, vocab, len, Source::OffPolicy, 0);
    const double adv = 4.0 * (rng.uniform01() - 0.5);
    const bool shaped = i % 2 == 0;
    const auto res = gradient_weight_bound_check(
        p, t, adv, shaped ? std::optional<double>(0.01 + 0.99 * rng.uniform01()) : std::nullopt);
    violations += res.violations;
    checked += res.checked;
    max_slack = std::max(max_slack, res.max_slack);
  }
  rep.checks.push_back({"per_logit_bound", violations == 0,
                        fmt("violations=%g over %g pairs, max_slack=%.3g",
                            static_cast<double>(violations), static_cast<double>(checked), max_slack)});
  return rep;
}

}  // namespace rlvr
