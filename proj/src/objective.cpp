#include "rlvr/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlvr {

AdvantageVector group_advantages(const std::vector<double>& rewards, AdvantageMode mode) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_advantages: need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;

  AdvantageVector out;
  out.mode = mode;
  out.values.resize(rewards.size());
  double var = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out.values[i] = rewards[i] - mean;
    var += out.values[i] * out.values[i];
  }
  var /= n;  // population variance: the group is the whole population

  const double sd = std::sqrt(var);
  if (sd <= 1e-12) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  if (mode == AdvantageMode::StdNormalized) {
    for (auto& a : out.values) a /= sd;
  }
  return out;
}

ClipResult clip_surrogate(double ratio, double advantage, double epsilon) {
  if (!(ratio > 0.0) || !std::isfinite(ratio))
    throw std::invalid_argument("clip_surrogate: ratio must be finite and positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("clip_surrogate: epsilon must be > 0");
  const double raw = ratio * advantage;
  const double clamped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  if (clamped < raw) return {clamped, true};
  return {raw, false};
}

double shaping_f(double x, double gamma) {
  if (x < 0.0) throw std::invalid_argument("shaping_f: x must be >= 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("shaping_f: gamma must be > 0");
  return x / (x + gamma);
}

double shaping_f_prime(double x, double gamma) {
  if (x < 0.0) throw std::invalid_argument("shaping_f_prime: x must be >= 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("shaping_f_prime: gamma must be > 0");
  const double d = x + gamma;
  return gamma / (d * d);
}

namespace {

// Temperature-1 softmax rows memoized per loss evaluation.
class SoftmaxCache {
 public:
  explicit SoftmaxCache(const PolicyTable& policy)
      : policy_(policy), rows_(std::size_t{policy.n_states} * policy.vocab), have_(policy.n_states, 0) {}

  std::span<const double> row(std::uint32_t s) {
    std::span<double> r{rows_.data() + std::size_t{s} * policy_.vocab, policy_.vocab};
    if (!have_[s]) {
      action_distribution_into(policy_, s, 1.0, r);
      have_[s] = 1;
    }
    return r;
  }

 private:
  const PolicyTable& policy_;
  std::vector<double> rows_;
  std::vector<char> have_;
};

void require_states(const Trajectory& t) {
  if (t.states.size() != t.tokens.size())
    throw std::invalid_argument("loss: trajectory carries no state indices");
}

double traj_reward(const Trajectory& t) {
  if (!t.reward) throw std::invalid_argument("loss: trajectory not scored");
  return *t.reward;
}

// Adds coef * d(pi_tok)/d(logit_v) / pi_tok-free form: for the softmax row p,
// d pi_tok / d g_v = pi_tok * (1[v==tok] - p_v); callers pass the full
// multiplier of (1[v==tok] - p_v) as `coef`.
void add_logit_gradient(std::span<double> grad_row, std::span<const double> p, TokenId tok,
                        double coef) {
  for (std::size_t v = 0; v < p.size(); ++v) {
    grad_row[v] += coef * ((v == tok ? 1.0 : 0.0) - p[v]);
  }
}

struct SurrogateSettings {
  bool allow_off = false;        // include off-policy trajectories in advantages + objective
  bool shaped_off = false;       // apply f(x)=x/(x+gamma) to off-policy ratios
  bool off_in_advantage = true;  // off rewards join the advantage group
  bool require_off = false;      // reject groups without an off-policy trace
  bool sft_on_off = false;       // off traces contribute an SFT term instead of a ratio term
};

LossReport surrogate_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                          const AlgorithmConfig& cfg, const SurrogateSettings& st) {
  if (groups.empty()) throw std::invalid_argument("loss: empty group list");
  const double gamma = cfg.shaping_gamma.value_or(0.0);
  if (st.shaped_off && !cfg.shaping_gamma)
    throw std::invalid_argument("loss: shaping requested but shaping_gamma unset");

  SoftmaxCache cache(policy);
  LossReport rep;
  rep.grad.assign(policy.logits.size(), 0.0);

  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  std::size_t on_tokens = 0, clipped_tokens = 0, off_tokens = 0;
  double off_ratio_sum = 0.0;
  std::size_t sft_tokens = 0;

  // Pass 1 for the SFT combination: the per-token normalizer needs the count.
  if (st.sft_on_off) {
    for (const auto& g : groups)
      for (const auto& t : g.off_policy) sft_tokens += t.tokens.size();
  }

  for (const auto& g : groups) {
    g.validate();
    if (st.require_off && g.off_policy.empty())
      throw std::invalid_argument("loss: group lacks an off-policy trace");
    if (!st.allow_off && !st.sft_on_off && !g.off_policy.empty())
      throw std::invalid_argument("loss: on-policy objective got an off-policy trajectory");

    std::vector<double> rewards;
    rewards.reserve(g.size());
    for (const auto& t : g.on_policy) rewards.push_back(traj_reward(t));
    if (st.allow_off && st.off_in_advantage)
      for (const auto& t : g.off_policy) rewards.push_back(traj_reward(t));

    const auto adv = group_advantages(
        rewards, cfg.advantage_std_norm ? AdvantageMode::StdNormalized : AdvantageMode::MeanOnly);

    // Normalizer: token count of the participating trajectories, or the
    // constant budget (group size x longest member) when length
    // normalization is removed.
    std::size_t z_tokens = 0, max_len = 1, members = g.on_policy.size();
    for (const auto& t : g.on_policy) {
      z_tokens += t.tokens.size();
      max_len = std::max(max_len, t.tokens.size());
    }
    if (st.allow_off) {
      members += g.off_policy.size();
      for (const auto& t : g.off_policy) {
        z_tokens += t.tokens.size();
        max_len = std::max(max_len, t.tokens.size());
      }
    }
    const double z = cfg.length_norm == LengthNorm::PerTokenZ
                         ? static_cast<double>(std::max<std::size_t>(z_tokens, 1))
                         : static_cast<double>(members * max_len);
    const double scale = inv_groups / z;

    double group_obj = 0.0;
    for (std::size_t i = 0; i < g.on_policy.size(); ++i) {
      const auto& t = g.on_policy[i];
      require_states(t);
      const double a = adv.values[i];
      for (std::size_t k = 0; k < t.tokens.size(); ++k) {
        const auto s = t.states[k];
        const auto tok = t.tokens[k];
        const auto p = cache.row(s);
        const double ratio = p[tok] / t.behavior_probs[k];
        ++on_tokens;
        if (cfg.use_on_policy_clip) {
          const auto c = clip_surrogate(ratio, a, cfg.clip_epsilon);
          group_obj += c.value;
          if (c.clipped) {
            ++clipped_tokens;  // clamped branch selected: constant in theta
          } else {
            add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p,
                               tok, scale * a * ratio);
          }
        } else {
          group_obj += ratio * a;
          add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p, tok,
                             scale * a * ratio);
        }
      }
    }

    if (st.allow_off) {
      for (std::size_t j = 0; j < g.off_policy.size(); ++j) {
        const auto& t = g.off_policy[j];
        require_states(t);
        const double a = st.off_in_advantage ? adv.values[g.on_policy.size() + j] : 0.0;
        for (std::size_t k = 0; k < t.tokens.size(); ++k) {
          const auto s = t.states[k];
          const auto tok = t.tokens[k];
          const auto p = cache.row(s);
          const double ratio = p[tok] / t.behavior_probs[k];
          ++off_tokens;
          if (st.shaped_off) {
            const double fx = shaping_f(ratio, gamma);
            group_obj += fx * a;
            off_ratio_sum += fx;
            add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p,
                               tok, scale * a * shaping_f_prime(ratio, gamma) * ratio);
          } else if (cfg.use_off_policy_clip) {
            const auto c = clip_surrogate(ratio, a, cfg.clip_epsilon);
            group_obj += c.value;
            off_ratio_sum += ratio;
            if (!c.clipped) {
              add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p,
                                 tok, scale * a * ratio);
            }
          } else {
            group_obj += ratio * a;
            off_ratio_sum += ratio;
            add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p,
                               tok, scale * a * ratio);
          }
        }
      }
    }

    rep.objective += group_obj / z;
  }
  rep.objective *= inv_groups;

  // SFT term on off-policy traces (mean log-likelihood over their tokens).
  if (st.sft_on_off && sft_tokens > 0) {
    const double inv_tok = 1.0 / static_cast<double>(sft_tokens);
    double sft_obj = 0.0;
    for (const auto& g : groups) {
      for (const auto& t : g.off_policy) {
        require_states(t);
        for (std::size_t k = 0; k < t.tokens.size(); ++k) {
          const auto s = t.states[k];
          const auto tok = t.tokens[k];
          const auto p = cache.row(s);
          sft_obj += std::log(p[tok]) * inv_tok;
          add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p, tok,
                             inv_tok);
        }
      }
    }
    rep.objective += sft_obj;
  }

  // Entropy bonus over on-policy (trajectory, position) pairs; off-policy
  // tokens join only when configured.
  if (cfg.entropy_coef > 0.0) {
    std::size_t pairs = 0;
    for (const auto& g : groups) {
      for (const auto& t : g.on_policy) pairs += t.tokens.size();
      if (cfg.entropy_include_off)
        for (const auto& t : g.off_policy) pairs += t.tokens.size();
    }
    if (pairs > 0) {
      const double w = cfg.entropy_coef / static_cast<double>(pairs);
      double mean_h = 0.0;
      auto add_entropy = [&](const Trajectory& t) {
        for (std::uint32_t s : t.states) {
          const auto p = cache.row(s);
          double h = 0.0;
          for (double q : p) h -= q * std::log(q);
          mean_h += h / static_cast<double>(pairs);
          auto grow = std::span<double>{rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab};
          for (std::size_t v = 0; v < p.size(); ++v) {
            grow[v] += w * (-p[v] * (std::log(p[v]) + h));
          }
        }
      };
      for (const auto& g : groups) {
        for (const auto& t : g.on_policy) add_entropy(t);
        if (cfg.entropy_include_off)
          for (const auto& t : g.off_policy) add_entropy(t);
      }
      rep.entropy_term = cfg.entropy_coef * mean_h;
      rep.objective += rep.entropy_term;
    }
  }

  rep.clip_fraction_on =
      on_tokens == 0 ? 0.0 : static_cast<double>(clipped_tokens) / static_cast<double>(on_tokens);
  rep.mean_off_ratio = off_tokens == 0 ? 0.0 : off_ratio_sum / static_cast<double>(off_tokens);
  return rep;
}

}  // namespace

LossReport grpo_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                     const AlgorithmConfig& cfg) {
  for (const auto& g : groups) {
    if (!g.off_policy.empty())
      throw std::invalid_argument("grpo_loss: groups must be purely on-policy");
  }
  SurrogateSettings st;
  st.allow_off = false;
  return surrogate_loss(policy, groups, cfg, st);
}

LossReport mixed_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                      const AlgorithmConfig& cfg) {
  SurrogateSettings st;
  st.allow_off = true;
  st.require_off = true;
  st.shaped_off = false;
  return surrogate_loss(policy, groups, cfg, st);
}

LossReport shaped_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                       const AlgorithmConfig& cfg) {
  if (!cfg.shaping_gamma) throw std::invalid_argument("shaped_loss: shaping_gamma unset");
  SurrogateSettings st;
  st.allow_off = true;
  st.require_off = true;
  st.shaped_off = true;
  return surrogate_loss(policy, groups, cfg, st);
}

LossReport sft_loss(const PolicyTable& policy, std::span<const Trajectory> off_trajs,
                    const AlgorithmConfig& cfg) {
  (void)cfg;
  if (off_trajs.empty()) throw std::invalid_argument("sft_loss: no trajectories");
  SoftmaxCache cache(policy);
  LossReport rep;
  rep.grad.assign(policy.logits.size(), 0.0);
  std::size_t n_tokens = 0;
  for (const auto& t : off_trajs) {
    if (t.source != Source::OffPolicy)
      throw std::invalid_argument("sft_loss: expected off-policy trajectories");
    require_states(t);
    n_tokens += t.tokens.size();
  }
  if (n_tokens == 0) return rep;
  const double inv = 1.0 / static_cast<double>(n_tokens);
  for (const auto& t : off_trajs) {
    for (std::size_t k = 0; k < t.tokens.size(); ++k) {
      const auto s = t.states[k];
      const auto tok = t.tokens[k];
      const auto p = cache.row(s);
      rep.objective += std::log(p[tok]) * inv;
      add_logit_gradient({rep.grad.data() + std::size_t{s} * policy.vocab, policy.vocab}, p, tok,
                         inv);
    }
  }
  return rep;
}

LossReport evaluate_loss(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                         const AlgorithmConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::OnPolicyGRPO:
      return grpo_loss(policy, groups, cfg);
    case Algorithm::MixedPolicy:
      return mixed_loss(policy, groups, cfg);
    case Algorithm::Luffy:
    case Algorithm::LuffyWithClip:
      return shaped_loss(policy, groups, cfg);
    case Algorithm::RlWithSftLoss: {
      // On-policy surrogate over the on-policy rollouts (advantages within
      // them only) plus an SFT term on the off-policy traces.
      SurrogateSettings st;
      st.allow_off = false;
      st.off_in_advantage = false;
      st.sft_on_off = true;
      return surrogate_loss(policy, groups, cfg, st);
    }
    case Algorithm::SftOnly: {
      std::vector<Trajectory> trajs;
      for (const auto& g : groups)
        for (const auto& t : g.off_policy) trajs.push_back(t);
      return sft_loss(policy, trajs, cfg);
    }
    case Algorithm::SftThenRl:
      throw std::invalid_argument("evaluate_loss: SftThenRl is a schedule, not a loss");
  }
  throw std::logic_error("evaluate_loss: unhandled algorithm");
}

BoundCheckReport gradient_weight_bound_check(const PolicyTable& policy, const Trajectory& off_traj,
                                             double advantage, std::optional<double> gamma) {
  if (!off_traj.reward) throw std::invalid_argument("bound check: trajectory not scored");
  require_states(off_traj);
  SoftmaxCache cache(policy);
  BoundCheckReport rep;
  for (std::size_t k = 0; k < off_traj.tokens.size(); ++k) {
    const auto s = off_traj.states[k];
    const auto tok = off_traj.tokens[k];
    const auto p = cache.row(s);
    const double pi = p[tok];
    const double fprime = gamma ? shaping_f_prime(pi, *gamma) : 1.0;
    const double bound = std::abs(fprime) * pi * (1.0 - pi) * std::abs(advantage);
    // Per-token off-policy objective f(pi)*A; gradient on logit v of the row
    // is f'(pi) * pi * (1[v==tok] - p_v) * A.
    for (std::size_t v = 0; v < p.size(); ++v) {
      const double g =
          fprime * pi * ((v == tok ? 1.0 : 0.0) - p[v]) * advantage;
      const double slack = std::abs(g) - bound;
      rep.max_slack = std::max(rep.max_slack, slack);
      rep.max_abs_grad = std::max(rep.max_abs_grad, std::abs(g));
      if (slack > 1e-12) ++rep.violations;
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace rlvr
