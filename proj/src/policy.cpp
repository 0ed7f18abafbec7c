#include "rlvr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "rlvr/rng.hpp"

namespace rlvr {

PolicyTable PolicyTable::zeros(std::uint32_t n_states, std::uint32_t vocab) {
  if (n_states == 0 || vocab == 0)
    throw std::invalid_argument("policy: empty table");
  PolicyTable p;
  p.n_states = n_states;
  p.vocab = vocab;
  p.logits.assign(std::size_t{n_states} * vocab, 0.0);
  return p;
}

PolicyTable PolicyTable::for_env(const EnvSpec& spec, std::uint32_t n_tasks) {
  spec.validate();
  StateEncoder enc{n_tasks, spec.episode_len, spec.vocab_size};
  PolicyTable p = zeros(enc.n_states(), spec.vocab_size);
  p.encoder = enc;
  return p;
}

void action_distribution_into(const PolicyTable& policy, std::uint32_t state, double temperature,
                              std::span<double> out) {
  if (!(temperature > 0.0)) throw std::invalid_argument("action_distribution: temperature must be > 0");
  if (state >= policy.n_states) throw std::invalid_argument("action_distribution: state out of range");
  if (out.size() != policy.vocab) throw std::invalid_argument("action_distribution: bad output span");
  const auto row = policy.row(state);
  double hi = row[0];
  for (double g : row) hi = std::max(hi, g);
  double sum = 0.0;
  for (std::uint32_t v = 0; v < policy.vocab; ++v) {
    out[v] = std::exp((row[v] - hi) / temperature);
    sum += out[v];
  }
  for (auto& p : out) p /= sum;
}

std::vector<double> action_distribution(const PolicyTable& policy, std::uint32_t state,
                                        double temperature) {
  std::vector<double> out(policy.vocab);
  action_distribution_into(policy, state, temperature, out);
  return out;
}

Trajectory sample_trajectory(const PolicyTable& policy, const TaskInstance& inst, double temperature,
                             std::uint64_t rng_seed) {
  if (!policy.encoder)
    throw std::invalid_argument("sample_trajectory: policy has no state encoder");
  if (inst.vocab_size != policy.vocab || inst.episode_len != policy.encoder->episode_len)
    throw std::invalid_argument("sample_trajectory: instance does not match policy dimensions");

  Rng rng(rng_seed);
  Trajectory t;
  t.prompt_id = inst.prompt_id;
  t.source = Source::OnPolicy;
  t.tokens.reserve(inst.episode_len);
  t.behavior_probs.reserve(inst.episode_len);
  t.states.reserve(inst.episode_len);

  std::vector<double> probs(policy.vocab);
  EnvState s = initial_state(inst);
  while (!s.terminal()) {
    const std::uint32_t idx = policy.encoder->encode(inst.prompt_id, s);
    action_distribution_into(policy, idx, temperature, probs);
    const auto tok = static_cast<TokenId>(rng.categorical(probs));
    t.states.push_back(idx);
    t.tokens.push_back(tok);
    t.behavior_probs.push_back(probs[tok]);
    s = transition(s, tok);
  }
  return t;
}

SequenceEval sequence_log_prob(const PolicyTable& policy, const Trajectory& traj,
                               double temperature) {
  if (traj.states.size() != traj.tokens.size())
    throw std::invalid_argument("sequence_log_prob: trajectory carries no state indices");
  SequenceEval ev;
  ev.token_probs.reserve(traj.tokens.size());
  std::vector<double> probs(policy.vocab);
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    if (traj.tokens[i] >= policy.vocab)
      throw std::invalid_argument("sequence_log_prob: token out of range");
    action_distribution_into(policy, traj.states[i], temperature, probs);
    const double p = probs[traj.tokens[i]];
    ev.token_probs.push_back(p);
    ev.log_prob += std::log(p);
  }
  return ev;
}

double entropy(const PolicyTable& policy, std::uint32_t state, double temperature) {
  const auto p = action_distribution(policy, state, temperature);
  double h = 0.0;
  for (double q : p) h -= q * std::log(q);
  return std::max(h, 0.0);
}

double batch_mean_entropy(const PolicyTable& policy, std::span<const RolloutGroup> groups,
                          bool include_off_policy, double temperature) {
  double sum = 0.0;
  std::size_t n = 0;
  auto add = [&](const Trajectory& t) {
    for (std::uint32_t s : t.states) {
      sum += entropy(policy, s, temperature);
      ++n;
    }
  };
  for (const auto& g : groups) {
    for (const auto& t : g.on_policy) add(t);
    if (include_off_policy)
      for (const auto& t : g.off_policy) add(t);
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

void apply_gradient(PolicyTable& policy, std::span<const double> grad, double step_size) {
  if (grad.size() != policy.logits.size())
    throw std::invalid_argument("apply_gradient: gradient dimensions do not match policy");
  for (double g : grad) {
    if (!std::isfinite(g)) throw std::invalid_argument("apply_gradient: non-finite gradient entry");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) policy.logits[i] += step_size * grad[i];
}

namespace {
constexpr char kPolicyMagic[8] = {'R', 'L', 'V', 'R', 'P', 'O', 'L', '1'};
}

void save_policy(std::ostream& out, const PolicyTable& policy) {
  out.write(kPolicyMagic, sizeof kPolicyMagic);
  const std::uint64_t s = policy.n_states, v = policy.vocab;
  out.write(reinterpret_cast<const char*>(&s), sizeof s);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
  out.write(reinterpret_cast<const char*>(policy.logits.data()),
            static_cast<std::streamsize>(policy.logits.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_policy: write failed");
}

PolicyTable load_policy(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kPolicyMagic, sizeof magic) != 0)
    throw std::runtime_error("load_policy: bad magic");
  std::uint64_t s = 0, v = 0;
  in.read(reinterpret_cast<char*>(&s), sizeof s);
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in || s == 0 || v == 0 || s > (std::uint64_t{1} << 32) || v > (std::uint64_t{1} << 32))
    throw std::runtime_error("load_policy: bad dimensions");
  PolicyTable p = PolicyTable::zeros(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(v));
  in.read(reinterpret_cast<char*>(p.logits.data()),
          static_cast<std::streamsize>(p.logits.size() * sizeof(double)));
  if (!in) throw std::runtime_error("load_policy: truncated logits");
  return p;
}

}  // namespace rlvr
