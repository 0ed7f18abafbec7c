#include "rlvr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "rlvr/rng.hpp"

namespace rlvr {
namespace {

double step_size_for(const AlgorithmConfig& cfg, std::uint64_t total_steps) {
  if (cfg.learning_rate.kind == LearningRate::Kind::Constant) return cfg.learning_rate.value;
  return cfg.learning_rate.value / std::sqrt(static_cast<double>(std::max<std::uint64_t>(1, total_steps)));
}

// The stage-wise view of SftThenRl: SFT imitation first, on-policy RL after.
AlgorithmConfig phase_config(const AlgorithmConfig& cfg, const RunOptions& opts, std::uint64_t step) {
  if (cfg.algorithm != Algorithm::SftThenRl) return cfg;
  const auto sft_steps =
      static_cast<std::uint64_t>(std::llround(opts.sft_split * static_cast<double>(opts.n_steps)));
  AlgorithmConfig out = cfg;
  if (step < sft_steps) {
    out.algorithm = Algorithm::SftOnly;
    out.n_on = 0;
    out.n_off = std::max(1, cfg.n_off);
    out.entropy_coef = 0.0;
  } else {
    out.algorithm = Algorithm::OnPolicyGRPO;
    out.n_off = 0;
  }
  return out;
}

std::string dump_groups(const std::vector<RolloutGroup>& groups) {
  std::ostringstream os;
  for (const auto& g : groups) {
    os << "group prompt_id=" << g.prompt_id << '\n';
    auto dump = [&](const Trajectory& t, const char* tag) {
      os << "  " << tag << " reward=" << (t.reward ? *t.reward : -1.0) << " tokens=";
      for (std::size_t i = 0; i < t.tokens.size(); ++i) os << (i ? "," : "") << t.tokens[i];
      os << " probs=";
      for (std::size_t i = 0; i < t.behavior_probs.size(); ++i)
        os << (i ? "," : "") << t.behavior_probs[i];
      os << '\n';
    };
    for (const auto& t : g.on_policy) dump(t, "on ");
    for (const auto& t : g.off_policy) dump(t, "off");
  }
  return os.str();
}

}  // namespace

std::vector<RolloutGroup> assemble_groups(const PolicyTable& policy,
                                          const std::vector<TaskInstance>& tasks,
                                          const AlgorithmConfig& cfg, std::uint64_t step_seed,
                                          const std::vector<Trajectory>& oracle_traces) {
  if (cfg.n_off > 0 && oracle_traces.size() != tasks.size())
    throw std::invalid_argument("assemble_groups: oracle traces missing for some tasks");
  std::vector<RolloutGroup> groups;
  groups.reserve(tasks.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& task = tasks[k];
    RolloutGroup g;
    g.prompt_id = task.prompt_id;
    for (int r = 0; r < cfg.n_on; ++r) {
      auto traj = sample_trajectory(policy, task, cfg.temperature,
                                    mix_seed(step_seed, k, static_cast<std::uint64_t>(r)));
      score_reward(traj, task.truth);
      g.on_policy.push_back(std::move(traj));
    }
    for (int r = 0; r < cfg.n_off; ++r) g.off_policy.push_back(oracle_traces[k]);
    groups.push_back(std::move(g));
  }
  return groups;
}

MetricsRecord train_step(TrainState& state, const std::vector<TaskInstance>& tasks,
                         const AlgorithmConfig& cfg, const RunOptions& opts,
                         const std::vector<Trajectory>& oracle_traces) {
  const AlgorithmConfig step_cfg = phase_config(cfg, opts, state.step);
  const std::uint64_t step_seed = mix_seed(state.master_seed, state.step);
  const double alpha = step_size_for(step_cfg, opts.n_steps);

  MetricsRecord rec;
  rec.step = state.step;

  if (step_cfg.algorithm == Algorithm::SftOnly) {
    // Imitation stage: no rollouts, loss over oracle traces directly. The
    // entropy metric covers the trace-visited states.
    const std::vector<Trajectory>& trajs = oracle_traces;
    double reward_sum = 0.0, entropy_sum = 0.0;
    std::size_t entropy_n = 0;
    for (const auto& t : trajs) {
      reward_sum += t.reward.value_or(0.0);
      for (std::uint32_t s : t.states) {
        entropy_sum += entropy(state.policy, s, 1.0);
        ++entropy_n;
      }
    }
    rec.mean_reward_on = 0.0;
    rec.mean_reward_group = trajs.empty() ? 0.0 : reward_sum / static_cast<double>(trajs.size());
    rec.entropy = entropy_n == 0 ? 0.0 : entropy_sum / static_cast<double>(entropy_n);

    const auto loss = sft_loss(state.policy, trajs, step_cfg);
    double norm2 = 0.0;
    for (double g : loss.grad) norm2 += g * g;
    if (!std::isfinite(loss.objective) || !std::isfinite(norm2))
      throw TrainingAborted("non-finite SFT loss at step " + std::to_string(state.step), "");
    apply_gradient(state.policy, loss.grad, alpha);
    rec.grad_norm = std::sqrt(norm2);
    rec.loss = loss.objective;
  } else {
    auto groups = assemble_groups(state.policy, tasks, step_cfg, step_seed, oracle_traces);

    double on_sum = 0.0, group_sum = 0.0;
    std::size_t on_n = 0, group_n = 0;
    for (const auto& g : groups) {
      for (const auto& t : g.on_policy) {
        on_sum += t.reward.value_or(0.0);
        ++on_n;
      }
      for (const auto& t : g.off_policy) group_sum += t.reward.value_or(0.0);
      group_n += g.size();
    }
    group_sum += on_sum;
    rec.mean_reward_on = on_n == 0 ? 0.0 : on_sum / static_cast<double>(on_n);
    rec.mean_reward_group = group_n == 0 ? 0.0 : group_sum / static_cast<double>(group_n);
    rec.entropy = batch_mean_entropy(state.policy, groups, /*include_off_policy=*/on_n == 0);

    // One or more ascent updates on the same rollout batch; later updates see
    // ratios drift away from 1, which is where clipping becomes active.
    double loss_sum = 0.0, norm_sum = 0.0, clip_sum = 0.0, ratio_sum = 0.0;
    for (int u = 0; u < step_cfg.updates_per_batch; ++u) {
      LossReport loss;
      try {
        loss = evaluate_loss(state.policy, groups, step_cfg);
      } catch (const std::exception& e) {
        // The config was validated up front, so a loss-evaluation failure
        // mid-run means poisoned numerics (non-finite logits or ratios).
        throw TrainingAborted("loss evaluation failed at step " + std::to_string(state.step) +
                                  ": " + e.what(),
                              dump_groups(groups));
      }
      double norm2 = 0.0;
      for (double g : loss.grad) norm2 += g * g;
      if (!std::isfinite(loss.objective) || !std::isfinite(norm2)) {
        throw TrainingAborted("non-finite loss at step " + std::to_string(state.step),
                              dump_groups(groups));
      }
      apply_gradient(state.policy, loss.grad, alpha);
      loss_sum += loss.objective;
      norm_sum += std::sqrt(norm2);
      clip_sum += loss.clip_fraction_on;
      ratio_sum += loss.mean_off_ratio;
    }
    const double inv_u = 1.0 / static_cast<double>(step_cfg.updates_per_batch);
    rec.loss = loss_sum * inv_u;
    rec.grad_norm = norm_sum * inv_u;
    rec.clip_fraction_on = clip_sum * inv_u;
    rec.mean_off_ratio = ratio_sum * inv_u;
  }

  state.metrics.push_back(rec);
  ++state.step;
  return rec;
}

namespace {

TrainState run_loop(TrainState state, const AlgorithmConfig& cfg, const EnvSpec& env,
                    const RunOptions& opts) {
  cfg.validate();
  env.validate();
  const auto tasks = generate_tasks(env, opts.n_tasks);

  std::vector<Trajectory> oracle_traces;
  if (cfg.algorithm != Algorithm::OnPolicyGRPO) {
    oracle_traces.reserve(tasks.size());
    for (const auto& t : tasks) {
      oracle_traces.push_back(
          oracle_trace(t, opts.oracle_style, *state.policy.encoder, opts.oracle_recorded_prob));
    }
  }

  while (state.step < opts.n_steps) {
    train_step(state, tasks, cfg, opts, oracle_traces);
    if (opts.on_step) opts.on_step(state);
  }
  return state;
}

}  // namespace

TrainState run_training(const AlgorithmConfig& cfg, const EnvSpec& env, const RunOptions& opts) {
  TrainState state;
  state.policy = PolicyTable::for_env(env, static_cast<std::uint32_t>(opts.n_tasks));
  state.master_seed = cfg.seed;
  return run_loop(std::move(state), cfg, env, opts);
}

TrainState resume_training(TrainState state, const AlgorithmConfig& cfg, const EnvSpec& env,
                           const RunOptions& opts) {
  if (!state.policy.encoder) {
    // Checkpoints store the bare table; reattach the environment's encoder.
    StateEncoder enc{static_cast<std::uint32_t>(opts.n_tasks), env.episode_len, env.vocab_size};
    if (enc.n_states() != state.policy.n_states || env.vocab_size != state.policy.vocab)
      throw std::invalid_argument("resume: checkpoint dimensions do not match the environment");
    state.policy.encoder = enc;
  }
  return run_loop(std::move(state), cfg, env, opts);
}

namespace {
constexpr char kCkptMagic[8] = {'R', 'L', 'V', 'R', 'C', 'K', 'P', '1'};
}

void save_checkpoint(std::ostream& out, const TrainState& state) {
  out.write(kCkptMagic, sizeof kCkptMagic);
  const std::uint64_t step = state.step, seed = state.master_seed,
                      n_metrics = state.metrics.size();
  out.write(reinterpret_cast<const char*>(&step), sizeof step);
  out.write(reinterpret_cast<const char*>(&seed), sizeof seed);
  save_policy(out, state.policy);
  out.write(reinterpret_cast<const char*>(&n_metrics), sizeof n_metrics);
  for (const auto& r : state.metrics) {
    out.write(reinterpret_cast<const char*>(&r.step), sizeof r.step);
    const double vals[7] = {r.mean_reward_on, r.mean_reward_group, r.entropy, r.grad_norm,
                            r.clip_fraction_on, r.mean_off_ratio, r.loss};
    out.write(reinterpret_cast<const char*>(vals), sizeof vals);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

TrainState load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCkptMagic, sizeof magic) != 0)
    throw std::runtime_error("load_checkpoint: bad magic");
  TrainState state;
  std::uint64_t n_metrics = 0;
  in.read(reinterpret_cast<char*>(&state.step), sizeof state.step);
  in.read(reinterpret_cast<char*>(&state.master_seed), sizeof state.master_seed);
  state.policy = load_policy(in);
  in.read(reinterpret_cast<char*>(&n_metrics), sizeof n_metrics);
  if (!in) throw std::runtime_error("load_checkpoint: truncated header");
  state.metrics.resize(n_metrics);
  for (auto& r : state.metrics) {
    double vals[7];
    in.read(reinterpret_cast<char*>(&r.step), sizeof r.step);
    in.read(reinterpret_cast<char*>(vals), sizeof vals);
    r.mean_reward_on = vals[0];
    r.mean_reward_group = vals[1];
    r.entropy = vals[2];
    r.grad_norm = vals[3];
    r.clip_fraction_on = vals[4];
    r.mean_off_ratio = vals[5];
    r.loss = vals[6];
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated metrics");
  if (state.metrics.size() != state.step)
    throw std::runtime_error("load_checkpoint: metrics/step mismatch");
  return state;
}

}  // namespace rlvr
