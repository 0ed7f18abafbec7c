#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rlvr/core.hpp"

namespace rlvr {

enum class EnvFamily { CombinationLock, ModularChain };

const char* family_name(EnvFamily f);
EnvFamily family_from_name(const std::string& name);

// Synthetic verifiable-reward task family.
//
// CombinationLock: the answer is the entire emitted sequence; a uniform
// policy succeeds with probability exactly V^-L. ModularChain: the answer is
// the final token, which must equal the sum of the instance's operands mod V,
// and the intended reasoning emits the running partial sums.
//
// Both families tie the answer slot to the whole episode, so `difficulty`
// (secret length / operand count) must equal episode_len; 0 means "match".
struct EnvSpec {
  EnvFamily family = EnvFamily::ModularChain;
  std::uint32_t vocab_size = 10;  // V >= 2
  std::uint32_t episode_len = 4;  // L >= 1
  std::uint32_t difficulty = 0;
  std::uint64_t seed = 1;

  void validate() const;
  std::uint32_t effective_difficulty() const { return difficulty == 0 ? episode_len : difficulty; }
  // Number of distinct instances the family supports (saturates at 2^62).
  std::uint64_t instance_capacity() const;
};

struct TaskInstance {
  std::uint64_t prompt_id = 0;
  EnvFamily family = EnvFamily::ModularChain;
  std::uint32_t vocab_size = 0;
  std::uint32_t episode_len = 0;
  // Lock: the secret sequence. Chain: the operands.
  std::vector<TokenId> payload;
  AnswerSpec truth;
};

// What the policy observes: position and the previously emitted token
// (the running partial sum, for ModularChain). prev == -1 before the first
// emission; pos == episode_len is terminal.
struct EnvState {
  std::uint32_t episode_len = 0;
  std::uint32_t pos = 0;
  std::int32_t prev = -1;

  bool terminal() const { return pos >= episode_len; }
};

EnvState initial_state(const TaskInstance& inst);
EnvState transition(const EnvState& state, TokenId token);

// Instance i as a pure function of (spec, i); generate_tasks(spec, n) yields
// the first n of these. Distinctness comes from an affine bijection over the
// payload index space.
TaskInstance make_task(const EnvSpec& spec, std::uint64_t index);
std::vector<TaskInstance> generate_tasks(const EnvSpec& spec, std::uint64_t count);

enum class TraceStyle { Minimal, Verbose };

// Maps (task feature, env state) into a dense policy-table row index.
struct StateEncoder {
  std::uint32_t n_tasks = 0;
  std::uint32_t episode_len = 0;
  std::uint32_t vocab_size = 0;

  std::uint32_t n_states() const { return n_tasks * episode_len * (vocab_size + 1); }
  std::uint32_t encode(std::uint64_t task_feature, const EnvState& state) const;
};

// Teacher trace for an instance. Verbose emits the full intermediate-step
// sequence, Minimal only the answer tokens; both score reward 1.
// recorded_prob is the per-token probability stored as pi_phi: 1.0 is the
// unit-probability mode, values < 1 model a soft teacher whose probabilities
// are retained for importance ratios.
Trajectory oracle_trace(const TaskInstance& inst, TraceStyle style, double recorded_prob = 1.0);
Trajectory oracle_trace(const TaskInstance& inst, TraceStyle style, const StateEncoder& encoder,
                        double recorded_prob = 1.0);

// State index sequence visited when emitting `tokens` from the initial state.
std::vector<std::uint32_t> replay_states(const StateEncoder& encoder, const TaskInstance& inst,
                                         std::span<const TokenId> tokens);

// Line-delimited task records; import(export(x)) == x bit-exactly.
void export_tasks(std::ostream& out, const std::vector<TaskInstance>& tasks);
std::vector<TaskInstance> import_tasks(std::istream& in);

}  // namespace rlvr
