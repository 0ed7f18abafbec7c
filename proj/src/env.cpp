#include "rlvr/env.hpp"

#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rlvr/rng.hpp"

namespace rlvr {
namespace {

constexpr std::uint64_t kCapacityCeiling = std::uint64_t{1} << 62;

std::uint64_t pow_saturating(std::uint64_t base, std::uint32_t exp) {
  std::uint64_t r = 1;
  for (std::uint32_t i = 0; i < exp; ++i) {
    if (r > kCapacityCeiling / base) return kCapacityCeiling;
    r *= base;
  }
  return r > kCapacityCeiling ? kCapacityCeiling : r;
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

// Pseudorandom bijection i -> (A*i + B) mod capacity with gcd(A, capacity) = 1.
struct AffineMap {
  std::uint64_t a = 1, b = 0, capacity = 1;

  static AffineMap for_spec(const EnvSpec& spec) {
    AffineMap m;
    m.capacity = spec.instance_capacity();
    std::uint64_t salt = 0;
    do {
      m.a = 1 + splitmix64(mix_seed(spec.seed, 0xA11F1E, salt++)) % (m.capacity - 1);
    } while (std::gcd(m.a, m.capacity) != 1);
    m.b = splitmix64(mix_seed(spec.seed, 0x0FF5E7)) % m.capacity;
    return m;
  }

  std::uint64_t operator()(std::uint64_t i) const { return (mulmod(a, i, capacity) + b) % capacity; }
};

std::vector<TokenId> payload_from_index(std::uint64_t idx, std::uint32_t vocab, std::uint32_t len) {
  std::vector<TokenId> out(len);
  for (std::uint32_t t = 0; t < len; ++t) {
    out[len - 1 - t] = static_cast<TokenId>(idx % vocab);
    idx /= vocab;
  }
  return out;
}

std::vector<TokenId> partial_sums(const std::vector<TokenId>& operands, std::uint32_t vocab) {
  std::vector<TokenId> sums(operands.size());
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    acc = (acc + operands[i]) % vocab;
    sums[i] = static_cast<TokenId>(acc);
  }
  return sums;
}

}  // namespace

const char* family_name(EnvFamily f) {
  return f == EnvFamily::CombinationLock ? "CombinationLock" : "ModularChain";
}

EnvFamily family_from_name(const std::string& name) {
  if (name == "CombinationLock") return EnvFamily::CombinationLock;
  if (name == "ModularChain") return EnvFamily::ModularChain;
  throw std::invalid_argument("unknown environment family: " + name);
}

void EnvSpec::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("env: vocab_size must be >= 2");
  if (episode_len < 1) throw std::invalid_argument("env: episode_len must be >= 1");
  if (difficulty != 0 && difficulty != episode_len)
    throw std::invalid_argument("env: difficulty must equal episode_len (or 0 to match)");
}

std::uint64_t EnvSpec::instance_capacity() const {
  return pow_saturating(vocab_size, episode_len);
}

EnvState initial_state(const TaskInstance& inst) {
  return EnvState{inst.episode_len, 0, -1};
}

EnvState transition(const EnvState& state, TokenId token) {
  if (state.terminal())
    throw std::logic_error("transition: episode already terminated");
  return EnvState{state.episode_len, state.pos + 1, static_cast<std::int32_t>(token)};
}

TaskInstance make_task(const EnvSpec& spec, std::uint64_t index) {
  spec.validate();
  const auto map = AffineMap::for_spec(spec);
  if (index >= map.capacity)
    throw std::invalid_argument("make_task: index exceeds instance capacity");

  TaskInstance inst;
  inst.prompt_id = index;
  inst.family = spec.family;
  inst.vocab_size = spec.vocab_size;
  inst.episode_len = spec.episode_len;
  inst.payload = payload_from_index(map(index), spec.vocab_size, spec.episode_len);
  if (spec.family == EnvFamily::CombinationLock) {
    inst.truth.answer = inst.payload;
  } else {
    inst.truth.answer = {partial_sums(inst.payload, spec.vocab_size).back()};
  }
  return inst;
}

std::vector<TaskInstance> generate_tasks(const EnvSpec& spec, std::uint64_t count) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("generate_tasks: count must be >= 1");
  if (count > spec.instance_capacity())
    throw std::invalid_argument("generate_tasks: count exceeds the family's distinct-instance capacity");
  std::vector<TaskInstance> tasks;
  tasks.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) tasks.push_back(make_task(spec, i));
  return tasks;
}

std::uint32_t StateEncoder::encode(std::uint64_t task_feature, const EnvState& state) const {
  if (task_feature >= n_tasks)
    throw std::invalid_argument("state encoder: task feature out of range");
  if (state.terminal())
    throw std::invalid_argument("state encoder: terminal state has no actions");
  const std::uint32_t prev_slot = state.pos == 0 ? 0 : static_cast<std::uint32_t>(state.prev) + 1;
  return (static_cast<std::uint32_t>(task_feature) * episode_len + state.pos) * (vocab_size + 1) +
         prev_slot;
}

std::vector<std::uint32_t> replay_states(const StateEncoder& encoder, const TaskInstance& inst,
                                         std::span<const TokenId> tokens) {
  std::vector<std::uint32_t> states;
  states.reserve(tokens.size());
  EnvState s = initial_state(inst);
  for (TokenId tok : tokens) {
    states.push_back(encoder.encode(inst.prompt_id, s));
    s = transition(s, tok);
  }
  return states;
}

namespace {

Trajectory trace_tokens(const TaskInstance& inst, TraceStyle style) {
  Trajectory t;
  t.prompt_id = inst.prompt_id;
  t.source = Source::OffPolicy;
  if (inst.family == EnvFamily::CombinationLock) {
    // The whole secret is the answer; there is no shorter correct emission.
    t.tokens = inst.payload;
  } else {
    const auto sums = partial_sums(inst.payload, inst.vocab_size);
    t.tokens = style == TraceStyle::Verbose ? sums : std::vector<TokenId>{sums.back()};
  }
  return t;
}

}  // namespace

Trajectory oracle_trace(const TaskInstance& inst, TraceStyle style, double recorded_prob) {
  if (!(recorded_prob > 0.0) || recorded_prob > 1.0)
    throw std::invalid_argument("oracle_trace: recorded_prob must lie in (0,1]");
  Trajectory t = trace_tokens(inst, style);
  t.behavior_probs.assign(t.tokens.size(), recorded_prob);
  score_reward(t, inst.truth);
  return t;
}

Trajectory oracle_trace(const TaskInstance& inst, TraceStyle style, const StateEncoder& encoder,
                        double recorded_prob) {
  Trajectory t = oracle_trace(inst, style, recorded_prob);
  t.states = replay_states(encoder, inst, t.tokens);
  return t;
}

void export_tasks(std::ostream& out, const std::vector<TaskInstance>& tasks) {
  for (const auto& t : tasks) {
    out << t.prompt_id << '\t' << family_name(t.family) << '\t' << t.vocab_size << '\t'
        << t.episode_len << '\t';
    for (std::size_t i = 0; i < t.payload.size(); ++i) out << (i ? "," : "") << t.payload[i];
    out << '\t';
    for (std::size_t i = 0; i < t.truth.answer.size(); ++i) out << (i ? "," : "") << t.truth.answer[i];
    out << '\n';
  }
}

namespace {

std::vector<TokenId> parse_token_list(const std::string& field) {
  std::vector<TokenId> out;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t end = field.find(',', start);
    if (end == std::string::npos) end = field.size();
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(field.data() + start, field.data() + end, v);
    if (ec != std::errc{} || p != field.data() + end)
      throw std::runtime_error("task import: bad token list field '" + field + "'");
    out.push_back(v);
    if (end == field.size()) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

std::vector<TaskInstance> import_tasks(std::istream& in) {
  std::vector<TaskInstance> tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id_s, fam_s, vocab_s, len_s, payload_s, truth_s;
    if (!(std::getline(ls, id_s, '\t') && std::getline(ls, fam_s, '\t') &&
          std::getline(ls, vocab_s, '\t') && std::getline(ls, len_s, '\t') &&
          std::getline(ls, payload_s, '\t') && std::getline(ls, truth_s)))
      throw std::runtime_error("task import: malformed line '" + line + "'");
    TaskInstance t;
    t.prompt_id = std::stoull(id_s);
    t.family = family_from_name(fam_s);
    t.vocab_size = static_cast<std::uint32_t>(std::stoul(vocab_s));
    t.episode_len = static_cast<std::uint32_t>(std::stoul(len_s));
    t.payload = parse_token_list(payload_s);
    t.truth.answer = parse_token_list(truth_s);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace rlvr
