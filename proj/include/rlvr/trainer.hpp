#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlvr/core.hpp"
#include "rlvr/diagnostics.hpp"
#include "rlvr/env.hpp"
#include "rlvr/objective.hpp"
#include "rlvr/policy.hpp"

namespace rlvr {

// Full optimizer state. The rng "stream" is the master seed: every random
// draw is keyed by (master_seed, step, task, rollout), so a resumed run
// continues the exact stream of the uninterrupted one.
struct TrainState {
  std::uint64_t step = 0;
  PolicyTable policy;
  std::uint64_t master_seed = 0;
  std::vector<MetricsRecord> metrics;
};

struct RunOptions {
  std::uint64_t n_tasks = 16;
  std::uint64_t n_steps = 200;
  TraceStyle oracle_style = TraceStyle::Verbose;
  double oracle_recorded_prob = 1.0;
  double sft_split = 0.5;  // SftThenRl: fraction of steps spent in the SFT stage
  // Invoked after every step (checkpointing hook).
  std::function<void(const TrainState&)> on_step;
};

// Raised when a step produces a non-finite loss; carries a dump of the
// offending batch.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

// Samples cfg.n_on on-policy rollouts per task, attaches cfg.n_off oracle
// traces, and scores every trajectory.
std::vector<RolloutGroup> assemble_groups(const PolicyTable& policy,
                                          const std::vector<TaskInstance>& tasks,
                                          const AlgorithmConfig& cfg, std::uint64_t step_seed,
                                          const std::vector<Trajectory>& oracle_traces);

// One optimization step over the full task batch: rollouts, loss, ascent
// update(s), metrics append. Returns the recorded metrics.
MetricsRecord train_step(TrainState& state, const std::vector<TaskInstance>& tasks,
                         const AlgorithmConfig& cfg, const RunOptions& opts,
                         const std::vector<Trajectory>& oracle_traces);

TrainState run_training(const AlgorithmConfig& cfg, const EnvSpec& env, const RunOptions& opts);

// Continues a run to opts.n_steps; bit-exact with the uninterrupted run.
TrainState resume_training(TrainState state, const AlgorithmConfig& cfg, const EnvSpec& env,
                           const RunOptions& opts);

void save_checkpoint(std::ostream& out, const TrainState& state);
TrainState load_checkpoint(std::istream& in);

// ---- Convergence-bound harness -------------------------------------------

// Finite-sum quadratic bowl J(theta) = (1/n) sum_i -0.5 ||theta - mu_i||^2
// with certified smoothness L = 1, closed-form maximizer mu_bar, and a
// gradient bound sigma valid on a ball the iterates provably never leave.
struct TheoremSpec {
  int n_components = 50;
  int dim = 10;
  std::uint64_t seed = 2024;
  double w_lo = 0.5;
  double w_hi = 2.0;
  int n_seeds = 20;
  double theta0_offset = 5.0;  // ||theta0 - mu_bar||
};

struct TheoremReport {
  std::uint64_t iterations = 0;  // K
  double bound = 0.0;            // sqrt(2 (J* - J0) L w_hi / (K w_lo)) * sigma
  double observed_mean = 0.0;    // mean over seeds of min_k ||grad J(theta_k)||^2
  double observed_stderr = 0.0;
  double step_size = 0.0;  // alpha = c / sqrt(K)
  double c = 0.0;
  double smoothness = 0.0;   // L
  double sigma = 0.0;        // gradient bound
  double delta_j = 0.0;      // J(theta*) - J(theta0)
  bool passed = false;       // observed_mean <= bound + 3 stderr
};

// Runs K iterations of theta += alpha * w * grad J_i(theta) with i uniform
// and w drawn independently (clamped lognormal) in [w_lo, w_hi], across
// spec.n_seeds seeds, and checks the observed stationarity measure against
// the bound.
TheoremReport theorem_harness(const TheoremSpec& spec, std::uint64_t K);

}  // namespace rlvr
