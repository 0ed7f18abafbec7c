// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs everything from scratch; no state is shared between criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rlvr/commands.hpp"
#include "rlvr/rng.hpp"
#include "rlvr/config.hpp"
#include "rlvr/diagnostics.hpp"
#include "rlvr/trainer.hpp"
#include "rlvr/variance.hpp"
#include "rlvr/verify.hpp"

using namespace rlvr;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_index = 0;

void report(const std::string& name, bool passed, const std::string& detail, double seconds) {
  ++g_index;
  if (!passed) ++g_failures;
  std::printf("[%d/9] %-28s %s  (%s; %.1fs)\n", g_index, name.c_str(),
              passed ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
}

template <typename Fn>
void criterion(const std::string& name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool passed = false;
  try {
    passed = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(name, passed, detail, secs);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// Median final-window (last 10%) on-policy reward across seeds.
double median_final_window(Algorithm algo, const EnvSpec& env, std::uint64_t n_tasks,
                           std::uint64_t n_steps, double lr, std::uint64_t seed_base,
                           int n_seeds, std::vector<TrainState>* states = nullptr) {
  std::vector<double> finals;
  for (int s = 0; s < n_seeds; ++s) {
    auto cfg = AlgorithmConfig::defaults_for(algo);
    cfg.learning_rate.value = lr;
    cfg.seed = seed_base + static_cast<std::uint64_t>(s);
    RunOptions opts;
    opts.n_tasks = n_tasks;
    opts.n_steps = n_steps;
    auto state = run_training(cfg, env, opts);
    finals.push_back(final_window_mean_reward(state.metrics));
    if (states) states->push_back(std::move(state));
  }
  return median(finals);
}

}  // namespace

int main() {
  std::printf("acceptance suite: exact-math verification plus training-dynamics reproduction\n");

  // 1. Gradient exactness for all four losses on randomized instances.
  criterion("gradient-exactness", [](std::string& detail) {
    const auto rep = verify_gradients(/*seed=*/20250601, /*instances_per_loss=*/50,
                                      /*tolerance=*/1e-5);
    double worst = 0.0;
    for (const auto& c : rep.checks) {
      const auto pos = c.detail.find("max_rel_err=");
      if (pos != std::string::npos) worst = std::max(worst, std::stod(c.detail.substr(pos + 12)));
    }
    detail = fmt("50 instances/loss, max rel err %.2e < 1e-5", worst);
    return rep.all_passed();
  });

  // 2. Advantage normalization properties.
  criterion("advantage-properties", [](std::string& detail) {
    bool ok = true;
    Rng rng(999331);
    double worst_mean = 0.0, worst_std = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const auto n = static_cast<std::size_t>(2 + rng.below(15));
      std::vector<double> rewards(n);
      for (bool constant = true; constant;) {
        for (auto& r : rewards) r = static_cast<double>(rng.below(2));
        constant = true;
        for (double r : rewards) constant = constant && r == rewards[0];
      }
      const auto adv = group_advantages(rewards, AdvantageMode::StdNormalized);
      double mean = 0.0, sq = 0.0;
      for (double a : adv.values) {
        mean += a;
        sq += a * a;
      }
      mean /= static_cast<double>(n);
      const double sd = std::sqrt(sq / static_cast<double>(n));
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_std = std::max(worst_std, std::abs(sd - 1.0));
      ok = ok && std::abs(mean) <= 1e-10 && std::abs(sd - 1.0) <= 1e-10;
    }
    const auto froz = group_advantages({1, 0, 0, 0}, AdvantageMode::StdNormalized);
    const double root3 = std::sqrt(3.0);
    double froz_err = std::abs(froz.values[0] - root3);
    for (int i = 1; i < 4; ++i)
      froz_err = std::max(froz_err, std::abs(froz.values[i] + 1.0 / root3));
    ok = ok && froz_err <= 1e-9;
    detail = fmt("1e4 vectors: |mean|<=%.1e, |std-1|<=%.1e; frozen case err %.1e", worst_mean,
                 worst_std, froz_err);
    return ok;
  });

  // 3. Per-logit gradient bound, linear and shaped, 1000 random pairs.
  criterion("per-logit-gradient-bound", [](std::string& detail) {
    const auto rep = verify_gradient_bound(/*seed=*/775533, /*n_pairs=*/1000);
    detail = rep.checks.empty() ? "no checks" : rep.checks[0].detail;
    return rep.all_passed();
  });

  // 4. Shaped-importance-weight variance under Exponential(1), n = 1e6.
  criterion("importance-weight-variance", [](std::string& detail) {
    std::vector<VarianceReport> rows;
    const auto rep = verify_variance(/*seed=*/443221, &rows);
    std::string spread;
    for (const auto& r : rows) spread += fmt(" g=%.2g:%.4f/%.4f", r.gamma, r.mc_var_shaped,
                                             r.closed_form_var);
    detail = "mc/closed per gamma:" + spread;
    return rep.all_passed();
  });

  // 5. Convergence bound on the certified finite-sum objective.
  criterion("convergence-bound", [](std::string& detail) {
    const auto rep = verify_theorem(/*seed=*/20240417);
    std::ostringstream os;
    for (const auto& c : rep.checks) os << ' ' << c.name << (c.passed ? ":ok" : ":FAIL");
    detail = "K in {100,400,1600}, 20 seeds;" + os.str();
    return rep.all_passed();
  });

  // 6. Hard-task contrast: on-policy RL collapses, off-policy guidance learns.
  criterion("hard-lock-contrast", [](std::string& detail) {
    EnvSpec env{EnvFamily::CombinationLock, 16, 6, 0, 5};
    const double grpo_med =
        median_final_window(Algorithm::OnPolicyGRPO, env, 16, 2000, 100.0, 101, 5);
    const double luffy_med =
        median_final_window(Algorithm::Luffy, env, 16, 2000, 100.0, 101, 5);
    detail = fmt("median final-window reward: on-policy %.4f (< 0.01), guided %.3f (> 0.5)",
                 grpo_med, luffy_med);
    return grpo_med < 0.01 && luffy_med > 0.5;
  });

  // 7. Entropy dynamics: linear mixing collapses entropy at least as fast as
  //    shaped mixing, and neither exceeds the uniform-policy start.
  criterion("entropy-dynamics", [](std::string& detail) {
    EnvSpec env{EnvFamily::ModularChain, 4, 4, 0, 7};
    auto final_entropies = [&](Algorithm algo) {
      std::vector<double> out;
      for (int s = 0; s < 5; ++s) {
        auto cfg = AlgorithmConfig::defaults_for(algo);
        cfg.learning_rate.value = 60.0;
        cfg.seed = 301 + static_cast<std::uint64_t>(s);
        RunOptions opts;
        opts.n_tasks = 16;
        opts.n_steps = 500;
        out.push_back(run_training(cfg, env, opts).metrics.back().entropy);
      }
      return out;
    };
    const double mixed_med = median(final_entropies(Algorithm::MixedPolicy));
    const double luffy_med = median(final_entropies(Algorithm::Luffy));
    const double ln_v = std::log(4.0);
    detail = fmt("median final entropy: mixed %.4f <= shaped %.4f <= ln V %.4f", mixed_med,
                 luffy_med, ln_v);
    return mixed_med <= luffy_med && mixed_med <= ln_v + 1e-9 && luffy_med <= ln_v + 1e-9;
  });

  // 8. Ablation ordering on the learnable chain: shaped-noclip >= shaped >=
  //    plain mixed in median final-window reward (ties allowed; a strict
  //    inversion of the outer pair fails).
  criterion("ablation-ordering", [](std::string& detail) {
    // Mid-convergence budget: past it every variant saturates near reward 1
    // and the medians differ only by sampling noise.
    EnvSpec env{EnvFamily::ModularChain, 10, 4, 0, 9};
    const double mixed = median_final_window(Algorithm::MixedPolicy, env, 16, 200, 45.0, 501, 5);
    const double shaped =
        median_final_window(Algorithm::LuffyWithClip, env, 16, 200, 45.0, 501, 5);
    const double noclip = median_final_window(Algorithm::Luffy, env, 16, 200, 45.0, 501, 5);
    detail = fmt("medians: shaped+noclip %.4f >= shaped %.4f >= mixed %.4f", noclip, shaped,
                 mixed);
    const bool outer = noclip >= mixed;
    const bool chain = noclip >= shaped && shaped >= mixed;
    return outer && chain;
  });

  // 9. Determinism: byte-identical reruns and bit-exact checkpoint resume.
  criterion("determinism", [](std::string& detail) {
    const auto dir = fs::temp_directory_path() / "rlvr_lab_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg_path = dir / "exp.cfg";
    std::ofstream(cfg_path) << "env.family = ModularChain\nenv.vocab_size = 6\n"
                               "env.episode_len = 3\nenv.n_tasks = 4\nenv.seed = 2\n"
                               "algorithm.name = Luffy\nalgorithm.learning_rate = 30\n"
                               "algorithm.seed = 50\ntrain.n_steps = 40\ntrain.n_seeds = 2\n";
    std::ostringstream log;
    TrainArgs a;
    a.config_path = cfg_path.string();
    a.out_dir = (dir / "a").string();
    TrainArgs b = a;
    b.out_dir = (dir / "b").string();
    if (cmd_train(a, log) != 0 || cmd_train(b, log) != 0) {
      detail = "train invocation failed";
      return false;
    }
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    bool identical = true;
    for (const char* seed : {"50", "51"}) {
      const auto name = "metrics_seed" + std::string(seed) + ".csv";
      identical = identical && slurp(dir / "a" / name) == slurp(dir / "b" / name) &&
                  !slurp(dir / "a" / name).empty();
    }

    // Checkpoint resume against the uninterrupted run.
    EnvSpec env{EnvFamily::ModularChain, 6, 3, 0, 2};
    auto cfg = AlgorithmConfig::defaults_for(Algorithm::Luffy);
    cfg.learning_rate.value = 30.0;
    cfg.seed = 50;
    RunOptions opts;
    opts.n_tasks = 4;
    opts.n_steps = 40;
    const auto full = run_training(cfg, env, opts);
    RunOptions half = opts;
    half.n_steps = 20;
    auto mid = run_training(cfg, env, half);
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    save_checkpoint(buf, mid);
    const auto resumed = resume_training(load_checkpoint(buf), cfg, env, opts);
    bool bitexact = resumed.metrics.size() == full.metrics.size() &&
                    resumed.policy.logits == full.policy.logits;
    if (bitexact) {
      std::ostringstream ra, rb;
      write_metrics_csv(ra, resumed.metrics);
      write_metrics_csv(rb, full.metrics);
      bitexact = ra.str() == rb.str();
    }
    detail = std::string("rerun CSVs ") + (identical ? "identical" : "DIFFER") +
             "; checkpoint resume " + (bitexact ? "bit-exact" : "DIVERGED");
    return identical && bitexact;
  });

  std::printf("ACCEPTANCE: %d/9 criteria passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
