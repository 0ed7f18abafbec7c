#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rlvr/objective.hpp"
#include "rlvr/policy.hpp"

namespace rlvr {

// ---- Finite-difference gradient oracle ------------------------------------
//
// Central differences over every logit, compared against the analytic
// gradient with the mixed error metric |a - f| / max(1, |a|, |f|), which
// treats near-zero entries absolutely (the objective is O(1), so difference
// noise stays far below any meaningful tolerance).

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::uint32_t worst_state = 0;
  std::uint32_t worst_token = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

GradCheckResult finite_difference_check(const PolicyTable& policy,
                                        const std::function<LossReport(const PolicyTable&)>& loss,
                                        double step = 1e-5);

// ---- Verification suites ---------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

// Randomized gradient exactness for every loss (50 instances per loss,
// states <= 10, vocab <= 6, lengths <= 5, mixed groups 1 off + 3 on).
SuiteReport verify_gradients(std::uint64_t seed, int instances_per_loss = 50,
                             double tolerance = 1e-5);

// Advantage normalization properties over 10^4 random reward vectors plus the
// frozen [1,0,0,0] case.
SuiteReport verify_advantages(std::uint64_t seed);

// Monte-Carlo vs closed-form variance at gamma in {0.05, 0.1, 0.3, 0.5} with
// 10^6 samples; also fills `reports` for CSV export when non-null.
SuiteReport verify_variance(std::uint64_t seed, std::vector<struct VarianceReport>* reports = nullptr);

// Convergence bound at K in {100, 400, 1600} plus the exact halving law.
SuiteReport verify_theorem(std::uint64_t seed);

// Per-logit gradient bound over n random (policy, trace, advantage) draws,
// linear and shaped.
SuiteReport verify_gradient_bound(std::uint64_t seed, int n_pairs = 1000);

}  // namespace rlvr
