#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rlvr {

// One training step's diagnostics.
struct MetricsRecord {
  std::uint64_t step = 0;
  double mean_reward_on = 0.0;     // mean reward of on-policy rollouts
  double mean_reward_group = 0.0;  // mean reward over all group members
  double entropy = 0.0;            // batch mean policy entropy (pre-update)
  double grad_norm = 0.0;          // L2 norm of the applied gradient
  double clip_fraction_on = 0.0;
  double mean_off_ratio = 0.0;
  double loss = 0.0;  // objective value (maximized)
};

inline constexpr const char* kMetricsCsvHeader =
    "step,mean_reward_on,mean_reward_group,entropy,grad_norm,clip_fraction_on,mean_off_ratio,loss";

double metrics_field(const MetricsRecord& rec, std::string_view field);

// Centered moving average with truncated windows at the endpoints.
std::vector<std::pair<std::uint64_t, double>> curve(std::span<const MetricsRecord> series,
                                                    std::string_view field, int window);

struct RunSummary {
  std::string label;
  int n_series = 0;
  double final_window_reward = 0.0;  // last 10% of steps, median across series
  double peak_reward = 0.0;
  double auc = 0.0;  // mean reward over all steps
  double final_entropy = 0.0;
};

// Per-label medians across the series sharing that label. Series of unequal
// length are trimmed to the shortest with a warning on `warnings`.
std::vector<RunSummary> compare_runs(
    const std::vector<std::pair<std::string, std::vector<MetricsRecord>>>& runs,
    std::ostream* warnings = nullptr);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> series);
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

double median(std::vector<double> values);
double final_window_mean_reward(std::span<const MetricsRecord> series);

}  // namespace rlvr
