#include "rlvr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rlvr {

double metrics_field(const MetricsRecord& rec, std::string_view field) {
  if (field == "mean_reward_on") return rec.mean_reward_on;
  if (field == "mean_reward_group") return rec.mean_reward_group;
  if (field == "entropy") return rec.entropy;
  if (field == "grad_norm") return rec.grad_norm;
  if (field == "clip_fraction_on") return rec.clip_fraction_on;
  if (field == "mean_off_ratio") return rec.mean_off_ratio;
  if (field == "loss") return rec.loss;
  throw std::invalid_argument("unknown metrics field: " + std::string(field));
}

std::vector<std::pair<std::uint64_t, double>> curve(std::span<const MetricsRecord> series,
                                                    std::string_view field, int window) {
  if (window < 1) throw std::invalid_argument("curve: window must be >= 1");
  std::vector<std::pair<std::uint64_t, double>> out;
  out.reserve(series.size());
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t back = (window - 1) / 2, fwd = window / 2;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - back);
    const std::ptrdiff_t hi = std::min(n - 1, i + fwd);
    double sum = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) sum += metrics_field(series[k], field);
    out.emplace_back(series[i].step, sum / static_cast<double>(hi - lo + 1));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double final_window_mean_reward(std::span<const MetricsRecord> series) {
  if (series.empty()) throw std::invalid_argument("final window of empty series");
  const std::size_t w = std::max<std::size_t>(1, (series.size() + 9) / 10);
  double sum = 0.0;
  for (std::size_t i = series.size() - w; i < series.size(); ++i) sum += series[i].mean_reward_on;
  return sum / static_cast<double>(w);
}

std::vector<RunSummary> compare_runs(
    const std::vector<std::pair<std::string, std::vector<MetricsRecord>>>& runs,
    std::ostream* warnings) {
  if (runs.size() < 2) throw std::invalid_argument("compare_runs: need at least 2 runs");
  std::size_t shortest = runs.front().second.size();
  bool mismatch = false;
  for (const auto& [label, series] : runs) {
    if (series.empty()) throw std::invalid_argument("compare_runs: empty series for " + label);
    if (series.size() != runs.front().second.size()) mismatch = true;
    shortest = std::min(shortest, series.size());
  }
  if (mismatch && warnings)
    *warnings << "warning: step counts differ; trimming all series to " << shortest << " steps\n";

  std::vector<std::string> order;
  std::map<std::string, std::vector<const std::vector<MetricsRecord>*>> by_label;
  for (const auto& [label, series] : runs) {
    if (!by_label.count(label)) order.push_back(label);
    by_label[label].push_back(&series);
  }

  std::vector<RunSummary> rows;
  for (const auto& label : order) {
    std::vector<double> fin, peak, auc, ent;
    for (const auto* series_ptr : by_label[label]) {
      std::span<const MetricsRecord> s{series_ptr->data(), shortest};
      fin.push_back(final_window_mean_reward(s));
      double mx = 0.0, sum = 0.0;
      for (const auto& rec : s) {
        mx = std::max(mx, rec.mean_reward_on);
        sum += rec.mean_reward_on;
      }
      peak.push_back(mx);
      auc.push_back(sum / static_cast<double>(s.size()));
      ent.push_back(s.back().entropy);
    }
    RunSummary row;
    row.label = label;
    row.n_series = static_cast<int>(fin.size());
    row.final_window_reward = median(fin);
    row.peak_reward = median(peak);
    row.auc = median(auc);
    row.final_entropy = median(ent);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> series) {
  out << kMetricsCsvHeader << '\n';
  char buf[512];
  for (const auto& r : series) {
    std::snprintf(buf, sizeof buf, "%llu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  static_cast<unsigned long long>(r.step), r.mean_reward_on, r.mean_reward_group,
                  r.entropy, r.grad_norm, r.clip_fraction_on, r.mean_off_ratio, r.loss);
    out << buf;
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader)
    throw std::runtime_error("metrics csv: bad or missing header");
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r;
    unsigned long long step = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &step, &r.mean_reward_on,
                    &r.mean_reward_group, &r.entropy, &r.grad_norm, &r.clip_fraction_on,
                    &r.mean_off_ratio, &r.loss) != 8)
      throw std::runtime_error("metrics csv: malformed row '" + line + "'");
    r.step = step;
    out.push_back(r);
  }
  return out;
}

}  // namespace rlvr
