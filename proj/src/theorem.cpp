#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rlvr/rng.hpp"
#include "rlvr/trainer.hpp"

namespace rlvr {
namespace {

struct QuadraticBowl {
  int n = 0, d = 0;
  std::vector<double> mu;      // n x d component centers
  std::vector<double> mu_bar;  // maximizer of J
  double r_mu = 0.0;           // max_i ||mu_i - mu_bar||

  const double* center(int i) const { return mu.data() + static_cast<std::size_t>(i) * d; }

  static QuadraticBowl build(int n, int d, std::uint64_t seed) {
    QuadraticBowl q;
    q.n = n;
    q.d = d;
    q.mu.resize(static_cast<std::size_t>(n) * d);
    Rng rng(mix_seed(seed, 0xB0711));
    for (auto& v : q.mu) v = rng.normal();
    q.mu_bar.assign(d, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) q.mu_bar[k] += q.center(i)[k] / n;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = q.center(i)[k] - q.mu_bar[k];
        s += diff * diff;
      }
      q.r_mu = std::max(q.r_mu, std::sqrt(s));
    }
    return q;
  }
};

}  // namespace

TheoremReport theorem_harness(const TheoremSpec& spec, std::uint64_t K) {
  if (K < 1) throw std::invalid_argument("theorem_harness: K must be >= 1");
  if (!(spec.w_lo > 0.0) || spec.w_lo > spec.w_hi)
    throw std::invalid_argument("theorem_harness: need 0 < w_lo <= w_hi");
  if (spec.n_seeds < 1) throw std::invalid_argument("theorem_harness: need at least one seed");

  const auto q = QuadraticBowl::build(spec.n_components, spec.dim, spec.seed);

  // theta0 sits at a known distance from the maximizer, so
  // J(theta*) - J(theta0) = offset^2 / 2 exactly.
  std::vector<double> theta0 = q.mu_bar;
  theta0[0] += spec.theta0_offset;
  const double delta_j = 0.5 * spec.theta0_offset * spec.theta0_offset;

  // grad J_i(theta) = mu_i - theta, so L = 1, and on the invariant ball
  // around mu_bar of radius max(offset, r_mu) the component gradients are
  // bounded by r_mu + that radius. The ball is invariant because the update
  // is a convex mix of theta and mu_i whenever alpha * w <= 1.
  const double smoothness = 1.0;
  const double radius = std::max(spec.theta0_offset, q.r_mu);
  const double sigma = q.r_mu + radius;

  const double c =
      std::sqrt(2.0 * delta_j / (smoothness * sigma * sigma * spec.w_lo * spec.w_hi));
  const double alpha = c / std::sqrt(static_cast<double>(K));
  if (alpha * spec.w_hi > 1.0)
    throw std::invalid_argument("theorem_harness: alpha*w_hi > 1 breaks the invariant-ball bound; increase K");

  const double bound =
      std::sqrt(2.0 * delta_j * smoothness * spec.w_hi / (static_cast<double>(K) * spec.w_lo)) *
      sigma;

  std::vector<double> mins;
  mins.reserve(spec.n_seeds);
  std::vector<double> theta(q.d);
  for (int s = 0; s < spec.n_seeds; ++s) {
    Rng rng(mix_seed(spec.seed, 0x5eed5, static_cast<std::uint64_t>(s)));
    theta = theta0;
    double min_grad_sq = std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k < K; ++k) {
      double grad_sq = 0.0;
      for (int j = 0; j < q.d; ++j) {
        const double g = q.mu_bar[j] - theta[j];
        grad_sq += g * g;
      }
      min_grad_sq = std::min(min_grad_sq, grad_sq);
      const auto i = static_cast<int>(rng.below(static_cast<std::uint64_t>(q.n)));
      const double w =
          std::clamp(std::exp(0.25 * rng.normal()), spec.w_lo, spec.w_hi);
      const double* mu_i = q.center(i);
      for (int j = 0; j < q.d; ++j) theta[j] += alpha * w * (mu_i[j] - theta[j]);
    }
    mins.push_back(min_grad_sq);
  }

  TheoremReport rep;
  rep.iterations = K;
  rep.bound = bound;
  rep.step_size = alpha;
  rep.c = c;
  rep.smoothness = smoothness;
  rep.sigma = sigma;
  rep.delta_j = delta_j;
  double mean = 0.0;
  for (double m : mins) mean += m;
  mean /= static_cast<double>(mins.size());
  double var = 0.0;
  for (double m : mins) var += (m - mean) * (m - mean);
  var = mins.size() > 1 ? var / static_cast<double>(mins.size() - 1) : 0.0;
  rep.observed_mean = mean;
  rep.observed_stderr = std::sqrt(var / static_cast<double>(mins.size()));
  rep.passed = rep.observed_mean <= rep.bound + 3.0 * rep.observed_stderr;
  return rep;
}

}  // namespace rlvr
