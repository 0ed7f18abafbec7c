#include "rlvr/variance.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "rlvr/rng.hpp"

namespace rlvr {

double taylor_variance_factor(double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("taylor_variance_factor: gamma must lie in (0,1]");
  const double s = gamma / ((1.0 + gamma) * (1.0 + gamma));
  return s * s;
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa, double m, double fm,
               double b, double fb) {
  (void)m;
  (void)f;
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double fa, double m,
                        double fm, double b, double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, lm, flm, m, fm);
  const double right = simpson(f, m, fm, rm, frm, b, fb);
  const double delta = left + right - whole;
  // Terminate on the requested tolerance, a relative floor near machine
  // precision, or a hard depth cap.
  if (depth <= 0 || std::abs(delta) <= 15.0 * std::max(tol, 1e-14 * std::abs(left + right)))
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

double integrate01(const std::function<double(double)>& f, double abs_tol) {
  const double a = 0.0, b = 1.0, m = 0.5;
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = simpson(f, a, fa, m, fm, b, fb);
  return adaptive_simpson(f, a, fa, m, fm, b, fb, whole, abs_tol, 48);
}

}  // namespace

double exponential_integral(int order, double gamma, double abs_tol) {
  if (order != 1 && order != 3)
    throw std::invalid_argument("exponential_integral: order must be 1 or 3");
  if (!(gamma > 0.0))
    throw std::invalid_argument("exponential_integral: gamma must be > 0 (integral diverges at 0)");
  if (!(abs_tol > 0.0)) throw std::invalid_argument("exponential_integral: bad tolerance");

  // u = gamma + t/(1-t) maps [0,1) onto [gamma, inf); du = dt/(1-t)^2.
  auto integrand = [order, gamma](double t) {
    if (t >= 1.0) return 0.0;
    const double one_minus = 1.0 - t;
    const double u = gamma + t / one_minus;
    if (u > 745.0) return 0.0;  // exp underflow region
    double un = u;
    if (order == 3) un = u * u * u;
    return std::exp(-u) / (un * one_minus * one_minus);
  };
  return integrate01(integrand, abs_tol);
}

double closed_form_variance(double gamma) {
  if (!(gamma > 0.0) || gamma >= 1.0)
    throw std::invalid_argument("closed_form_variance: gamma must lie in (0,1)");
  const double e1 = exponential_integral(1, gamma);
  const double e3 = exponential_integral(3, gamma);
  const double g2 = gamma * gamma;
  return 1.0 - 2.0 * g2 * std::exp(gamma) * e3 - g2 * std::exp(2.0 * gamma) * e1 * e1;
}

double shaped_mean_closed_form(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("shaped_mean_closed_form: gamma must be > 0");
  return 1.0 - gamma * std::exp(gamma) * exponential_integral(1, gamma);
}

VarianceReport monte_carlo_variance(double gamma, std::uint64_t n_samples, std::uint64_t seed,
                                    int n_batches) {
  if (n_samples < 10000)
    throw std::invalid_argument("monte_carlo_variance: need at least 1e4 samples");
  if (n_batches < 2) throw std::invalid_argument("monte_carlo_variance: need at least 2 batches");
  if (!(gamma > 0.0)) throw std::invalid_argument("monte_carlo_variance: gamma must be > 0");

  const std::uint64_t per_batch = n_samples / static_cast<std::uint64_t>(n_batches);
  const auto b_count = static_cast<std::uint64_t>(n_batches);

  std::vector<double> var_raw(b_count), var_shaped(b_count), mean_shaped(b_count);
  for (std::uint64_t b = 0; b < b_count; ++b) {
    Rng rng(mix_seed(seed, 0x7a71a9ce, b));
    double sx = 0.0, sx2 = 0.0, sf = 0.0, sf2 = 0.0;
    for (std::uint64_t i = 0; i < per_batch; ++i) {
      const double x = rng.exponential();
      const double fx = x / (x + gamma);
      sx += x;
      sx2 += x * x;
      sf += fx;
      sf2 += fx * fx;
    }
    const double m = static_cast<double>(per_batch);
    var_raw[b] = (sx2 - sx * sx / m) / (m - 1.0);
    var_shaped[b] = (sf2 - sf * sf / m) / (m - 1.0);
    mean_shaped[b] = sf / m;
  }

  auto pool = [&](const std::vector<double>& v, double& mean, double& stderr_out) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - mean) * (x - mean);
    s2 /= static_cast<double>(v.size() - 1);
    stderr_out = std::sqrt(s2 / static_cast<double>(v.size()));
  };

  VarianceReport rep;
  rep.gamma = gamma;
  rep.sample_count = per_batch * b_count;
  pool(var_raw, rep.mc_var_raw, rep.mc_stderr_raw);
  pool(var_shaped, rep.mc_var_shaped, rep.mc_stderr_shaped);
  pool(mean_shaped, rep.mc_mean_shaped, rep.mc_stderr_mean_shaped);
  rep.taylor_factor = taylor_variance_factor(gamma);
  rep.closed_form_var = gamma < 1.0 ? closed_form_variance(gamma) : 0.0;
  return rep;
}

void write_variance_csv(std::ostream& out, std::span<const VarianceReport> reports) {
  out << "gamma,mc_var_raw,mc_var_shaped,stderr,taylor_prediction,closed_form,samples\n";
  char buf[320];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%llu\n", r.gamma,
                  r.mc_var_raw, r.mc_var_shaped, r.mc_stderr_shaped, r.taylor_factor,
                  r.closed_form_var, static_cast<unsigned long long>(r.sample_count));
    out << buf;
  }
}

}  // namespace rlvr
