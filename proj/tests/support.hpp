#pragma once

// Independent oracles shared by the test binaries. Nothing here calls into
// the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Adaptive Simpson quadrature to an absolute tolerance.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12,
                               int depth = 50) {
  auto rule = [](double fa, double fm, double fb, double h) { return h / 6 * (fa + 4 * fm + fb); };
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = rule(flo, flm, fmid, mid - lo), right = rule(fmid, frm, fhi, hi - mid);
        if (d <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
        return rec(lo, mid, flo, flm, fmid, left, eps / 2, d - 1) + rec(mid, hi, fmid, frm, fhi, right, eps / 2, d - 1);
      };
  if (!(b > a)) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, rule(fa, fm, fb, b - a), tol, depth);
}

// One-sample Kolmogorov-Smirnov statistic. Samples beyond the support are
// passed as +inf and count toward the empirical mass at infinity.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) break;
    const double f = cdf(x[i]);
    d = std::max({d, std::abs(f - double(i) / n), std::abs(double(i + 1) / n - f)});
  }
  return d;
}

// Two-sample KS statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

// Lewis-Shedler thinning for a hazard bounded by rate_max on [t0, t1).
// Returns +inf when no event occurs before t1.
template <typename Rng>
double thinning_sample(const std::function<double(double)>& rate, double rate_max, double t0,
                       double t1, Rng& rng) {
  std::exponential_distribution<double> gap(rate_max);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double t = t0;
  for (;;) {
    t += gap(rng);
    if (t >= t1) return INFINITY;
    if (u(rng) * rate_max <= rate(t)) return t;
  }
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

inline double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(s / double(v.size() - 1)) : 0.0;
}

// Upper-tail probability of a chi-square variable with k degrees of
// freedom (Wilson-Hilferty approximation, adequate for k >= 10).
inline double chi2_upper_tail(double chi2, double k) {
  const double z = (std::cbrt(chi2 / k) - (1.0 - 2.0 / (9.0 * k))) / std::sqrt(2.0 / (9.0 * k));
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

inline std::string temp_dir(const std::string& tag) {
  return "/tmp/purcellsim-test-" + tag + "-" + std::to_string(std::random_device{}());
}

}  // namespace testsupport
