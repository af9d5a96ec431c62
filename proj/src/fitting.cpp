#include "purcellsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "purcellsim/errors.hpp"

namespace purcellsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kFourLn2 = 4.0 * std::log(2.0);

double weighted_chi2(const LmProblem& pr, const std::vector<double>& p, Eigen::VectorXd* r,
                     Eigen::MatrixXd* J) {
  const std::size_t n = pr.x.size(), m = p.size();
  std::vector<double> grad(m);
  double chi2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = pr.sigma.empty() ? 1.0 : 1.0 / pr.sigma[i];
    const double f = pr.model(pr.x[i], p, grad);
    const double ri = (pr.y[i] - f) * w;
    chi2 += ri * ri;
    if (r) (*r)(Eigen::Index(i)) = ri;
    if (J)
      for (std::size_t j = 0; j < m; ++j) (*J)(Eigen::Index(i), Eigen::Index(j)) = grad[j] * w;
  }
  return chi2;
}

void clamp_to(const LmProblem& pr, std::vector<double>& p) {
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::clamp(p[j], pr.lower[j], pr.upper[j]);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Width of the region around index `peak` where |y - base| stays above half
// of the peak excursion, interpolated between samples.
double half_max_width(std::span<const double> x, std::span<const double> y, std::size_t peak,
                      double base) {
  const double half = 0.5 * (y[peak] - base);
  auto cross = [&](std::size_t i, std::size_t j) {
    const double yi = y[i] - base - half, yj = y[j] - base - half;
    const double f = yi == yj ? 0.5 : yi / (yi - yj);
    return x[i] + f * (x[j] - x[i]);
  };
  auto above = [&](std::size_t i) { return (y[i] - base) / (y[peak] - base) > 0.5; };
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && above(lo - 1)) --lo;
  while (hi + 1 < y.size() && above(hi + 1)) ++hi;
  const double left = lo > 0 ? cross(lo - 1, lo) : x[lo];
  const double right = hi + 1 < y.size() ? cross(hi, hi + 1) : x[hi];
  return std::max(right - left, 1e-300);
}

FitResult package(FitModel model, const std::vector<std::string>& names, const LmSolution& s) {
  FitResult r;
  r.model = model;
  for (std::size_t j = 0; j < names.size(); ++j) r.params.push_back({names[j], s.params[j], s.sigma[j]});
  r.residual_norm = std::sqrt(s.chi2);
  r.dof = s.dof;
  r.reduced_chi2 = s.dof > 0 ? s.chi2 / s.dof : 0.0;
  r.iterations = s.iterations;
  r.converged = s.converged && s.finite_covariance;
  r.message = !s.converged ? "iteration limit reached"
              : !s.finite_covariance ? "singular covariance"
                                     : "ok";
  return r;
}

// Flags fits whose shape parameter is not supported by the data. An exact
// fit of flat data has zero uncertainty, hence the floor relative to the
// data scale.
void require_significant(FitResult& r, const std::string& amplitude, std::span<const double> y) {
  if (!r.converged) return;
  double scale = 0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  const FitParameter& a = r.get(amplitude);
  if (!(std::abs(a.value) > 3.0 * a.sigma) || !(std::abs(a.value) > 1e-9 * scale)) {
    r.converged = false;
    r.message = "degenerate: amplitude not significant";
  }
}

}  // namespace

const char* fit_model_name(FitModel m) {
  switch (m) {
    case FitModel::exponential: return "exponential";
    case FitModel::lorentzian: return "lorentzian";
    case FitModel::gaussian: return "gaussian";
  }
  return "?";
}

const FitParameter& FitResult::get(const std::string& name) const {
  for (const auto* list : {&params, &derived})
    for (const FitParameter& p : *list)
      if (p.name == name) return p;
  throw ArgumentError("fit result has no parameter '" + name + "'");
}

std::vector<double> Histogram::centers() const {
  std::vector<double> c(counts.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = center(i);
  return c;
}

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins == 0) throw ArgumentError("make_histogram: need hi > lo and bins > 0");
  Histogram h;
  h.lo = lo;
  h.width = (hi - lo) / double(bins);
  h.counts.assign(bins, 0.0);
  for (double v : values) {
    if (!(v >= lo && v < hi)) continue;
    const auto i = std::min(bins - 1, std::size_t((v - lo) / h.width));
    h.counts[i] += 1.0;
  }
  return h;
}

LmSolution levenberg_marquardt(const LmProblem& pr, const LmOptions& opt) {
  const std::size_t n = pr.x.size(), m = pr.initial.size();
  if (pr.y.size() != n || (!pr.sigma.empty() && pr.sigma.size() != n))
    throw ArgumentError("levenberg_marquardt: data size mismatch");
  if (pr.lower.size() != m || pr.upper.size() != m)
    throw ArgumentError("levenberg_marquardt: bounds size mismatch");
  if (n < m) throw ArgumentError("levenberg_marquardt: fewer points than parameters");
  for (double s : pr.sigma)
    if (!(s > 0)) throw ArgumentError("levenberg_marquardt: sigma must be positive");

  LmSolution sol;
  std::vector<double> p = pr.initial;
  clamp_to(pr, p);
  Eigen::VectorXd r(n);
  Eigen::MatrixXd J(n, m);
  double chi2 = weighted_chi2(pr, p, &r, &J);
  double lambda = 1e-3;
  Eigen::MatrixXd JtJ = J.transpose() * J;
  Eigen::VectorXd g = J.transpose() * r;

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    bool accepted = false;
    bool small_step = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd A = JtJ;
      for (std::size_t j = 0; j < m; ++j) {
        const double d = std::max(JtJ(Eigen::Index(j), Eigen::Index(j)), 1e-30);
        A(Eigen::Index(j), Eigen::Index(j)) += lambda * d;
      }
      const Eigen::VectorXd delta = A.ldlt().solve(g);
      std::vector<double> trial(m);
      double step_norm = 0, p_norm = 0;
      for (std::size_t j = 0; j < m; ++j) {
        trial[j] = std::clamp(p[j] + delta(Eigen::Index(j)), pr.lower[j], pr.upper[j]);
        step_norm += (trial[j] - p[j]) * (trial[j] - p[j]);
        p_norm += p[j] * p[j];
      }
      small_step = std::sqrt(step_norm) <= opt.rel_step * (std::sqrt(p_norm) + opt.rel_step);
      const double trial_chi2 = weighted_chi2(pr, trial, nullptr, nullptr);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        const double old = chi2;
        p = trial;
        chi2 = weighted_chi2(pr, p, &r, &J);
        JtJ = J.transpose() * J;
        g = J.transpose() * r;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (old - chi2 <= 1e-15 * old) small_step = true;
        break;
      }
      if (small_step) break;
      lambda *= 10.0;
    }
    if (!accepted || small_step) {
      sol.converged = true;
      break;
    }
  }
  sol.params = p;
  sol.chi2 = chi2;
  sol.iterations = it;
  sol.dof = int(n) - int(m);
  sol.sigma.assign(m, kInf);

  // Covariance over the parameters that are not pinned to a bound.
  std::vector<Eigen::Index> freeidx;
  for (std::size_t j = 0; j < m; ++j) {
    const bool pinned = (p[j] <= pr.lower[j] || p[j] >= pr.upper[j]) && g(Eigen::Index(j)) != 0;
    if (!pinned) freeidx.push_back(Eigen::Index(j));
  }
  // Inverted with unit-diagonal scaling; parameters differ by many decades.
  const Eigen::Index nf = Eigen::Index(freeidx.size());
  Eigen::VectorXd d(nf);
  for (Eigen::Index a = 0; a < nf; ++a) d(a) = std::sqrt(std::max(JtJ(freeidx[a], freeidx[a]), 1e-300));
  Eigen::MatrixXd F(nf, nf);
  for (Eigen::Index a = 0; a < nf; ++a)
    for (Eigen::Index b = 0; b < nf; ++b) F(a, b) = JtJ(freeidx[a], freeidx[b]) / (d(a) * d(b));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(F);
  if (lu.isInvertible() && freeidx.size() == m) {
    const Eigen::MatrixXd cov = d.cwiseInverse().asDiagonal() * lu.inverse() * d.cwiseInverse().asDiagonal();
    const double scale = sol.dof > 0 ? std::max(chi2 / sol.dof, 0.0) : 1.0;
    sol.finite_covariance = true;
    for (std::size_t a = 0; a < m; ++a) {
      const double v = cov(Eigen::Index(a), Eigen::Index(a)) * scale;
      sol.sigma[a] = v >= 0 ? std::sqrt(v) : kInf;
      if (!std::isfinite(sol.sigma[a])) sol.finite_covariance = false;
    }
  }
  return sol;
}

FitResult fit_exponential(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma, const LmOptions& opt) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ArgumentError("fit_exponential: size mismatch");
  std::size_t nonempty = 0;
  for (double v : y) nonempty += v != 0;
  if (nonempty < 3) throw ArgumentError("fit_exponential: need at least 3 nonempty bins");

  const double span_x = x[n - 1] - x[0];
  const double c0 = std::max(0.0, *std::min_element(y.begin(), y.end()));
  const double a0 = std::max(y[0] - c0, 1e-12);
  // Time to fall below 1/e of the initial excursion.
  double t0 = span_x / 3.0;
  for (std::size_t i = 1; i < n; ++i) {
    if (y[i] - c0 <= a0 / std::exp(1.0)) {
      t0 = std::max(x[i] - x[0], span_x / double(n));
      break;
    }
  }
  const double ymax = *std::max_element(y.begin(), y.end());
  const double t_hi = 1e3 * span_x;
  const double x0 = x[0];

  LmProblem pr;
  pr.x = x;
  pr.y = y;
  pr.sigma = sigma;
  pr.initial = {a0, t0, c0};
  pr.lower = {-10.0 * std::abs(ymax) - 1.0, span_x * 1e-4, -std::abs(ymax) - 1.0};
  pr.upper = {10.0 * std::abs(ymax) + 1.0, t_hi, 10.0 * std::abs(ymax) + 1.0};
  // Amplitude is referenced to the first abscissa to keep it well scaled.
  pr.model = [x0](double t, std::span<const double> p, std::span<double> grad) {
    const double e = std::exp(-(t - x0) / p[1]);
    grad[0] = e;
    grad[1] = p[0] * e * (t - x0) / (p[1] * p[1]);
    grad[2] = 1.0;
    return p[0] * e + p[2];
  };
  const LmSolution s = levenberg_marquardt(pr, opt);
  FitResult r = package(FitModel::exponential, {"amplitude", "lifetime", "offset"}, s);
  if (r.converged && s.params[1] >= 0.999 * t_hi) {
    r.converged = false;
    r.message = "degenerate: lifetime at its upper bound";
  }
  require_significant(r, "amplitude", y);
  return r;
}

FitResult fit_exponential(const Histogram& h, const LmOptions& opt) {
  const std::vector<double> x = h.centers();
  std::vector<double> sigma(h.counts.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::sqrt(std::max(h.counts[i], 1.0));
  FitResult r = fit_exponential(x, h.counts, sigma, opt);
  // Second pass weighted by the fitted mean instead of the observed counts,
  // which removes the low bias of count-weighted fits.
  if (!r.converged) return r;
  const double a = r.value("amplitude"), t = r.value("lifetime"), c = r.value("offset");
  for (std::size_t i = 0; i < sigma.size(); ++i)
    sigma[i] = std::sqrt(std::max(a * std::exp(-(x[i] - x[0]) / t) + c, 1.0));
  return fit_exponential(x, h.counts, sigma, opt);
}

FitResult fit_lifetime(std::span<const double> times, double window, double t_guess,
                       std::size_t bins, const LmOptions& opt) {
  if (!(window > 0)) throw ArgumentError("fit_lifetime: window must be positive");
  if (!(t_guess > 0)) {
    double sum = 0;
    std::size_t k = 0;
    for (double t : times)
      if (t >= 0 && t < window) {
        sum += t;
        ++k;
      }
    if (k == 0) throw ArgumentError("fit_lifetime: no times inside the window");
    t_guess = sum / double(k);
  }
  const double hi = std::min(5.0 * t_guess, window);
  return fit_exponential(make_histogram(times, 0.0, hi, bins), opt);
}

FitResult fit_lorentzian(std::span<const double> det, std::span<const double> value,
                         double carrier_hz, std::span<const double> sigma, const LmOptions& opt) {
  const std::size_t n = det.size();
  if (n != value.size()) throw ArgumentError("fit_lorentzian: size mismatch");
  if (n < 5) throw ArgumentError("fit_lorentzian: need at least 5 points");
  const std::vector<double> v(value.begin(), value.end());
  const double base = median(v);
  const std::size_t imin = std::size_t(std::min_element(value.begin(), value.end()) - value.begin());
  const double depth0 = std::max(base - value[imin], 1e-12 * std::abs(base) + 1e-300);
  const double span_x = det[n - 1] - det[0];
  double w0 = half_max_width(det, value, imin, base);
  if (!(w0 > 0) || w0 > span_x) w0 = span_x / 4.0;
  const double scale = std::max(std::abs(base), depth0);

  LmProblem pr;
  pr.x = det;
  pr.y = value;
  pr.sigma = sigma;
  pr.initial = {det[imin], w0, depth0, base};
  pr.lower = {det[0], span_x * 1e-6, -10.0 * scale, -10.0 * scale};
  pr.upper = {det[n - 1], 10.0 * span_x, 10.0 * scale, 10.0 * scale};
  pr.model = [](double x, std::span<const double> p, std::span<double> grad) {
    const double u = 2.0 * (x - p[0]) / p[1];
    const double d = 1.0 + u * u;
    const double L = 1.0 / d;
    // f = B - A L ; dL/du = -2u/d^2
    const double dLdu = -2.0 * u / (d * d);
    grad[0] = -p[2] * dLdu * (-2.0 / p[1]);
    grad[1] = -p[2] * dLdu * (-u / p[1]);
    grad[2] = -L;
    grad[3] = 1.0;
    return p[3] - p[2] * L;
  };
  const LmSolution s = levenberg_marquardt(pr, opt);
  FitResult r = package(FitModel::lorentzian, {"center_hz", "fwhm_hz", "amplitude", "baseline"}, s);
  const double nu = carrier_hz + s.params[0];
  const double w = s.params[1];
  const double q = nu / w;
  const double q_sigma = q * std::hypot(s.sigma[1] / w, s.sigma[0] / nu);
  r.derived.push_back({"q_factor", q, q_sigma});
  const double depth = s.params[2] / s.params[3];
  r.derived.push_back({"depth", depth,
                       std::abs(depth) * std::hypot(s.sigma[2] / s.params[2], s.sigma[3] / s.params[3])});
  require_significant(r, "amplitude", value);
  return r;
}

FitResult fit_gaussian(std::span<const double> x, std::span<const double> value,
                       std::span<const double> sigma, const LmOptions& opt) {
  const std::size_t n = x.size();
  if (n != value.size()) throw ArgumentError("fit_gaussian: size mismatch");
  if (n < 5) throw ArgumentError("fit_gaussian: need at least 5 points");
  const double base = std::min(*std::min_element(value.begin(), value.end()), value[0]);
  const std::size_t imax = std::size_t(std::max_element(value.begin(), value.end()) - value.begin());
  const double amp0 = std::max(value[imax] - base, 1e-300);
  const double span_x = x[n - 1] - x[0];
  double w0 = half_max_width(x, value, imax, base);
  if (!(w0 > 0) || w0 > 2 * span_x) w0 = span_x / 4.0;
  const double scale = std::max(std::abs(value[imax]), amp0);

  LmProblem pr;
  pr.x = x;
  pr.y = value;
  pr.sigma = sigma;
  pr.initial = {x[imax], w0, amp0, base};
  pr.lower = {x[0], span_x * 1e-6, -10.0 * scale, -10.0 * scale};
  pr.upper = {x[n - 1], 10.0 * span_x, 10.0 * scale, 10.0 * scale};
  pr.model = [](double t, std::span<const double> p, std::span<double> grad) {
    const double u = (t - p[0]) / p[1];
    const double e = std::exp(-kFourLn2 * u * u);
    grad[0] = p[2] * e * 2.0 * kFourLn2 * u / p[1];
    grad[1] = p[2] * e * 2.0 * kFourLn2 * u * u / p[1];
    grad[2] = e;
    grad[3] = 1.0;
    return p[2] * e + p[3];
  };
  const LmSolution s = levenberg_marquardt(pr, opt);
  FitResult r = package(FitModel::gaussian, {"center", "fwhm", "amplitude", "baseline"}, s);
  require_significant(r, "amplitude", value);
  return r;
}

}  // namespace purcellsim
