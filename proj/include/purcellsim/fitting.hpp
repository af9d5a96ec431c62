#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace purcellsim {

enum class FitModel { exponential, lorentzian, gaussian };

const char* fit_model_name(FitModel m);

struct FitParameter {
  std::string name;
  double value = 0;
  double sigma = 0;
};

struct FitResult {
  FitModel model = FitModel::exponential;
  std::vector<FitParameter> params;
  std::vector<FitParameter> derived;  // Q, lifetime in other units, ...
  double residual_norm = 0;           // sqrt of the weighted sum of squares
  double reduced_chi2 = 0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;
  std::string message;

  // Looks up a fitted or derived quantity; ArgumentError if absent.
  const FitParameter& get(const std::string& name) const;
  double value(const std::string& name) const { return get(name).value; }
};

struct Histogram {
  double lo = 0;
  double width = 0;
  std::vector<double> counts;

  double center(std::size_t i) const { return lo + (double(i) + 0.5) * width; }
  std::vector<double> centers() const;
};

// Uniform bins over [lo, hi); values outside are dropped.
Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

struct LmOptions {
  double rel_step = 1e-10;
  int max_iterations = 500;
};

// Model value at x and its gradient with respect to the parameters.
using ModelFn = std::function<double(double x, std::span<const double> p, std::span<double> grad)>;

struct LmProblem {
  std::span<const double> x, y, sigma;  // sigma empty = unit weights
  std::vector<double> initial, lower, upper;
  ModelFn model;
};

struct LmSolution {
  std::vector<double> params;
  std::vector<double> sigma;  // from the covariance scaled by the reduced chi^2
  double chi2 = 0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;
  bool finite_covariance = false;
};

// Bounded Levenberg-Marquardt: steps are projected onto the box and the
// damping is scaled by the diagonal of JᵀJ.
LmSolution levenberg_marquardt(const LmProblem& problem, const LmOptions& opt = {});

// A·exp(-t/T) + C over histogram bin centers with Poisson weights. A result
// whose amplitude is not significant, or whose lifetime sits on its upper
// bound, is flagged as not converged.
FitResult fit_exponential(const Histogram& h, const LmOptions& opt = {});
// Same model for arbitrary (x, y, σ) data.
FitResult fit_exponential(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma, const LmOptions& opt = {});

// Decay times (relative to the start of the fit window) histogrammed into
// `bins` bins over [0, min(5·T_guess, window)] and fitted. A nonpositive
// guess is taken from the sample mean.
FitResult fit_lifetime(std::span<const double> times, double window, double t_guess = 0,
                       std::size_t bins = 100, const LmOptions& opt = {});

// Reflection dip B - A/(1 + (2(x - x0)/w)^2) versus detuning from
// carrier_hz; reports Q = (carrier + x0)/w and depth = A/B.
FitResult fit_lorentzian(std::span<const double> detuning_hz, std::span<const double> value,
                         double carrier_hz, std::span<const double> sigma = {},
                         const LmOptions& opt = {});

// A·exp(-4 ln2 (x - x0)^2 / w^2) + C with w the FWHM.
FitResult fit_gaussian(std::span<const double> x, std::span<const double> value,
                       std::span<const double> sigma = {}, const LmOptions& opt = {});

}  // namespace purcellsim
