#include "purcellsim/cavity.hpp"

#include <cmath>
#include <string>

#include "purcellsim/errors.hpp"
#include "purcellsim/units.hpp"

namespace purcellsim {

void CavityModel::validate() const {
  if (!(lambda0_nm > 0)) throw ValidationError("cavity: lambda0_nm must be positive");
  if (!(q_factor > 0)) throw ValidationError("cavity: q_factor must be positive");
  if (!(extinction_db >= 0)) throw ValidationError("cavity: extinction_db must be >= 0");
  if (!(coupling_ratio >= 0 && coupling_ratio <= 1))
    throw ValidationError("cavity: coupling_ratio must lie in [0, 1]");
  if (!(max_voltage_v >= 0)) throw ValidationError("cavity: max_voltage_v must be >= 0");
  if (!(response_exponent > 0))
    throw ValidationError("cavity: response_exponent must be positive");
}

double CavityModel::resonance_hz() const { return units::frequency_of_nm(lambda0_nm); }

double CavityModel::linewidth_hz() const { return resonance_hz() / q_factor; }

double CavityModel::dip_depth() const { return 1.0 - std::pow(10.0, -extinction_db / 10.0); }

double eo_wavelength_shift_pm(const CavityModel& cavity, double volts) {
  if (std::abs(volts) > cavity.max_voltage_v) {
    throw BreakdownError("|" + std::to_string(volts) + " V| exceeds breakdown guard of " +
                         std::to_string(cavity.max_voltage_v) + " V");
  }
  return cavity.tuning_rate_pm_per_v * volts;
}

double eo_detuning(const CavityModel& cavity, double volts) {
  const double dlambda_m = eo_wavelength_shift_pm(cavity, volts) * 1e-12;
  const double lambda_m = cavity.lambda0_nm * units::kNano;
  return -units::kSpeedOfLight / (lambda_m * lambda_m) * dlambda_m;
}

double cavity_response(double delta_hz, double kappa_hz, double exponent) {
  const double x = 2.0 * delta_hz / kappa_hz;
  const double lorentz = 1.0 / (1.0 + x * x);
  return exponent == 1.0 ? lorentz : std::pow(lorentz, exponent);
}

std::vector<double> reflection_spectrum(const CavityModel& cavity,
                                        std::span<const double> detunings_hz) {
  const double kappa = cavity.linewidth_hz();
  const double depth = cavity.dip_depth();
  std::vector<double> out;
  out.reserve(detunings_hz.size());
  for (double d : detunings_hz) out.push_back(1.0 - depth * cavity_response(d, kappa));
  return out;
}

double emission_rate_at_detuning(double gamma_baseline, double gamma_purcell_on_res,
                                 double delta_hz, double kappa_hz, double exponent) {
  if (gamma_baseline < 0 || gamma_purcell_on_res < 0)
    throw ArgumentError("emission rates must be non-negative");
  if (!(kappa_hz > 0)) throw ArgumentError("cavity linewidth must be positive");
  return gamma_baseline + gamma_purcell_on_res * cavity_response(delta_hz, kappa_hz, exponent);
}

double lifetime_to_purcell(double t_wg_s, double t_cav_s) {
  if (!(t_wg_s > 0) || !(t_cav_s > 0)) throw ArgumentError("lifetimes must be positive");
  return t_wg_s / t_cav_s - 1.0;
}

}  // namespace purcellsim
