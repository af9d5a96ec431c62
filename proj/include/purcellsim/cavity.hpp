#pragma once

#include <span>
#include <vector>

namespace purcellsim {

// Electro-optically tunable photonic-crystal cavity.
struct CavityModel {
  double lambda0_nm = 1533.0;          // resonance at 0 V
  double q_factor = 1.58e5;
  double extinction_db = 10.0;         // reflection dip depth
  double coupling_ratio = 0.5;         // kappa_ex / (kappa_ex + kappa_in)
  double tuning_rate_pm_per_v = 1.6;   // positive voltage red-shifts the resonance
  double max_voltage_v = 500.0;        // breakdown guard
  // Order m of the detuning response 1/(1+(2Δ/κ)²)^m. m = 1 is the standard
  // single-Lorentzian filter; larger m gives a steeper off-resonance roll-off.
  double response_exponent = 1.0;

  void validate() const;

  double resonance_hz() const;
  double linewidth_hz() const;  // κ = ν0/Q
  // Fractional depth d of the reflection dip, R(0) = 1 - d.
  double dip_depth() const;

  bool operator==(const CavityModel&) const = default;
};

// Resonance wavelength shift for an applied voltage (pm).
double eo_wavelength_shift_pm(const CavityModel& cavity, double volts);

// Resonance frequency shift (Hz) for an applied voltage, Δν = -(c/λ0²)·Δλ.
// Throws BreakdownError if |volts| exceeds the cavity's guard.
double eo_detuning(const CavityModel& cavity, double volts);

// R(Δ) = 1 - d / (1 + (2Δ/κ)²) for each detuning in Hz.
std::vector<double> reflection_spectrum(const CavityModel& cavity,
                                        std::span<const double> detunings_hz);

// Unit-peak detuning response of the cavity, 1/(1+(2Δ/κ)²)^m.
double cavity_response(double delta_hz, double kappa_hz, double exponent = 1.0);

// Γ(Δ) = γ_baseline + γ_purcell · cavity_response(Δ).
double emission_rate_at_detuning(double gamma_baseline, double gamma_purcell_on_res,
                                 double delta_hz, double kappa_hz, double exponent = 1.0);

// P = T_wg / T_cav - 1.
double lifetime_to_purcell(double t_wg_s, double t_cav_s);

}  // namespace purcellsim
