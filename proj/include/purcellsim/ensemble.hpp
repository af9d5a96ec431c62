#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "purcellsim/cavity.hpp"
#include "purcellsim/mode_profile.hpp"
#include "purcellsim/rng.hpp"

namespace purcellsim {

struct EnsembleConfig {
  double center_wavelength_nm = 1532.0;
  double fwhm_ghz = 160.0;  // measured; the literature value is 180 GHz
  // Er density for 100 ppm of the Nb sites (~1.9e22 cm^-3).
  double number_density_per_cm3 = 1.9e18;
  // Volume whose ions count as "in the cavity" for spectral_density and
  // expected_ions_in_band (V_eff of the default profile).
  double coupling_volume_um3 = 2.0;
  // >= 0 replaces the density-derived count.
  std::int64_t ion_count = -1;
  double homogeneous_linewidth_mhz = 1.0;
  // Lorentzian broadening from laser drift and spectral diffusion during a
  // measurement; adds to the homogeneous linewidth for excitation.
  double drift_broadening_mhz = 29.0;
  double diffusion_rate_mhz_per_sqrt_min = 1.0;
  double diffusion_bound_mhz = 0.0;  // reflecting bound, 0 = unbounded
  double diffusion_step_s = 1.0;     // granularity of the walk during a run
  double waveguide_lifetime_ms = 2.5;
  // Scales the detuned-cavity baseline rate relative to 1/T_wg
  // (2.5/2.82 reproduces a 2.82 ms detuned lifetime).
  double baseline_rate_multiplier = 1.0;
  // Sample only ions within ± this many cavity linewidths of the resonance;
  // 0 samples the full distribution.
  double window_kappas = 5.0;
  std::uint64_t seed = 1;

  void validate() const;

  double sigma_ghz() const;
  double effective_linewidth_mhz() const {
    return homogeneous_linewidth_mhz + drift_broadening_mhz;
  }
  // Ions counted by spectral_density.
  double total_ions() const;
  double radiative_rate_per_s() const { return 1e3 / waveguide_lifetime_ms; }
  double baseline_rate_per_ms() const { return baseline_rate_multiplier / waveguide_lifetime_ms; }

  bool operator==(const EnsembleConfig&) const = default;
};

struct IonRecord {
  std::uint64_t id = 0;
  double center_frequency_ghz = 0;  // offset from the inhomogeneous center
  double purcell_factor = 0;
  double baseline_rate_per_ms = 0.4;
  double diffusion_state_mhz = 0;  // current spectral-diffusion offset

  double frequency_hz() const { return center_frequency_ghz * 1e9 + diffusion_state_mhz * 1e6; }
  double baseline_rate_per_s() const { return baseline_rate_per_ms * 1e3; }

  bool operator==(const IonRecord&) const = default;
};

// Cavity resonance (at 0 V) as an offset from the inhomogeneous center, GHz.
double cavity_offset_ghz(const EnsembleConfig& cfg, const CavityModel& cavity);

// Ions with Gaussian frequencies and uniform positions in the dielectric,
// mapped to Purcell factors through the profile. With a frequency window
// the count in the window is Poisson-distributed around its expectation.
std::vector<IonRecord> sample_ensemble(const EnsembleConfig& cfg, const ModeProfile& profile,
                                       const CavityModel& cavity);

// Ions per GHz at a detuning (GHz) from the inhomogeneous center.
double spectral_density(const EnsembleConfig& cfg, double detuning_ghz);

// Expected number of ions within one cavity linewidth centered at the given
// detuning from the inhomogeneous center.
double expected_ions_in_band(const EnsembleConfig& cfg, const CavityModel& cavity,
                             double center_detuning_ghz);

// Gaussian random-walk step of the ion's diffusion state over dt_s,
// variance rate²·dt (rate in MHz/√min).
IonRecord advance_spectral_diffusion(const IonRecord& ion, double dt_s,
                                     double rate_mhz_per_sqrt_min, Engine& rng,
                                     double bound_mhz = 0.0);

void write_ensemble(std::ostream& os, const std::vector<IonRecord>& ions);
std::vector<IonRecord> read_ensemble(std::istream& is, const std::string& source = "<stream>");

}  // namespace purcellsim
