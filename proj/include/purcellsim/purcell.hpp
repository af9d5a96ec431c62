#pragma once

#include <span>
#include <vector>

#include "purcellsim/cavity.hpp"
#include "purcellsim/mode_profile.hpp"

namespace purcellsim {

struct PurcellSummary {
  double p_max = 0;  // ion at the field maximum
  double p_avg = 0;  // intensity-weighted average over the dielectric
  double v_mode_um3 = 0;
  double v_eff_um3 = 0;
};

// (3/4π²) β Q λ³ / (χ_L n³), in µm³. Dividing by a mode volume gives a
// Purcell factor.
double purcell_prefactor_um3(const MaterialConstants& material, const CavityModel& cavity);

// P(r) = prefactor / V_mode · |E(r)|²/max|E|². DomainError outside the profile.
double purcell_point(const ModeProfile& profile, const CavityModel& cavity, const Vec3& r);

double effective_mode_volume(const ModeProfile& profile);

// P_avg = prefactor / V_eff.
double average_purcell(const ModeProfile& profile, const CavityModel& cavity);

// For each threshold, the dielectric volume where P(r) >= threshold (and the
// field is nonzero), divided by V_eff. Thresholds must be sorted ascending;
// analytic profiles are voxelized with `raster`.
std::vector<double> purcell_distribution(const ModeProfile& profile, const CavityModel& cavity,
                                         std::span<const double> p_min_grid,
                                         const RasterSpec& raster = {});

PurcellSummary summarize_purcell(const ModeProfile& profile, const CavityModel& cavity);

}  // namespace purcellsim
