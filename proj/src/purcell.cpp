#include "purcellsim/purcell.hpp"

#include <algorithm>
#include <functional>

#include "purcellsim/errors.hpp"
#include "purcellsim/units.hpp"

namespace purcellsim {

double purcell_prefactor_um3(const MaterialConstants& m, const CavityModel& cavity) {
  const double lambda_um = cavity.lambda0_nm * 1e-3;
  const double n3 = m.refractive_index * m.refractive_index * m.refractive_index;
  return 3.0 / (4.0 * units::kPi * units::kPi) * m.branching_ratio * cavity.q_factor *
         lambda_um * lambda_um * lambda_um / (m.local_field_correction * n3);
}

double purcell_point(const ModeProfile& profile, const CavityModel& cavity, const Vec3& r) {
  const double rel = profile.relative_intensity(r);
  if (rel == 0.0) return 0.0;
  return purcell_prefactor_um3(profile.material(), cavity) / profile.mode_volume_um3() * rel;
}

double effective_mode_volume(const ModeProfile& profile) {
  return profile.effective_mode_volume_um3();
}

double average_purcell(const ModeProfile& profile, const CavityModel& cavity) {
  return purcell_prefactor_um3(profile.material(), cavity) / profile.effective_mode_volume_um3();
}

std::vector<double> purcell_distribution(const ModeProfile& profile, const CavityModel& cavity,
                                         std::span<const double> p_min_grid,
                                         const RasterSpec& raster) {
  if (p_min_grid.empty()) throw ArgumentError("purcell_distribution: empty threshold grid");
  if (!std::is_sorted(p_min_grid.begin(), p_min_grid.end()))
    throw ArgumentError("purcell_distribution: thresholds must be sorted ascending");

  const FieldGrid grid = profile.rasterize(raster);
  // Analytic samples are already relative to the true maximum of 1.
  double peak = 1.0;
  if (!profile.is_analytic()) peak = *std::max_element(grid.intensity.begin(), grid.intensity.end());
  const double scale = purcell_prefactor_um3(profile.material(), cavity) /
                       profile.mode_volume_um3() / peak;

  std::vector<double> p_values;
  p_values.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.dielectric[i] && grid.intensity[i] > 0) p_values.push_back(grid.intensity[i] * scale);
  std::sort(p_values.begin(), p_values.end(), std::greater<>());

  const double dv_over_veff = grid.voxel_volume_um3() / profile.effective_mode_volume_um3();
  std::vector<double> out;
  out.reserve(p_min_grid.size());
  for (double p_min : p_min_grid) {
    // Count of values >= p_min in a descending array.
    const auto it = std::partition_point(p_values.begin(), p_values.end(),
                                         [&](double p) { return p >= p_min; });
    out.push_back(double(it - p_values.begin()) * dv_over_veff);
  }
  return out;
}

PurcellSummary summarize_purcell(const ModeProfile& profile, const CavityModel& cavity) {
  const double pre = purcell_prefactor_um3(profile.material(), cavity);
  return {pre / profile.mode_volume_um3(), pre / profile.effective_mode_volume_um3(),
          profile.mode_volume_um3(), profile.effective_mode_volume_um3()};
}

}  // namespace purcellsim
