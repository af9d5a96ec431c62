#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "purcellsim/rng.hpp"

namespace purcellsim {

struct Vec3 {
  double x = 0, y = 0, z = 0;  // µm
};

struct MaterialConstants {
  double refractive_index = 2.0;
  double local_field_correction = 4.0;  // ((n²+2)/3)² at n = 2
  double branching_ratio = 0.22;

  static double lorentz_local_field(double n) {
    const double f = (n * n + 2.0) / 3.0;
    return f * f;
  }

  bool operator==(const MaterialConstants&) const = default;
};

// Separable model of a nanobeam mode: a cos² standing wave along the beam
// under Gaussian envelopes in all three directions,
//   |E|² = cos²(πx/a) · exp(-2x²/Lx²) · exp(-2y²/Ly²) · exp(-2z²/Lz²),
// with the dielectric occupying the slab |z| <= h.
struct AnalyticEnvelope {
  double standing_period_um = 0.40;  // a
  double length_um = 4.0;            // Lx
  double width_um = 0.8;             // Ly
  double height_um = 0.15;           // Lz
  double slab_half_thickness_um = 0.15;
  double extent = 2.0;  // domain half-size in envelope lengths

  bool operator==(const AnalyticEnvelope&) const = default;
};

// |E|² sampled on a regular grid with an in-dielectric mask. Values are
// stored row-major with index (ix * ny + iy) * nz + iz; voxel (0,0,0) has its
// lower corner at origin_um.
struct FieldGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::array<double, 3> voxel_um{0, 0, 0};
  Vec3 origin_um;
  std::vector<double> intensity;
  std::vector<std::uint8_t> dielectric;

  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return (ix * dims[1] + iy) * dims[2] + iz;
  }
  double voxel_volume_um3() const { return voxel_um[0] * voxel_um[1] * voxel_um[2]; }
  Vec3 voxel_center(std::size_t ix, std::size_t iy, std::size_t iz) const;
};

// Resolution used when an analytic profile is voxelized: nx, ny cells across
// the domain and nz_dielectric cells across the slab (z cells are aligned to
// the slab faces).
struct RasterSpec {
  std::size_t nx = 400;
  std::size_t ny = 80;
  std::size_t nz_dielectric = 40;
};

// Integrals that define the mode volumes, in µm³ (intensity normalized to a
// unit maximum).
struct ModeIntegrals {
  double total = 0;          // ∫ |E|² over all space
  double dielectric = 0;     // ∫_LN |E|²
  double dielectric_sq = 0;  // ∫_LN |E|⁴
};

class ModeProfile {
 public:
  static ModeProfile analytic(const AnalyticEnvelope& envelope, const MaterialConstants& material);
  static ModeProfile tabulated(FieldGrid grid, const MaterialConstants& material);

  // Analytic profile whose along-beam length and slab thickness are solved
  // so that V_mode and V_eff hit the requested values; the transverse
  // envelope and standing-wave period are taken from `shape`.
  static ModeProfile calibrated(double v_mode_um3, double v_eff_um3,
                                const MaterialConstants& material = {},
                                const AnalyticEnvelope& shape = {});

  // V_mode = 0.55 µm³, V_eff = 2 µm³.
  static ModeProfile default_profile();

  bool is_analytic() const { return std::holds_alternative<AnalyticEnvelope>(field_); }
  const AnalyticEnvelope& envelope() const { return std::get<AnalyticEnvelope>(field_); }
  const FieldGrid& grid() const { return std::get<FieldGrid>(field_); }
  const MaterialConstants& material() const { return material_; }

  bool in_domain(const Vec3& r) const;
  bool in_dielectric(const Vec3& r) const;
  // |E(r)|² / max|E|²; DomainError outside the domain.
  double relative_intensity(const Vec3& r) const;

  const ModeIntegrals& integrals() const { return integrals_; }
  double mode_volume_um3() const { return integrals_.total; }
  double effective_mode_volume_um3() const;
  double dielectric_volume_um3() const { return dielectric_volume_; }

  // Voxelized copy (midpoint samples). A tabulated profile returns its grid.
  FieldGrid rasterize(const RasterSpec& spec = {}) const;

  // Uniform point in the dielectric part of the domain.
  Vec3 sample_dielectric_point(Engine& rng) const;

 private:
  ModeProfile() = default;
  void finish_tabulated();

  std::variant<AnalyticEnvelope, FieldGrid> field_;
  MaterialConstants material_;
  ModeIntegrals integrals_;
  double dielectric_volume_ = 0;
  double grid_max_ = 1.0;
  std::vector<std::size_t> dielectric_voxels_;
};

// Closed-form integrals of the analytic envelope.
ModeIntegrals analytic_integrals(const AnalyticEnvelope& envelope);

// Voxel sums over a grid, normalized to the grid maximum.
ModeIntegrals grid_integrals(const FieldGrid& grid);

// Text format: a keyword header followed by the intensity block and the
// mask block. See docs in README ("Mode profile files").
void write_mode_profile(std::ostream& os, const FieldGrid& grid, const MaterialConstants& material);
ModeProfile read_mode_profile(std::istream& is, const std::string& source = "<stream>");
ModeProfile load_mode_profile(const std::string& path);

}  // namespace purcellsim
