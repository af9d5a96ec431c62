#include "purcellsim/mode_profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "purcellsim/errors.hpp"
#include "purcellsim/units.hpp"

namespace purcellsim {

namespace {

constexpr double kPi = units::kPi;

double standing_wave_sq(double x, double period) {
  const double c = std::cos(kPi * x / period);
  return c * c;
}

void validate_envelope(const AnalyticEnvelope& e) {
  if (!(e.standing_period_um > 0 && e.length_um > 0 && e.width_um > 0 && e.height_um > 0 &&
        e.slab_half_thickness_um > 0 && e.extent > 0)) {
    throw ValidationError("analytic profile: all envelope lengths must be positive");
  }
  if (e.slab_half_thickness_um > e.extent * e.height_um)
    throw ValidationError("analytic profile: slab extends beyond the domain");
}

template <typename F>
double bisect(F&& f, double lo, double hi, double target) {
  double flo = f(lo) - target;
  double fhi = f(hi) - target;
  if (flo * fhi > 0) throw ValidationError("profile calibration: target not bracketed");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::abs(hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid) - target;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Vec3 FieldGrid::voxel_center(std::size_t ix, std::size_t iy, std::size_t iz) const {
  return {origin_um.x + (double(ix) + 0.5) * voxel_um[0],
          origin_um.y + (double(iy) + 0.5) * voxel_um[1],
          origin_um.z + (double(iz) + 0.5) * voxel_um[2]};
}

ModeIntegrals analytic_integrals(const AnalyticEnvelope& e) {
  const double k = 2.0 * kPi / e.standing_period_um;
  const double lx = e.length_um, ly = e.width_um, lz = e.height_um;
  const double h = e.slab_half_thickness_um;
  const double root_half_pi = std::sqrt(kPi / 2.0);
  const double root_pi = std::sqrt(kPi);

  // cos² = (1 + cos kx)/2 ; cos⁴ = 3/8 + cos(kx)/2 + cos(2kx)/8
  const double x1 = 0.5 * lx * root_half_pi * (1.0 + std::exp(-k * k * lx * lx / 8.0));
  const double x2 = 0.5 * lx * root_pi *
                    (0.375 + 0.5 * std::exp(-k * k * lx * lx / 16.0) +
                     0.125 * std::exp(-k * k * lx * lx / 4.0));
  const double y1 = ly * root_half_pi;
  const double y2 = 0.5 * ly * root_pi;
  const double z1 = lz * root_half_pi;
  const double z1_slab = z1 * std::erf(std::sqrt(2.0) * h / lz);
  const double z2_slab = 0.5 * lz * root_pi * std::erf(2.0 * h / lz);

  return {x1 * y1 * z1, x1 * y1 * z1_slab, x2 * y2 * z2_slab};
}

ModeIntegrals grid_integrals(const FieldGrid& grid) {
  const std::size_t nx = grid.dims[0];
  const std::size_t plane = grid.dims[1] * grid.dims[2];
  double peak = 0;
  for (double v : grid.intensity) peak = std::max(peak, v);
  if (!(peak > 0)) throw ValidationError("mode profile: field is identically zero");

  // Per-plane partial sums reduced in a fixed order: bitwise identical for
  // any thread count.
  std::vector<std::array<double, 3>> partial(nx);
#pragma omp parallel for schedule(static)
  for (std::size_t ix = 0; ix < nx; ++ix) {
    std::array<double, 3> acc{0, 0, 0};
    const std::size_t base = ix * plane;
    for (std::size_t j = 0; j < plane; ++j) {
      const double v = grid.intensity[base + j] / peak;
      acc[0] += v;
      if (grid.dielectric[base + j]) {
        acc[1] += v;
        acc[2] += v * v;
      }
    }
    partial[ix] = acc;
  }
  ModeIntegrals out;
  for (const auto& p : partial) {
    out.total += p[0];
    out.dielectric += p[1];
    out.dielectric_sq += p[2];
  }
  const double dv = grid.voxel_volume_um3();
  out.total *= dv;
  out.dielectric *= dv;
  out.dielectric_sq *= dv;
  return out;
}

ModeProfile ModeProfile::analytic(const AnalyticEnvelope& envelope,
                                  const MaterialConstants& material) {
  validate_envelope(envelope);
  ModeProfile p;
  p.field_ = envelope;
  p.material_ = material;
  p.integrals_ = analytic_integrals(envelope);
  const double ext = envelope.extent;
  p.dielectric_volume_ = (2 * ext * envelope.length_um) * (2 * ext * envelope.width_um) *
                         (2 * envelope.slab_half_thickness_um);
  return p;
}

ModeProfile ModeProfile::tabulated(FieldGrid grid, const MaterialConstants& material) {
  if (grid.size() == 0) throw ValidationError("mode profile: empty grid");
  if (grid.intensity.size() != grid.size() || grid.dielectric.size() != grid.size())
    throw ValidationError("mode profile: value count does not match grid dimensions");
  for (double v : grid.voxel_um)
    if (!(v > 0)) throw ValidationError("mode profile: voxel size must be positive");
  for (double v : grid.intensity)
    if (!(v >= 0) || !std::isfinite(v))
      throw ValidationError("mode profile: |E|^2 values must be finite and >= 0");
  ModeProfile p;
  p.field_ = std::move(grid);
  p.material_ = material;
  p.finish_tabulated();
  return p;
}

void ModeProfile::finish_tabulated() {
  const FieldGrid& g = std::get<FieldGrid>(field_);
  integrals_ = grid_integrals(g);
  grid_max_ = *std::max_element(g.intensity.begin(), g.intensity.end());
  dielectric_voxels_.clear();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.dielectric[i]) dielectric_voxels_.push_back(i);
  if (dielectric_voxels_.empty()) throw ValidationError("mode profile: dielectric mask is empty");
  if (!(integrals_.dielectric_sq > 0))
    throw ValidationError("mode profile: no field inside the dielectric");
  dielectric_volume_ = double(dielectric_voxels_.size()) * g.voxel_volume_um3();
}

ModeProfile ModeProfile::calibrated(double v_mode_um3, double v_eff_um3,
                                    const MaterialConstants& material,
                                    const AnalyticEnvelope& shape) {
  if (!(v_mode_um3 > 0) || !(v_eff_um3 > v_mode_um3))
    throw ValidationError("profile calibration: need 0 < V_mode < V_eff");
  AnalyticEnvelope e = shape;
  // V_mode depends only on the along-beam length.
  e.length_um = bisect(
      [&](double lx) {
        AnalyticEnvelope t = e;
        t.length_um = lx;
        return analytic_integrals(t).total;
      },
      e.standing_period_um, 1e3, v_mode_um3);
  // V_eff grows with the slab thickness at fixed V_mode.
  auto veff = [&](double h) {
    AnalyticEnvelope t = e;
    t.slab_half_thickness_um = h;
    const ModeIntegrals m = analytic_integrals(t);
    return m.total * m.dielectric / m.dielectric_sq;
  };
  e.slab_half_thickness_um = bisect(veff, 1e-6 * e.height_um, e.extent * e.height_um, v_eff_um3);
  return analytic(e, material);
}

ModeProfile ModeProfile::default_profile() { return calibrated(0.55, 2.0); }

double ModeProfile::effective_mode_volume_um3() const {
  return integrals_.total * integrals_.dielectric / integrals_.dielectric_sq;
}

bool ModeProfile::in_domain(const Vec3& r) const {
  if (const auto* e = std::get_if<AnalyticEnvelope>(&field_)) {
    return std::abs(r.x) <= e->extent * e->length_um && std::abs(r.y) <= e->extent * e->width_um &&
           std::abs(r.z) <= e->extent * e->height_um;
  }
  const FieldGrid& g = std::get<FieldGrid>(field_);
  const double rel[3] = {r.x - g.origin_um.x, r.y - g.origin_um.y, r.z - g.origin_um.z};
  for (int a = 0; a < 3; ++a)
    if (!(rel[a] >= 0 && rel[a] <= g.voxel_um[a] * double(g.dims[a]))) return false;
  return true;
}

namespace {

std::size_t containing_voxel(const FieldGrid& g, const Vec3& r) {
  const double rel[3] = {r.x - g.origin_um.x, r.y - g.origin_um.y, r.z - g.origin_um.z};
  std::size_t idx[3];
  for (int a = 0; a < 3; ++a) {
    const auto i = static_cast<std::size_t>(std::floor(rel[a] / g.voxel_um[a]));
    idx[a] = std::min(i, g.dims[a] - 1);
  }
  return g.index(idx[0], idx[1], idx[2]);
}

}  // namespace

bool ModeProfile::in_dielectric(const Vec3& r) const {
  if (!in_domain(r)) return false;
  if (const auto* e = std::get_if<AnalyticEnvelope>(&field_))
    return std::abs(r.z) <= e->slab_half_thickness_um;
  const FieldGrid& g = std::get<FieldGrid>(field_);
  return g.dielectric[containing_voxel(g, r)] != 0;
}

double ModeProfile::relative_intensity(const Vec3& r) const {
  if (!in_domain(r)) throw DomainError("position outside the mode-profile domain");
  if (const auto* e = std::get_if<AnalyticEnvelope>(&field_)) {
    const double gx = r.x / e->length_um, gy = r.y / e->width_um, gz = r.z / e->height_um;
    return standing_wave_sq(r.x, e->standing_period_um) *
           std::exp(-2.0 * (gx * gx + gy * gy + gz * gz));
  }
  const FieldGrid& g = std::get<FieldGrid>(field_);
  return g.intensity[containing_voxel(g, r)] / grid_max_;
}

FieldGrid ModeProfile::rasterize(const RasterSpec& spec) const {
  if (!is_analytic()) return grid();
  if (spec.nx == 0 || spec.ny == 0 || spec.nz_dielectric == 0)
    throw ArgumentError("raster resolution must be positive");
  const AnalyticEnvelope& e = envelope();

  const double hx = e.extent * e.length_um, hy = e.extent * e.width_um;
  const double h = e.slab_half_thickness_um;
  const double dz = 2.0 * h / double(spec.nz_dielectric);
  // Air cells outside the slab at the same spacing, up to the domain edge.
  const auto n_air =
      static_cast<std::size_t>(std::ceil((e.extent * e.height_um - h) / dz - 1e-9));

  FieldGrid g;
  g.dims = {spec.nx, spec.ny, spec.nz_dielectric + 2 * n_air};
  g.voxel_um = {2 * hx / double(spec.nx), 2 * hy / double(spec.ny), dz};
  g.origin_um = {-hx, -hy, -h - double(n_air) * dz};
  g.intensity.assign(g.size(), 0.0);
  g.dielectric.assign(g.size(), 0);

  const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
#pragma omp parallel for schedule(static)
  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t iz = 0; iz < nz; ++iz) {
        const Vec3 c = g.voxel_center(ix, iy, iz);
        const double gx = c.x / e.length_um, gy = c.y / e.width_um, gz = c.z / e.height_um;
        const std::size_t i = g.index(ix, iy, iz);
        g.intensity[i] = standing_wave_sq(c.x, e.standing_period_um) *
                         std::exp(-2.0 * (gx * gx + gy * gy + gz * gz));
        g.dielectric[i] = (iz >= n_air && iz < n_air + spec.nz_dielectric) ? 1 : 0;
      }
    }
  }
  return g;
}

Vec3 ModeProfile::sample_dielectric_point(Engine& rng) const {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (const auto* e = std::get_if<AnalyticEnvelope>(&field_)) {
    const double x = u(rng) * e->extent * e->length_um;
    const double y = u(rng) * e->extent * e->width_um;
    const double z = u(rng) * e->slab_half_thickness_um;
    return {x, y, z};
  }
  const FieldGrid& g = std::get<FieldGrid>(field_);
  std::uniform_int_distribution<std::size_t> pick(0, dielectric_voxels_.size() - 1);
  std::size_t idx = dielectric_voxels_[pick(rng)];
  const std::size_t iz = idx % g.dims[2];
  idx /= g.dims[2];
  const std::size_t iy = idx % g.dims[1];
  const std::size_t ix = idx / g.dims[1];
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  return {g.origin_um.x + (double(ix) + frac(rng)) * g.voxel_um[0],
          g.origin_um.y + (double(iy) + frac(rng)) * g.voxel_um[1],
          g.origin_um.z + (double(iz) + frac(rng)) * g.voxel_um[2]};
}

// ---- text format -----------------------------------------------------------

void write_mode_profile(std::ostream& os, const FieldGrid& g, const MaterialConstants& m) {
  os.precision(17);
  os << "# purcellsim mode profile: |E|^2 then dielectric mask, index (ix*ny+iy)*nz+iz\n";
  os << "format purcellsim-mode-profile 1\n";
  os << "dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
  os << "voxel_um " << g.voxel_um[0] << ' ' << g.voxel_um[1] << ' ' << g.voxel_um[2] << '\n';
  os << "origin_um " << g.origin_um.x << ' ' << g.origin_um.y << ' ' << g.origin_um.z << '\n';
  os << "refractive_index " << m.refractive_index << '\n';
  os << "local_field_correction " << m.local_field_correction << '\n';
  os << "branching_ratio " << m.branching_ratio << '\n';
  os << "intensity\n";
  const std::size_t row = g.dims[2];
  for (std::size_t i = 0; i < g.size(); ++i) os << g.intensity[i] << ((i + 1) % row ? ' ' : '\n');
  os << "mask\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    os << int(g.dielectric[i]) << ((i + 1) % row ? ' ' : '\n');
  os << "end\n";
}

namespace {

class LineReader {
 public:
  LineReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  // Next non-blank, non-comment line; false at EOF.
  bool next(std::string& line) {
    while (std::getline(is_, line)) {
      ++lineno_;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, lineno_, what); }

  std::size_t lineno() const { return lineno_; }

 private:
  std::istream& is_;
  std::string source_;
  std::size_t lineno_ = 0;
};

template <typename T>
void read_values(LineReader& reader, std::size_t count, std::vector<T>& out,
                 const char* block) {
  out.clear();
  out.reserve(count);
  std::string line;
  while (out.size() < count) {
    if (!reader.next(line)) reader.fail(std::string("unexpected end of file in ") + block);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      if (out.size() == count) reader.fail(std::string("too many values in ") + block);
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) reader.fail("malformed number '" + tok + "'");
      if constexpr (std::is_same_v<T, std::uint8_t>) {
        if (v != 0.0 && v != 1.0) reader.fail("mask values must be 0 or 1");
        out.push_back(static_cast<std::uint8_t>(v));
      } else {
        out.push_back(v);
      }
    }
  }
}

}  // namespace

ModeProfile read_mode_profile(std::istream& is, const std::string& source) {
  LineReader reader(is, source);
  FieldGrid g;
  MaterialConstants m;
  bool have_format = false, have_dims = false, have_voxel = false, have_intensity = false,
       have_mask = false;
  std::string line;
  while (reader.next(line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto need = [&](bool ok) {
      if (!ok || !(ss >> std::ws).eof()) reader.fail("malformed '" + key + "' line");
    };
    if (key == "format") {
      std::string name;
      int version = 0;
      ss >> name >> version;
      need(bool(ss) || ss.eof());
      if (name != "purcellsim-mode-profile" || version != 1)
        reader.fail("unsupported format '" + name + " " + std::to_string(version) + "'");
      have_format = true;
    } else if (key == "dims") {
      ss >> g.dims[0] >> g.dims[1] >> g.dims[2];
      need(!ss.fail());
      if (g.size() == 0) reader.fail("grid dimensions must be positive");
      have_dims = true;
    } else if (key == "voxel_um") {
      ss >> g.voxel_um[0] >> g.voxel_um[1] >> g.voxel_um[2];
      need(!ss.fail());
      have_voxel = true;
    } else if (key == "origin_um") {
      ss >> g.origin_um.x >> g.origin_um.y >> g.origin_um.z;
      need(!ss.fail());
    } else if (key == "refractive_index") {
      ss >> m.refractive_index;
      need(!ss.fail());
    } else if (key == "local_field_correction") {
      ss >> m.local_field_correction;
      need(!ss.fail());
    } else if (key == "branching_ratio") {
      ss >> m.branching_ratio;
      need(!ss.fail());
    } else if (key == "intensity") {
      if (!have_dims) reader.fail("'intensity' block before 'dims'");
      read_values(reader, g.size(), g.intensity, "intensity block");
      have_intensity = true;
    } else if (key == "mask") {
      if (!have_dims) reader.fail("'mask' block before 'dims'");
      read_values(reader, g.size(), g.dielectric, "mask block");
      have_mask = true;
    } else if (key == "end") {
      break;
    } else {
      reader.fail("unknown key '" + key + "'");
    }
  }
  if (!have_format) reader.fail("missing 'format' line");
  if (!have_dims || !have_voxel || !have_intensity || !have_mask)
    reader.fail("incomplete profile (need dims, voxel_um, intensity, mask)");
  try {
    return ModeProfile::tabulated(std::move(g), m);
  } catch (const ValidationError& e) {
    reader.fail(e.what());
  }
}

ModeProfile load_mode_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mode profile '" + path + "'");
  return read_mode_profile(in, path);
}

}  // namespace purcellsim
