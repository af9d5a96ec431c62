#include "purcellsim/ensemble.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "purcellsim/errors.hpp"
#include "purcellsim/purcell.hpp"
#include "purcellsim/units.hpp"

namespace purcellsim {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2√(2 ln 2)
constexpr double kUm3PerCm3 = 1e12;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse CDF of a standard normal restricted to [a, b].
double truncated_normal_quantile(double a, double b, double u) {
  const boost::math::normal std_normal;
  // Work in the lower tail for precision far from the mean.
  if (a > 0) return -truncated_normal_quantile(-b, -a, 1.0 - u);
  const double pa = boost::math::cdf(std_normal, a);
  const double pb = boost::math::cdf(std_normal, b);
  const double p = pa + u * (pb - pa);
  if (p <= 0) return a;
  if (p >= 1) return b;
  return std::clamp(boost::math::quantile(std_normal, p), a, b);
}

double reflect_into(double x, double bound) {
  if (bound <= 0) return x;
  const double period = 4.0 * bound;
  double y = std::fmod(x + bound, period);
  if (y < 0) y += period;
  return y <= 2.0 * bound ? y - bound : 3.0 * bound - y;
}

}  // namespace

void EnsembleConfig::validate() const {
  if (!(fwhm_ghz > 0)) throw ValidationError("ensemble: fwhm_ghz must be positive");
  if (!(homogeneous_linewidth_mhz > 0))
    throw ValidationError("ensemble: homogeneous_linewidth_mhz must be positive");
  if (!(drift_broadening_mhz >= 0))
    throw ValidationError("ensemble: drift_broadening_mhz must be >= 0");
  if (!(number_density_per_cm3 >= 0))
    throw ValidationError("ensemble: number_density_per_cm3 must be >= 0");
  if (!(coupling_volume_um3 > 0))
    throw ValidationError("ensemble: coupling_volume_um3 must be positive");
  if (!(diffusion_rate_mhz_per_sqrt_min >= 0) || !(diffusion_bound_mhz >= 0))
    throw ValidationError("ensemble: diffusion parameters must be >= 0");
  if (!(diffusion_step_s > 0)) throw ValidationError("ensemble: diffusion_step_s must be positive");
  if (!(waveguide_lifetime_ms > 0))
    throw ValidationError("ensemble: waveguide_lifetime_ms must be positive");
  if (!(baseline_rate_multiplier > 0))
    throw ValidationError("ensemble: baseline_rate_multiplier must be positive");
  if (!(window_kappas >= 0)) throw ValidationError("ensemble: window_kappas must be >= 0");
}

double EnsembleConfig::sigma_ghz() const { return fwhm_ghz / kFwhmPerSigma; }

double EnsembleConfig::total_ions() const {
  if (ion_count >= 0) return double(ion_count);
  return number_density_per_cm3 * coupling_volume_um3 / kUm3PerCm3;
}

double cavity_offset_ghz(const EnsembleConfig& cfg, const CavityModel& cavity) {
  return units::to_ghz(units::frequency_of_nm(cavity.lambda0_nm) -
                       units::frequency_of_nm(cfg.center_wavelength_nm));
}

std::vector<IonRecord> sample_ensemble(const EnsembleConfig& cfg, const ModeProfile& profile,
                                       const CavityModel& cavity) {
  cfg.validate();
  Engine rng = make_engine(cfg.seed, Stream::ensemble);
  const double sigma = cfg.sigma_ghz();

  // Same population as spectral_density: positions spread over the
  // dielectric, count set by the coupling volume.
  const double domain_ions = cfg.total_ions();

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::uint64_t count = 0;
  if (cfg.window_kappas > 0) {
    const double center = cavity_offset_ghz(cfg, cavity);
    const double half = cfg.window_kappas * units::to_ghz(cavity.linewidth_hz());
    lo = center - half;
    hi = center + half;
    const double p_window = normal_cdf(hi / sigma) - normal_cdf(lo / sigma);
    const double mean = domain_ions * p_window;
    if (mean > 0) count = std::poisson_distribution<std::uint64_t>(mean)(rng);
  } else {
    count = static_cast<std::uint64_t>(std::llround(domain_ions));
  }

  std::vector<IonRecord> ions;
  ions.reserve(count);
  std::normal_distribution<double> gauss(0.0, sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double baseline = cfg.baseline_rate_per_ms();
  for (std::uint64_t i = 0; i < count; ++i) {
    IonRecord ion;
    ion.id = i;
    ion.center_frequency_ghz = cfg.window_kappas > 0
                                   ? sigma * truncated_normal_quantile(lo / sigma, hi / sigma, unit(rng))
                                   : gauss(rng);
    ion.purcell_factor = purcell_point(profile, cavity, profile.sample_dielectric_point(rng));
    ion.baseline_rate_per_ms = baseline;
    ions.push_back(ion);
  }
  return ions;
}

double spectral_density(const EnsembleConfig& cfg, double detuning_ghz) {
  const double sigma = cfg.sigma_ghz();
  const double z = detuning_ghz / sigma;
  return cfg.total_ions() * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * units::kPi));
}

double expected_ions_in_band(const EnsembleConfig& cfg, const CavityModel& cavity,
                             double center_detuning_ghz) {
  const double sigma = cfg.sigma_ghz();
  const double half = 0.5 * units::to_ghz(cavity.linewidth_hz());
  // Difference of CDFs evaluated on the near-center side for precision.
  const double d = std::abs(center_detuning_ghz);
  const double mass = 0.5 * (std::erfc((d - half) / (sigma * std::sqrt(2.0))) -
                             std::erfc((d + half) / (sigma * std::sqrt(2.0))));
  return cfg.total_ions() * mass;
}

IonRecord advance_spectral_diffusion(const IonRecord& ion, double dt_s,
                                     double rate_mhz_per_sqrt_min, Engine& rng, double bound_mhz) {
  if (dt_s < 0) throw ArgumentError("advance_spectral_diffusion: dt must be >= 0");
  IonRecord out = ion;
  if (dt_s == 0 || rate_mhz_per_sqrt_min == 0) return out;
  std::normal_distribution<double> step(0.0, rate_mhz_per_sqrt_min * std::sqrt(dt_s / 60.0));
  out.diffusion_state_mhz = reflect_into(ion.diffusion_state_mhz + step(rng), bound_mhz);
  return out;
}

void write_ensemble(std::ostream& os, const std::vector<IonRecord>& ions) {
  os.precision(17);
  os << "# id,frequency_offset_ghz,purcell_factor,baseline_rate_per_ms,diffusion_state_mhz\n";
  for (const IonRecord& ion : ions) {
    os << ion.id << ',' << ion.center_frequency_ghz << ',' << ion.purcell_factor << ','
       << ion.baseline_rate_per_ms << ',' << ion.diffusion_state_mhz << '\n';
  }
}

std::vector<IonRecord> read_ensemble(std::istream& is, const std::string& source) {
  std::vector<IonRecord> ions;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    IonRecord ion;
    char c1 = 0, c2 = 0, c3 = 0;
    ss >> ion.id >> c1 >> ion.center_frequency_ghz >> c2 >> ion.purcell_factor >> c3 >>
        ion.baseline_rate_per_ms;
    if (!ss || c1 != ',' || c2 != ',' || c3 != ',')
      throw ParseError(source, lineno, "expected id,frequency,purcell,baseline[,diffusion]");
    char c4 = 0;
    if (ss >> c4) {
      if (c4 != ',' || !(ss >> ion.diffusion_state_mhz))
        throw ParseError(source, lineno, "malformed diffusion column");
    }
    if (ion.purcell_factor < 0 || !(ion.baseline_rate_per_ms > 0))
      throw ParseError(source, lineno, "purcell factor must be >= 0 and baseline rate > 0");
    ions.push_back(ion);
  }
  return ions;
}

}  // namespace purcellsim
