#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "purcellsim/cavity.hpp"
#include "purcellsim/ensemble.hpp"
#include "purcellsim/errors.hpp"
#include "purcellsim/mode_profile.hpp"
#include "purcellsim/purcell.hpp"
#include "support.hpp"

using namespace purcellsim;

namespace {

constexpr double kC = 299792458.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

CavityModel cavity_at(double lambda_nm, double q = 1e5) {
  CavityModel c;
  c.lambda0_nm = lambda_nm;
  c.q_factor = q;
  return c;
}

double detuning_ghz_of(double lambda_nm, double center_nm = 1532.0) {
  return (kC / (lambda_nm * 1e-9) - kC / (center_nm * 1e-9)) * 1e-9;
}

EnsembleConfig full_distribution(std::int64_t n) {
  EnsembleConfig cfg;
  cfg.ion_count = n;
  cfg.window_kappas = 0;
  return cfg;
}

}  // namespace

TEST_CASE("sample_ensemble: Gaussian frequencies") {
  const ModeProfile profile = ModeProfile::default_profile();
  const CavityModel cavity = cavity_at(1532.0);
  const EnsembleConfig cfg = full_distribution(1000000);
  const auto ions = sample_ensemble(cfg, profile, cavity);
  REQUIRE(ions.size() == 1000000);

  const double half = cfg.fwhm_ghz / 2;
  std::size_t inside = 0;
  std::vector<double> f;
  f.reserve(ions.size());
  for (const IonRecord& ion : ions) {
    f.push_back(ion.center_frequency_ghz);
    if (std::abs(ion.center_frequency_ghz) <= half) ++inside;
  }
  // erf(√(ln 2)) = 0.7610.
  const double expected = std::erf(std::sqrt(std::log(2.0)));
  CHECK(expected == doctest::Approx(0.761).epsilon(1e-3));
  CHECK(double(inside) / 1e6 == doctest::Approx(expected).epsilon(0.003));

  const double sigma = cfg.sigma_ghz();
  CHECK(std::abs(testsupport::mean(f)) < 5 * sigma / std::sqrt(1e6));
  CHECK(testsupport::stddev(f) == doctest::Approx(sigma).epsilon(0.005));

  // χ² goodness of fit on 60 equal-width bins over ±3σ plus two tails.
  const int nb = 60;
  std::vector<double> obs(nb + 2, 0.0);
  for (double x : f) {
    const double z = x / sigma;
    const int b = z < -3 ? 0 : z >= 3 ? nb + 1 : std::min(nb, 1 + int((z + 3) / 6 * nb));
    obs[std::size_t(b)] += 1;
  }
  double chi2 = 0;
  for (int b = 0; b < nb + 2; ++b) {
    double lo, hi;
    if (b == 0) {
      lo = -INFINITY;
      hi = -3;
    } else if (b == nb + 1) {
      lo = 3;
      hi = INFINITY;
    } else {
      lo = -3 + 6.0 * (b - 1) / nb;
      hi = -3 + 6.0 * b / nb;
    }
    const double e = 1e6 * (normal_cdf(hi) - normal_cdf(lo));
    chi2 += (obs[std::size_t(b)] - e) * (obs[std::size_t(b)] - e) / e;
  }
  CHECK(testsupport::chi2_upper_tail(chi2, nb + 1) > 0.01);
}

TEST_CASE("sample_ensemble: edge cases and determinism") {
  const ModeProfile profile = ModeProfile::default_profile();
  const CavityModel cavity = cavity_at(1532.0);
  CHECK(sample_ensemble(full_distribution(0), profile, cavity).empty());

  EnsembleConfig cfg = full_distribution(5000);
  const auto a = sample_ensemble(cfg, profile, cavity);
  const auto b = sample_ensemble(cfg, profile, cavity);
  CHECK(a == b);
  cfg.seed = 2;
  CHECK(sample_ensemble(cfg, profile, cavity) != a);
  for (const IonRecord& ion : a) {
    CHECK(ion.purcell_factor >= 0);
    CHECK(ion.baseline_rate_per_ms > 0);
  }

  EnsembleConfig bad;
  bad.fwhm_ghz = 0;
  CHECK_THROWS_AS(sample_ensemble(bad, profile, cavity), ValidationError);
  bad = EnsembleConfig{};
  bad.homogeneous_linewidth_mhz = 0;
  CHECK_THROWS_AS(sample_ensemble(bad, profile, cavity), ValidationError);
}

TEST_CASE("sample_ensemble: frequency window keeps the expected population") {
  const ModeProfile profile = ModeProfile::default_profile();
  const CavityModel cavity = cavity_at(1534.064);
  EnsembleConfig cfg;
  const auto ions = sample_ensemble(cfg, profile, cavity);
  const double center = cavity_offset_ghz(cfg, cavity);
  const double half = cfg.window_kappas * cavity.linewidth_hz() * 1e-9;
  for (const IonRecord& ion : ions) {
    CHECK(ion.center_frequency_ghz >= center - half);
    CHECK(ion.center_frequency_ghz <= center + half);
  }
  // Poisson count around N·(mass inside the window).
  const double sigma = cfg.sigma_ghz();
  const double mean = cfg.total_ions() * (normal_cdf((center + half) / sigma) - normal_cdf((center - half) / sigma));
  CHECK(std::abs(double(ions.size()) - mean) < 5 * std::sqrt(mean));
}

TEST_CASE("sampled Purcell factors follow purcell_distribution") {
  const ModeProfile profile = ModeProfile::default_profile();
  const CavityModel cavity = cavity_at(1532.0);
  const auto ions = sample_ensemble(full_distribution(1000000), profile, cavity);
  std::vector<double> p;
  p.reserve(ions.size());
  for (const IonRecord& ion : ions) p.push_back(ion.purcell_factor);
  std::sort(p.begin(), p.end());

  const std::vector<double> grid{0.5, 1, 5, 10, 25, 50, 100, 200, 300, 400, 500};
  const auto frac = purcell_distribution(profile, cavity, grid, {801, 161, 41});
  // Volume fractions relative to V_eff, rescaled to the dielectric volume.
  const double to_survival = effective_mode_volume(profile) / profile.dielectric_volume_um3();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double emp = double(p.end() - std::lower_bound(p.begin(), p.end(), grid[i])) / double(p.size());
    CAPTURE(grid[i]);
    CHECK(emp == doctest::Approx(frac[i] * to_survival).epsilon(0.02));
  }
}

TEST_CASE("spectral_density: peak value, half maximum, normalization") {
  EnsembleConfig cfg;
  CHECK(cfg.total_ions() == doctest::Approx(3.8e6).epsilon(1e-12));
  const double sigma = cfg.fwhm_ghz / 2.354820045;
  CHECK(spectral_density(cfg, 0) == doctest::Approx(3.8e6 / (sigma * std::sqrt(2 * M_PI))).epsilon(1e-9));
  CHECK(spectral_density(cfg, 0) / spectral_density(cfg, cfg.fwhm_ghz / 2) == doctest::Approx(2.0).epsilon(1e-9));
  const double integral = testsupport::simpson([&](double d) { return spectral_density(cfg, d); }, -12 * sigma,
                                               12 * sigma, 4000);
  CHECK(integral == doctest::Approx(cfg.total_ions()).epsilon(1e-3));
  for (double d = -1000; d <= 1000; d += 37) CHECK(spectral_density(cfg, d) >= 0);
}

TEST_CASE("expected_ions_in_band: ensemble vs discrete regime") {
  EnsembleConfig cfg;
  const CavityModel b = cavity_at(1533.274);
  const CavityModel c = cavity_at(1534.064);
  const double nb = expected_ions_in_band(cfg, b, detuning_ghz_of(1533.274));
  const double nc = expected_ions_in_band(cfg, c, detuning_ghz_of(1534.064));
  // Oracle: density integrated over κ by quadrature.
  const double kb = b.linewidth_hz() * 1e-9;
  const double d_b = detuning_ghz_of(1533.274);
  CHECK(nb == doctest::Approx(testsupport::simpson([&](double d) { return spectral_density(cfg, d); }, d_b - kb / 2,
                                                   d_b + kb / 2, 200))
                  .epsilon(1e-6));
  CHECK(nb > 1000);
  CHECK(nc >= 1);
  CHECK(nc < 100);
  CHECK(nb / nc > 50);

  double prev = INFINITY;
  for (double d = 0; d <= 600; d += 25) {
    const double n = expected_ions_in_band(cfg, c, -d);
    CHECK(n <= prev);
    CHECK(n == doctest::Approx(expected_ions_in_band(cfg, c, d)).epsilon(1e-12));
    prev = n;
  }
  CavityModel narrow = c;
  narrow.q_factor = 1e30;
  CHECK(expected_ions_in_band(cfg, narrow, 0) < 1e-12);
}

TEST_CASE("advance_spectral_diffusion: random-walk variance") {
  IonRecord ion;
  Engine rng = make_engine(1, Stream::diffusion);
  CHECK(advance_spectral_diffusion(ion, 0.0, 1.0, rng) == ion);
  CHECK_THROWS_AS(advance_spectral_diffusion(ion, -1.0, 1.0, rng), ArgumentError);

  const double rate = 2.0;  // MHz/√min
  std::vector<double> after;
  for (int i = 0; i < 20000; ++i) {
    Engine e = make_engine(7, Stream::diffusion, std::uint64_t(i));
    after.push_back(advance_spectral_diffusion(ion, 60.0, rate, e).diffusion_state_mhz);
  }
  CHECK(std::abs(testsupport::mean(after)) < 5 * rate / std::sqrt(20000.0));
  CHECK(testsupport::stddev(after) == doctest::Approx(rate).epsilon(0.03));

  // Four minutes in 240 one-second steps: std 2·rate.
  std::vector<double> walk;
  for (int i = 0; i < 4000; ++i) {
    Engine e = make_engine(9, Stream::diffusion, std::uint64_t(i));
    IonRecord x;
    for (int s = 0; s < 240; ++s) x = advance_spectral_diffusion(x, 1.0, rate, e);
    walk.push_back(x.diffusion_state_mhz);
  }
  CHECK(testsupport::stddev(walk) == doctest::Approx(2 * rate).epsilon(0.06));

  Engine e1 = make_engine(3, Stream::diffusion), e2 = make_engine(3, Stream::diffusion);
  CHECK(advance_spectral_diffusion(ion, 10, rate, e1) == advance_spectral_diffusion(ion, 10, rate, e2));

  // Reflecting bound keeps the state inside.
  Engine eb = make_engine(4, Stream::diffusion);
  IonRecord x;
  for (int s = 0; s < 2000; ++s) {
    x = advance_spectral_diffusion(x, 60.0, 5.0, eb, 3.0);
    CHECK(std::abs(x.diffusion_state_mhz) <= 3.0 + 1e-12);
  }
}

TEST_CASE("ensemble table round trip") {
  const auto ions = sample_ensemble(full_distribution(300), ModeProfile::default_profile(), cavity_at(1532.0));
  std::stringstream ss;
  write_ensemble(ss, ions);
  const auto back = read_ensemble(ss, "ions");
  CHECK(back == ions);

  std::stringstream bad("id,center_frequency_ghz\n1,abc\n");
  CHECK_THROWS_AS(read_ensemble(bad, "bad"), ParseError);
}
