#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "purcellsim/config.hpp"
#include "purcellsim/detection.hpp"
#include "purcellsim/errors.hpp"
#include "purcellsim/hazard.hpp"
#include "purcellsim/simulator.hpp"
#include "purcellsim/timetag.hpp"
#include "hazard_oracle.hpp"
#include "support.hpp"

using namespace purcellsim;
using namespace hazard_oracle;

namespace {

SimScenario single_ion_scenario(double purcell, std::uint64_t cycles) {
  SimScenario sc;
  sc.cavity.lambda0_nm = 1534.064;
  sc.cavity.q_factor = 1e5;
  sc.ensemble.diffusion_rate_mhz_per_sqrt_min = 0;
  sc.ions = {ion_at_cavity_offset(0, 0.0, purcell, sc.ensemble, sc.cavity)};
  sc.n_cycles = cycles;
  return sc;
}

}  // namespace

TEST_CASE("count-rate budget") {
  DetectionChain chain;
  CHECK(count_rate_budget(chain, 0.63, 20e-6) == doctest::Approx(236.25).epsilon(1e-12));
  CHECK(expected_count_rate(chain, 10e-6, 10e-6, 20e-6) ==
        doctest::Approx(0.5 * (1 - std::exp(-1.0)) * 0.5 * 0.1 * 0.6 * 0.5 / 20e-6).epsilon(1e-12));
  CHECK(expected_count_rate(chain, 10e-6, 1e-15, 20e-6) < 1e-6);
  DetectionChain better = chain;
  better.fiber_chip = 0.5;
  const double r = count_rate_budget(better, 0.63, 20e-6);
  CHECK(r == doctest::Approx(5 * 236.25).epsilon(1e-12));
  CHECK(r > 1000);
  CHECK(r < 1200);
  CHECK(decay_probability(10e-6, 10e-6) == doctest::Approx(1 - std::exp(-1.0)));

  DetectionChain bad = chain;
  bad.fiber_chip = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = chain;
  bad.dark_count_hz = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("excitation_probability") {
  CHECK(excitation_probability(0.5, 0.0, 30e6, 1.0) == 0.5);
  CHECK(excitation_probability(0.5, 15e6, 30e6, 1.0) == doctest::Approx(0.25));
  CHECK(excitation_probability(0.5, -15e6, 30e6, 1.0) == doctest::Approx(0.25));
  CHECK(excitation_probability(0.5, 1e12, 30e6, 1.0) < 1e-8);
  CHECK_THROWS_AS(excitation_probability(0.5, 0.0, 30e6, 0.0), ArgumentError);
  LaserSettings l;
  CHECK(l.p_max(0.5) == 0.5);
  l.saturated = false;
  l.saturation_parameter = 1;
  CHECK(l.p_max(0.5) == 0.25);
}

TEST_CASE("sample_decay_time: constant hazard is exponential") {
  DecayModel m;
  m.baseline_rate = 1e5;  // 10 µs
  const PulseSequence seq = build_sequence(presets::lifetime(200.0));
  const HazardProfile hz(seq, m);
  CHECK(hz.is_constant());
  const auto t = draw(hz, 1.0, 100000, 1);
  const double d = testsupport::ks_statistic(t, [](double x) { return 1 - std::exp(-(x - 1.0) / 10.0); });
  CHECK(d < 0.01);

  // Doubling the rate halves the mean (both far inside the period).
  DecayModel m2 = m;
  m2.baseline_rate = 2e5;
  const auto t2 = draw(HazardProfile(seq, m2), 1.0, 100000, 2);
  auto mean_rel = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x - 1.0;
    return s / double(v.size());
  };
  CHECK(mean_rel(t2) == doctest::Approx(mean_rel(t) / 2).epsilon(0.02));
}

TEST_CASE("sample_decay_time: survival through a detuned storage delay") {
  CavityModel cav;
  cav.lambda0_nm = 1534.064;
  cav.q_factor = 1e5;
  const DecayModel m = make_decay_model(400.0, 249.0, 400.0, 0.0, cav);
  for (double bw : {0.0, 1.0}) {
    const double delay = 500;
    SequenceSpec spec = presets::storage_retrieval(delay, 80.0);
    spec.amplifier_bandwidth_mhz = bw;
    const PulseSequence seq = build_sequence(spec);
    const HazardProfile hz(seq, m);
    const auto t = draw(hz, 1.0, 200000, 3);
    const double survived = double(t.end() - std::lower_bound(t.begin(), t.end(), 1.0 + delay)) / double(t.size());
    double expected;
    if (bw == 0) {
      expected = std::exp(-m.rate_at_voltage(80.0) * delay * 1e-6);
    } else {
      const auto c = cdf_oracle(seq, m, 1.0, {1.0 + delay});
      expected = 1 - c[0];
    }
    CAPTURE(bw);
    CHECK(survived == doctest::Approx(expected).epsilon(0.01));
  }
}

TEST_CASE("hazard sampler matches the analytic survival on every preset waveform") {
  const auto cases = preset_hazards();
  REQUIRE(cases.size() > 10);
  for (const HazardCase& hc : cases) {
    const HazardProfile hz(hc.seq, hc.model);
    const double t0 = hc.seq.pump_windows().front().stop_us;
    const auto t = draw(hz, t0, 100000, 11);
    const auto cdf = cdf_oracle(hc.seq, hc.model, t0, t);
    const double d = ks_against(t, cdf);
    CAPTURE(hc.name);
    CHECK(d < 0.01);
  }
}

TEST_CASE("hazard inversion agrees with thinning") {
  CavityModel cav;
  cav.lambda0_nm = 1534.064;
  cav.q_factor = 1e5;
  cav.response_exponent = 2;
  const DecayModel m = make_decay_model(400.0, 249.0, 400.0, 0.0, cav);
  for (const SequenceSpec& spec : {presets::emission_shaping(), presets::storage_retrieval(20.0, 10.0)}) {
    const PulseSequence seq = build_sequence(spec);
    const HazardProfile hz(seq, m);
    auto inv = draw(hz, 1.0, 100000, 21);
    std::mt19937_64 rng(22);
    std::vector<double> thin;
    for (int i = 0; i < 100000; ++i)
      thin.push_back(testsupport::thinning_sample(
          [&](double t) { return rate_oracle(seq, m, t) * 1e-6; }, m.max_rate() * 1e-6, 1.0, seq.period_us(), rng));
    // Censored draws compare equal at +inf.
    for (double& x : inv)
      if (!std::isfinite(x)) x = 1e300;
    for (double& x : thin)
      if (!std::isfinite(x)) x = 1e300;
    CHECK(testsupport::ks_two_sample(inv, thin) < 0.01);
  }
}

TEST_CASE("HazardProfile cumulative and inverse are consistent") {
  CavityModel cav;
  cav.lambda0_nm = 1534.064;
  cav.q_factor = 1e5;
  const DecayModel m = make_decay_model(400.0, 249.0, 400.0, 0.0, cav);
  const PulseSequence seq = build_sequence(presets::emission_shaping());
  const HazardProfile hz(seq, m);
  const auto c = cdf_oracle(seq, m, 0.0, {5.0, 21.0, 22.0, 60.0, 99.0});
  const double pts[] = {5.0, 21.0, 22.0, 60.0, 99.0};
  for (int i = 0; i < 5; ++i) CHECK(1 - std::exp(-hz.cumulative(pts[i])) == doctest::Approx(c[std::size_t(i)]).epsilon(1e-8));
  for (double t0 : {1.0, 10.0, 21.5}) {
    for (double target : {0.01, 0.3, 1.0, 2.0}) {
      const auto t = hz.invert(t0, target);
      if (!t) {
        CHECK(hz.total() - hz.cumulative(t0) < target);
        continue;
      }
      CHECK(hz.cumulative(*t) - hz.cumulative(t0) == doctest::Approx(target).epsilon(1e-9));
    }
  }
}

TEST_CASE("single on-resonance ion: detected rate vs the budget") {
  // P = 249 gives a 10 µs lifetime.
  const SimScenario sc = single_ion_scenario(249.0, 1000000);
  const TimeTagStream s = run_scenario(sc);
  std::size_t signal = 0;
  for (const TimeTag& t : s.events) signal += t.channel == Channel::signal;
  const double rate = double(signal) / (double(sc.n_cycles) * 20e-6);
  const double budget = expected_count_rate(sc.chain, 10e-6, 10e-6, 20e-6);
  CHECK(std::abs(rate - budget) / budget < 0.10);
}

TEST_CASE("stationary excitation carry-over: Markov-chain oracle") {
  // Long-lived ion (no cavity coupling) pumped every 20 µs, detected on all
  // channels: excitations survive across cycles.
  SimScenario sc = single_ion_scenario(0.0, 2000000);
  sc.chain.cavity_channel_only = false;
  sc.chain.fiber_chip = 1;
  sc.chain.component_loss = 1;
  sc.chain.detector_efficiency = 1;
  sc.chain.dark_count_hz = 0;
  const TimeTagStream s = run_scenario(sc);
  const double g = 400.0, period = 20e-6, p = 0.5;
  const double q = std::exp(-g * period);
  const double pi = p / (1 - q + p * q);  // excited at pump end
  const double per_cycle = pi * (std::exp(-g * 0.0) - std::exp(-g * 10e-6)) * sc.chain.collection_efficiency();
  const double expected = per_cycle * double(sc.n_cycles);
  CHECK(std::abs(double(s.events.size()) - expected) < 4 * std::sqrt(expected));
}

TEST_CASE("zero ions: pure dark counts") {
  SimScenario sc;
  sc.n_cycles = 2000000;
  const TimeTagStream s = run_scenario(sc);
  const double gate_time = double(sc.n_cycles) * 10e-6;
  const double expected = 20.0 * gate_time;
  CHECK(std::abs(double(s.events.size()) - expected) < 4 * std::sqrt(expected));
  for (const TimeTag& t : s.events) CHECK(t.channel == Channel::dark);
}

TEST_CASE("stream invariants: sorted, inside gates, at most one photon per cycle") {
  SimScenario sc = single_ion_scenario(249.0, 300000);
  sc.chain.fiber_chip = 1;
  sc.chain.component_loss = 1;
  sc.chain.detector_efficiency = 1;
  sc.chain.coupling_ratio = 1;
  sc.chain.dark_count_hz = 0;
  const TimeTagStream s = run_scenario(sc);
  CHECK_NOTHROW(s.validate());
  std::map<std::uint64_t, int> per_cycle;
  for (const TimeTag& t : s.events) {
    CHECK(s.in_gate(t.t_ns));
    ++per_cycle[t.cycle];
  }
  int worst = 0;
  for (const auto& [c, n] : per_cycle) worst = std::max(worst, n);
  CHECK(worst <= 1);
  CHECK(s.events.size() > 50000);
}

TEST_CASE("chain linearity: halving the detector efficiency halves the counts") {
  SimScenario sc = single_ion_scenario(249.0, 1000000);
  sc.chain.dark_count_hz = 0;
  const double full = double(run_scenario(sc).events.size());
  sc.chain.detector_efficiency /= 2;
  sc.seed = 2;
  const double half = double(run_scenario(sc).events.size());
  CHECK(std::abs(half - full / 2) < 4 * std::sqrt(full / 4 + half));
}

TEST_CASE("determinism: identical streams for any execution mode and thread count") {
  RunConfig c = preset("fig3c");
  c.cycles = 20000;
  SimScenario sc = build_scenario(c);
  sc.laser.detuning_hz = 31e6;
  const TimeTagStream ref = run_scenario(sc, Execution::serial);
  for (int threads : {1, 2, 3, 8}) {
    CAPTURE(threads);
    CHECK(run_scenario(sc, Execution::parallel, threads) == ref);
  }
  std::stringstream a, b;
  write_timetags_binary(a, ref);
  write_timetags_binary(b, run_scenario(sc, Execution::parallel, 4));
  CHECK(a.str() == b.str());
  sc.seed += 1;
  CHECK_FALSE(run_scenario(sc, Execution::serial) == ref);
}

TEST_CASE("scenario validation") {
  SimScenario sc;
  sc.n_cycles = 0;
  CHECK_THROWS_AS(run_scenario(sc), ValidationError);
  sc = SimScenario{};
  SequenceSpec two = presets::g2_timebin();
  two.pump_windows = {{0, 0.5}, {12, 13}};
  sc.sequence = build_sequence(two);
  CHECK_THROWS_AS(run_scenario(sc), ValidationError);
  sc = SimScenario{};
  SequenceSpec hv = presets::storage_retrieval(10.0, 800.0);
  sc.sequence = build_sequence(hv);
  sc.ions = {IonRecord{}};
  CHECK_THROWS_AS(run_scenario(sc), BreakdownError);
}

TEST_CASE("time-tag CSV and binary round trips") {
  SimScenario sc = single_ion_scenario(249.0, 20000);
  TimeTagStream s = run_scenario(sc);
  s.metadata["note"] = "round trip";
  REQUIRE(!s.events.empty());
  for (TagFormat f : {TagFormat::csv, TagFormat::binary}) {
    std::stringstream ss;
    write_timetags(ss, s, f);
    const TimeTagStream back = read_timetags(ss, "rt");
    CHECK(back == s);
  }
  TimeTagStream empty = s;
  empty.events.clear();
  std::stringstream e;
  write_timetags_binary(e, empty);
  CHECK(read_timetags(e) == empty);
}

TEST_CASE("time-tag parse errors carry line numbers and byte offsets") {
  SimScenario sc = single_ion_scenario(249.0, 5000);
  const TimeTagStream s = run_scenario(sc);
  std::stringstream csv;
  write_timetags_csv(csv, s);
  std::string text = csv.str();
  // Break the first data row.
  const auto header_end = text.find("cycle_index,channel,t_ns\n");
  REQUIRE(header_end != std::string::npos);
  const std::size_t row = header_end + std::string("cycle_index,channel,t_ns\n").size();
  std::size_t line_no = 1 + std::size_t(std::count(text.begin(), text.begin() + long(row), '\n'));
  text.replace(row, text.find(',', row) - row, "x");
  std::stringstream bad(text);
  try {
    read_timetags(bad, "broken.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == line_no);
    CHECK(std::string(e.what()).find("broken.csv") != std::string::npos);
  }

  std::stringstream bin;
  write_timetags_binary(bin, s);
  std::string bytes = bin.str();
  bytes.resize(bytes.size() - 5);
  std::stringstream trunc(bytes);
  CHECK_THROWS_AS(read_timetags(trunc, "t.pstt"), ParseError);
  bytes = bin.str();
  bytes[4] = 9;  // version
  std::stringstream ver(bytes);
  try {
    read_timetags(ver, "v.pstt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);  // byte offset of the version field
  }
}
