#include "purcellsim/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "purcellsim/errors.hpp"
#include "purcellsim/experiments.hpp"
#include "purcellsim/fitting.hpp"
#include "purcellsim/g2.hpp"
#include "purcellsim/hazard.hpp"
#include "purcellsim/purcell.hpp"
#include "purcellsim/units.hpp"

namespace purcellsim {

namespace fs = std::filesystem;

void Table::write_csv(std::ostream& os) const {
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
}

const Table& RunArtifacts::table(const std::string& name) const {
  for (const Table& t : tables)
    if (t.name == name) return t;
  throw ArgumentError("no table named '" + name + "'");
}

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  Engine e = make_engine(seed, Stream::noise, index);
  return e();
}

void add_fit(Report& r, const std::string& prefix, const FitResult& f) {
  r.add(prefix + ".model", fit_model_name(f.model));
  for (const auto* list : {&f.params, &f.derived}) {
    for (const FitParameter& p : *list) {
      r.add(prefix + "." + p.name, p.value);
      r.add(prefix + "." + p.name + "_sigma", p.sigma);
    }
  }
  r.add(prefix + ".reduced_chi2", f.reduced_chi2);
  r.add(prefix + ".converged", f.converged);
  r.add(prefix + ".message", f.message);
}

double rate_per_s(const TimeTagStream& s, std::size_t counts, double period_us) {
  return double(counts) / (double(s.n_cycles) * period_us * 1e-6);
}

// Analyses shared by simulate and analyze.
void analyze_into(RunArtifacts& out, const TimeTagStream& s, const RunConfig& c,
                  bool with_lifetime) {
  Report& r = out.report;
  std::size_t dark = 0;
  for (const TimeTag& t : s.events) dark += t.channel == Channel::dark;
  const double period_us = s.period_ns * 1e-3;
  r.add("stream.cycles", static_cast<unsigned long long>(s.n_cycles));
  r.add("stream.events", s.events.size());
  r.add("stream.dark_events", dark);
  if (s.n_cycles > 0 && period_us > 0) {
    r.add("stream.rate_hz", rate_per_s(s, s.events.size(), period_us));
    r.add("stream.signal_rate_hz", rate_per_s(s, s.events.size() - dark, period_us));
    r.add("stream.dark_rate_hz", rate_per_s(s, dark, period_us));
  }

  const BinSeries bins = bin_by_cycle(s);
  try {
    const int k = int(std::min<std::uint64_t>(std::uint64_t(c.analysis.g2_max_offset),
                                               s.n_cycles ? s.n_cycles - 1 : 0));
    G2Options opt;
    opt.bootstrap_replicates = int(c.analysis.g2_bootstrap);
    opt.seed = c.seed;
    const G2Result g = g2_timebin(bins, k, opt);
    r.add("g2.status", "ok");
    r.add("g2.mean_counts_per_cycle", g.mean_counts);
    r.add("g2.zero", g.g2_zero);
    r.add("g2.zero_sigma", g.g2_zero_sigma);
    r.add("g2.zero_coincidences", static_cast<unsigned long long>(g.coincidences[std::size_t(k)]));
    r.add("g2.uncertainty", g.bootstrap ? "bootstrap" : "counting");
    Table t{"g2", {"offset", "g2", "sigma", "coincidences"}, {}};
    for (std::size_t i = 0; i < g.offsets.size(); ++i)
      t.rows.push_back({double(g.offsets[i]), g.g2[i], g.sigma[i], double(g.coincidences[i])});
    out.tables.push_back(std::move(t));
  } catch (const UndefinedEstimate& e) {
    r.add("g2.status", std::string("undefined: ") + e.what());
    out.status = RunStatus::undefined_estimate;
  }

  if (with_lifetime) {
    const std::vector<double> times = arrival_times_us(s);
    double window = 0;
    for (const auto& g : s.gates_ns) window = std::max(window, (g.second - s.gates_ns.front().first) * 1e-3);
    try {
      const FitResult f = fit_lifetime(times, window, 0, std::size_t(c.analysis.lifetime_bins));
      add_fit(r, "arrival_fit", f);
    } catch (const ArgumentError& e) {
      r.add("arrival_fit.status", std::string("undefined: ") + e.what());
      out.status = RunStatus::undefined_estimate;
    }
  }
}

void run_budget(RunArtifacts& out, const RunConfig& c) {
  Report& r = out.report;
  const PulseSequence seq = build_sequence(c.sequence.spec);
  const double gamma =
      c.ensemble.baseline_rate_per_ms() * 1e3 + c.ions.target_purcell * c.ensemble.radiative_rate_per_s();
  const double t1 = 1.0 / gamma;
  const double gate = seq.gate_duration_us() * 1e-6;
  const double period = seq.period_us() * 1e-6;
  const double p_decay = decay_probability(t1, gate);
  const double p_quoted = std::round(p_decay * 100.0) / 100.0;
  const double quoted = count_rate_budget(c.chain, p_quoted, period);
  const double exact = expected_count_rate(c.chain, t1, gate, period);
  DetectionChain better = c.chain;
  better.fiber_chip = 0.5;
  const double improved = expected_count_rate(better, t1, gate, period);

  r.add("budget.t1_us", t1 * 1e6);
  r.add("budget.gate_us", gate * 1e6);
  r.add("budget.repetition_rate_hz", 1.0 / period);
  r.add("budget.p_decay", p_decay);
  r.add("budget.p_decay_quoted", p_quoted);
  r.add("budget.count_rate_hz", quoted);
  r.add("budget.count_rate_exact_hz", exact);
  r.add("budget.improved_fiber_chip", better.fiber_chip);
  r.add("budget.improved_count_rate_hz", improved);
  r.add("budget.snr_measured", snr_from_g2(0.38));
  r.add("budget.projected_g2_1000hz_over_dark", g2_from_snr(1000.0 / c.chain.dark_count_hz));
  r.add("budget.projected_g2_improved_over_dark", g2_from_snr(improved / c.chain.dark_count_hz));

  Table t{"budget", {"factor_index", "value"}, {}};
  const double factors[] = {c.chain.p_excited, p_quoted, c.chain.coupling_ratio, c.chain.fiber_chip,
                            c.chain.component_loss, c.chain.detector_efficiency, 1.0 / period, quoted};
  for (std::size_t i = 0; i < std::size(factors); ++i) t.rows.push_back({double(i), factors[i]});
  out.tables.push_back(std::move(t));
  r.add("budget.factors", "p_excited,p_decay,coupling_ratio,fiber_chip,component_loss,detector_efficiency,repetition_rate_hz,count_rate_hz");
}

void run_cavity_scan(RunArtifacts& out, const RunConfig& c) {
  const double half = 0.5 * c.cavity_scan.span_ghz * 1e9;
  const std::vector<double> det = linear_grid(-half, half, std::size_t(c.cavity_scan.points));
  std::vector<double> refl = reflection_spectrum(c.cavity, det);
  Engine rng = make_engine(c.seed, Stream::noise);
  std::normal_distribution<double> noise(0.0, c.cavity_scan.noise_fraction);
  if (c.cavity_scan.noise_fraction > 0)
    for (double& v : refl) v *= 1.0 + noise(rng);
  const FitResult f = fit_lorentzian(det, refl, c.cavity.resonance_hz());
  add_fit(out.report, "cavity_fit", f);
  out.report.add("cavity.q_configured", c.cavity.q_factor);
  out.report.add("cavity.linewidth_ghz", c.cavity.linewidth_hz() * 1e-9);
  const double q = f.value("q_factor");
  out.report.add("cavity.q_relative_error", std::abs(q / c.cavity.q_factor - 1.0));
  Table t{"cavity_scan", {"detuning_ghz", "reflection", "fit"}, {}};
  const double x0 = f.value("center_hz"), w = f.value("fwhm_hz");
  const double a = f.value("amplitude"), b = f.value("baseline");
  for (std::size_t i = 0; i < det.size(); ++i) {
    const double u = 2.0 * (det[i] - x0) / w;
    t.rows.push_back({det[i] * 1e-9, refl[i], b - a / (1.0 + u * u)});
  }
  out.tables.push_back(std::move(t));
}

void run_lifetime(RunArtifacts& out, const RunConfig& c, const RunOptions& opt) {
  for (std::size_t arm = 0; arm < c.lifetime.arm_names.size(); ++arm) {
    RunConfig ac = c;
    ac.ions.source = IonSource::identical;
    ac.ions.count = c.lifetime.ions_per_arm;
    ac.ions.target_purcell = c.lifetime.arm_purcell[arm];
    ac.chain.cavity_channel_only = c.lifetime.arm_collection[arm] == "cavity";
    ac.sequence.label = "lifetime";
    ac.sequence.spec = presets::lifetime(c.lifetime.arm_period_us[arm]);
    ac.seed = sub_seed(c.seed, 100 + arm);
    const SimScenario sc = build_scenario(ac);
    const TimeTagStream s = run_scenario(sc, opt.mode, opt.threads);
    const std::string name = c.lifetime.arm_names[arm];
    const std::string key = "lifetime." + name;
    const double gamma = sc.ions.front().baseline_rate_per_s() +
                         c.lifetime.arm_purcell[arm] * sc.ensemble.radiative_rate_per_s();
    out.report.add(key + ".purcell", c.lifetime.arm_purcell[arm]);
    out.report.add(key + ".expected_us", 1e6 / gamma);
    out.report.add(key + ".events", s.events.size());
    const std::vector<double> times = arrival_times_us(s);
    const double window = sc.sequence.gate_duration_us();
    const FitResult f = fit_lifetime(times, window, 0, std::size_t(c.lifetime.bins));
    add_fit(out.report, key + ".fit", f);
    out.report.add(key + ".lifetime_us", f.value("lifetime"));
    double mean = 0;
    for (double t : times) mean += t;
    const double t_guess = times.empty() ? window : mean / double(times.size());
    const Histogram h = make_histogram(times, 0.0, std::min(5.0 * t_guess, window),
                                       std::size_t(c.lifetime.bins));
    Table t{"lifetime_" + name, {"t_us", "counts", "fit"}, {}};
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      const double x = h.center(i);
      t.rows.push_back({x, h.counts[i],
                        f.value("amplitude") * std::exp(-(x - h.center(0)) / f.value("lifetime")) +
                            f.value("offset")});
    }
    out.tables.push_back(std::move(t));
    if (c.output.timetags) out.streams.emplace_back("timetags_" + name, s);
  }
}

void run_inhomogeneous(RunArtifacts& out, const RunConfig& c) {
  EnsembleConfig e = c.ensemble;
  e.seed = c.seed;
  e.ion_count = c.inhomogeneous.ions;
  e.window_kappas = 0;
  const std::vector<IonRecord> ions = sample_ensemble(e, build_profile(c.profile), c.cavity);
  std::vector<double> f;
  f.reserve(ions.size());
  for (const IonRecord& i : ions) f.push_back(i.center_frequency_ghz);
  const double half = 0.5 * c.inhomogeneous.span_ghz;
  const Histogram h = make_histogram(f, -half, half, std::size_t(c.inhomogeneous.points));
  Engine rng = make_engine(c.seed, Stream::noise, 1);
  std::vector<double> x = h.centers(), y(h.counts.size()), sig(h.counts.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double mean = h.counts[i] * c.inhomogeneous.counts_per_ion;
    y[i] = mean > 0 ? double(std::poisson_distribution<long long>(mean)(rng)) : 0.0;
    sig[i] = std::sqrt(std::max(y[i], 1.0));
  }
  const FitResult fit = fit_gaussian(x, y, sig);
  add_fit(out.report, "inhomogeneous_fit", fit);
  out.report.add("inhomogeneous.fwhm_configured_ghz", c.ensemble.fwhm_ghz);
  out.report.add("inhomogeneous.ions", ions.size());
  Table t{"inhomogeneous", {"detuning_ghz", "wavelength_nm", "counts"}, {}};
  const double nu0 = units::frequency_of_nm(c.ensemble.center_wavelength_nm);
  for (std::size_t i = 0; i < x.size(); ++i)
    t.rows.push_back({x[i], units::kSpeedOfLight / (nu0 + x[i] * 1e9) * 1e9, y[i]});
  out.tables.push_back(std::move(t));
}

Table spectrum_table(const std::string& name, const std::vector<SpectrumPoint>& sp) {
  Table t{name, {"detuning_mhz", "rate_hz", "counts"}, {}};
  for (const SpectrumPoint& p : sp) t.rows.push_back({p.detuning_hz * 1e-6, p.rate_hz, double(p.counts)});
  return t;
}

void add_spectrum_summary(Report& r, const std::string& prefix, const SpectrumSummary& s) {
  r.add(prefix + ".floor_hz", s.floor_hz);
  r.add(prefix + ".min_hz", s.min_hz);
  r.add(prefix + ".max_hz", s.max_hz);
  r.add(prefix + ".contrast", s.contrast);
  r.add(prefix + ".fraction_near_floor", s.fraction_near_floor);
  r.add(prefix + ".peaks", s.peaks.size());
  std::string centers;
  for (const SpectrumPeak& p : s.peaks) centers += (centers.empty() ? "" : ",") + format_number(p.centroid_hz * 1e-6);
  r.add(prefix + ".peak_centers_mhz", centers.empty() ? "none" : centers);
}

std::vector<double> laser_grid(const RunConfig& c) {
  const double lo = (c.spectrum.center_mhz - 0.5 * c.spectrum.span_mhz) * 1e6;
  const double hi = (c.spectrum.center_mhz + 0.5 * c.spectrum.span_mhz) * 1e6;
  return linear_grid(lo, hi, std::size_t(c.spectrum.points));
}

void add_ensemble_info(Report& r, const RunConfig& c, const SimScenario& sc) {
  const double off = cavity_offset_ghz(c.ensemble, c.cavity);
  r.add("ensemble.cavity_offset_ghz", off);
  r.add("ensemble.ions_simulated", sc.ions.size());
  r.add("ensemble.expected_ions_within_linewidth", expected_ions_in_band(c.ensemble, c.cavity, off));
}

void run_spectrum(RunArtifacts& out, const RunConfig& c, const RunOptions& opt) {
  const SimScenario sc = build_scenario(c);
  add_ensemble_info(out.report, c, sc);
  const auto sp = excitation_spectrum(sc, laser_grid(c), opt.mode, opt.threads);
  add_spectrum_summary(out.report, "spectrum", summarize_spectrum(sp, c.spectrum.threshold));
  out.tables.push_back(spectrum_table("spectrum", sp));
}

void run_spectrum_storage(RunArtifacts& out, const RunConfig& c, const RunOptions& opt) {
  SimScenario sc = build_scenario(c);
  add_ensemble_info(out.report, c, sc);
  const std::vector<double> grid = laser_grid(c);
  const double gate = 50.0, tail = 10.0;
  SequenceSpec stored = presets::storage_retrieval(c.spectrum.storage_delay_us,
                                                   c.spectrum.storage_voltage_v, gate, tail);
  SequenceSpec direct;
  direct.period_us = stored.period_us;
  direct.pump_windows = {{0.0, 1.0}};
  direct.detector_windows = {{1.0, 1.0 + gate}};
  direct.amplifier_bandwidth_mhz = stored.amplifier_bandwidth_mhz = c.sequence.spec.amplifier_bandwidth_mhz;

  sc.sequence = build_sequence(direct);
  const auto before = excitation_spectrum(sc, grid, opt.mode, opt.threads);
  sc.sequence = build_sequence(stored);
  sc.seed = sub_seed(c.seed, 200);
  const auto after = excitation_spectrum(sc, grid, opt.mode, opt.threads);
  const SpectrumSummary sb = summarize_spectrum(before, c.spectrum.threshold);
  const SpectrumSummary sa = summarize_spectrum(after, c.spectrum.threshold);
  add_spectrum_summary(out.report, "spectrum_direct", sb);
  add_spectrum_summary(out.report, "spectrum_stored", sa);

  // Pairs of mutually nearest peaks; a peak that faded below threshold in
  // one spectrum stays unmatched instead of pairing with a distant one.
  auto nearest = [](double x, const std::vector<SpectrumPeak>& ps) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ps.size(); ++i)
      if (std::abs(ps[i].centroid_hz - x) < std::abs(ps[best].centroid_hz - x)) best = i;
    return best;
  };
  double worst = 0;
  std::size_t matched = 0;
  if (!sa.peaks.empty()) {
    for (std::size_t i = 0; i < sb.peaks.size(); ++i) {
      const std::size_t j = nearest(sb.peaks[i].centroid_hz, sa.peaks);
      if (nearest(sa.peaks[j].centroid_hz, sb.peaks) != i) continue;
      ++matched;
      worst = std::max(worst, std::abs(sb.peaks[i].centroid_hz - sa.peaks[j].centroid_hz));
    }
  }
  out.report.add("spectrum_storage.matched_peaks", matched);
  out.report.add("spectrum_storage.max_peak_shift_mhz", matched ? worst * 1e-6 : NAN);
  out.report.add("spectrum_storage.drift_scale_mhz", c.ensemble.effective_linewidth_mhz());
  out.tables.push_back(spectrum_table("spectrum_direct", before));
  out.tables.push_back(spectrum_table("spectrum_stored", after));
}

void run_g2(RunArtifacts& out, const RunConfig& c, const RunOptions& opt) {
  const SimScenario sc = build_scenario(c);
  out.report.add("g2.component_loss_calibrated", sc.chain.component_loss);
  out.report.add("g2.ions", sc.ions.size());
  if (c.ions.signal_hz > 0 && c.ions.background_hz > 0) {
    const double snr = c.ions.signal_hz / c.ions.background_hz;
    out.report.add("g2.snr_configured", snr);
    out.report.add("g2.expected_from_snr", g2_from_snr(snr));
  }
  const TimeTagStream s = run_scenario(sc, opt.mode, opt.threads);
  analyze_into(out, s, c, false);
  if (c.output.timetags) out.streams.emplace_back("timetags", s);
}

void run_timetrace(RunArtifacts& out, const RunConfig& c, const RunOptions& opt) {
  const SimScenario sc = build_scenario(c);
  const TimeTagStream s = run_scenario(sc, opt.mode, opt.threads);
  const double period = sc.sequence.period_us();
  const std::size_t nb = std::size_t(std::ceil(period / c.analysis.timetrace_bin_us));
  std::vector<double> t;
  for (const TimeTag& e : s.events) t.push_back(e.t_ns * 1e-3);
  const Histogram h = make_histogram(t, 0.0, double(nb) * c.analysis.timetrace_bin_us, nb);
  Table tab{"timetrace", {"t_us", "counts", "voltage_v"}, {}};
  std::size_t peak = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    const double x = h.center(i);
    tab.rows.push_back({x, h.counts[i], x < period ? voltage_at(sc.sequence, x) : 0.0});
    if (h.counts[i] > h.counts[peak]) peak = i;
  }
  out.report.add("timetrace.events", s.events.size());
  out.report.add("timetrace.peak_us", h.center(peak));
  out.report.add("timetrace.peak_counts", h.counts[peak]);
  out.tables.push_back(std::move(tab));
  if (c.output.timetags) out.streams.emplace_back("timetags", s);
}

void run_storage(RunArtifacts& out, const RunConfig& c, const RunOptions& opt) {
  const SimScenario sc = build_scenario(c);
  if (sc.ions.empty()) throw ValidationError("storage: no ions");
  const IonRecord& ion = sc.ions.front();
  const DecayModel model = make_decay_model(ion.baseline_rate_per_s(), ion.purcell_factor,
                                            sc.ensemble.radiative_rate_per_s(),
                                            ion_cavity_offset_hz(ion, sc.ensemble, sc.cavity), sc.cavity);
  out.report.add("storage.baseline_lifetime_us", 1e6 / ion.baseline_rate_per_s());
  Table t{"storage", {"voltage_v", "delay_us", "counts", "intensity"}, {}};
  double prev = 0;
  bool monotone = true;
  for (std::size_t i = 0; i < c.storage.voltages_v.size(); ++i) {
    const double v = c.storage.voltages_v[i];
    const std::vector<double> delays = linear_grid(0.0, c.storage.max_delay_us[i], std::size_t(c.storage.delay_points));
    SimScenario s = sc;
    s.seed = sub_seed(c.seed, 300 + i);
    const StorageCurve curve = lifetime_vs_delay(s, {v, c.storage.gate_us, c.storage.tail_us}, delays,
                                                 opt.mode, opt.threads);
    const std::string key = "storage." + format_number(v) + "V";
    out.report.add(key + ".lifetime_us", curve.lifetime_us);
    out.report.add(key + ".lifetime_sigma_us", curve.lifetime_sigma_us);
    out.report.add(key + ".model_lifetime_us", 1e6 / model.rate_at_voltage(v));
    out.report.add(key + ".converged", curve.fit.converged);
    for (const StoragePoint& p : curve.points) t.rows.push_back({v, p.delay_us, double(p.counts), p.intensity});
    if (i > 0 && !(curve.lifetime_us > prev)) monotone = false;
    prev = curve.lifetime_us;
  }
  out.report.add("storage.monotone_in_voltage", monotone);
  out.tables.push_back(std::move(t));
}

void run_purcell(RunArtifacts& out, const RunConfig& c) {
  const ModeProfile profile = build_profile(c.profile);
  const PurcellSummary s = summarize_purcell(profile, c.cavity);
  out.report.add("purcell.prefactor_um3", purcell_prefactor_um3(profile.material(), c.cavity));
  out.report.add("purcell.v_mode_um3", s.v_mode_um3);
  out.report.add("purcell.v_eff_um3", s.v_eff_um3);
  out.report.add("purcell.p_max", s.p_max);
  out.report.add("purcell.p_avg", s.p_avg);
  const std::vector<double> frac = purcell_distribution(profile, c.cavity, c.purcell.p_min);
  Table t{"purcell_distribution", {"p_min", "volume_fraction"}, {}};
  for (std::size_t i = 0; i < frac.size(); ++i) t.rows.push_back({c.purcell.p_min[i], frac[i]});
  out.tables.push_back(std::move(t));
}

void header(Report& r, const RunConfig& c) {
  r.add("format", "purcellsim-report 1");
  r.add("software_version", software_version());
  r.add("preset", c.preset);
  r.add("experiment", experiment_name(c.experiment));
  r.add("seed", static_cast<unsigned long long>(c.seed));
  r.add("config_digest", config_digest(c));
}

}  // namespace

RunArtifacts run_config(const RunConfig& c, const RunOptions& options) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunOptions opt = options;
  if (opt.threads <= 0) opt.threads = int(c.threads);
  RunArtifacts out;
  header(out.report, c);
  switch (c.experiment) {
    case Experiment::budget: run_budget(out, c); break;
    case Experiment::cavity_scan: run_cavity_scan(out, c); break;
    case Experiment::lifetime: run_lifetime(out, c, opt); break;
    case Experiment::inhomogeneous: run_inhomogeneous(out, c); break;
    case Experiment::spectrum: run_spectrum(out, c, opt); break;
    case Experiment::g2: run_g2(out, c, opt); break;
    case Experiment::timetrace: run_timetrace(out, c, opt); break;
    case Experiment::storage: run_storage(out, c, opt); break;
    case Experiment::spectrum_storage: run_spectrum_storage(out, c, opt); break;
    case Experiment::purcell: run_purcell(out, c); break;
  }
  out.report.add("status", out.status == RunStatus::ok ? "ok" : "undefined_estimate");
  out.report.set_wall_clock(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return out;
}

RunArtifacts analyze_stream(const TimeTagStream& stream, const RunConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  stream.validate();
  RunArtifacts out;
  header(out.report, c);
  out.report.add("mode", "analyze");
  analyze_into(out, stream, c, true);
  out.report.add("status", out.status == RunStatus::ok ? "ok" : "undefined_estimate");
  out.report.set_wall_clock(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return out;
}

void write_artifacts(const std::string& out_dir, const RunArtifacts& a, const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());

  std::vector<std::pair<fs::path, std::string>> files;  // final name, contents
  auto stage = [&](const std::string& name, const std::string& body) {
    files.emplace_back(fs::path(out_dir) / name, body);
  };
  stage("config.ini", config_text(c));
  for (const Table& t : a.tables) {
    std::ostringstream os;
    t.write_csv(os);
    stage(t.name + ".csv", os.str());
  }
  for (const auto& [stem, s] : a.streams) {
    std::ostringstream os;
    write_timetags(os, s, c.output.format);
    stage(stem + (c.output.format == TagFormat::csv ? ".csv" : ".pstt"), os.str());
  }
  stage("report.txt", a.report.text());

  std::vector<fs::path> temps;
  auto cleanup = [&] {
    for (const fs::path& p : temps) fs::remove(p, ec);
  };
  for (const auto& [path, body] : files) {
    fs::path tmp = path;
    tmp += ".tmp";
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (f) temps.push_back(tmp);  // only remove what this call created
    if (f) f.write(body.data(), std::streamsize(body.size()));
    if (f) f.close();
    if (!f) {
      cleanup();
      throw std::runtime_error("cannot write " + path.string());
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::rename(temps[i], files[i].first, ec);
    if (ec) {
      const std::error_code failed = ec;
      for (std::size_t j = 0; j < i; ++j) fs::remove(files[j].first, ec);
      cleanup();
      ec = failed;
      throw std::runtime_error("cannot rename into " + files[i].first.string() + ": " + ec.message());
    }
  }
}

}  // namespace purcellsim
