#include "purcellsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "purcellsim/errors.hpp"
#include "purcellsim/hazard.hpp"
#include "purcellsim/report.hpp"

namespace purcellsim {

namespace {

// --- value formatting -------------------------------------------------------

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : "nan";
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

struct BadValue {
  std::string what;
};

double to_double(const std::string& s) {
  double v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) throw BadValue{"expected a number, got '" + s + "'"};
  return v;
}

template <typename T>
T to_integer(const std::string& s) {
  T v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw BadValue{"expected an integer, got '" + s + "'"};
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::string doubles_text(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ", ") + fmt(x);
  return out;
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> v;
  for (const std::string& item : split(s, ',')) v.push_back(to_double(item));
  return v;
}

std::string strings_text(const std::vector<std::string>& v) {
  std::string out;
  for (const std::string& x : v) out += (out.empty() ? "" : ", ") + x;
  return out;
}

std::string windows_text(const std::vector<Window>& ws) {
  std::string out;
  for (const Window& w : ws) out += (out.empty() ? "" : "; ") + fmt(w.start_us) + ":" + fmt(w.stop_us);
  return out;
}

std::vector<Window> to_windows(const std::string& s) {
  std::vector<Window> out;
  for (const std::string& item : split(s, ';')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw BadValue{"expected start:stop, got '" + item + "'"};
    out.push_back({to_double(parts[0]), to_double(parts[1])});
  }
  return out;
}

std::string segments_text(const std::vector<VoltageSegment>& vs) {
  std::string out;
  for (const VoltageSegment& v : vs)
    out += (out.empty() ? "" : "; ") + fmt(v.start_us) + ":" + fmt(v.stop_us) + ":" + fmt(v.volts);
  return out;
}

std::vector<VoltageSegment> to_segments(const std::string& s) {
  std::vector<VoltageSegment> out;
  for (const std::string& item : split(s, ';')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3) throw BadValue{"expected start:stop:volts, got '" + item + "'"};
    out.push_back({to_double(parts[0]), to_double(parts[1]), to_double(parts[2])});
  }
  return out;
}

constexpr std::pair<Experiment, const char*> kExperimentNames[] = {
    {Experiment::budget, "budget"},
    {Experiment::cavity_scan, "cavity_scan"},
    {Experiment::lifetime, "lifetime"},
    {Experiment::inhomogeneous, "inhomogeneous"},
    {Experiment::spectrum, "spectrum"},
    {Experiment::g2, "g2"},
    {Experiment::timetrace, "timetrace"},
    {Experiment::storage, "storage"},
    {Experiment::spectrum_storage, "spectrum_storage"},
    {Experiment::purcell, "purcell"},
};

constexpr std::pair<IonSource, const char*> kIonSourceNames[] = {
    {IonSource::ensemble, "ensemble"},
    {IonSource::single, "single"},
    {IonSource::identical, "identical"},
};

template <typename E, std::size_t N>
E enum_from(const std::pair<E, const char*> (&table)[N], const std::string& s) {
  std::string options;
  for (const auto& [e, name] : table) {
    if (s == name) return e;
    options += (options.empty() ? "" : "|") + std::string(name);
  }
  throw BadValue{"expected one of " + options + ", got '" + s + "'"};
}

template <typename E, std::size_t N>
const char* enum_name(const std::pair<E, const char*> (&table)[N], E e) {
  for (const auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

// --- field registry ---------------------------------------------------------

struct Field {
  std::string section, key;
  std::function<std::string(const RunConfig&)> print;
  std::function<void(RunConfig&, const std::string&)> parse;
};

template <typename T, typename Get>
Field make_field(std::string section, std::string key, Get get,
                 std::function<std::string(const T&)> out, std::function<T(const std::string&)> in) {
  return {std::move(section), std::move(key),
          [get, out](const RunConfig& c) { return out(get(const_cast<RunConfig&>(c))); },
          [get, in](RunConfig& c, const std::string& v) { get(c) = in(v); }};
}

template <typename Get>
Field num(std::string s, std::string k, Get g) {
  return make_field<double>(std::move(s), std::move(k), g, fmt, to_double);
}
template <typename Get>
Field i64(std::string s, std::string k, Get g) {
  return make_field<std::int64_t>(
      std::move(s), std::move(k), g, [](const std::int64_t& v) { return std::to_string(v); },
      to_integer<std::int64_t>);
}
template <typename Get>
Field u64(std::string s, std::string k, Get g) {
  return make_field<std::uint64_t>(
      std::move(s), std::move(k), g, [](const std::uint64_t& v) { return std::to_string(v); },
      to_integer<std::uint64_t>);
}
template <typename Get>
Field flag(std::string s, std::string k, Get g) {
  return make_field<bool>(
      std::move(s), std::move(k), g, [](const bool& v) { return std::string(v ? "true" : "false"); },
      to_bool);
}
template <typename Get>
Field text(std::string s, std::string k, Get g) {
  return make_field<std::string>(
      std::move(s), std::move(k), g, [](const std::string& v) { return v; },
      [](const std::string& v) { return v; });
}
template <typename Get>
Field nums(std::string s, std::string k, Get g) {
  return make_field<std::vector<double>>(std::move(s), std::move(k), g, doubles_text, to_doubles);
}

#define PS_REF(expr) [](RunConfig & c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(text("run", "preset", PS_REF(preset)));
    f.push_back(u64("run", "seed", PS_REF(seed)));
    f.push_back(make_field<Experiment>(
        "run", "experiment", PS_REF(experiment),
        [](const Experiment& e) { return std::string(experiment_name(e)); },
        [](const std::string& s) { return enum_from(kExperimentNames, s); }));
    f.push_back(u64("run", "cycles", PS_REF(cycles)));
    f.push_back(i64("run", "threads", PS_REF(threads)));

    f.push_back(num("cavity", "lambda0_nm", PS_REF(cavity.lambda0_nm)));
    f.push_back(num("cavity", "q_factor", PS_REF(cavity.q_factor)));
    f.push_back(num("cavity", "extinction_db", PS_REF(cavity.extinction_db)));
    f.push_back(num("cavity", "coupling_ratio", PS_REF(cavity.coupling_ratio)));
    f.push_back(num("cavity", "tuning_rate_pm_per_v", PS_REF(cavity.tuning_rate_pm_per_v)));
    f.push_back(num("cavity", "max_voltage_v", PS_REF(cavity.max_voltage_v)));
    f.push_back(num("cavity", "response_exponent", PS_REF(cavity.response_exponent)));

    f.push_back(num("ensemble", "center_wavelength_nm", PS_REF(ensemble.center_wavelength_nm)));
    f.push_back(num("ensemble", "fwhm_ghz", PS_REF(ensemble.fwhm_ghz)));
    f.push_back(num("ensemble", "number_density_per_cm3", PS_REF(ensemble.number_density_per_cm3)));
    f.push_back(num("ensemble", "coupling_volume_um3", PS_REF(ensemble.coupling_volume_um3)));
    f.push_back(i64("ensemble", "ion_count", PS_REF(ensemble.ion_count)));
    f.push_back(num("ensemble", "homogeneous_linewidth_mhz", PS_REF(ensemble.homogeneous_linewidth_mhz)));
    f.push_back(num("ensemble", "drift_broadening_mhz", PS_REF(ensemble.drift_broadening_mhz)));
    f.push_back(num("ensemble", "diffusion_rate_mhz_per_sqrt_min",
                    PS_REF(ensemble.diffusion_rate_mhz_per_sqrt_min)));
    f.push_back(num("ensemble", "diffusion_bound_mhz", PS_REF(ensemble.diffusion_bound_mhz)));
    f.push_back(num("ensemble", "diffusion_step_s", PS_REF(ensemble.diffusion_step_s)));
    f.push_back(num("ensemble", "waveguide_lifetime_ms", PS_REF(ensemble.waveguide_lifetime_ms)));
    f.push_back(num("ensemble", "baseline_rate_multiplier", PS_REF(ensemble.baseline_rate_multiplier)));
    f.push_back(num("ensemble", "window_kappas", PS_REF(ensemble.window_kappas)));

    f.push_back(text("profile", "path", PS_REF(profile.path)));
    f.push_back(num("profile", "v_mode_um3", PS_REF(profile.v_mode_um3)));
    f.push_back(num("profile", "v_eff_um3", PS_REF(profile.v_eff_um3)));
    f.push_back(num("profile", "refractive_index", PS_REF(profile.material.refractive_index)));
    f.push_back(num("profile", "local_field_correction", PS_REF(profile.material.local_field_correction)));
    f.push_back(num("profile", "branching_ratio", PS_REF(profile.material.branching_ratio)));

    f.push_back(num("chain", "p_excited", PS_REF(chain.p_excited)));
    f.push_back(num("chain", "coupling_ratio", PS_REF(chain.coupling_ratio)));
    f.push_back(num("chain", "fiber_chip", PS_REF(chain.fiber_chip)));
    f.push_back(num("chain", "component_loss", PS_REF(chain.component_loss)));
    f.push_back(num("chain", "detector_efficiency", PS_REF(chain.detector_efficiency)));
    f.push_back(num("chain", "dark_count_hz", PS_REF(chain.dark_count_hz)));
    f.push_back(flag("chain", "cavity_channel_only", PS_REF(chain.cavity_channel_only)));

    f.push_back(make_field<double>(
        "laser", "detuning_mhz", PS_REF(laser.detuning_hz),
        [](const double& v) { return fmt(v * 1e-6); },
        [](const std::string& s) { return to_double(s) * 1e6; }));
    f.push_back(flag("laser", "saturated", PS_REF(laser.saturated)));
    f.push_back(num("laser", "saturation_parameter", PS_REF(laser.saturation_parameter)));

    f.push_back(make_field<IonSource>(
        "ions", "source", PS_REF(ions.source),
        [](const IonSource& e) { return std::string(enum_name(kIonSourceNames, e)); },
        [](const std::string& s) { return enum_from(kIonSourceNames, s); }));
    f.push_back(num("ions", "target_offset_mhz", PS_REF(ions.target_offset_mhz)));
    f.push_back(num("ions", "target_purcell", PS_REF(ions.target_purcell)));
    f.push_back(i64("ions", "count", PS_REF(ions.count)));
    f.push_back(i64("ions", "background_ions", PS_REF(ions.background_ions)));
    f.push_back(num("ions", "background_purcell", PS_REF(ions.background_purcell)));
    f.push_back(num("ions", "background_hz", PS_REF(ions.background_hz)));
    f.push_back(num("ions", "signal_hz", PS_REF(ions.signal_hz)));

    f.push_back(text("sequence", "label", PS_REF(sequence.label)));
    f.push_back(num("sequence", "period_us", PS_REF(sequence.spec.period_us)));
    f.push_back(make_field<std::vector<Window>>("sequence", "pump_windows_us",
                                                PS_REF(sequence.spec.pump_windows), windows_text,
                                                to_windows));
    f.push_back(make_field<std::vector<Window>>("sequence", "gate_windows_us",
                                                PS_REF(sequence.spec.detector_windows),
                                                windows_text, to_windows));
    f.push_back(make_field<std::vector<VoltageSegment>>(
        "sequence", "voltage_segments_us_v", PS_REF(sequence.spec.voltage_segments),
        segments_text, to_segments));
    f.push_back(num("sequence", "amplifier_bandwidth_mhz", PS_REF(sequence.spec.amplifier_bandwidth_mhz)));

    f.push_back(make_field<std::vector<std::string>>(
        "lifetime", "arm_names", PS_REF(lifetime.arm_names), strings_text,
        [](const std::string& s) { return split(s, ','); }));
    f.push_back(nums("lifetime", "arm_purcell", PS_REF(lifetime.arm_purcell)));
    f.push_back(nums("lifetime", "arm_period_us", PS_REF(lifetime.arm_period_us)));
    f.push_back(make_field<std::vector<std::string>>(
        "lifetime", "arm_collection", PS_REF(lifetime.arm_collection), strings_text,
        [](const std::string& s) { return split(s, ','); }));
    f.push_back(i64("lifetime", "ions_per_arm", PS_REF(lifetime.ions_per_arm)));
    f.push_back(i64("lifetime", "bins", PS_REF(lifetime.bins)));

    f.push_back(num("spectrum", "center_mhz", PS_REF(spectrum.center_mhz)));
    f.push_back(num("spectrum", "span_mhz", PS_REF(spectrum.span_mhz)));
    f.push_back(i64("spectrum", "points", PS_REF(spectrum.points)));
    f.push_back(num("spectrum", "storage_delay_us", PS_REF(spectrum.storage_delay_us)));
    f.push_back(num("spectrum", "storage_voltage_v", PS_REF(spectrum.storage_voltage_v)));
    f.push_back(num("spectrum", "threshold", PS_REF(spectrum.threshold)));

    f.push_back(nums("storage", "voltages_v", PS_REF(storage.voltages_v)));
    f.push_back(nums("storage", "max_delay_us", PS_REF(storage.max_delay_us)));
    f.push_back(i64("storage", "delay_points", PS_REF(storage.delay_points)));
    f.push_back(num("storage", "gate_us", PS_REF(storage.gate_us)));
    f.push_back(num("storage", "tail_us", PS_REF(storage.tail_us)));

    f.push_back(num("inhomogeneous", "span_ghz", PS_REF(inhomogeneous.span_ghz)));
    f.push_back(i64("inhomogeneous", "points", PS_REF(inhomogeneous.points)));
    f.push_back(i64("inhomogeneous", "ions", PS_REF(inhomogeneous.ions)));
    f.push_back(num("inhomogeneous", "counts_per_ion", PS_REF(inhomogeneous.counts_per_ion)));

    f.push_back(num("cavity_scan", "span_ghz", PS_REF(cavity_scan.span_ghz)));
    f.push_back(i64("cavity_scan", "points", PS_REF(cavity_scan.points)));
    f.push_back(num("cavity_scan", "noise_fraction", PS_REF(cavity_scan.noise_fraction)));

    f.push_back(nums("purcell", "p_min", PS_REF(purcell.p_min)));

    f.push_back(i64("analysis", "g2_max_offset", PS_REF(analysis.g2_max_offset)));
    f.push_back(i64("analysis", "g2_bootstrap", PS_REF(analysis.g2_bootstrap)));
    f.push_back(i64("analysis", "lifetime_bins", PS_REF(analysis.lifetime_bins)));
    f.push_back(num("analysis", "timetrace_bin_us", PS_REF(analysis.timetrace_bin_us)));

    f.push_back(make_field<TagFormat>(
        "output", "format", PS_REF(output.format),
        [](const TagFormat& t) { return std::string(t == TagFormat::csv ? "csv" : "binary"); },
        [](const std::string& s) {
          if (s == "csv") return TagFormat::csv;
          if (s == "binary") return TagFormat::binary;
          throw BadValue{"expected csv|binary, got '" + s + "'"};
        }));
    f.push_back(flag("output", "timetags", PS_REF(output.timetags)));
    return f;
  }();
  return table;
}

#undef PS_REF

}  // namespace

const char* experiment_name(Experiment e) { return enum_name(kExperimentNames, e); }

void print_config(std::ostream& os, const RunConfig& c) {
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    os << f.key << " = " << f.print(c) << '\n';
  }
}

std::string config_text(const RunConfig& c) {
  std::ostringstream os;
  print_config(os, c);
  return os.str();
}

RunConfig parse_config(std::istream& is, const std::string& source) {
  std::map<std::pair<std::string, std::string>, const Field*> index;
  for (const Field& f : fields()) index[{f.section, f.key}] = &f;
  std::map<std::string, bool> sections;
  for (const Field& f : fields()) sections[f.section] = true;

  RunConfig c;
  std::string section, line;
  std::size_t lineno = 0;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, lineno, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ParseError(source, lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    if (section.empty()) throw ParseError(source, lineno, "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = index.find({section, key});
    if (it == index.end()) throw ParseError(source, lineno, "unknown key '" + key + "' in [" + section + "]");
    if (auto prev = seen.find({section, key}); prev != seen.end())
      throw ParseError(source, lineno, "duplicate key '" + key + "' (first on line " +
                                           std::to_string(prev->second) + ")");
    seen[{section, key}] = lineno;
    try {
      it->second->parse(c, value);
    } catch (const BadValue& e) {
      throw ParseError(source, lineno, section + "." + key + ": " + e.what);
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_config(in, path);
}

std::string config_digest(const RunConfig& c) { return fnv1a_hex(config_text(c)); }

void RunConfig::validate() const {
  cavity.validate();
  ensemble.validate();
  chain.validate();
  build_sequence(sequence.spec);
  if (cycles < 1) throw ValidationError("run.cycles must be >= 1");
  if (threads < 0) throw ValidationError("run.threads must be >= 0");
  if (!(profile.v_mode_um3 > 0) || !(profile.v_eff_um3 > 0))
    throw ValidationError("profile volumes must be positive");
  if (!(profile.material.refractive_index > 0) || !(profile.material.local_field_correction > 0) ||
      !(profile.material.branching_ratio > 0 && profile.material.branching_ratio <= 1))
    throw ValidationError("profile material constants out of range");
  if (!laser.saturated && !(laser.saturation_parameter > 0))
    throw ValidationError("laser.saturation_parameter must be > 0");
  if (ions.count < 1 || ions.background_ions < 0) throw ValidationError("ions counts out of range");
  if (ions.target_purcell < 0 || ions.background_purcell < 0 || ions.background_hz < 0 ||
      ions.signal_hz < 0)
    throw ValidationError("ions: rates and Purcell factors must be >= 0");
  if (lifetime.arm_names.size() != lifetime.arm_purcell.size() ||
      lifetime.arm_names.size() != lifetime.arm_period_us.size() ||
      lifetime.arm_names.size() != lifetime.arm_collection.size() || lifetime.arm_names.empty())
    throw ValidationError("lifetime: arm lists must have equal, nonzero length");
  for (const std::string& a : lifetime.arm_collection)
    if (a != "cavity" && a != "waveguide")
      throw ValidationError("lifetime.arm_collection entries must be cavity or waveguide");
  for (double p : lifetime.arm_period_us)
    if (!(p > 1.0)) throw ValidationError("lifetime: arm periods must exceed the 1 µs pump");
  if (lifetime.ions_per_arm < 1 || lifetime.bins < 3) throw ValidationError("lifetime: counts out of range");
  if (spectrum.points < 2 || !(spectrum.span_mhz > 0) || !(spectrum.threshold > 0))
    throw ValidationError("spectrum: need points >= 2, span > 0 and threshold > 0");
  if (!(spectrum.storage_delay_us > 0)) throw ValidationError("spectrum.storage_delay_us must be > 0");
  if (storage.voltages_v.size() != storage.max_delay_us.size() || storage.voltages_v.empty())
    throw ValidationError("storage: voltages_v and max_delay_us must have equal length");
  if (storage.delay_points < 3 || !(storage.gate_us > 0) || storage.tail_us < 0)
    throw ValidationError("storage: need delay_points >= 3, gate > 0, tail >= 0");
  for (double d : storage.max_delay_us)
    if (!(d > 0)) throw ValidationError("storage: max delays must be positive");
  for (double v : storage.voltages_v) eo_detuning(cavity, v);
  if (inhomogeneous.points < 5 || inhomogeneous.ions < 1 || !(inhomogeneous.span_ghz > 0) ||
      !(inhomogeneous.counts_per_ion > 0))
    throw ValidationError("inhomogeneous: values out of range");
  if (cavity_scan.points < 5 || !(cavity_scan.span_ghz > 0) || cavity_scan.noise_fraction < 0)
    throw ValidationError("cavity_scan: values out of range");
  if (!std::is_sorted(purcell.p_min.begin(), purcell.p_min.end()) || purcell.p_min.empty())
    throw ValidationError("purcell.p_min must be a nonempty ascending list");
  if (analysis.g2_max_offset < 0 || analysis.g2_bootstrap < 0 || analysis.lifetime_bins < 3 ||
      !(analysis.timetrace_bin_us > 0))
    throw ValidationError("analysis: values out of range");
}

// --- presets ----------------------------------------------------------------

namespace {

constexpr double kFig3bNm = 1533.274;  // cavity inside the dense part of the line
constexpr double kFig3cNm = 1534.064;  // cavity in the tail: isolated ions

RunConfig base(const std::string& name, Experiment e) {
  RunConfig c;
  c.preset = name;
  c.experiment = e;
  return c;
}

// Single well-coupled ion on resonance with the cavity: 10 µs lifetime on
// top of the 2.5 ms waveguide baseline.
void single_ion(RunConfig& c) {
  c.ions.source = IonSource::single;
  c.ions.target_offset_mhz = 0;
  c.ions.target_purcell = lifetime_to_purcell(2.5e-3, 10e-6);
  c.laser.detuning_hz = 0;
}

void tail_cavity(RunConfig& c) {
  c.cavity.lambda0_nm = kFig3cNm;
  c.cavity.q_factor = 1e5;
}

// Storage-era cavity: steeper detuning response and the measured 2.82 ms
// detuned lifetime.
void storage_cavity(RunConfig& c) {
  tail_cavity(c);
  c.cavity.response_exponent = 2.0;
  c.ensemble.baseline_rate_multiplier = 2.5 / 2.82;
}

}  // namespace

const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> cat{
      {"fig2a", "cavity reflection spectrum with Lorentzian fit (Q = 1.58e5)"},
      {"fig2c", "decay in the cavity (14 us) and in the waveguide (2.5 ms)"},
      {"fig3a", "inhomogeneous emission line with Gaussian fit (FWHM 160 GHz)"},
      {"fig3b", "excitation spectrum, cavity 162 GHz from the line center: continuous"},
      {"fig3c", "excitation spectrum, cavity 263 GHz from the line center: single ions"},
      {"fig3d", "pulsed g2 of one ion, 160 Hz signal over 40 Hz background"},
      {"fig4b", "emission shaping with a detuning pulse"},
      {"fig4d", "storage lifetime versus voltage (0, 10, 80 V)"},
      {"fig4e", "single-ion spectra right after the pump and after 100 us storage"},
      {"figS3", "distribution of Purcell factors over the mode"},
      {"eqS4", "single-ion count-rate budget (236 Hz)"},
  };
  return cat;
}

RunConfig preset(const std::string& name) {
  if (name == "fig2a") {
    RunConfig c = base(name, Experiment::cavity_scan);
    return c;
  }
  if (name == "fig2c") {
    RunConfig c = base(name, Experiment::lifetime);
    c.ions.source = IonSource::identical;
    c.cycles = 100000;
    c.sequence.label = "lifetime";
    c.sequence.spec = presets::lifetime(100.0);
    c.ensemble.diffusion_rate_mhz_per_sqrt_min = 0;
    return c;
  }
  if (name == "fig3a") {
    RunConfig c = base(name, Experiment::inhomogeneous);
    c.ensemble.window_kappas = 0;
    return c;
  }
  if (name == "fig3b" || name == "fig3c") {
    RunConfig c = base(name, Experiment::spectrum);
    c.cavity.lambda0_nm = name == "fig3b" ? kFig3bNm : kFig3cNm;
    c.cavity.q_factor = 1e5;
    c.cycles = name == "fig3b" ? 20000 : 100000;
    c.spectrum.points = name == "fig3b" ? 81 : 201;
    return c;
  }
  if (name == "fig3d") {
    RunConfig c = base(name, Experiment::g2);
    tail_cavity(c);
    single_ion(c);
    c.ions.signal_hz = 160;
    c.ions.background_hz = 40;
    c.ions.background_ions = 20;
    c.ensemble.diffusion_rate_mhz_per_sqrt_min = 0;  // laser kept on the ion
    c.cycles = 100000000;
    c.analysis.g2_max_offset = 10;
    c.output.format = TagFormat::binary;
    return c;
  }
  if (name == "fig4b") {
    RunConfig c = base(name, Experiment::timetrace);
    storage_cavity(c);
    single_ion(c);
    c.cycles = 1000000;
    c.sequence.label = "emission_shaping";
    c.sequence.spec = presets::emission_shaping();
    return c;
  }
  if (name == "fig4d") {
    RunConfig c = base(name, Experiment::storage);
    storage_cavity(c);
    single_ion(c);
    c.ensemble.diffusion_rate_mhz_per_sqrt_min = 0;
    c.cycles = 1000000;
    c.output.timetags = false;
    return c;
  }
  if (name == "fig4e") {
    RunConfig c = base(name, Experiment::spectrum_storage);
    storage_cavity(c);
    c.cycles = 50000;
    c.spectrum.points = 201;
    c.output.timetags = false;
    return c;
  }
  if (name == "figS3") {
    RunConfig c = base(name, Experiment::purcell);
    c.output.timetags = false;
    return c;
  }
  if (name == "eqS4") {
    RunConfig c = base(name, Experiment::budget);
    c.output.timetags = false;
    return c;
  }
  std::string options;
  for (const PresetInfo& p : preset_catalog()) options += (options.empty() ? "" : ", ") + p.name;
  throw ArgumentError("unknown preset '" + name + "'; options: " + options);
}

// --- scenario construction --------------------------------------------------

ModeProfile build_profile(const ProfileConfig& p) {
  if (!p.path.empty()) return load_mode_profile(p.path);
  return ModeProfile::calibrated(p.v_mode_um3, p.v_eff_um3, p.material);
}

namespace {

double stationary_rate_hz(const SimScenario& sc, const IonRecord& ion) {
  const double offset = ion_cavity_offset_hz(ion, sc.ensemble, sc.cavity);
  const DecayModel m = make_decay_model(ion.baseline_rate_per_s(), ion.purcell_factor,
                                        sc.ensemble.radiative_rate_per_s(), offset, sc.cavity);
  const Window& pump = sc.sequence.pump_windows().front();
  const double p = excitation_probability(sc.laser.p_max(sc.chain.p_excited),
                                          sc.laser.detuning_hz - offset,
                                          sc.ensemble.effective_linewidth_mhz() * 1e6,
                                          pump.duration_us());
  const double gamma = m.rate_at_voltage(0.0);
  const double share = sc.chain.cavity_channel_only ? 1.0 - m.baseline_rate / gamma : 1.0;
  return stationary_photons_per_cycle(gamma, p, sc.sequence, sc.chain.collection_efficiency() * share) /
         (sc.sequence.period_us() * 1e-6);
}

// Detuning from the laser at which one background ion yields `target_hz`.
double background_detuning_hz(const SimScenario& sc, double purcell, double side, double target_hz) {
  auto rate = [&](double delta) {
    IonRecord ion = ion_at_cavity_offset(0, sc.laser.detuning_hz + side * delta, purcell,
                                         sc.ensemble, sc.cavity);
    return stationary_rate_hz(sc, ion);
  };
  if (rate(0.0) < target_hz)
    throw ValidationError("ions: background ions are too weak to reach background_hz");
  double lo = 0, hi = 1e6;
  while (rate(hi) > target_hz) {
    hi *= 2;
    if (hi > 1e13) throw ValidationError("ions: cannot calibrate background ions");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-9 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > target_hz ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SimScenario build_scenario(const RunConfig& c) {
  c.validate();
  SimScenario sc;
  sc.label = c.preset;
  sc.cavity = c.cavity;
  sc.ensemble = c.ensemble;
  sc.ensemble.seed = c.seed;
  sc.chain = c.chain;
  sc.laser = c.laser;
  sc.sequence = build_sequence(c.sequence.spec);
  sc.n_cycles = c.cycles;
  sc.seed = c.seed;

  switch (c.ions.source) {
    case IonSource::ensemble:
      sc.ions = sample_ensemble(sc.ensemble, build_profile(c.profile), sc.cavity);
      break;
    case IonSource::identical:
      for (std::int64_t i = 0; i < c.ions.count; ++i)
        sc.ions.push_back(ion_at_cavity_offset(std::uint64_t(i), c.ions.target_offset_mhz * 1e6,
                                               c.ions.target_purcell, sc.ensemble, sc.cavity));
      break;
    case IonSource::single: {
      const IonRecord target = ion_at_cavity_offset(0, c.ions.target_offset_mhz * 1e6,
                                                    c.ions.target_purcell, sc.ensemble, sc.cavity);
      sc.ions.push_back(target);
      if (c.ions.signal_hz > 0 || c.ions.background_ions > 0) {
        if (sc.sequence.has_voltage())
          throw ValidationError("ions: rate calibration needs a sequence without voltage");
        if (sc.sequence.pump_windows().size() != 1)
          throw ValidationError("ions: rate calibration needs exactly one pump window");
      }
      if (c.ions.signal_hz > 0) {
        const double natural = stationary_rate_hz(sc, target);
        const double loss = sc.chain.component_loss * c.ions.signal_hz / natural;
        if (!(loss <= 1)) throw ValidationError("ions: signal_hz exceeds what the chain can deliver");
        sc.chain.component_loss = loss;
      }
      if (c.ions.background_ions > 0) {
        const double gated_dark =
            sc.chain.dark_count_hz * sc.sequence.gate_duration_us() / sc.sequence.period_us();
        const double per_ion = (c.ions.background_hz - gated_dark) / double(c.ions.background_ions);
        if (!(per_ion > 0))
          throw ValidationError("ions: background_hz must exceed the gated dark-count rate");
        for (std::int64_t i = 0; i < c.ions.background_ions; ++i) {
          const double side = i % 2 == 0 ? 1.0 : -1.0;
          const double delta = background_detuning_hz(sc, c.ions.background_purcell, side, per_ion);
          sc.ions.push_back(ion_at_cavity_offset(std::uint64_t(i + 1),
                                                 sc.laser.detuning_hz + side * delta,
                                                 c.ions.background_purcell, sc.ensemble, sc.cavity));
        }
      }
      break;
    }
  }
  sc.validate();
  return sc;
}

}  // namespace purcellsim
