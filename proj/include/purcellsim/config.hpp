#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "purcellsim/cavity.hpp"
#include "purcellsim/detection.hpp"
#include "purcellsim/ensemble.hpp"
#include "purcellsim/mode_profile.hpp"
#include "purcellsim/pulse.hpp"
#include "purcellsim/simulator.hpp"
#include "purcellsim/timetag.hpp"

namespace purcellsim {

enum class Experiment {
  budget,           // detection-chain arithmetic only
  cavity_scan,      // reflection spectrum + Lorentzian fit
  lifetime,         // decay histograms + exponential fits, one run per arm
  inhomogeneous,    // ensemble emission spectrum + Gaussian fit
  spectrum,         // excitation spectrum across the cavity
  g2,               // time-tag run + pulsed g2
  timetrace,        // time-tag run + arrival-time histogram
  storage,          // retrieved emission versus storage delay per voltage
  spectrum_storage, // excitation spectra without and with a storage delay
  purcell,          // Purcell-factor distribution over the mode
};

enum class IonSource {
  ensemble,   // sampled from the inhomogeneous distribution and the mode
  single,     // one target ion, optionally with calibrated background ions
  identical,  // `count` copies of the target ion
};

struct ProfileConfig {
  std::string path;  // empty: calibrated analytic profile
  double v_mode_um3 = 0.55;
  double v_eff_um3 = 2.0;
  MaterialConstants material;

  bool operator==(const ProfileConfig&) const = default;
};

struct IonsConfig {
  IonSource source = IonSource::ensemble;
  double target_offset_mhz = 0;  // target ion minus cavity resonance at 0 V
  double target_purcell = 249.0;
  std::int64_t count = 1;  // identical ions
  // Weakly coupled ions detuned from the laser so that, together with the
  // gated dark counts, the background reaches background_hz.
  std::int64_t background_ions = 0;
  double background_purcell = 10.0;
  double background_hz = 0;
  // > 0: scale the component loss so the target ion yields this rate.
  double signal_hz = 0;

  bool operator==(const IonsConfig&) const = default;
};

struct SequenceConfig {
  std::string label = "g2_timebin";
  SequenceSpec spec = presets::g2_timebin();

  bool operator==(const SequenceConfig&) const = default;
};

struct LifetimeConfig {
  std::vector<std::string> arm_names{"cavity", "waveguide"};
  std::vector<double> arm_purcell{177.57, 0.0};
  std::vector<double> arm_period_us{100.0, 15000.0};
  // "cavity": only cavity-mode photons are detected; "waveguide": all.
  std::vector<std::string> arm_collection{"cavity", "waveguide"};
  std::int64_t ions_per_arm = 200;
  std::int64_t bins = 100;

  bool operator==(const LifetimeConfig&) const = default;
};

struct SpectrumConfig {
  double center_mhz = 0;  // laser grid center relative to the cavity at 0 V
  double span_mhz = 2000;
  std::int64_t points = 201;
  // spectrum_storage: second pass with this delay and voltage
  double storage_delay_us = 100;
  double storage_voltage_v = 80;
  double threshold = 3.0;  // peak threshold over the median floor

  bool operator==(const SpectrumConfig&) const = default;
};

struct StorageConfig {
  std::vector<double> voltages_v{0, 10, 80};
  std::vector<double> max_delay_us{50, 1300, 14000};  // about 5 lifetimes each
  std::int64_t delay_points = 15;
  double gate_us = 50;
  double tail_us = 10;

  bool operator==(const StorageConfig&) const = default;
};

struct InhomogeneousConfig {
  double span_ghz = 800;
  std::int64_t points = 161;
  std::int64_t ions = 200000;
  double counts_per_ion = 5.0;  // mean detected counts per ion over the scan

  bool operator==(const InhomogeneousConfig&) const = default;
};

struct CavityScanConfig {
  double span_ghz = 10;
  std::int64_t points = 201;
  double noise_fraction = 0.01;  // multiplicative Gaussian noise

  bool operator==(const CavityScanConfig&) const = default;
};

struct PurcellConfig {
  std::vector<double> p_min{0, 25, 50, 75, 100, 150, 200, 250, 300, 350, 400, 450, 500};

  bool operator==(const PurcellConfig&) const = default;
};

struct AnalysisConfig {
  std::int64_t g2_max_offset = 10;
  std::int64_t g2_bootstrap = 0;  // replicates; 0 = counting statistics
  std::int64_t lifetime_bins = 100;
  double timetrace_bin_us = 1.0;

  bool operator==(const AnalysisConfig&) const = default;
};

struct OutputConfig {
  TagFormat format = TagFormat::csv;
  bool timetags = true;

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  std::string preset = "custom";
  std::uint64_t seed = 1;
  Experiment experiment = Experiment::g2;
  std::uint64_t cycles = 100000;
  std::int64_t threads = 0;

  CavityModel cavity;
  EnsembleConfig ensemble;
  ProfileConfig profile;
  DetectionChain chain;
  LaserSettings laser;
  IonsConfig ions;
  SequenceConfig sequence;
  LifetimeConfig lifetime;
  SpectrumConfig spectrum;
  StorageConfig storage;
  InhomogeneousConfig inhomogeneous;
  CavityScanConfig cavity_scan;
  PurcellConfig purcell;
  AnalysisConfig analysis;
  OutputConfig output;

  // ValidationError on inconsistent values (units, ranges, list lengths).
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

const char* experiment_name(Experiment e);

// Key/value text with [section] headers and unit-suffixed keys. Unknown
// sections or keys are rejected with a ParseError.
RunConfig parse_config(std::istream& is, const std::string& source = "<stream>");
RunConfig load_config(const std::string& path);
void print_config(std::ostream& os, const RunConfig& c);
std::string config_text(const RunConfig& c);

// FNV-1a over the printed configuration, as 16 hex digits.
std::string config_digest(const RunConfig& c);

struct PresetInfo {
  std::string name;
  std::string description;
};

const std::vector<PresetInfo>& preset_catalog();
// ArgumentError listing the options for an unknown name.
RunConfig preset(const std::string& name);

// Scenario with ions built from the configuration (calibrations applied).
SimScenario build_scenario(const RunConfig& c);
ModeProfile build_profile(const ProfileConfig& p);

}  // namespace purcellsim
