#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "purcellsim/cavity.hpp"
#include "purcellsim/detection.hpp"
#include "purcellsim/ensemble.hpp"
#include "purcellsim/pulse.hpp"
#include "purcellsim/timetag.hpp"

namespace purcellsim {

struct LaserSettings {
  double detuning_hz = 0;  // laser minus the cavity resonance at 0 V
  bool saturated = true;
  // Unsaturated pumping scales the excited-state probability by s/(1+s).
  double saturation_parameter = 1.0;

  double p_max(double p_excited) const {
    return saturated ? p_excited : p_excited * saturation_parameter / (1.0 + saturation_parameter);
  }
  bool operator==(const LaserSettings&) const = default;
};

struct SimScenario {
  std::string label = "custom";
  CavityModel cavity;
  EnsembleConfig ensemble;  // linewidths, lifetimes, spectral diffusion
  std::vector<IonRecord> ions;
  PulseSequence sequence = build_sequence(presets::g2_timebin());
  DetectionChain chain;
  LaserSettings laser;
  std::uint64_t n_cycles = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

// Ion frequency relative to the cavity resonance at 0 V, Hz.
double ion_cavity_offset_hz(const IonRecord& ion, const EnsembleConfig& cfg,
                            const CavityModel& cavity);

// Ion with its frequency placed `offset_hz` from the cavity resonance at 0 V.
IonRecord ion_at_cavity_offset(std::uint64_t id, double offset_hz, double purcell_factor,
                               const EnsembleConfig& cfg, const CavityModel& cavity);

enum class Execution { serial, parallel };

// Ions are simulated independently in fixed blocks, each with its own
// engine, and merged in a fixed order: the stream is identical for any
// execution mode or thread count. threads <= 0 uses the OpenMP default.
TimeTagStream run_scenario(const SimScenario& scenario, Execution mode = Execution::parallel,
                           int threads = 0);

inline constexpr std::size_t kIonsPerBlock = 64;
inline constexpr std::uint64_t kDarkCyclesPerBlock = 65536;

}  // namespace purcellsim
