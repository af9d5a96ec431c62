#pragma once

#include <iosfwd>
#include <vector>

#include "purcellsim/cavity.hpp"

namespace purcellsim {

// Half-open interval [start, stop) within one repetition period, µs. Time
// zero is the rising edge of the pump.
struct Window {
  double start_us = 0;
  double stop_us = 0;

  double duration_us() const { return stop_us - start_us; }
  bool contains(double t_us) const { return t_us >= start_us && t_us < stop_us; }
  bool operator==(const Window&) const = default;
};

struct VoltageSegment {
  double start_us = 0;
  double stop_us = 0;
  double volts = 0;

  bool operator==(const VoltageSegment&) const = default;
};

// Unvalidated description of a sequence. Voltage outside all segments is 0 V.
struct SequenceSpec {
  double period_us = 20.0;
  std::vector<Window> pump_windows;
  std::vector<Window> detector_windows;
  std::vector<VoltageSegment> voltage_segments;
  double amplifier_bandwidth_mhz = 1.0;  // <= 0 means an ideal amplifier

  bool operator==(const SequenceSpec&) const = default;
};

// Stretch of the filtered voltage between two target changes:
// v(t) = target + (initial - target)·exp(-(t - start)/τ).
struct VoltagePiece {
  double start_us = 0;
  double stop_us = 0;
  double target_v = 0;
  double initial_v = 0;
};

class PulseSequence {
 public:
  const SequenceSpec& spec() const { return spec_; }
  double period_us() const { return spec_.period_us; }
  const std::vector<Window>& pump_windows() const { return spec_.pump_windows; }
  const std::vector<Window>& detector_windows() const { return spec_.detector_windows; }
  const std::vector<VoltageSegment>& voltage_segments() const { return spec_.voltage_segments; }

  bool ideal_amplifier() const { return !(spec_.amplifier_bandwidth_mhz > 0); }
  // τ = 1/(2π·BW) in µs; 0 for an ideal amplifier.
  double time_constant_us() const { return tau_us_; }

  // Filtered voltage over one period in its periodic steady state; pieces
  // tile [0, period).
  const std::vector<VoltagePiece>& voltage_pieces() const { return pieces_; }
  bool has_voltage() const { return !spec_.voltage_segments.empty(); }
  double gate_duration_us() const;

  bool operator==(const PulseSequence& o) const { return spec_ == o.spec_; }

 private:
  friend PulseSequence build_sequence(const SequenceSpec& spec);
  SequenceSpec spec_;
  double tau_us_ = 0;
  std::vector<VoltagePiece> pieces_;
};

// Validates and sorts the windows; ValidationError on overlap, windows
// outside [0, period), or pump/detector overlap.
PulseSequence build_sequence(const SequenceSpec& spec);

// Single-pole low-pass response of the amplifier to the piecewise-constant
// target, evaluated exactly. ArgumentError for t outside [0, period).
double voltage_at(const PulseSequence& seq, double t_us);

// Cavity-minus-ion detuning (Hz) at time t. The ion frequency is an offset
// from the cavity resonance at 0 V.
double cavity_detuning_at(const PulseSequence& seq, const CavityModel& cavity,
                          double ion_offset_hz, double t_us);

bool gate_open(const PulseSequence& seq, double t_us);

namespace presets {

// 1 µs pump, 10 µs gate right after it, 20 µs period.
SequenceSpec g2_timebin();

// Pump, then a detuning bias held for hold_us while the gate is open, then
// retune: emission is suppressed and released as a burst.
SequenceSpec emission_shaping(double bias_v = 40.0, double hold_us = 20.0, double gate_us = 80.0,
                              double period_us = 100.0);

// Storage and retrieval: pump on resonance, detune by `volts` for `delay_us`,
// retune and collect for gate_us; tail_us of idle time closes the period.
SequenceSpec storage_retrieval(double delay_us, double volts, double gate_us = 50.0,
                               double tail_us = 10.0);

// Long-gate lifetime measurement: pump, then collect until the period ends.
SequenceSpec lifetime(double period_us, double gate_start_us = 1.0);

}  // namespace presets

// CSV timeline (t_us,pump,gate,target_v,voltage_v) sampled every step_us.
void render_sequence_csv(std::ostream& os, const PulseSequence& seq, double step_us);

}  // namespace purcellsim
