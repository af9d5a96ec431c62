#include "purcellsim/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "purcellsim/errors.hpp"
#include "purcellsim/units.hpp"

namespace purcellsim {

namespace {

void check_channel(std::vector<Window>& windows, double period, const char* name) {
  for (const Window& w : windows) {
    if (!(w.start_us >= 0 && w.stop_us > w.start_us && w.stop_us <= period)) {
      throw ValidationError(std::string(name) + " window [" + std::to_string(w.start_us) + ", " +
                            std::to_string(w.stop_us) + ") is not inside [0, period)");
    }
  }
  std::sort(windows.begin(), windows.end(),
            [](const Window& a, const Window& b) { return a.start_us < b.start_us; });
  for (std::size_t i = 1; i < windows.size(); ++i) {
    if (windows[i].start_us < windows[i - 1].stop_us)
      throw ValidationError(std::string(name) + " windows overlap");
  }
}

double target_at(const std::vector<VoltageSegment>& segs, double t) {
  for (const VoltageSegment& s : segs)
    if (t >= s.start_us && t < s.stop_us) return s.volts;
  return 0.0;
}

}  // namespace

double PulseSequence::gate_duration_us() const {
  double total = 0;
  for (const Window& w : spec_.detector_windows) total += w.duration_us();
  return total;
}

PulseSequence build_sequence(const SequenceSpec& spec) {
  if (!(spec.period_us > 0)) throw ValidationError("sequence: period must be positive");
  PulseSequence seq;
  seq.spec_ = spec;
  SequenceSpec& s = seq.spec_;
  check_channel(s.pump_windows, s.period_us, "pump");
  check_channel(s.detector_windows, s.period_us, "detector");
  for (const Window& p : s.pump_windows) {
    for (const Window& d : s.detector_windows) {
      if (p.start_us < d.stop_us && d.start_us < p.stop_us)
        throw ValidationError("sequence: detector gate overlaps a pump window");
    }
  }

  for (const VoltageSegment& v : s.voltage_segments) {
    if (!(v.start_us >= 0 && v.stop_us > v.start_us && v.stop_us <= s.period_us))
      throw ValidationError("sequence: voltage segment outside [0, period)");
    if (!std::isfinite(v.volts)) throw ValidationError("sequence: voltage must be finite");
  }
  std::sort(s.voltage_segments.begin(), s.voltage_segments.end(),
            [](const VoltageSegment& a, const VoltageSegment& b) { return a.start_us < b.start_us; });
  for (std::size_t i = 1; i < s.voltage_segments.size(); ++i) {
    if (s.voltage_segments[i].start_us < s.voltage_segments[i - 1].stop_us)
      throw ValidationError("sequence: voltage segments overlap");
  }

  seq.tau_us_ = seq.ideal_amplifier() ? 0.0 : 1.0 / (2.0 * units::kPi * s.amplifier_bandwidth_mhz);

  // Breakpoints of the target waveform; gaps are 0 V.
  std::vector<double> cuts{0.0, s.period_us};
  for (const VoltageSegment& v : s.voltage_segments) {
    cuts.push_back(v.start_us);
    cuts.push_back(v.stop_us);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<VoltagePiece> pieces;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    pieces.push_back({cuts[i], cuts[i + 1], target_at(s.voltage_segments, mid), 0.0});
  }
  // Merge neighbours with equal targets.
  std::vector<VoltagePiece> merged;
  for (const VoltagePiece& p : pieces) {
    if (!merged.empty() && merged.back().target_v == p.target_v)
      merged.back().stop_us = p.stop_us;
    else
      merged.push_back(p);
  }

  if (seq.ideal_amplifier()) {
    for (VoltagePiece& p : merged) p.initial_v = p.target_v;
  } else {
    // Propagate from v(0) = 0, then shift to the periodic steady state:
    // v(T) = e^{-T/τ} v(0) + F  =>  v(0) = F / (1 - e^{-T/τ}).
    auto propagate = [&](double v0) {
      double v = v0;
      for (VoltagePiece& p : merged) {
        p.initial_v = v;
        const double decay = std::exp(-(p.stop_us - p.start_us) / seq.tau_us_);
        v = p.target_v + (v - p.target_v) * decay;
      }
      return v;
    };
    const double forced = propagate(0.0);
    const double leak = std::exp(-s.period_us / seq.tau_us_);
    propagate(leak < 1.0 ? forced / (1.0 - leak) : 0.0);
  }
  seq.pieces_ = std::move(merged);
  return seq;
}

double voltage_at(const PulseSequence& seq, double t_us) {
  if (!(t_us >= 0 && t_us < seq.period_us()))
    throw ArgumentError("voltage_at: t outside [0, period)");
  const auto& pieces = seq.voltage_pieces();
  auto it = std::upper_bound(pieces.begin(), pieces.end(), t_us,
                             [](double t, const VoltagePiece& p) { return t < p.stop_us; });
  if (it == pieces.end()) --it;
  if (seq.ideal_amplifier()) return it->target_v;
  return it->target_v +
         (it->initial_v - it->target_v) * std::exp(-(t_us - it->start_us) / seq.time_constant_us());
}

double cavity_detuning_at(const PulseSequence& seq, const CavityModel& cavity,
                          double ion_offset_hz, double t_us) {
  return eo_detuning(cavity, voltage_at(seq, t_us)) - ion_offset_hz;
}

bool gate_open(const PulseSequence& seq, double t_us) {
  for (const Window& w : seq.detector_windows())
    if (w.contains(t_us)) return true;
  return false;
}

namespace presets {

SequenceSpec g2_timebin() {
  SequenceSpec s;
  s.period_us = 20.0;
  s.pump_windows = {{0.0, 1.0}};
  s.detector_windows = {{1.0, 11.0}};
  return s;
}

SequenceSpec emission_shaping(double bias_v, double hold_us, double gate_us, double period_us) {
  SequenceSpec s;
  s.period_us = period_us;
  s.pump_windows = {{0.0, 1.0}};
  s.detector_windows = {{1.0, 1.0 + gate_us}};
  if (bias_v != 0.0 && hold_us > 0) s.voltage_segments = {{1.0, 1.0 + hold_us, bias_v}};
  return s;
}

SequenceSpec storage_retrieval(double delay_us, double volts, double gate_us, double tail_us) {
  SequenceSpec s;
  const double retune = 1.0 + delay_us;
  s.period_us = retune + gate_us + tail_us;
  s.pump_windows = {{0.0, 1.0}};
  s.detector_windows = {{retune, retune + gate_us}};
  if (delay_us > 0 && volts != 0.0) s.voltage_segments = {{1.0, retune, volts}};
  return s;
}

SequenceSpec lifetime(double period_us, double gate_start_us) {
  SequenceSpec s;
  s.period_us = period_us;
  s.pump_windows = {{0.0, 1.0}};
  s.detector_windows = {{gate_start_us, period_us}};
  return s;
}

}  // namespace presets

void render_sequence_csv(std::ostream& os, const PulseSequence& seq, double step_us) {
  if (!(step_us > 0)) throw ArgumentError("render step must be positive");
  os << "t_us,pump,gate,target_v,voltage_v\n";
  const auto n = static_cast<std::size_t>(std::ceil(seq.period_us() / step_us));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) * step_us;
    if (t >= seq.period_us()) break;
    bool pump = false;
    for (const Window& w : seq.pump_windows()) pump = pump || w.contains(t);
    double target = 0;
    for (const VoltageSegment& v : seq.voltage_segments())
      if (t >= v.start_us && t < v.stop_us) target = v.volts;
    os << t << ',' << int(pump) << ',' << int(gate_open(seq, t)) << ',' << target << ','
       << voltage_at(seq, t) << '\n';
  }
}

}  // namespace purcellsim
