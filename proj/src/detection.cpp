#include "purcellsim/detection.hpp"

#include <cmath>

#include "purcellsim/errors.hpp"

namespace purcellsim {

void DetectionChain::validate() const {
  for (double f : {p_excited, coupling_ratio, fiber_chip, component_loss, detector_efficiency}) {
    if (!(f >= 0 && f <= 1)) throw ValidationError("detection chain factors must lie in [0, 1]");
  }
  if (!(dark_count_hz >= 0)) throw ValidationError("dark count rate must be >= 0");
}

double decay_probability(double t1_s, double gate_s) {
  if (!(t1_s > 0) || gate_s < 0) throw ArgumentError("decay_probability: need T1 > 0, gate >= 0");
  return -std::expm1(-gate_s / t1_s);
}

double count_rate_budget(const DetectionChain& chain, double p_decay, double period_s) {
  if (!(period_s > 0)) throw ArgumentError("count_rate_budget: period must be positive");
  return chain.p_excited * p_decay * chain.collection_efficiency() / period_s;
}

double expected_count_rate(const DetectionChain& chain, double t1_s, double gate_s,
                           double period_s) {
  return count_rate_budget(chain, decay_probability(t1_s, gate_s), period_s);
}

double excitation_probability(double p_max, double laser_minus_ion_hz, double linewidth_hz,
                              double pump_duration_us) {
  if (!(pump_duration_us > 0)) throw ArgumentError("pump duration must be positive");
  if (!(linewidth_hz > 0)) throw ArgumentError("excitation linewidth must be positive");
  const double x = 2.0 * laser_minus_ion_hz / linewidth_hz;
  return p_max / (1.0 + x * x);
}

double stationary_photons_per_cycle(double decay_rate_per_s, double p_exc,
                                    const PulseSequence& seq, double collection_efficiency) {
  if (seq.pump_windows().size() != 1)
    throw ArgumentError("stationary rate needs exactly one pump window");
  const double pump_end = seq.pump_windows().front().stop_us;
  const double g = decay_rate_per_s * 1e-6;  // per µs
  // Excited at pump end: fresh excitation of a ground ion, or an excitation
  // that survived the whole previous period.
  const double survive_period = std::exp(-g * seq.period_us());
  const double excited = p_exc / (1.0 - survive_period * (1.0 - p_exc));
  double in_gates = 0;
  for (const Window& w : seq.detector_windows()) {
    if (w.start_us < pump_end) throw ArgumentError("detector window precedes the pump end");
    in_gates += std::exp(-g * (w.start_us - pump_end)) - std::exp(-g * (w.stop_us - pump_end));
  }
  return excited * in_gates * collection_efficiency;
}

}  // namespace purcellsim
