#pragma once

#include <optional>
#include <vector>

#include "purcellsim/cavity.hpp"
#include "purcellsim/pulse.hpp"
#include "purcellsim/rng.hpp"

namespace purcellsim {

// Decay rate of one ion as a function of the applied EO voltage.
struct DecayModel {
  double baseline_rate = 400.0;  // 1/s, fully detuned
  double purcell_rate = 0.0;     // 1/s added on resonance
  double kappa_hz = 1.0e9;
  double response_exponent = 1.0;
  double eo_hz_per_volt = 0.0;  // resonance shift per volt
  double ion_offset_hz = 0.0;   // ion minus cavity(0 V) frequency

  double rate_at_voltage(double volts) const {
    return emission_rate_at_detuning(baseline_rate, purcell_rate,
                                     eo_hz_per_volt * volts - ion_offset_hz, kappa_hz,
                                     response_exponent);
  }
  double max_rate() const { return baseline_rate + purcell_rate; }
};

// Decay model for an ion whose Purcell factor scales the radiative rate
// 1/T_wg. Throws BreakdownError if the sequence drives the cavity past its
// voltage guard.
DecayModel make_decay_model(double baseline_rate, double purcell_factor, double radiative_rate,
                            double ion_offset_hz, const CavityModel& cavity);

// Cumulative hazard H(t) = ∫_0^t Γ(s) ds over one period of a sequence.
// Constant-voltage stretches are integrated in closed form; amplifier
// transients are split into short sub-intervals integrated with
// Gauss-Legendre quadrature and inverted with safeguarded Newton steps.
class HazardProfile {
 public:
  HazardProfile(const PulseSequence& seq, const DecayModel& model);

  double period_us() const { return period_us_; }
  bool is_constant() const { return nodes_.size() == 1 && nodes_.front().constant; }
  double rate_at(double t_us) const;  // 1/s
  double cumulative(double t_us) const;
  double total() const { return nodes_.back().h_end; }

  // Smallest t in [t0, period) with H(t) - H(t0) = target, if any.
  std::optional<double> invert(double t0_us, double target) const;

 private:
  struct Node {
    double start = 0, stop = 0;  // µs
    double h_start = 0, h_end = 0;
    bool constant = true;
    double rate = 0;         // constant nodes, 1/µs
    double target_v = 0;     // transient nodes
    double initial_v = 0;
    double piece_start = 0;
  };

  double node_rate(const Node& n, double t) const;  // 1/µs
  double node_integral(const Node& n, double a, double b) const;
  std::size_t find_node(double t_us) const;

  DecayModel model_;
  double period_us_ = 0;
  double tau_us_ = 0;
  std::vector<Node> nodes_;
};

// Emission time within [start, period) for an excitation present at
// `start_us`, drawn by cumulative-hazard inversion; nullopt when the ion
// survives to the end of the period.
std::optional<double> sample_decay_time(const HazardProfile& hazard, double start_us, Engine& rng);

}  // namespace purcellsim
