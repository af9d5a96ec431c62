#pragma once

#include "purcellsim/pulse.hpp"

namespace purcellsim {

// Factors between an excited ion and a registered count.
struct DetectionChain {
  double p_excited = 0.5;       // maximum excited-state probability after an incoherent pump
  double coupling_ratio = 0.5;  // cavity to waveguide
  double fiber_chip = 0.1;      // single-side fiber-to-chip
  double component_loss = 0.6;  // circulator, fibers
  double detector_efficiency = 0.5;
  double dark_count_hz = 20.0;
  // Only photons emitted into the cavity mode reach the detector. Off for
  // measurements collected straight from a waveguide.
  bool cavity_channel_only = true;

  void validate() const;
  // Probability that an emitted photon is registered.
  double collection_efficiency() const {
    return coupling_ratio * fiber_chip * component_loss * detector_efficiency;
  }

  bool operator==(const DetectionChain&) const = default;
};

// 1 - exp(-gate/T1).
double decay_probability(double t1_s, double gate_s);

// N = P_e · P_decay · P_cav-wg · P_fiber-chip · P_loss · η / T_rep with an
// explicit decay probability.
double count_rate_budget(const DetectionChain& chain, double p_decay, double period_s);

// Same budget with P_decay = 1 - exp(-gate/T1).
double expected_count_rate(const DetectionChain& chain, double t1_s, double gate_s,
                           double period_s);

// P_e = p_max · L(δ) with L a unit-peak Lorentzian of FWHM linewidth_hz,
// δ the laser-minus-ion detuning. Saturated incoherent pumping: the pump
// duration only has to be positive.
double excitation_probability(double p_max, double laser_minus_ion_hz, double linewidth_hz,
                              double pump_duration_us);

// Mean detected photons per cycle from one ion with a constant decay rate,
// excited with probability p_exc at the end of the single pump window when
// it is in the ground state, and carrying unfinished excitations into the
// next cycle. Detector windows must start after the pump ends.
double stationary_photons_per_cycle(double decay_rate_per_s, double p_exc,
                                    const PulseSequence& seq, double collection_efficiency);

}  // namespace purcellsim
