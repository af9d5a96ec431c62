#pragma once

#include <span>
#include <vector>

#include "purcellsim/fitting.hpp"
#include "purcellsim/simulator.hpp"

namespace purcellsim {

struct SpectrumPoint {
  double detuning_hz = 0;  // laser minus the cavity resonance at 0 V
  double rate_hz = 0;      // detected counts per second of run time
  std::uint64_t counts = 0;
};

// Runs the scenario at each laser detuning. Points are independent runs
// with seeds derived from the template seed and the point index.
std::vector<SpectrumPoint> excitation_spectrum(const SimScenario& scenario,
                                               std::span<const double> laser_detunings_hz,
                                               Execution mode = Execution::parallel,
                                               int threads = 0);

std::vector<double> linear_grid(double lo, double hi, std::size_t n);

struct SpectrumPeak {
  std::size_t index = 0;   // grid index of the maximum
  double centroid_hz = 0;  // background-subtracted centroid of the peak region
  double height_hz = 0;
  double contrast = 0;  // height over the floor
};

struct SpectrumSummary {
  double floor_hz = 0;  // median rate
  double min_hz = 0;
  double max_hz = 0;
  double contrast = 0;            // max / floor
  double fraction_near_floor = 0;  // points below twice the floor
  std::vector<SpectrumPeak> peaks;
};

// Peaks are maximal runs of points above threshold·floor; each contributes
// its maximum and centroid.
SpectrumSummary summarize_spectrum(std::span<const SpectrumPoint> spectrum, double threshold = 3.0);

struct StorageProtocol {
  double volts = 0;
  double gate_us = 50;
  double tail_us = 10;
};

struct StoragePoint {
  double delay_us = 0;
  std::uint64_t counts = 0;
  double intensity = 0;  // counts per cycle
};

struct StorageCurve {
  std::vector<StoragePoint> points;
  FitResult fit;  // exponential in the delay
  double lifetime_us = 0;
  double lifetime_sigma_us = 0;
};

// Retrieved emission versus storage delay for one voltage, with an
// exponential fit across delays. The template's sequence is replaced by the
// storage-and-retrieval sequence at each delay.
StorageCurve lifetime_vs_delay(const SimScenario& scenario, const StorageProtocol& protocol,
                               std::span<const double> delays_us,
                               Execution mode = Execution::parallel, int threads = 0);

// Arrival times (µs) relative to the first gate opening.
std::vector<double> arrival_times_us(const TimeTagStream& stream);

}  // namespace purcellsim
