#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "purcellsim/timetag.hpp"

namespace purcellsim {

// Photon counts per excitation cycle. Stored sparsely: only cycles with at
// least one count are kept, in increasing cycle order.
class BinSeries {
 public:
  BinSeries() = default;
  BinSeries(std::uint64_t n_cycles, double gate_duration_s)
      : n_cycles_(n_cycles), gate_s_(gate_duration_s) {}

  // Adds `count` to a cycle; cycles must be added in nondecreasing order.
  void add(std::uint64_t cycle, std::uint32_t count = 1);

  std::uint64_t n_cycles() const { return n_cycles_; }
  double gate_duration_s() const { return gate_s_; }
  std::uint32_t count(std::uint64_t cycle) const;
  const std::vector<std::pair<std::uint64_t, std::uint32_t>>& nonzero() const { return bins_; }
  std::uint64_t total() const;
  double mean() const;
  std::vector<std::uint32_t> dense() const;

  static BinSeries from_dense(const std::vector<std::uint32_t>& counts, double gate_duration_s);

 private:
  std::uint64_t n_cycles_ = 0;
  double gate_s_ = 0;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> bins_;
};

BinSeries bin_by_cycle(const TimeTagStream& stream);

struct G2Result {
  std::vector<int> offsets;  // -K..K
  std::vector<double> g2;
  std::vector<double> sigma;
  std::vector<std::uint64_t> coincidences;
  double mean_counts = 0;
  double g2_zero = 0;
  double g2_zero_sigma = 0;
  bool bootstrap = false;

  double at(int k) const { return g2[std::size_t(k + offsets.back())]; }
  double sigma_at(int k) const { return sigma[std::size_t(k + offsets.back())]; }
};

struct G2Options {
  // Block bootstrap for the uncertainties instead of counting statistics;
  // 0 disables.
  int bootstrap_replicates = 0;
  std::uint64_t bootstrap_blocks = 1000;
  std::uint64_t seed = 1;
};

// g2(k) = <n_i n_{i+k}> / <n>^2 for k >= 1 and <n(n-1)> / <n>^2 at k = 0,
// mirrored to negative offsets. UndefinedEstimate when <n> = 0.
G2Result g2_timebin(const BinSeries& bins, int max_offset, const G2Options& opt = {});

// g2(0) of one antibunched emitter over uncorrelated background, given the
// signal-to-background ratio: (2s + 1)/(s + 1)^2.
double g2_from_snr(double snr);
// Nonnegative root of the relation above. DomainError for g2 outside (0, 1].
double snr_from_g2(double g2);

}  // namespace purcellsim
