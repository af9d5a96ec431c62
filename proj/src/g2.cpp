#include "purcellsim/g2.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "purcellsim/errors.hpp"
#include "purcellsim/rng.hpp"

namespace purcellsim {

void BinSeries::add(std::uint64_t cycle, std::uint32_t count) {
  if (cycle >= n_cycles_) throw ArgumentError("BinSeries: cycle out of range");
  if (count == 0) return;
  if (!bins_.empty() && bins_.back().first == cycle) {
    bins_.back().second += count;
    return;
  }
  if (!bins_.empty() && bins_.back().first > cycle)
    throw ArgumentError("BinSeries: cycles must be added in order");
  bins_.emplace_back(cycle, count);
}

std::uint32_t BinSeries::count(std::uint64_t cycle) const {
  auto it = std::lower_bound(bins_.begin(), bins_.end(), std::make_pair(cycle, std::uint32_t(0)));
  return it != bins_.end() && it->first == cycle ? it->second : 0;
}

std::uint64_t BinSeries::total() const {
  std::uint64_t s = 0;
  for (const auto& b : bins_) s += b.second;
  return s;
}

double BinSeries::mean() const { return n_cycles_ ? double(total()) / double(n_cycles_) : 0.0; }

std::vector<std::uint32_t> BinSeries::dense() const {
  std::vector<std::uint32_t> out(n_cycles_, 0);
  for (const auto& [c, n] : bins_) out[c] = n;
  return out;
}

BinSeries BinSeries::from_dense(const std::vector<std::uint32_t>& counts, double gate_duration_s) {
  BinSeries b(counts.size(), gate_duration_s);
  for (std::size_t i = 0; i < counts.size(); ++i) b.add(i, counts[i]);
  return b;
}

BinSeries bin_by_cycle(const TimeTagStream& stream) {
  BinSeries b(stream.n_cycles, stream.gate_duration_s());
  for (const TimeTag& t : stream.events) {
    if (t.cycle >= stream.n_cycles) throw ValidationError("bin_by_cycle: cycle_index >= n_cycles");
    if (!b.nonzero().empty() && b.nonzero().back().first > t.cycle)
      throw ValidationError("bin_by_cycle: events not sorted");
    if (stream.in_gate(t.t_ns)) b.add(t.cycle);
  }
  return b;
}

namespace {

// Sums over one block of cycles [lo, hi): first moment, factorial moment
// and products at each positive offset (pairs whose first cycle is in the
// block).
struct BlockSums {
  double s1 = 0, s2 = 0;
  std::vector<double> prod;
};

}  // namespace

G2Result g2_timebin(const BinSeries& bins, int max_offset, const G2Options& opt) {
  const std::uint64_t n = bins.n_cycles();
  if (max_offset < 0) throw ArgumentError("g2_timebin: max_offset must be >= 0");
  if (std::uint64_t(max_offset) >= n) throw ArgumentError("g2_timebin: max_offset must be < n_cycles");
  const auto& nz = bins.nonzero();
  const double mean = bins.mean();
  if (!(mean > 0)) throw UndefinedEstimate("g2_timebin: no counts, <n> = 0");

  const std::size_t K = std::size_t(max_offset);
  const bool boot = opt.bootstrap_replicates > 0;
  const std::uint64_t n_blocks = boot ? std::max<std::uint64_t>(1, std::min(opt.bootstrap_blocks, n)) : 1;
  const std::uint64_t block_len = (n + n_blocks - 1) / n_blocks;
  std::vector<BlockSums> blocks(n_blocks);
  for (auto& b : blocks) b.prod.assign(K + 1, 0.0);

  for (std::size_t a = 0; a < nz.size(); ++a) {
    const auto [ci, ni] = nz[a];
    BlockSums& b = blocks[ci / block_len];
    b.s1 += ni;
    b.s2 += double(ni) * (double(ni) - 1.0);
    for (std::size_t j = a + 1; j < nz.size() && nz[j].first - ci <= K; ++j)
      b.prod[nz[j].first - ci] += double(ni) * nz[j].second;
  }

  std::vector<double> s2k(K + 1, 0.0);  // index 0 holds the factorial moment
  double s1 = 0;
  for (const BlockSums& b : blocks) {
    s1 += b.s1;
    s2k[0] += b.s2;
    for (std::size_t k = 1; k <= K; ++k) s2k[k] += b.prod[k];
  }

  auto estimate = [&](const std::vector<double>& sums, double total, double weight_n,
                      std::size_t k) {
    const double m = total / weight_n;
    const double pairs = k == 0 ? weight_n : weight_n * double(n - k) / double(n);
    return sums[k] / pairs / (m * m);
  };

  G2Result r;
  r.mean_counts = mean;
  r.bootstrap = boot;
  std::vector<double> value(K + 1), err(K + 1);
  std::vector<std::uint64_t> coinc(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    value[k] = estimate(s2k, s1, double(n), k);
    coinc[k] = std::uint64_t(std::llround(s2k[k]));
    const double pairs = k == 0 ? double(n) : double(n - k);
    err[k] = std::sqrt(std::max(s2k[k], 1.0)) / pairs / (mean * mean);
  }

  if (boot) {
    Engine rng = make_engine(opt.seed, Stream::bootstrap);
    std::uniform_int_distribution<std::uint64_t> pick(0, n_blocks - 1);
    std::vector<double> acc(K + 1, 0.0), acc2(K + 1, 0.0);
    int used = 0;
    for (int rep = 0; rep < opt.bootstrap_replicates; ++rep) {
      std::vector<double> sums(K + 1, 0.0);
      double t1 = 0;
      for (std::uint64_t i = 0; i < n_blocks; ++i) {
        const BlockSums& b = blocks[pick(rng)];
        t1 += b.s1;
        sums[0] += b.s2;
        for (std::size_t k = 1; k <= K; ++k) sums[k] += b.prod[k];
      }
      if (!(t1 > 0)) continue;
      const double nn = double(n_blocks * block_len);
      for (std::size_t k = 0; k <= K; ++k) {
        const double g = estimate(sums, t1, nn, k);
        acc[k] += g;
        acc2[k] += g * g;
      }
      ++used;
    }
    if (used > 1) {
      for (std::size_t k = 0; k <= K; ++k) {
        const double mu = acc[k] / used;
        err[k] = std::sqrt(std::max(0.0, (acc2[k] - used * mu * mu) / (used - 1)));
      }
    }
  }

  for (int k = -max_offset; k <= max_offset; ++k) {
    const std::size_t a = std::size_t(std::abs(k));
    r.offsets.push_back(k);
    r.g2.push_back(value[a]);
    r.sigma.push_back(err[a]);
    r.coincidences.push_back(coinc[a]);
  }
  r.g2_zero = value[0];
  r.g2_zero_sigma = err[0];
  return r;
}

double g2_from_snr(double snr) {
  if (!(snr >= 0)) throw DomainError("g2_from_snr: snr must be >= 0");
  if (std::isinf(snr)) return 0.0;
  return (2.0 * snr + 1.0) / ((snr + 1.0) * (snr + 1.0));
}

double snr_from_g2(double g2) {
  if (!(g2 > 0 && g2 <= 1)) throw DomainError("snr_from_g2: g2 must lie in (0, 1]");
  // g s^2 + 2(g - 1)s + (g - 1) = 0
  const double r = std::sqrt(1.0 - g2);
  return (1.0 - g2 + r) / g2;
}

}  // namespace purcellsim
