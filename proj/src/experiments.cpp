#include "purcellsim/experiments.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "purcellsim/errors.hpp"

namespace purcellsim {

namespace {

std::uint64_t derived_seed(std::uint64_t seed, std::size_t index) {
  Engine e = make_engine(seed, Stream::noise, index);
  return e();
}

template <typename F>
void for_each_point(std::size_t n, Execution mode, int threads, F&& body) {
  if (mode == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  // Exceptions must not escape the parallel region.
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) throw ArgumentError("linear_grid: n must be positive");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
  return g;
}

std::vector<SpectrumPoint> excitation_spectrum(const SimScenario& scenario,
                                               std::span<const double> grid, Execution mode,
                                               int threads) {
  scenario.validate();
  std::vector<SpectrumPoint> out(grid.size());
  const double run_s = double(scenario.n_cycles) * scenario.sequence.period_us() * 1e-6;
  for_each_point(grid.size(), mode, threads, [&](std::size_t i) {
    SimScenario sc = scenario;
    sc.laser.detuning_hz = grid[i];
    sc.seed = derived_seed(scenario.seed, i);
    const TimeTagStream s = run_scenario(sc, Execution::serial);
    out[i] = {grid[i], double(s.events.size()) / run_s, s.events.size()};
  });
  return out;
}

SpectrumSummary summarize_spectrum(std::span<const SpectrumPoint> sp, double threshold) {
  if (sp.empty()) throw ArgumentError("summarize_spectrum: empty spectrum");
  SpectrumSummary s;
  std::vector<double> r;
  for (const SpectrumPoint& p : sp) r.push_back(p.rate_hz);
  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.floor_hz = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.min_hz = sorted.front();
  s.max_hz = sorted.back();
  s.contrast = s.floor_hz > 0 ? s.max_hz / s.floor_hz : (s.max_hz > 0 ? INFINITY : 1.0);
  std::size_t near = 0;
  for (double v : r) near += v < 2.0 * s.floor_hz;
  s.fraction_near_floor = double(near) / double(n);

  const double cut = threshold * s.floor_hz;
  for (std::size_t i = 0; i < n;) {
    if (!(r[i] > cut)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    SpectrumPeak pk;
    pk.index = i;
    double wsum = 0, xsum = 0;
    for (; j < n && r[j] > cut; ++j) {
      if (r[j] > r[pk.index]) pk.index = j;
      const double w = r[j] - s.floor_hz;
      wsum += w;
      xsum += w * sp[j].detuning_hz;
    }
    pk.height_hz = r[pk.index];
    pk.contrast = s.floor_hz > 0 ? pk.height_hz / s.floor_hz : INFINITY;
    pk.centroid_hz = wsum > 0 ? xsum / wsum : sp[pk.index].detuning_hz;
    s.peaks.push_back(pk);
    i = j;
  }
  return s;
}

StorageCurve lifetime_vs_delay(const SimScenario& scenario, const StorageProtocol& protocol,
                               std::span<const double> delays_us, Execution mode, int threads) {
  if (delays_us.size() < 3) throw ArgumentError("lifetime_vs_delay: need at least 3 delays");
  for (std::size_t i = 1; i < delays_us.size(); ++i)
    if (!(delays_us[i] > delays_us[i - 1])) throw ArgumentError("lifetime_vs_delay: delays must ascend");
  StorageCurve curve;
  curve.points.resize(delays_us.size());
  const double amp_bw = scenario.sequence.spec().amplifier_bandwidth_mhz;
  for_each_point(delays_us.size(), mode, threads, [&](std::size_t i) {
    SimScenario sc = scenario;
    SequenceSpec spec =
        presets::storage_retrieval(delays_us[i], protocol.volts, protocol.gate_us, protocol.tail_us);
    spec.amplifier_bandwidth_mhz = amp_bw;
    sc.sequence = build_sequence(spec);
    sc.seed = derived_seed(scenario.seed, i);
    const TimeTagStream s = run_scenario(sc, Execution::serial);
    curve.points[i] = {delays_us[i], s.events.size(),
                       double(s.events.size()) / double(sc.n_cycles)};
  });

  std::vector<double> x, y, sig;
  for (const StoragePoint& p : curve.points) {
    x.push_back(p.delay_us);
    y.push_back(p.intensity);
    sig.push_back(std::sqrt(std::max<double>(double(p.counts), 1.0)) / double(scenario.n_cycles));
  }
  curve.fit = fit_exponential(x, y, sig);
  curve.lifetime_us = curve.fit.value("lifetime");
  curve.lifetime_sigma_us = curve.fit.get("lifetime").sigma;
  return curve;
}

std::vector<double> arrival_times_us(const TimeTagStream& stream) {
  if (stream.gates_ns.empty()) return {};
  std::uint32_t first = stream.gates_ns.front().first;
  for (const auto& g : stream.gates_ns) first = std::min(first, g.first);
  std::vector<double> t;
  t.reserve(stream.events.size());
  // Bin the 1 ns tags at their centers.
  for (const TimeTag& e : stream.events) t.push_back((double(e.t_ns) - first + 0.5) * 1e-3);
  return t;
}

}  // namespace purcellsim
