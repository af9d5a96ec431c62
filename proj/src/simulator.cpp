#include "purcellsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

#include "purcellsim/errors.hpp"
#include "purcellsim/hazard.hpp"

namespace purcellsim {

namespace {

struct GateNs {
  std::uint32_t start, stop;
};

// Everything shared by all ions of a run.
struct RunContext {
  const SimScenario* sc = nullptr;
  double pump_end_us = 0;
  double pump_duration_us = 0;
  double period_us = 0;
  std::vector<GateNs> gates;
  double collection = 0;
  double p_max = 0;
  double linewidth_hz = 0;
  double cavity_offset_hz = 0;
  std::uint64_t cycles_per_step = 1;
  bool diffusing = false;

  bool gated(std::uint32_t t_ns) const {
    for (const GateNs& g : gates)
      if (t_ns >= g.start && t_ns < g.stop) return true;
    return false;
  }
};

std::uint32_t to_ns(double t_us) { return std::uint32_t(std::llround(t_us * 1000.0)); }

void simulate_ion(const RunContext& ctx, const IonRecord& ion, Engine& rng, Engine& diff_rng,
                  std::vector<TimeTag>& out) {
  const SimScenario& sc = *ctx.sc;
  const EnsembleConfig& ens = sc.ensemble;
  const double offset_hz = ion.frequency_hz() - ctx.cavity_offset_hz;
  // Spectral diffusion moves the ion by MHz; the cavity coupling is taken at
  // the starting frequency since κ is GHz wide.
  const DecayModel model = make_decay_model(ion.baseline_rate_per_s(), ion.purcell_factor,
                                            ens.radiative_rate_per_s(), offset_hz, sc.cavity);
  const HazardProfile hazard(sc.sequence, model);
  const double h_period = hazard.total();

  std::exponential_distribution<double> unit_exp(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  IonRecord cur = ion;
  std::uint64_t step = 0;
  auto excitation_p = [&] {
    return excitation_probability(ctx.p_max, sc.laser.detuning_hz - (cur.frequency_hz() - ctx.cavity_offset_hz),
                                  ctx.linewidth_hz, ctx.pump_duration_us);
  };
  double p = excitation_p();
  const double step_s = ens.diffusion_step_s;

  std::uint64_t c = 0;  // first cycle in which the ground-state ion can be pumped
  const std::uint64_t n = sc.n_cycles;
  while (c < n) {
    const std::uint64_t want = c / ctx.cycles_per_step;
    if (ctx.diffusing && want != step) {
      for (; step < want; ++step)
        cur = advance_spectral_diffusion(cur, step_s, ens.diffusion_rate_mhz_per_sqrt_min, diff_rng,
                                         ens.diffusion_bound_mhz);
      p = excitation_p();
    }
    const std::uint64_t step_end =
        ctx.diffusing ? std::min(n, (want + 1) * ctx.cycles_per_step) : n;
    if (!(p > 0)) {
      c = step_end;
      continue;
    }
    // Cycles until the pump succeeds; memoryless, so redrawing at a step
    // boundary is exact.
    std::uint64_t skip = 0;
    if (p < 1) {
      const double g = std::floor(std::log(1.0 - unit(rng)) / std::log1p(-p));
      skip = g >= double(step_end - c) ? step_end - c : std::uint64_t(g);
    }
    c += skip;
    if (c >= step_end) continue;

    // Excited at the pump end of cycle c.
    if (!(h_period > 0)) return;  // never decays
    double e = unit_exp(rng);
    double t0 = ctx.pump_end_us;
    double t = 0;
    bool emitted = false;
    while (c < n) {
      if (auto hit = hazard.invert(t0, e)) {
        t = *hit;
        emitted = true;
        break;
      }
      e -= h_period - hazard.cumulative(t0);
      if (e < 0) e = 0;
      ++c;
      const double whole = std::floor(e / h_period);
      if (whole >= 1) {
        if (whole >= double(n - c)) {
          c = n;
          break;
        }
        c += std::uint64_t(whole);
        e -= whole * h_period;
      }
      t0 = 0;
    }
    if (!emitted) return;
    const auto t_ns = std::uint32_t(std::floor(t * 1000.0));
    if (ctx.gated(t_ns)) {
      // Share of the emission that goes into the cavity mode at time t.
      double p_detect = ctx.collection;
      if (sc.chain.cavity_channel_only)
        p_detect *= 1.0 - model.baseline_rate / hazard.rate_at(t);
      if (unit(rng) < p_detect) out.push_back({c, t_ns, Channel::signal});
    }
    if (t >= ctx.pump_end_us) ++c;
  }
}

void simulate_ion_block(const RunContext& ctx, std::size_t block, std::vector<TimeTag>& out) {
  const SimScenario& sc = *ctx.sc;
  Engine rng = make_engine(sc.seed, Stream::decay, block);
  Engine diff_rng = make_engine(sc.seed, Stream::diffusion, block);
  const std::size_t lo = block * kIonsPerBlock;
  const std::size_t hi = std::min(sc.ions.size(), lo + kIonsPerBlock);
  for (std::size_t i = lo; i < hi; ++i) simulate_ion(ctx, sc.ions[i], rng, diff_rng, out);
}

// Poisson dark counts, uniform over the concatenated gate time.
void simulate_dark_block(const RunContext& ctx, std::uint64_t block, std::vector<TimeTag>& out) {
  const SimScenario& sc = *ctx.sc;
  const std::uint64_t c0 = block * kDarkCyclesPerBlock;
  const std::uint64_t cycles = std::min(sc.n_cycles - c0, kDarkCyclesPerBlock);
  std::uint64_t gate_ns = 0;
  for (const GateNs& g : ctx.gates) gate_ns += g.stop - g.start;
  const double mean = sc.chain.dark_count_hz * double(gate_ns) * 1e-9 * double(cycles);
  if (!(mean > 0)) return;
  Engine rng = make_engine(sc.seed, Stream::dark, block);
  const auto count = std::poisson_distribution<std::uint64_t>(mean)(rng);
  std::uniform_int_distribution<std::uint64_t> pick_cycle(0, cycles - 1);
  std::uniform_int_distribution<std::uint64_t> pick_ns(0, gate_ns - 1);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t c = c0 + pick_cycle(rng);
    std::uint64_t u = pick_ns(rng);
    for (const GateNs& g : ctx.gates) {
      const std::uint64_t w = g.stop - g.start;
      if (u < w) {
        out.push_back({c, std::uint32_t(g.start + u), Channel::dark});
        break;
      }
      u -= w;
    }
  }
}

RunContext make_context(const SimScenario& sc) {
  RunContext ctx;
  ctx.sc = &sc;
  const Window& pump = sc.sequence.pump_windows().front();
  ctx.pump_end_us = pump.stop_us;
  ctx.pump_duration_us = pump.duration_us();
  ctx.period_us = sc.sequence.period_us();
  for (const Window& w : sc.sequence.detector_windows())
    ctx.gates.push_back({to_ns(w.start_us), to_ns(w.stop_us)});
  ctx.collection = sc.chain.collection_efficiency();
  ctx.p_max = sc.laser.p_max(sc.chain.p_excited);
  ctx.linewidth_hz = sc.ensemble.effective_linewidth_mhz() * 1e6;
  ctx.cavity_offset_hz = cavity_offset_ghz(sc.ensemble, sc.cavity) * 1e9;
  const double per_step = sc.ensemble.diffusion_step_s / (ctx.period_us * 1e-6);
  ctx.cycles_per_step = std::max<std::uint64_t>(1, std::uint64_t(std::llround(per_step)));
  ctx.diffusing = sc.ensemble.diffusion_rate_mhz_per_sqrt_min > 0;
  return ctx;
}

}  // namespace

void SimScenario::validate() const {
  cavity.validate();
  ensemble.validate();
  chain.validate();
  if (n_cycles < 1) throw ValidationError("scenario: n_cycles must be >= 1");
  if (sequence.pump_windows().size() != 1)
    throw ValidationError("scenario: the simulator needs exactly one pump window per period");
  if (sequence.detector_windows().empty())
    throw ValidationError("scenario: at least one detector window is required");
  if (!laser.saturated && !(laser.saturation_parameter > 0)) throw ValidationError("scenario: saturation parameter must be > 0");
  for (const IonRecord& ion : ions) {
    if (!(ion.purcell_factor >= 0) || !(ion.baseline_rate_per_ms >= 0) ||
        !std::isfinite(ion.center_frequency_ghz))
      throw ValidationError("scenario: ion " + std::to_string(ion.id) + " has invalid parameters");
  }
  // Rejects sequences that would drive the cavity past breakdown.
  for (const VoltageSegment& v : sequence.voltage_segments()) eo_detuning(cavity, v.volts);
}

double ion_cavity_offset_hz(const IonRecord& ion, const EnsembleConfig& cfg,
                            const CavityModel& cavity) {
  return ion.frequency_hz() - cavity_offset_ghz(cfg, cavity) * 1e9;
}

IonRecord ion_at_cavity_offset(std::uint64_t id, double offset_hz, double purcell_factor,
                               const EnsembleConfig& cfg, const CavityModel& cavity) {
  IonRecord ion;
  ion.id = id;
  ion.center_frequency_ghz = cavity_offset_ghz(cfg, cavity) + offset_hz * 1e-9;
  ion.purcell_factor = purcell_factor;
  ion.baseline_rate_per_ms = cfg.baseline_rate_per_ms();
  return ion;
}

TimeTagStream run_scenario(const SimScenario& sc, Execution mode, int threads) {
  sc.validate();
  const RunContext ctx = make_context(sc);

  const std::size_t n_ion_blocks = (sc.ions.size() + kIonsPerBlock - 1) / kIonsPerBlock;
  const std::size_t n_dark_blocks =
      std::size_t((sc.n_cycles + kDarkCyclesPerBlock - 1) / kDarkCyclesPerBlock);
  const std::size_t n_tasks = n_ion_blocks + n_dark_blocks;
  std::vector<std::vector<TimeTag>> parts(n_tasks);
  auto run_task = [&](std::size_t i) {
    if (i < n_ion_blocks)
      simulate_ion_block(ctx, i, parts[i]);
    else
      simulate_dark_block(ctx, i - n_ion_blocks, parts[i]);
  };

  if (mode == Execution::serial) {
    for (std::size_t i = 0; i < n_tasks; ++i) run_task(i);
  } else {
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (std::size_t i = 0; i < n_tasks; ++i) run_task(i);
  }

  TimeTagStream out;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  out.events.reserve(total);
  for (auto& p : parts) out.events.insert(out.events.end(), p.begin(), p.end());
  std::sort(out.events.begin(), out.events.end(), tag_less);
  out.n_cycles = sc.n_cycles;
  out.period_ns = to_ns(sc.sequence.period_us());
  for (const GateNs& g : ctx.gates) out.gates_ns.emplace_back(g.start, g.stop);
  out.seed = sc.seed;
  out.laser_detuning_hz = sc.laser.detuning_hz;
  out.metadata["scenario"] = sc.label;
  out.metadata["ions"] = std::to_string(sc.ions.size());
  return out;
}

}  // namespace purcellsim
