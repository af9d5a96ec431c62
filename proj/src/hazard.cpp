#include "purcellsim/hazard.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "purcellsim/errors.hpp"

namespace purcellsim {

namespace {

// 10-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kGlX{0.1488743389816312, 0.4333953941292472,
                                     0.6794095682990244, 0.8650633666889845,
                                     0.9739065285171717};
constexpr std::array<double, 5> kGlW{0.2955242247147529, 0.2692667193099963,
                                     0.2190863625159820, 0.1494513491505806,
                                     0.0666713443086881};

// Transients are resolved up to this many time constants; beyond it the
// residual voltage is below e^-40 of the step.
constexpr double kTransientSpan = 40.0;

}  // namespace

DecayModel make_decay_model(double baseline_rate, double purcell_factor, double radiative_rate,
                            double ion_offset_hz, const CavityModel& cavity) {
  DecayModel m;
  m.baseline_rate = baseline_rate;
  m.purcell_rate = purcell_factor * radiative_rate;
  m.kappa_hz = cavity.linewidth_hz();
  m.response_exponent = cavity.response_exponent;
  m.eo_hz_per_volt = eo_detuning(cavity, 1.0);
  m.ion_offset_hz = ion_offset_hz;
  return m;
}

HazardProfile::HazardProfile(const PulseSequence& seq, const DecayModel& model)
    : model_(model), period_us_(seq.period_us()), tau_us_(seq.time_constant_us()) {
  double h = 0;
  auto push_constant = [&](double a, double b, double volts) {
    Node n;
    n.start = a;
    n.stop = b;
    n.constant = true;
    n.rate = model_.rate_at_voltage(volts) * 1e-6;
    n.h_start = h;
    h += n.rate * (b - a);
    n.h_end = h;
    if (!nodes_.empty() && nodes_.back().constant && nodes_.back().rate == n.rate) {
      nodes_.back().stop = b;
      nodes_.back().h_end = h;
    } else {
      nodes_.push_back(n);
    }
  };

  for (const VoltagePiece& p : seq.voltage_pieces()) {
    const double step = std::abs(p.initial_v - p.target_v);
    if (seq.ideal_amplifier() || step <= 1e-12 * (1.0 + std::abs(p.target_v))) {
      push_constant(p.start_us, p.stop_us, p.target_v);
      continue;
    }
    const double settle = std::min(p.stop_us, p.start_us + kTransientSpan * tau_us_);
    double a = p.start_us;
    double width = tau_us_ / 32.0;
    while (a < settle) {
      const double b = std::min(settle, a + width);
      Node n;
      n.start = a;
      n.stop = b;
      n.constant = false;
      n.target_v = p.target_v;
      n.initial_v = p.initial_v;
      n.piece_start = p.start_us;
      n.h_start = h;
      h += node_integral(n, a, b);
      n.h_end = h;
      nodes_.push_back(n);
      a = b;
      width = std::min(width * 1.25, tau_us_ / 2.0);
    }
    if (settle < p.stop_us) push_constant(settle, p.stop_us, p.target_v);
  }
}

double HazardProfile::node_rate(const Node& n, double t) const {
  if (n.constant) return n.rate;
  const double v = n.target_v + (n.initial_v - n.target_v) * std::exp(-(t - n.piece_start) / tau_us_);
  return model_.rate_at_voltage(v) * 1e-6;
}

double HazardProfile::node_integral(const Node& n, double a, double b) const {
  if (n.constant) return n.rate * (b - a);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0;
  for (std::size_t i = 0; i < kGlX.size(); ++i) {
    sum += kGlW[i] * (node_rate(n, mid - half * kGlX[i]) + node_rate(n, mid + half * kGlX[i]));
  }
  return sum * half;
}

std::size_t HazardProfile::find_node(double t_us) const {
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t_us,
                             [](double t, const Node& n) { return t < n.stop; });
  if (it == nodes_.end()) --it;
  return std::size_t(it - nodes_.begin());
}

double HazardProfile::rate_at(double t_us) const {
  return node_rate(nodes_[find_node(t_us)], t_us) * 1e6;
}

double HazardProfile::cumulative(double t_us) const {
  if (t_us <= 0) return 0;
  if (t_us >= period_us_) return total();
  const Node& n = nodes_[find_node(t_us)];
  return n.h_start + node_integral(n, n.start, t_us);
}

std::optional<double> HazardProfile::invert(double t0_us, double target) const {
  if (target < 0) throw ArgumentError("hazard target must be >= 0");
  const double goal = cumulative(t0_us) + target;
  if (goal >= total()) return std::nullopt;
  // First node whose end exceeds the goal.
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), goal,
                             [](double g, const Node& n) { return g < n.h_end; });
  if (it == nodes_.end()) return std::nullopt;
  const Node& n = *it;
  const double need = goal - n.h_start;
  if (n.constant) {
    const double t = n.start + need / n.rate;
    return std::clamp(t, std::max(n.start, t0_us), std::nextafter(n.stop, n.start));
  }
  double lo = std::max(n.start, t0_us), hi = n.stop;
  double t = lo + (hi - lo) * std::clamp(need / (n.h_end - n.h_start), 0.0, 1.0);
  for (int iter = 0; iter < 100; ++iter) {
    const double f = node_integral(n, n.start, t) - need;
    if (std::abs(f) <= 1e-14 * std::max(1.0, goal)) break;
    if (f > 0)
      hi = t;
    else
      lo = t;
    const double r = node_rate(n, t);
    double next = r > 0 ? t - f / r : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-13 * std::max(1.0, hi)) break;
    t = next;
  }
  return t;
}

std::optional<double> sample_decay_time(const HazardProfile& hazard, double start_us, Engine& rng) {
  std::exponential_distribution<double> unit_exp(1.0);
  return hazard.invert(start_us, unit_exp(rng));
}

}  // namespace purcellsim
