#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace purcellsim {

enum class Channel : std::uint32_t { signal = 0, dark = 1 };

const char* channel_name(Channel c);

struct TimeTag {
  std::uint64_t cycle = 0;
  std::uint32_t t_ns = 0;  // time within the cycle
  Channel channel = Channel::signal;

  bool operator==(const TimeTag&) const = default;
};

// Orders by (cycle, t_ns, channel).
bool tag_less(const TimeTag& a, const TimeTag& b);

struct TimeTagStream {
  std::vector<TimeTag> events;
  std::uint64_t n_cycles = 0;
  std::uint32_t period_ns = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> gates_ns;  // [start, stop)
  std::uint64_t seed = 0;
  double laser_detuning_hz = 0;
  std::map<std::string, std::string> metadata;  // free-form, e.g. the sequence name

  bool in_gate(std::uint32_t t_ns) const;
  // ValidationError unless events are sorted, inside gates and below n_cycles.
  void validate() const;
  double gate_duration_s() const;

  bool operator==(const TimeTagStream&) const = default;
};

enum class TagFormat { csv, binary };

void write_timetags(std::ostream& os, const TimeTagStream& s, TagFormat format);
void write_timetags_csv(std::ostream& os, const TimeTagStream& s);
void write_timetags_binary(std::ostream& os, const TimeTagStream& s);

// Reads either format, detected from the leading magic bytes. ParseError
// carries the line (CSV) or byte offset (binary) of the first problem.
TimeTagStream read_timetags(std::istream& is, const std::string& source = "<stream>");
TimeTagStream load_timetags(const std::string& path);

}  // namespace purcellsim
