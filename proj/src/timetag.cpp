#include "purcellsim/timetag.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

#include "purcellsim/errors.hpp"

namespace purcellsim {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'T', 'T'};
constexpr std::uint16_t kBinaryVersion = 1;
constexpr const char* kCsvFormat = "purcellsim-timetags 1";

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string gates_text(const TimeTagStream& s) {
  std::string out;
  for (const auto& [a, b] : s.gates_ns) {
    if (!out.empty()) out += ';';
    out += std::to_string(a) + '-' + std::to_string(b);
  }
  return out;
}

// Core fields followed by free-form metadata prefixed with "meta.".
std::vector<std::pair<std::string, std::string>> header_fields(const TimeTagStream& s) {
  std::vector<std::pair<std::string, std::string>> kv{
      {"n_cycles", std::to_string(s.n_cycles)},
      {"period_ns", std::to_string(s.period_ns)},
      {"gates_ns", gates_text(s)},
      {"seed", std::to_string(s.seed)},
      {"laser_detuning_hz", format_double(s.laser_detuning_hz)},
  };
  for (const auto& [k, v] : s.metadata) kv.emplace_back("meta." + k, v);
  return kv;
}

// Applies one header field; returns an error message or empty.
std::string apply_field(TimeTagStream& s, const std::string& key, const std::string& value) {
  if (key.rfind("meta.", 0) == 0) {
    s.metadata[key.substr(5)] = value;
    return {};
  }
  if (key == "n_cycles") return parse_number(value, s.n_cycles) ? "" : "bad n_cycles";
  if (key == "period_ns") return parse_number(value, s.period_ns) ? "" : "bad period_ns";
  if (key == "seed") return parse_number(value, s.seed) ? "" : "bad seed";
  if (key == "laser_detuning_hz") {
    try {
      std::size_t used = 0;
      s.laser_detuning_hz = std::stod(value, &used);
      return used == value.size() ? "" : "bad laser_detuning_hz";
    } catch (const std::exception&) {
      return "bad laser_detuning_hz";
    }
  }
  if (key == "gates_ns") {
    s.gates_ns.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ';')) {
      const auto dash = item.find('-');
      std::uint32_t a = 0, b = 0;
      if (dash == std::string::npos || !parse_number(item.substr(0, dash), a) ||
          !parse_number(item.substr(dash + 1), b) || b <= a)
        return "bad gate '" + item + "'";
      s.gates_ns.emplace_back(a, b);
    }
    return {};
  }
  return "unknown header key '" + key + "'";
}

bool parse_channel(const std::string& s, Channel& c) {
  if (s == "signal") {
    c = Channel::signal;
    return true;
  }
  if (s == "dark") {
    c = Channel::dark;
    return true;
  }
  return false;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = char((std::uint64_t(v) >> (8 * i)) & 0xff);
  os.write(buf.data(), buf.size());
}

void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  template <typename T>
  T get(const char* what) {
    item_ = offset_;
    std::array<unsigned char, sizeof(T)> buf;
    read(buf.data(), buf.size(), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(buf[i]) << (8 * i);
    return T(v);
  }

  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    if (n > (1u << 20)) fail(std::string(what) + " length too large");
    const std::size_t start = item_;
    std::string s(n, '\0');
    read(reinterpret_cast<unsigned char*>(s.data()), n, what);
    item_ = start;
    return s;
  }

  void read(unsigned char* dst, std::size_t n, const char* what) {
    is_.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (std::size_t(is_.gcount()) != n) fail(std::string("truncated ") + what);
    offset_ += n;
  }

  // Errors point at the start of the item read last.
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_, item_, "byte offset " + std::to_string(item_) + ": " + what);
  }
  void mark() { item_ = offset_; }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::string source_;
  std::size_t offset_ = 0;
  std::size_t item_ = 0;
};

TimeTagStream read_binary(std::istream& is, const std::string& source) {
  BinaryReader r(is, source);
  std::array<unsigned char, 4> magic;
  r.read(magic.data(), 4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) r.fail("bad magic");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kBinaryVersion) r.fail("unsupported version " + std::to_string(version));
  r.get<std::uint16_t>("reserved");
  const auto n_meta = r.get<std::uint32_t>("metadata count");
  TimeTagStream s;
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    const std::string key = r.get_string("metadata key");
    const std::string value = r.get_string("metadata value");
    const std::string err = apply_field(s, key, value);
    if (!err.empty()) r.fail(err);
  }
  const auto n = r.get<std::uint64_t>("event count");
  s.events.reserve(std::size_t(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    TimeTag t;
    t.cycle = r.get<std::uint64_t>("event");
    t.t_ns = r.get<std::uint32_t>("event");
    const auto ch = r.get<std::uint32_t>("event");
    if (ch > 1) r.fail("bad channel " + std::to_string(ch));
    t.channel = Channel(ch);
    s.events.push_back(t);
  }
  r.mark();
  if (is.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  try {
    s.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  return s;
}

TimeTagStream read_csv(std::istream& is, const std::string& source) {
  TimeTagStream s;
  std::string line;
  std::size_t lineno = 0;
  bool saw_format = false, saw_columns = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (saw_columns) throw ParseError(source, lineno, "header line after data");
      const auto body = line.find_first_not_of(" ", 1);
      const auto eq = line.find('=');
      if (body == std::string::npos || eq == std::string::npos)
        throw ParseError(source, lineno, "header lines must be '# key=value'");
      const std::string key = line.substr(body, eq - body);
      const std::string value = line.substr(eq + 1);
      if (key == "format") {
        if (value != kCsvFormat) throw ParseError(source, lineno, "unsupported format '" + value + "'");
        saw_format = true;
        continue;
      }
      const std::string err = apply_field(s, key, value);
      if (!err.empty()) throw ParseError(source, lineno, err);
      continue;
    }
    if (!saw_columns) {
      if (line != "cycle_index,channel,t_ns")
        throw ParseError(source, lineno, "expected column header 'cycle_index,channel,t_ns'");
      if (!saw_format) throw ParseError(source, lineno, "missing '# format=' header");
      saw_columns = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw ParseError(source, lineno, "expected 3 fields");
    TimeTag t;
    if (!parse_number(line.substr(0, c1), t.cycle))
      throw ParseError(source, lineno, "bad cycle_index");
    if (!parse_channel(line.substr(c1 + 1, c2 - c1 - 1), t.channel))
      throw ParseError(source, lineno, "bad channel (signal|dark)");
    if (!parse_number(line.substr(c2 + 1), t.t_ns)) throw ParseError(source, lineno, "bad t_ns");
    if (t.cycle >= s.n_cycles) throw ParseError(source, lineno, "cycle_index >= n_cycles");
    if (!s.in_gate(t.t_ns)) throw ParseError(source, lineno, "event outside detector gates");
    if (!s.events.empty() && tag_less(t, s.events.back()))
      throw ParseError(source, lineno, "events not sorted");
    s.events.push_back(t);
  }
  if (!saw_columns) throw ParseError(source, lineno, "missing column header");
  return s;
}

}  // namespace

const char* channel_name(Channel c) { return c == Channel::signal ? "signal" : "dark"; }

bool tag_less(const TimeTag& a, const TimeTag& b) {
  if (a.cycle != b.cycle) return a.cycle < b.cycle;
  if (a.t_ns != b.t_ns) return a.t_ns < b.t_ns;
  return a.channel < b.channel;
}

bool TimeTagStream::in_gate(std::uint32_t t_ns) const {
  for (const auto& [a, b] : gates_ns)
    if (t_ns >= a && t_ns < b) return true;
  return false;
}

double TimeTagStream::gate_duration_s() const {
  double ns = 0;
  for (const auto& [a, b] : gates_ns) ns += double(b - a);
  return ns * 1e-9;
}

void TimeTagStream::validate() const {
  for (const auto& [a, b] : gates_ns)
    if (b <= a || b > period_ns) throw ValidationError("time tags: gate outside the period");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const TimeTag& t = events[i];
    if (t.cycle >= n_cycles) throw ValidationError("time tags: cycle_index >= n_cycles");
    if (!in_gate(t.t_ns)) throw ValidationError("time tags: event outside detector gates");
    if (i > 0 && tag_less(t, events[i - 1])) throw ValidationError("time tags: events not sorted");
  }
}

void write_timetags_csv(std::ostream& os, const TimeTagStream& s) {
  os << "# format=" << kCsvFormat << '\n';
  for (const auto& [k, v] : header_fields(s)) {
    if (v.find('\n') != std::string::npos) throw ArgumentError("metadata values must be one line");
    os << "# " << k << '=' << v << '\n';
  }
  os << "cycle_index,channel,t_ns\n";
  for (const TimeTag& t : s.events)
    os << t.cycle << ',' << channel_name(t.channel) << ',' << t.t_ns << '\n';
}

void write_timetags_binary(std::ostream& os, const TimeTagStream& s) {
  os.write(kMagic, 4);
  put_le<std::uint16_t>(os, kBinaryVersion);
  put_le<std::uint16_t>(os, 0);
  const auto fields = header_fields(s);
  put_le<std::uint32_t>(os, std::uint32_t(fields.size()));
  for (const auto& [k, v] : fields) {
    put_string(os, k);
    put_string(os, v);
  }
  put_le<std::uint64_t>(os, s.events.size());
  for (const TimeTag& t : s.events) {
    put_le<std::uint64_t>(os, t.cycle);
    put_le<std::uint32_t>(os, t.t_ns);
    put_le<std::uint32_t>(os, std::uint32_t(t.channel));
  }
}

void write_timetags(std::ostream& os, const TimeTagStream& s, TagFormat format) {
  if (format == TagFormat::csv)
    write_timetags_csv(os, s);
  else
    write_timetags_binary(os, s);
}

TimeTagStream read_timetags(std::istream& is, const std::string& source) {
  std::string data{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  std::istringstream buf(std::move(data));
  if (buf.str().compare(0, 4, kMagic, 4) == 0) return read_binary(buf, source);
  return read_csv(buf, source);
}

TimeTagStream load_timetags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_timetags(in, path);
}

}  // namespace purcellsim
