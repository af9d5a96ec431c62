#include "purcellsim/report.hpp"

#include <charconv>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "purcellsim/errors.hpp"

#ifndef PURCELLSIM_VERSION
#define PURCELLSIM_VERSION "0.0.0"
#endif

namespace purcellsim {

std::string software_version() { return PURCELLSIM_VERSION; }

std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : "nan";
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Report::add(const std::string& key, const std::string& value) {
  if (key.find_first_of(" =\n") != std::string::npos || value.find('\n') != std::string::npos)
    throw ArgumentError("report: bad key or value for '" + key + "'");
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Report::add(const std::string& key, double value) { add(key, format_number(value)); }
void Report::add(const std::string& key, long long value) { add(key, std::to_string(value)); }
void Report::add(const std::string& key, unsigned long long value) { add(key, std::to_string(value)); }

bool Report::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return true;
  return false;
}

const std::string& Report::get(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  throw ArgumentError("report has no entry '" + key + "'");
}

double Report::number(const std::string& key) const { return std::stod(get(key)); }

std::string Report::digest() const {
  std::string body;
  for (const auto& [k, v] : entries_) body += k + " = " + v + "\n";
  return fnv1a_hex(body);
}

void Report::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", wall_clock_s_);
  os << "wall_clock_s = " << buf << '\n';
  os << "report_digest = " << digest() << '\n';
}

std::string Report::text() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace purcellsim
