#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace purcellsim {

std::string software_version();

// Line-oriented key = value report. Entries keep insertion order.
class Report {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, long long value);
  void add(const std::string& key, unsigned long long value);
  void add(const std::string& key, int value) { add(key, static_cast<long long>(value)); }
  void add(const std::string& key, std::size_t value) { add(key, static_cast<unsigned long long>(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  bool has(const std::string& key) const;
  // ArgumentError if absent.
  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;

  void set_wall_clock(double seconds) { wall_clock_s_ = seconds; }
  double wall_clock() const { return wall_clock_s_; }

  // FNV-1a over the entries; the wall-clock time is not part of it.
  std::string digest() const;
  // Entries, then wall_clock_s, then report_digest.
  void write(std::ostream& os) const;
  std::string text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  double wall_clock_s_ = 0;
};

// Shortest text that parses back to the same double.
std::string format_number(double v);

std::string fnv1a_hex(const std::string& data);

}  // namespace purcellsim
