#pragma once

#include <numbers>

// Unit conventions: time in seconds, frequency (and detuning) in Hz, rates in
// 1/s unless a name carries an explicit suffix (_us, _ghz, _nm, ...).
namespace purcellsim::units {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;

inline constexpr double kNano = 1e-9;
inline constexpr double kMicro = 1e-6;
inline constexpr double kMilli = 1e-3;

constexpr double us(double v) { return v * kMicro; }
constexpr double ms(double v) { return v * kMilli; }
constexpr double ghz(double v) { return v * 1e9; }
constexpr double mhz(double v) { return v * 1e6; }

constexpr double to_us(double seconds) { return seconds / kMicro; }
constexpr double to_ghz(double hz) { return hz * 1e-9; }
constexpr double to_mhz(double hz) { return hz * 1e-6; }

// Optical frequency of a vacuum wavelength given in nm.
constexpr double frequency_of_nm(double lambda_nm) { return kSpeedOfLight / (lambda_nm * kNano); }

}  // namespace purcellsim::units
