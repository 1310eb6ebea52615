#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace xtalk {

inline constexpr double kSpanStartNm = 1549.75;
inline constexpr double kSpanStopNm = 1550.25;
inline constexpr double kRawStepPm = 1.6;
inline constexpr double kUpsampledStepPm = 0.01;

// Uniformly sampled through-port power.
struct Spectrum {
  double start_wavelength = kSpanStartNm;  // nm
  double step = kRawStepPm;                // pm
  std::vector<double> power;               // dB

  std::size_t size() const { return power.size(); }
  double wavelength(std::size_t i) const {  // nm
    return start_wavelength + static_cast<double>(i) * step * 1e-3;
  }
  double span() const {  // pm
    return power.empty() ? 0.0 : static_cast<double>(power.size() - 1) * step;
  }
};

// Number of samples when [start, stop] is covered at `step_pm`.
std::size_t sample_count(double start_nm, double stop_nm, double step_pm);

bool same_grid(const Spectrum& a, const Spectrum& b);

// Two-column CSV: wavelength_nm,power_dB.
void write_spectrum_csv(std::ostream& out, const Spectrum& s);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s);
Spectrum read_spectrum_csv(std::istream& in, const std::string& origin = "<stream>");
Spectrum read_spectrum_csv(const std::filesystem::path& path);

// Shortest text form that parses back to the same double.
std::string format_number(double v);

}  // namespace xtalk
