#include "xtalk/spectrum.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "xtalk/errors.hpp"

namespace xtalk {

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t sample_count(double start_nm, double stop_nm, double step_pm) {
  if (!(step_pm > 0.0) || !(stop_nm > start_nm)) {
    throw InputError("spectrum span must be non-empty with a positive step");
  }
  const double intervals = (stop_nm - start_nm) * 1e3 / step_pm;
  return static_cast<std::size_t>(std::floor(intervals + 1e-9)) + 1;
}

bool same_grid(const Spectrum& a, const Spectrum& b) {
  return a.size() == b.size() && std::abs(a.step - b.step) <= 1e-12 * a.step &&
         std::abs(a.start_wavelength - b.start_wavelength) <= 1e-9;
}

void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
  out << "wavelength_nm,power_dB\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_number(s.wavelength(i)) << ',' << format_number(s.power[i]) << '\n';
  }
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_spectrum_csv(out, s);
}

Spectrum read_spectrum_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw InputError(origin + ": empty spectrum file");
  std::vector<double> wl;
  Spectrum s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw InputError(origin + ":" + std::to_string(lineno) + ": expected two columns");
    }
    double w = 0.0;
    double p = 0.0;
    const auto r1 = std::from_chars(line.data(), line.data() + comma, w);
    const auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), p);
    if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
      throw InputError(origin + ":" + std::to_string(lineno) + ": malformed number");
    }
    wl.push_back(w);
    s.power.push_back(p);
  }
  if (wl.size() < 2) throw InputError(origin + ": need at least two samples");
  s.start_wavelength = wl.front();
  s.step = (wl.back() - wl.front()) * 1e3 / static_cast<double>(wl.size() - 1);
  for (std::size_t i = 1; i < wl.size(); ++i) {
    const double d = (wl[i] - wl[i - 1]) * 1e3;
    if (std::abs(d - s.step) > 1e-6 * s.step + 1e-9) {
      throw InputError(origin + ": wavelength grid is not uniform near sample " +
                       std::to_string(i));
    }
  }
  return s;
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  return read_spectrum_csv(in, path.string());
}

}  // namespace xtalk
