#pragma once

// The six-parameter label space, latin-hypercube sampling and the plain-text
// label format.

#include <array>
#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "multifield/binary_io.hpp"
#include "multifield/error.hpp"
#include "multifield/random.hpp"

namespace multifield {

enum class Suite : std::uint8_t { illustris_tng, simba, nbody };

constexpr std::string_view suite_name(Suite s) {
  switch (s) {
    case Suite::illustris_tng: return "IllustrisTNG";
    case Suite::simba: return "SIMBA";
    case Suite::nbody: return "N-body";
  }
  return "unknown";
}

inline std::optional<Suite> parse_suite(std::string_view name) {
  for (auto s : {Suite::illustris_tng, Suite::simba, Suite::nbody}) {
    if (suite_name(s) == name) return s;
  }
  return std::nullopt;
}

inline constexpr std::size_t parameter_count = 6;

struct ParameterRange {
  std::string_view name;
  double lo;
  double hi;
  bool log_uniform;
};

inline constexpr std::array<ParameterRange, parameter_count> parameter_ranges{{
    {"omega_m", 0.1, 0.5, false},
    {"sigma_8", 0.6, 1.0, false},
    {"a_sn1", 0.25, 4.0, true},
    {"a_sn2", 0.5, 2.0, true},
    {"a_agn1", 0.25, 4.0, true},
    {"a_agn2", 0.5, 2.0, true},
}};

// Number of meaningful entries for a suite: N-body labels carry only the two
// cosmological parameters.
constexpr std::size_t active_parameters(Suite s) { return s == Suite::nbody ? 2 : parameter_count; }

struct ParameterVector {
  Suite suite = Suite::illustris_tng;
  // Inactive entries (N-body astro parameters) are NaN.
  std::array<double, parameter_count> values{};

  double omega_m() const { return values[0]; }
  double sigma_8() const { return values[1]; }

  static ParameterVector hydro(Suite suite, const std::array<double, parameter_count>& v) {
    return ParameterVector{suite, v};
  }

  static ParameterVector nbody(double omega_m, double sigma_8) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return ParameterVector{Suite::nbody, {omega_m, sigma_8, nan, nan, nan, nan}};
  }

  bool operator==(const ParameterVector& o) const {
    if (suite != o.suite) return false;
    for (std::size_t i = 0; i < active_parameters(suite); ++i) {
      if (std::bit_cast<std::uint64_t>(values[i]) != std::bit_cast<std::uint64_t>(o.values[i])) return false;
    }
    return true;
  }
};

// Bounds are inclusive.
inline void validate(const ParameterVector& v) {
  for (std::size_t i = 0; i < active_parameters(v.suite); ++i) {
    const auto& r = parameter_ranges[i];
    const double x = v.values[i];
    if (!(x >= r.lo && x <= r.hi)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << r.name << " = " << x << " outside [" << r.lo << ", " << r.hi << "]";
      fail(ErrorCode::out_of_range, msg.str());
    }
  }
}

// Position of x within its range on [0, 1]; linear for omega_m and sigma_8,
// logarithmic for the feedback amplitudes.
inline double normalize_parameter(std::size_t index, double x) {
  const auto& r = parameter_ranges.at(index);
  if (r.log_uniform) return std::log(x / r.lo) / std::log(r.hi / r.lo);
  return (x - r.lo) / (r.hi - r.lo);
}

inline double denormalize_parameter(std::size_t index, double u) {
  const auto& r = parameter_ranges.at(index);
  if (r.log_uniform) return r.lo * std::exp(u * std::log(r.hi / r.lo));
  return r.lo + u * (r.hi - r.lo);
}

// Latin hypercube: each dimension gets one sample per equal-probability bin,
// placed uniformly inside the bin, with an independent seeded bin permutation.
inline std::vector<ParameterVector> sample_lhs(std::size_t n, std::uint64_t seed,
                                               Suite suite = Suite::illustris_tng) {
  if (n < 1) fail(ErrorCode::invalid_argument, "sample count must be >= 1");
  Rng rng(seed);
  std::vector<ParameterVector> out(n);
  for (auto& v : out) {
    v.suite = suite;
    v.values.fill(std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<std::size_t> bins(n);
  for (std::size_t d = 0; d < active_parameters(suite); ++d) {
    std::iota(bins.begin(), bins.end(), std::size_t{0});
    rng.shuffle(std::span(bins));
    const auto& r = parameter_ranges[d];
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(bins[i]) + rng.uniform()) / static_cast<double>(n);
      out[i].values[d] = std::clamp(denormalize_parameter(d, u), r.lo, r.hi);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label files: "<record-id> <suite> v1 v2 [v3 .. v6]" per line
// ---------------------------------------------------------------------------

struct LabelRecord {
  std::string id;
  ParameterVector params;

  bool operator==(const LabelRecord&) const = default;
};

inline std::string format_double(double x) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline std::string format_labels(const std::vector<LabelRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    if (r.id.empty() || r.id.find_first_of(" \t\n") != std::string::npos) {
      fail(ErrorCode::invalid_argument, "record id must be non-empty without whitespace");
    }
    out += r.id;
    out += ' ';
    out += suite_name(r.params.suite);
    for (std::size_t i = 0; i < active_parameters(r.params.suite); ++i) {
      out += ' ';
      out += format_double(r.params.values[i]);
    }
    out += '\n';
  }
  return out;
}

inline double parse_double(std::string_view token, std::size_t line) {
  double value = 0.0;
  std::string text(token);
  char* end = nullptr;
  value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    fail(ErrorCode::parse_error, "line " + std::to_string(line) + ": bad number '" + text + "'");
  }
  return value;
}

inline std::vector<LabelRecord> parse_labels(std::string_view text) {
  std::vector<LabelRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    const auto where = "line " + std::to_string(line_no);
    if (tokens.size() < 2) fail(ErrorCode::parse_error, where + ": expected id and suite");
    const auto suite = parse_suite(tokens[1]);
    if (!suite) fail(ErrorCode::parse_error, where + ": unknown suite '" + tokens[1] + "'");
    const std::size_t arity = active_parameters(*suite);
    if (tokens.size() - 2 != arity) {
      fail(ErrorCode::parse_error, where + ": " + std::string(suite_name(*suite)) + " expects " +
                                       std::to_string(arity) + " values, got " +
                                       std::to_string(tokens.size() - 2));
    }
    LabelRecord rec;
    rec.id = tokens[0];
    rec.params.suite = *suite;
    rec.params.values.fill(std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < arity; ++i) rec.params.values[i] = parse_double(tokens[2 + i], line_no);
    out.push_back(std::move(rec));
  }
  return out;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<LabelRecord>& records) {
  io::write_file(path, format_labels(records));
}

inline std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  return parse_labels(io::read_file(path));
}

}  // namespace multifield
