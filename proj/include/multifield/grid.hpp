#pragma once

// ScalarGrid (2D maps and 3D grids) and the CMD-GRID v1 container.
//
// Values are float64 in memory so that conservation can be audited at 1e-9;
// they are narrowed to float32 only when written.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "multifield/binary_io.hpp"
#include "multifield/error.hpp"
#include "multifield/fields.hpp"
#include "multifield/params.hpp"

namespace multifield {

inline constexpr double kpc_per_mpc = 1000.0;

struct ScalarGrid {
  int dimensionality = 3;
  std::size_t n = 0;
  double box_size = 25.0;
  double redshift = 0.0;
  FieldId field = FieldId::Mgas;
  std::optional<ParameterVector> params;
  // Row-major, first axis slowest.
  std::vector<double> values;
  // Raw accumulation planes for weighted-mean fields (sum of numerator and of
  // weight per cell). Kept only on request; they let maps and coarser grids be
  // derived without a companion mass grid.
  std::vector<double> numerator;
  std::vector<double> denominator;
  // Cells whose weight was zero, stored as 0.
  std::size_t empty_cells = 0;

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int d = 0; d < dimensionality; ++d) c *= n;
    return c;
  }

  bool has_planes() const { return !denominator.empty(); }

  double cell_edge_kpc() const { return box_size * kpc_per_mpc / static_cast<double>(n); }

  // Pixel area in (h^-1 kpc)^2 or voxel volume in (h^-1 kpc)^3.
  double cell_measure() const { return std::pow(cell_edge_kpc(), dimensionality); }

  std::string units() const { return field_spec(field).units_for(dimensionality); }

  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return values[(i * n + j) * n + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values[(i * n + j) * n + k]; }

  // Sum of value times cell measure: the total quantity for density fields.
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_measure();
  }
};

inline ScalarGrid make_grid(int dimensionality, std::size_t n, double box_size, double redshift,
                            FieldId field) {
  if (dimensionality != 2 && dimensionality != 3) fail(ErrorCode::invalid_argument, "dimensionality must be 2 or 3");
  if (n < 1) fail(ErrorCode::invalid_argument, "grid size must be >= 1");
  ScalarGrid g;
  g.dimensionality = dimensionality;
  g.n = n;
  g.box_size = box_size;
  g.redshift = redshift;
  g.field = field;
  g.values.assign(g.cell_count(), 0.0);
  return g;
}

// ---------------------------------------------------------------------------
// CMD-GRID v1
// ---------------------------------------------------------------------------

inline constexpr std::string_view grid_magic = "CMDGRID1";
inline constexpr std::uint32_t grid_version = 1;
inline constexpr std::size_t grid_header_bytes = 8 + 4 + 1 + 4 + 4 + 8 + 8 + 4;
inline constexpr std::size_t record_param_bytes = parameter_count * 8;

struct GridHeader {
  std::uint8_t dimensionality = 3;
  FieldId field = FieldId::Mgas;
  std::uint32_t n = 0;
  double box_size = 25.0;
  double redshift = 0.0;
  std::uint32_t n_records = 0;

  std::uint64_t cells_per_record() const {
    std::uint64_t c = 1;
    for (int d = 0; d < dimensionality; ++d) c *= n;
    return c;
  }
  std::uint64_t payload_bytes_per_record() const { return cells_per_record() * 4; }
  std::uint64_t record_bytes() const { return record_param_bytes + payload_bytes_per_record(); }
  std::uint64_t file_bytes() const { return grid_header_bytes + n_records * record_bytes(); }
};

struct GridRecord {
  std::array<double, parameter_count> params{};
  std::vector<float> payload;
};

struct GridFile {
  GridHeader header;
  std::vector<GridRecord> records;
};

inline std::array<double, parameter_count> record_params(const std::optional<ParameterVector>& p) {
  std::array<double, parameter_count> out;
  out.fill(std::numeric_limits<double>::quiet_NaN());
  if (p) {
    for (std::size_t i = 0; i < active_parameters(p->suite); ++i) out[i] = p->values[i];
  }
  return out;
}

inline GridRecord to_record(const ScalarGrid& g) {
  GridRecord r;
  r.params = record_params(g.params);
  r.payload.resize(g.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double v = g.values[i];
    if (!std::isfinite(v)) fail(ErrorCode::invariant_violation, "non-finite grid value at cell " + std::to_string(i));
    r.payload[i] = static_cast<float>(v);
  }
  return r;
}

// Starts a file whose header matches g; records are appended with to_record.
inline GridFile grid_file_for(const ScalarGrid& g) {
  GridFile f;
  f.header.dimensionality = static_cast<std::uint8_t>(g.dimensionality);
  f.header.field = g.field;
  f.header.n = static_cast<std::uint32_t>(g.n);
  f.header.box_size = g.box_size;
  f.header.redshift = g.redshift;
  return f;
}

inline void append_record(GridFile& f, const ScalarGrid& g) {
  if (g.dimensionality != f.header.dimensionality || g.n != f.header.n || g.field != f.header.field) {
    fail(ErrorCode::shape_mismatch, "record does not match the file header");
  }
  f.records.push_back(to_record(g));
  f.header.n_records = static_cast<std::uint32_t>(f.records.size());
}

inline std::string encode_grid_file(const GridFile& f) {
  const auto& h = f.header;
  if (h.n_records != f.records.size()) fail(ErrorCode::invariant_violation, "n_records disagrees with record list");
  io::ByteWriter w;
  w.put_bytes(grid_magic);
  w.put(grid_version);
  w.put(h.dimensionality);
  w.put(static_cast<std::uint32_t>(h.field));
  w.put(h.n);
  w.put(h.box_size);
  w.put(h.redshift);
  w.put(h.n_records);
  for (const auto& r : f.records) {
    if (r.payload.size() != h.cells_per_record()) fail(ErrorCode::invariant_violation, "record payload size mismatch");
    for (double p : r.params) w.put(p);
    for (float v : r.payload) w.put(v);
  }
  return w.take();
}

inline GridHeader decode_grid_header(io::ByteReader& r) {
  const auto magic = r.get_bytes(8, "magic");
  if (magic != grid_magic) {
    std::string hint = magic == "CMDSNAP1" ? " (this is a CMD-SNAP particle snapshot)" : "";
    fail(ErrorCode::magic_mismatch, "expected CMDGRID1" + hint);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != grid_version) fail(ErrorCode::invariant_violation, "unsupported grid version " + std::to_string(version));
  GridHeader h;
  h.dimensionality = r.get<std::uint8_t>("dimensionality");
  const auto field = r.get<std::uint32_t>("field_id");
  h.n = r.get<std::uint32_t>("n");
  h.box_size = r.get<double>("box_size");
  h.redshift = r.get<double>("redshift");
  h.n_records = r.get<std::uint32_t>("n_records");
  if (h.dimensionality != 2 && h.dimensionality != 3) {
    fail(ErrorCode::invariant_violation, "dimensionality " + std::to_string(h.dimensionality));
  }
  if (field >= field_count) fail(ErrorCode::invariant_violation, "field_id " + std::to_string(field));
  h.field = static_cast<FieldId>(field);
  if (h.n < 1) fail(ErrorCode::invariant_violation, "grid size 0");
  if (!(h.box_size > 0.0)) fail(ErrorCode::invariant_violation, "box_size must be positive");
  return h;
}

inline GridFile decode_grid_file(std::string_view bytes) {
  io::ByteReader r(bytes);
  GridFile f;
  f.header = decode_grid_header(r);
  const auto cells = f.header.cells_per_record();
  r.require(f.header.n_records * f.header.record_bytes(), "grid records");
  f.records.resize(f.header.n_records);
  for (auto& rec : f.records) {
    for (auto& p : rec.params) p = r.get<double>("record params");
    rec.payload.resize(cells);
    for (auto& v : rec.payload) v = r.get<float>("payload");
  }
  if (r.remaining() != 0) {
    fail(ErrorCode::invariant_violation, std::to_string(r.remaining()) + " trailing bytes after last record");
  }
  return f;
}

inline void write_grid_file(const GridFile& f, const std::filesystem::path& path) {
  io::write_file(path, encode_grid_file(f));
}

inline GridFile read_grid_file(const std::filesystem::path& path) {
  return decode_grid_file(io::read_file(path));
}

// Header only; does not load payloads.
inline GridHeader read_grid_header(const std::filesystem::path& path) {
  const auto prefix = io::read_prefix(path, grid_header_bytes);
  io::ByteReader r(prefix);
  return decode_grid_header(r);
}

inline std::optional<ParameterVector> params_from_record(const std::array<double, parameter_count>& p) {
  if (std::isnan(p[0])) return std::nullopt;
  ParameterVector v;
  v.values = p;
  v.suite = std::isnan(p[2]) ? Suite::nbody : Suite::illustris_tng;
  return v;
}

inline ScalarGrid grid_from_record(const GridFile& f, std::size_t index) {
  if (index >= f.records.size()) {
    fail(ErrorCode::record_out_of_range, "record " + std::to_string(index) + " requested, file has " +
                                             std::to_string(f.records.size()));
  }
  const auto& h = f.header;
  ScalarGrid g = make_grid(h.dimensionality, h.n, h.box_size, h.redshift, h.field);
  const auto& rec = f.records[index];
  for (std::size_t i = 0; i < rec.payload.size(); ++i) g.values[i] = rec.payload[i];
  g.params = params_from_record(rec.params);
  return g;
}

}  // namespace multifield
