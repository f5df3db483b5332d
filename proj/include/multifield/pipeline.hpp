#pragma once

// End-to-end dataset generation: run configuration, manifest with SHA-256
// checksums, PGM rendering and file summaries.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "multifield/deposition.hpp"
#include "multifield/error.hpp"
#include "multifield/fields.hpp"
#include "multifield/grid.hpp"
#include "multifield/params.hpp"
#include "multifield/snapshot.hpp"

namespace multifield {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::io_failure, "SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration: "key = value" lines, '#' comments
// ---------------------------------------------------------------------------

struct RunConfig {
  std::optional<std::filesystem::path> snapshot;  // otherwise synthetic
  SyntheticSpec synthetic{};
  std::vector<FieldId> fields{FieldId::Mgas};
  std::vector<std::size_t> grid_sizes{64};
  std::vector<SlicePlan> slices;  // empty with default_slices: the 15-slab plan
  bool default_slices = true;
  std::size_t map_size = 256;
  Kernel2DMode kernel2d = Kernel2DMode::uniform_disk;
  std::size_t tracers = default_tracer_count;
  std::size_t neighbors = default_neighbor_count;
  std::uint64_t seed = 1;
  Suite suite = Suite::illustris_tng;
  std::optional<ParameterVector> params;  // otherwise one LHS draw from seed
  bool deterministic = true;
  unsigned threads = 0;  // 0: machine parallelism
  std::filesystem::path output = "cmd_out";
  std::string run_id = "sim0";
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    const auto item = trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!item.empty()) out.push_back(item);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  if (!(in >> out) || !(in >> std::ws).eof()) {
    fail(ErrorCode::parse_error, "config key '" + key + "': bad value '" + value + "'");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (value.find('-') != std::string::npos) {
      fail(ErrorCode::parse_error, "config key '" + key + "': must be non-negative");
    }
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  fail(ErrorCode::parse_error, "config key '" + key + "': expected true/false, got '" + value + "'");
}

inline int parse_axis(const std::string& s) {
  if (s == "x" || s == "0") return 0;
  if (s == "y" || s == "1") return 1;
  if (s == "z" || s == "2") return 2;
  fail(ErrorCode::parse_error, "bad axis '" + s + "'");
}

inline char axis_name(int axis) { return "xyz"[axis]; }

}  // namespace detail

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_number;
  const std::string value = detail::trim(raw);
  if (key == "snapshot") {
    if (value.empty()) c.snapshot.reset(); else c.snapshot = value;
  } else if (key == "synthetic.seed") {
    c.synthetic.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "synthetic.box_size") {
    c.synthetic.box_size = parse_number<double>(key, value);
  } else if (key == "synthetic.redshift") {
    c.synthetic.redshift = parse_number<double>(key, value);
  } else if (key == "synthetic.n_gas") {
    c.synthetic.n_gas = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic.n_dm") {
    c.synthetic.n_dm = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic.n_star") {
    c.synthetic.n_star = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic.n_black_hole") {
    c.synthetic.n_black_hole = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic.n_clumps") {
    c.synthetic.n_clumps = parse_number<std::size_t>(key, value);
  } else if (key == "synthetic.magnetic") {
    c.synthetic.magnetic = detail::parse_bool(key, value);
  } else if (key == "fields") {
    c.fields.clear();
    for (const auto& f : detail::split_list(value, ',')) {
      const auto id = parse_field(f);
      if (!id) fail(ErrorCode::parse_error, "unknown field '" + f + "'");
      if (std::find(c.fields.begin(), c.fields.end(), *id) == c.fields.end()) c.fields.push_back(*id);
    }
  } else if (key == "grid_sizes") {
    c.grid_sizes.clear();
    for (const auto& s : detail::split_list(value, ',')) {
      const auto n = parse_number<std::size_t>(key, s);
      if (n < 1) fail(ErrorCode::parse_error, "grid size must be >= 1");
      c.grid_sizes.push_back(n);
    }
  } else if (key == "slices") {
    c.slices.clear();
    c.default_slices = false;
    if (value == "default") {
      c.default_slices = true;
    } else if (value != "none" && !value.empty()) {
      // axis:offset:thickness, comma separated
      for (const auto& item : detail::split_list(value, ',')) {
        const auto parts = detail::split_list(item, ':');
        if (parts.size() != 3) fail(ErrorCode::parse_error, "slice '" + item + "' is not axis:offset:thickness");
        c.slices.push_back({detail::parse_axis(parts[0]), parse_number<double>(key, parts[1]),
                            parse_number<double>(key, parts[2])});
      }
    }
  } else if (key == "map_size") {
    c.map_size = parse_number<std::size_t>(key, value);
  } else if (key == "kernel2d") {
    c.kernel2d = parse_kernel2d_mode(value);
  } else if (key == "tracers") {
    c.tracers = parse_number<std::size_t>(key, value);
  } else if (key == "neighbors") {
    c.neighbors = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "suite") {
    const auto s = parse_suite(value);
    if (!s) fail(ErrorCode::parse_error, "unknown suite '" + value + "'");
    c.suite = *s;
  } else if (key == "params") {
    if (value.empty() || value == "lhs") {
      c.params.reset();
    } else {
      std::istringstream in(value);
      std::vector<double> v;
      for (double x; in >> x;) v.push_back(x);
      if (!in.eof()) fail(ErrorCode::parse_error, "params: bad number list '" + value + "'");
      if (v.size() == 2) {
        c.params = ParameterVector::nbody(v[0], v[1]);
      } else if (v.size() == parameter_count) {
        ParameterVector p;
        p.suite = c.suite == Suite::nbody ? Suite::illustris_tng : c.suite;
        std::copy(v.begin(), v.end(), p.values.begin());
        c.params = p;
      } else {
        fail(ErrorCode::parse_error, "params: expected 2 or 6 values");
      }
    }
  } else if (key == "deterministic") {
    c.deterministic = detail::parse_bool(key, value);
  } else if (key == "threads") {
    c.threads = parse_number<unsigned>(key, value);
  } else if (key == "output") {
    c.output = value;
  } else if (key == "run_id") {
    if (value.empty() || value.find_first_of(" \t") != std::string::npos) {
      fail(ErrorCode::parse_error, "run_id must be a single word");
    }
    c.run_id = value;
  } else {
    fail(ErrorCode::parse_error, "unknown config key '" + key + "'");
  }
}

inline void apply_assignment(RunConfig& c, std::string_view line, std::size_t line_no = 0) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    fail(ErrorCode::parse_error, (line_no ? "line " + std::to_string(line_no) + ": " : std::string()) +
                                     "expected key = value");
  }
  try {
    apply_setting(c, detail::trim(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  } catch (const Error& e) {
    if (line_no == 0) throw;
    fail(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
  }
}

inline RunConfig parse_run_config(std::string_view text, RunConfig base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    apply_assignment(base, line, line_no);
  }
  return base;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_file(path));
}

inline std::vector<SlicePlan> resolved_slices(const RunConfig& c, double box) {
  return c.default_slices ? slice_plan_default(box) : c.slices;
}

// Canonical key/value form of every setting that affects the outputs.
inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  if (c.snapshot) {
    j["snapshot"] = c.snapshot->generic_string();
  } else {
    j["synthetic"] = {{"seed", c.synthetic.seed},
                      {"box_size", c.synthetic.box_size},
                      {"redshift", c.synthetic.redshift},
                      {"n_gas", c.synthetic.n_gas},
                      {"n_dm", c.synthetic.n_dm},
                      {"n_star", c.synthetic.n_star},
                      {"n_black_hole", c.synthetic.n_black_hole},
                      {"n_clumps", c.synthetic.n_clumps},
                      {"magnetic", c.synthetic.magnetic}};
  }
  std::vector<std::string> fields;
  for (auto f : c.fields) fields.emplace_back(field_prefix(f));
  j["fields"] = fields;
  j["grid_sizes"] = c.grid_sizes;
  if (c.default_slices) {
    j["slices"] = "default";
  } else {
    std::vector<std::string> s;
    for (const auto& p : c.slices) {
      s.push_back(std::string(1, detail::axis_name(p.axis)) + ":" + format_double(p.offset) + ":" +
                  format_double(p.thickness));
    }
    j["slices"] = s;
  }
  j["map_size"] = c.map_size;
  j["kernel2d"] = std::string(to_string(c.kernel2d));
  j["tracers"] = c.tracers;
  j["neighbors"] = c.neighbors;
  j["seed"] = c.seed;
  j["suite"] = std::string(suite_name(c.suite));
  j["deterministic"] = c.deterministic;
  j["run_id"] = c.run_id;
  return j;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string kind;  // grid, map, labels
  std::uint64_t bytes = 0;
  std::string sha256;
  std::optional<FieldId> field;
  std::size_t n = 0;
  std::size_t records = 0;
  std::size_t empty_cells = 0;
};

struct Manifest {
  nlohmann::json config;
  std::vector<ManifestEntry> files;
  std::map<std::string, std::size_t> particles;
  ParameterVector params;

  std::string to_json() const {
    nlohmann::json j;
    j["format"] = "cmd-manifest-1";
    j["config"] = config;
    j["particles"] = particles;
    std::vector<double> p;
    for (std::size_t i = 0; i < active_parameters(params.suite); ++i) p.push_back(params.values[i]);
    j["params"] = {{"suite", std::string(suite_name(params.suite))}, {"values", p}};
    auto& list = j["files"] = nlohmann::json::array();
    for (const auto& f : files) {
      nlohmann::json e{{"path", f.path}, {"kind", f.kind}, {"bytes", f.bytes}, {"sha256", f.sha256}};
      if (f.field) {
        e["field"] = std::string(field_prefix(*f.field));
        e["n"] = f.n;
        e["records"] = f.records;
        e["empty_cells"] = f.empty_cells;
      }
      list.push_back(e);
    }
    return j.dump(2) + "\n";
  }
};

inline constexpr std::string_view manifest_name = "manifest.json";

namespace detail {

inline ManifestEntry write_artifact(const std::filesystem::path& root, const std::string& rel,
                                    const std::string& kind, const std::string& bytes) {
  const auto path = root / rel;
  std::filesystem::create_directories(path.parent_path());
  io::write_file(path, bytes);
  ManifestEntry e;
  e.path = rel;
  e.kind = kind;
  e.bytes = bytes.size();
  e.sha256 = sha256_hex(bytes);
  return e;
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    fail(e.code(), context + ": " + e.what());
  }
}

}  // namespace detail

inline Snapshot load_run_snapshot(const RunConfig& c) {
  if (c.snapshot) {
    return detail::with_context("snapshot " + c.snapshot->string(), [&] { return read_snapshot(*c.snapshot); });
  }
  return gen_synthetic(c.synthetic);
}

// Runs the whole pipeline and writes grids/, maps/, labels.txt and the
// manifest under c.output.
inline Manifest cmd_generate(const RunConfig& c) {
  if (c.fields.empty()) fail(ErrorCode::invalid_argument, "no fields requested");
  const unsigned workers = c.threads == 0 ? default_workers() : c.threads;
  const Snapshot snap = load_run_snapshot(c);
  for (auto f : c.fields) {
    detail::with_context("field " + std::string(field_prefix(f)),
                         [&] { require_field_inputs(field_spec(f), snap); return 0; });
  }

  Manifest m;
  m.config = config_json(c);
  for (const auto& set : snap.species) m.particles[std::string(species_name(set.kind))] = set.count();
  if (c.params) {
    m.params = *c.params;
  } else {
    m.params = sample_lhs(1, c.seed, c.suite).front();
  }
  validate(m.params);

  const RadiiMap radii = compute_radii(snap, c.neighbors, workers);
  const auto& root = c.output;
  std::filesystem::create_directories(root);

  for (std::size_t n : c.grid_sizes) {
    auto grids = deposit3d_fields(snap, radii, c.fields, n, {workers, false});
    for (auto& g : grids) {
      g.params = m.params;
      GridFile file = grid_file_for(g);
      append_record(file, g);
      const std::string rel = "grids/" + std::string(field_prefix(g.field)) + "_n" + std::to_string(n) + ".cmdgrid";
      auto e = detail::write_artifact(root, rel, "grid", encode_grid_file(file));
      e.field = g.field;
      e.n = n;
      e.records = 1;
      e.empty_cells = g.empty_cells;
      m.files.push_back(std::move(e));
    }
  }

  const auto slices = resolved_slices(c, snap.header.box_size);
  if (!slices.empty()) {
    std::vector<GridFile> files;
    std::vector<std::size_t> empty(c.fields.size(), 0);
    Deposit2DOptions opt{c.map_size, c.kernel2d, c.tracers, workers, false};
    for (const auto& plan : slices) {
      auto maps = deposit2d_fields(snap, radii, c.fields, plan, opt);
      for (std::size_t f = 0; f < maps.size(); ++f) {
        maps[f].params = m.params;
        if (files.size() <= f) files.push_back(grid_file_for(maps[f]));
        append_record(files[f], maps[f]);
        empty[f] += maps[f].empty_cells;
      }
    }
    for (std::size_t f = 0; f < files.size(); ++f) {
      const auto field = files[f].header.field;
      const std::string rel =
          "maps/" + std::string(field_prefix(field)) + "_map" + std::to_string(c.map_size) + ".cmdgrid";
      auto e = detail::write_artifact(root, rel, "map", encode_grid_file(files[f]));
      e.field = field;
      e.n = c.map_size;
      e.records = files[f].records.size();
      e.empty_cells = empty[f];
      m.files.push_back(std::move(e));
    }
  }

  m.files.push_back(detail::write_artifact(root, "labels.txt", "labels",
                                           format_labels({LabelRecord{c.run_id, m.params}})));
  io::write_file(root / manifest_name, m.to_json());
  return m;
}

// ---------------------------------------------------------------------------
// render / info
// ---------------------------------------------------------------------------

// Nearest-rank percentile of a sorted sample, q in [0, 1].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
  return sorted[std::min(idx, sorted.size() - 1)];
}

// 8-bit binary PGM, log-scaled between the 1st and 99th percentile. Values
// at or below the lower bound map to 0, at or above the upper to 255. When the
// lower bound is not positive the smallest positive value is used instead;
// a degenerate range (constant map, or no positive values) renders all 0.
inline std::string render_pgm(const ScalarGrid& map) {
  if (map.dimensionality != 2) fail(ErrorCode::invalid_argument, "render_pgm needs a 2D map");
  std::vector<double> sorted(map.values);
  std::sort(sorted.begin(), sorted.end());
  double lo = percentile_sorted(sorted, 0.01);
  const double hi = percentile_sorted(sorted, 0.99);
  if (!(lo > 0.0)) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
    lo = it == sorted.end() ? 0.0 : *it;
  }
  const bool degenerate = !(lo > 0.0) || !(hi > lo);
  const double llo = degenerate ? 0.0 : std::log(lo);
  const double span = degenerate ? 1.0 : std::log(hi) - llo;

  std::string out = "P5 " + std::to_string(map.n) + " " + std::to_string(map.n) + " 255\n";
  out.reserve(out.size() + map.values.size());
  for (double v : map.values) {
    unsigned char px = 0;
    if (!degenerate && v > lo) {
      const double t = (std::log(v) - llo) / span;
      px = static_cast<unsigned char>(std::clamp(std::lround(255.0 * t), 0L, 255L));
    }
    out.push_back(static_cast<char>(px));
  }
  return out;
}

inline std::string describe_grid_header(const GridHeader& h, std::uint64_t actual_bytes) {
  const FieldSpec& f = field_spec(h.field);
  std::ostringstream o;
  o << "format: CMD-GRID v1\n";
  o << "kind: " << (h.dimensionality == 2 ? "2D map" : "3D grid") << "\n";
  o << "field: " << f.prefix << " (" << f.title << ", id " << static_cast<std::uint32_t>(h.field) << ")\n";
  o << "mode: " << to_string(f.mode) << "\n";
  o << "units: " << f.units_for(h.dimensionality) << "\n";
  o << "size: " << h.n;
  for (int d = 1; d < h.dimensionality; ++d) o << "x" << h.n;
  o << "\n";
  o << "box_size: " << h.box_size << " h^-1 Mpc\n";
  o << "redshift: " << h.redshift << "\n";
  o << "records: " << h.n_records << "\n";
  o << "payload bytes per record: " << h.payload_bytes_per_record() << "\n";
  o << "payload bytes total: " << h.payload_bytes_per_record() * h.n_records << "\n";
  o << "file bytes: " << actual_bytes << " (expected " << h.file_bytes() << ")\n";
  return o.str();
}

inline std::string cmd_info(const std::filesystem::path& path) {
  const GridHeader h = read_grid_header(path);
  const auto size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
  if (size != h.file_bytes()) {
    fail(size < h.file_bytes() ? ErrorCode::truncated_file : ErrorCode::invariant_violation,
         "file has " + std::to_string(size) + " bytes, header implies " + std::to_string(h.file_bytes()));
  }
  return describe_grid_header(h, size);
}

}  // namespace multifield
