#pragma once

// Particle data model, the CMD-SNAP v1 file format and a seeded synthetic
// snapshot generator.
//
// Units in memory: positions h^-1 Mpc, velocities km/s, masses h^-1 Msun.
// Every payload value is float32 on disk and float64 in memory.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "multifield/binary_io.hpp"
#include "multifield/error.hpp"
#include "multifield/random.hpp"

namespace multifield {

using Vec3 = std::array<double, 3>;

enum class Species : std::uint8_t { gas = 0, dark_matter = 1, star = 2, black_hole = 3 };

inline constexpr std::array<Species, 4> all_species{Species::gas, Species::dark_matter,
                                                    Species::star, Species::black_hole};

constexpr std::string_view species_name(Species s) {
  switch (s) {
    case Species::gas: return "gas";
    case Species::dark_matter: return "dark_matter";
    case Species::star: return "star";
    case Species::black_hole: return "black_hole";
  }
  return "unknown";
}

inline std::optional<Species> parse_species(std::string_view name) {
  for (auto s : all_species) {
    if (species_name(s) == name) return s;
  }
  if (name == "dm") return Species::dark_matter;
  if (name == "bh") return Species::black_hole;
  return std::nullopt;
}

// Gas property names understood by the field catalog.
namespace property {
inline constexpr std::string_view temperature = "temperature";          // K
inline constexpr std::string_view pressure = "pressure";                // (km/s)^2 Msun/kpc^3
inline constexpr std::string_view metallicity = "metallicity";          // dimensionless
inline constexpr std::string_view hi_mass = "hi_mass";                  // h^-1 Msun
inline constexpr std::string_view electron_count = "electron_count";    // h^-1
inline constexpr std::string_view b_modulus = "b_modulus";              // Gauss
inline constexpr std::string_view mg_mass = "mg_mass";                  // h^-1 Msun
inline constexpr std::string_view fe_mass = "fe_mass";                  // h^-1 Msun
}  // namespace property

inline constexpr std::size_t property_name_width = 16;

struct SnapshotHeader {
  double box_size = 25.0;
  double redshift = 0.0;
  std::uint32_t species_count = 0;

  bool operator==(const SnapshotHeader&) const = default;
};

struct ParticleSet {
  Species kind = Species::gas;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<double> masses;
  std::map<std::string, std::vector<double>, std::less<>> properties;

  std::size_t count() const { return positions.size(); }

  const std::vector<double>* find_property(std::string_view name) const {
    auto it = properties.find(name);
    return it == properties.end() ? nullptr : &it->second;
  }

  bool operator==(const ParticleSet&) const = default;
};

struct Snapshot {
  SnapshotHeader header;
  std::vector<ParticleSet> species;

  const ParticleSet* find(Species kind) const {
    for (const auto& s : species) {
      if (s.kind == kind) return &s;
    }
    return nullptr;
  }

  std::size_t total_count() const {
    return std::accumulate(species.begin(), species.end(), std::size_t{0},
                           [](std::size_t acc, const ParticleSet& s) { return acc + s.count(); });
  }

  bool operator==(const Snapshot&) const = default;
};

namespace detail {

inline std::string particle_context(const ParticleSet& set, std::size_t index) {
  return std::string(species_name(set.kind)) + "[" + std::to_string(index) + "]";
}

[[noreturn]] inline void invariant(const std::string& message) {
  fail(ErrorCode::invariant_violation, message);
}

}  // namespace detail

// Throws InvariantViolation naming the offending species/particle.
inline void validate(const Snapshot& snap) {
  const double box = snap.header.box_size;
  if (!(box > 0.0) || !std::isfinite(box)) detail::invariant("box_size must be positive and finite");
  if (!(snap.header.redshift >= 0.0) || !std::isfinite(snap.header.redshift)) {
    detail::invariant("redshift must be finite and >= 0");
  }
  if (snap.header.species_count != snap.species.size()) {
    detail::invariant("species_count " + std::to_string(snap.header.species_count) +
                      " does not match " + std::to_string(snap.species.size()) + " species sets");
  }
  std::array<bool, 4> seen{};
  for (const auto& set : snap.species) {
    const auto kind_index = static_cast<std::size_t>(set.kind);
    if (kind_index >= seen.size()) detail::invariant("unknown species tag");
    if (seen[kind_index]) {
      detail::invariant("duplicate species set " + std::string(species_name(set.kind)));
    }
    seen[kind_index] = true;

    const std::size_t n = set.count();
    const std::string tag(species_name(set.kind));
    if (set.velocities.size() != n || set.masses.size() != n) {
      detail::invariant(tag + ": positions/velocities/masses lengths differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int axis = 0; axis < 3; ++axis) {
        const double x = set.positions[i][axis];
        if (!(x >= 0.0 && x < box)) {
          detail::invariant(detail::particle_context(set, i) + " position " + std::to_string(x) +
                            " outside [0, " + std::to_string(box) + ")");
        }
        if (!std::isfinite(set.velocities[i][axis])) {
          detail::invariant(detail::particle_context(set, i) + " velocity is not finite");
        }
      }
      if (!(set.masses[i] > 0.0) || !std::isfinite(set.masses[i])) {
        detail::invariant(detail::particle_context(set, i) + " mass must be positive");
      }
    }
    for (const auto& [name, values] : set.properties) {
      if (name.empty() || name.size() > property_name_width) {
        detail::invariant(tag + ": property name '" + name + "' must be 1..16 bytes");
      }
      for (char c : name) {
        if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) > 0x7e) {
          detail::invariant(tag + ": property name '" + name + "' is not printable ASCII");
        }
      }
      if (values.size() != n) {
        detail::invariant(tag + ": property '" + name + "' has " + std::to_string(values.size()) +
                          " values for " + std::to_string(n) + " particles");
      }
      const bool mass_like = name == property::hi_mass || name == property::mg_mass ||
                             name == property::fe_mass;
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(values[i])) {
          detail::invariant(detail::particle_context(set, i) + " property '" + name + "' is not finite");
        }
        if (mass_like && values[i] < 0.0) {
          detail::invariant(detail::particle_context(set, i) + " " + name + " is negative");
        }
        if (name == property::hi_mass && values[i] > set.masses[i]) {
          detail::invariant(detail::particle_context(set, i) + " hi_mass exceeds mass");
        }
      }
    }
  }
}

inline constexpr std::string_view snapshot_magic = "CMDSNAP1";
inline constexpr std::uint32_t snapshot_version = 1;
// magic + version + box + redshift + n_species
inline constexpr std::size_t snapshot_header_bytes = 8 + 4 + 8 + 8 + 4;

// Serializes to CMD-SNAP v1. Values are narrowed to float32; the narrowed
// snapshot must still satisfy every invariant (e.g. a position just below
// box_size that rounds up to it is rejected).
inline std::string encode_snapshot(const Snapshot& snap) {
  validate(snap);
  const auto box = snap.header.box_size;
  io::ByteWriter w;
  w.put_bytes(snapshot_magic);
  w.put(snapshot_version);
  w.put(box);
  w.put(snap.header.redshift);
  w.put(static_cast<std::uint32_t>(snap.species.size()));
  for (const auto& set : snap.species) {
    w.put(static_cast<std::uint8_t>(set.kind));
    w.put(static_cast<std::uint64_t>(set.count()));
    w.put(static_cast<std::uint32_t>(set.properties.size()));
    for (const auto& [name, values] : set.properties) w.put_padded(name, property_name_width);

    for (std::size_t i = 0; i < set.count(); ++i) {
      for (int axis = 0; axis < 3; ++axis) {
        const auto x = static_cast<float>(set.positions[i][axis]);
        if (!(static_cast<double>(x) < box)) {
          detail::invariant(detail::particle_context(set, i) +
                            " position rounds to box_size in float32");
        }
        w.put(x);
      }
    }
    for (const auto& v : set.velocities) {
      for (double c : v) w.put(static_cast<float>(c));
    }
    for (double m : set.masses) {
      const auto narrowed = static_cast<float>(m);
      if (!(narrowed > 0.0f) || !std::isfinite(narrowed)) {
        detail::invariant(std::string(species_name(set.kind)) + " mass not representable in float32");
      }
      w.put(narrowed);
    }
    for (const auto& [name, values] : set.properties) {
      for (double v : values) {
        const auto narrowed = static_cast<float>(v);
        if (!std::isfinite(narrowed)) {
          detail::invariant("property '" + name + "' overflows float32");
        }
        w.put(narrowed);
      }
    }
  }
  return w.take();
}

inline Snapshot decode_snapshot(std::string_view bytes) {
  io::ByteReader r(bytes);
  const auto magic = r.get_bytes(8, "magic");
  if (magic != snapshot_magic) {
    std::string hint;
    if (magic == "CMDGRID1") hint = " (this is a CMD-GRID file)";
    fail(ErrorCode::magic_mismatch,
         "expected CMDSNAP1, found '" + std::string(magic) + "'" + hint);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != snapshot_version) {
    fail(ErrorCode::invariant_violation, "unsupported CMD-SNAP version " + std::to_string(version));
  }
  Snapshot snap;
  snap.header.box_size = r.get<double>("box_size");
  snap.header.redshift = r.get<double>("redshift");
  snap.header.species_count = r.get<std::uint32_t>("n_species");

  for (std::uint32_t s = 0; s < snap.header.species_count; ++s) {
    ParticleSet set;
    const auto kind = r.get<std::uint8_t>("species kind");
    if (kind > 3) fail(ErrorCode::invariant_violation, "unknown species tag " + std::to_string(kind));
    set.kind = static_cast<Species>(kind);
    const auto count64 = r.get<std::uint64_t>("species count");
    const auto n_props = r.get<std::uint32_t>("property count");

    std::vector<std::string> names;
    r.require(std::size_t{n_props} * property_name_width, "property names");
    for (std::uint32_t p = 0; p < n_props; ++p) {
      auto raw = r.get_bytes(property_name_width, "property name");
      names.emplace_back(raw.substr(0, raw.find('\0')));
    }
    // 7 floats per particle (position, velocity, mass) plus one per property.
    const std::uint64_t floats_per_particle = 7 + std::uint64_t{n_props};
    if (count64 > r.remaining() / (4 * floats_per_particle)) {
      fail(ErrorCode::truncated_file,
           std::string(species_name(set.kind)) + " declares " + std::to_string(count64) +
               " particles but the payload is shorter");
    }
    const auto count = static_cast<std::size_t>(count64);
    auto read_vec3 = [&](std::vector<Vec3>& out, std::string_view what) {
      out.resize(count);
      for (auto& v : out) {
        for (auto& c : v) c = r.get<float>(what);
      }
    };
    read_vec3(set.positions, "positions");
    read_vec3(set.velocities, "velocities");
    set.masses.resize(count);
    for (auto& m : set.masses) m = r.get<float>("masses");
    for (const auto& name : names) {
      std::vector<double> values(count);
      for (auto& v : values) v = r.get<float>("property values");
      if (!set.properties.emplace(name, std::move(values)).second) {
        fail(ErrorCode::invariant_violation, "duplicate property '" + name + "'");
      }
    }
    snap.species.push_back(std::move(set));
  }
  if (r.remaining() != 0) {
    fail(ErrorCode::invariant_violation,
         std::to_string(r.remaining()) + " trailing bytes after the last species");
  }
  validate(snap);
  return snap;
}

inline void write_snapshot(const Snapshot& snap, const std::filesystem::path& path) {
  io::write_file(path, encode_snapshot(snap));
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
  return decode_snapshot(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Synthetic snapshots
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::uint64_t seed = 1;
  double box_size = 25.0;
  double redshift = 0.0;
  std::size_t n_gas = 0;
  std::size_t n_dm = 0;
  std::size_t n_star = 0;
  std::size_t n_black_hole = 0;
  std::size_t n_clumps = 8;
  bool magnetic = true;  // emit b_modulus (IllustrisTNG-like) or not (SIMBA-like)
};

namespace detail {

struct Clump {
  Vec3 center;
  double width;
};

inline double wrap(double x, double box) {
  double w = std::fmod(x, box);
  if (w < 0.0) w += box;
  // Keep the value representable as a float strictly below box.
  auto f = static_cast<float>(w);
  if (!(static_cast<double>(f) < box)) f = 0.0f;
  return static_cast<double>(f);
}

inline double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

inline double periodic_delta(double a, double b, double box) {
  double d = std::fabs(a - b);
  return std::min(d, box - d);
}

// Sum of Gaussian bumps around the clump centers, ~1 at a center, ~0 far away.
inline double proximity(const Vec3& p, const std::vector<Clump>& clumps, double box) {
  double sum = 0.0;
  for (const auto& c : clumps) {
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = periodic_delta(p[a], c.center[a], box);
      r2 += d * d;
    }
    sum += std::exp(-0.5 * r2 / (c.width * c.width));
  }
  return sum;
}

}  // namespace detail

// Generator model (invented; not physically calibrated):
//  * clump centers are stratified per axis (one per 1/n_clumps stratum, with
//    a seeded permutation per axis) and have widths in [0.02, 0.06] * box;
//  * a particle is drawn uniformly in the box with a species-dependent
//    background probability (gas 0.5, dm 0.4, stars 0.1, black holes 0),
//    otherwise from an isotropic Gaussian around a uniformly chosen clump;
//  * velocities are Gaussian with dispersion 100 + 300*phi km/s, where phi is
//    the clump proximity (sum of Gaussian bumps at the particle);
//  * gas properties are smooth positive functions of phi:
//      T  = 1e4 (1 + 50 phi) exp(0.2 g) K,      Z = 1e-4 + 0.02 phi / (1 + phi),
//      P  = 10 (1 + phi)^2 T / 1e4,             x_HI = 0.5 exp(-T / 2e4),
//      hi_mass = x_HI m,  electron_count = 1.19e14 (1 - x_HI) (m / 1e7) (units of 1e50),
//      B  = 1e-9 (1 + 10 phi)^2 Gauss,  mg/fe masses = (0.06, 0.10) Z m (1 + 0.2 u).
//  All values are rounded to float32 so that written files round-trip.
inline Snapshot gen_synthetic(const SyntheticSpec& spec) {
  if (!(spec.box_size > 0.0)) fail(ErrorCode::invalid_argument, "box_size must be positive");
  if (spec.n_clumps < 1) fail(ErrorCode::invalid_argument, "n_clumps must be >= 1");
  if (!(spec.redshift >= 0.0)) fail(ErrorCode::invalid_argument, "redshift must be >= 0");

  Rng rng(spec.seed);
  const double box = spec.box_size;

  std::vector<detail::Clump> clumps(spec.n_clumps);
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<std::size_t> strata(spec.n_clumps);
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(std::span(strata));
    for (std::size_t c = 0; c < spec.n_clumps; ++c) {
      clumps[c].center[axis] =
          (static_cast<double>(strata[c]) + rng.uniform()) / static_cast<double>(spec.n_clumps) * box;
    }
  }
  for (auto& c : clumps) c.width = box * rng.uniform(0.02, 0.06);

  auto draw_position = [&](double background) {
    Vec3 p;
    if (rng.uniform() < background) {
      for (auto& x : p) x = detail::wrap(rng.uniform() * box, box);
    } else {
      const auto& c = clumps[rng.below(clumps.size())];
      for (int a = 0; a < 3; ++a) p[a] = detail::wrap(c.center[a] + c.width * rng.normal(), box);
    }
    return p;
  };

  auto make_set = [&](Species kind, std::size_t n, double background, auto&& mass_of) {
    ParticleSet set;
    set.kind = kind;
    set.positions.reserve(n);
    set.velocities.reserve(n);
    set.masses.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = draw_position(background);
      const double phi = detail::proximity(p, clumps, box);
      const double dispersion = 100.0 + 300.0 * std::min(phi, 2.0);
      Vec3 v;
      for (auto& c : v) c = detail::to_float(dispersion * rng.normal());
      set.positions.push_back(p);
      set.velocities.push_back(v);
      set.masses.push_back(detail::to_float(mass_of()));
    }
    return set;
  };

  Snapshot snap;
  snap.header.box_size = box;
  snap.header.redshift = spec.redshift;

  {
    ParticleSet gas = make_set(Species::gas, spec.n_gas, 0.5,
                               [&] { return 1.3e7 * (1.0 + 0.1 * rng.uniform()); });
    const std::size_t n = gas.count();
    if (n > 0) {
      std::vector<double> t(n), p(n), z(n), hi(n), ne(n), b(n), mg(n), fe(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double phi = detail::proximity(gas.positions[i], clumps, box);
        const double m = gas.masses[i];
        const double temp = 1e4 * (1.0 + 50.0 * phi) * std::exp(0.2 * rng.normal());
        const double metals = 1e-4 + 0.02 * phi / (1.0 + phi);
        const double x_hi = 0.5 * std::exp(-temp / 2e4);
        t[i] = detail::to_float(temp);
        z[i] = detail::to_float(metals);
        p[i] = detail::to_float(10.0 * (1.0 + phi) * (1.0 + phi) * temp / 1e4);
        hi[i] = std::min(detail::to_float(x_hi * m), m);
        ne[i] = detail::to_float(1.19e14 * (1.0 - x_hi) * (m / 1e7));
        b[i] = detail::to_float(1e-9 * (1.0 + 10.0 * phi) * (1.0 + 10.0 * phi));
        mg[i] = detail::to_float(0.06 * metals * m * (1.0 + 0.2 * rng.uniform()));
        fe[i] = detail::to_float(0.10 * metals * m * (1.0 + 0.2 * rng.uniform()));
      }
      gas.properties.emplace(std::string(property::temperature), std::move(t));
      gas.properties.emplace(std::string(property::pressure), std::move(p));
      gas.properties.emplace(std::string(property::metallicity), std::move(z));
      gas.properties.emplace(std::string(property::hi_mass), std::move(hi));
      gas.properties.emplace(std::string(property::electron_count), std::move(ne));
      if (spec.magnetic) gas.properties.emplace(std::string(property::b_modulus), std::move(b));
      gas.properties.emplace(std::string(property::mg_mass), std::move(mg));
      gas.properties.emplace(std::string(property::fe_mass), std::move(fe));
    }
    snap.species.push_back(std::move(gas));
  }
  if (spec.n_dm > 0) {
    snap.species.push_back(make_set(Species::dark_matter, spec.n_dm, 0.4, [] { return 6.5e7; }));
  }
  if (spec.n_star > 0) {
    snap.species.push_back(make_set(Species::star, spec.n_star, 0.1,
                                    [&] { return 3e6 * (0.5 + rng.uniform()); }));
  }
  if (spec.n_black_hole > 0) {
    snap.species.push_back(make_set(Species::black_hole, spec.n_black_hole, 0.0,
                                    [&] { return std::exp(rng.uniform(std::log(1e6), std::log(1e8))); }));
  }
  snap.header.species_count = static_cast<std::uint32_t>(snap.species.size());
  validate(snap);
  return snap;
}

}  // namespace multifield
