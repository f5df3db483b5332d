#pragma once

// The 13 CMD fields and the per-particle quantities each one deposits.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multifield/error.hpp"
#include "multifield/snapshot.hpp"

namespace multifield {

enum class FieldId : std::uint32_t {
  Mgas = 0,
  Vgas = 1,
  T = 2,
  P = 3,
  Z = 4,
  HI = 5,
  ne = 6,
  B = 7,
  MgFe = 8,
  Mcdm = 9,
  Vcdm = 10,
  Mstar = 11,
  Mtot = 12,
};

inline constexpr std::size_t field_count = 13;

enum class FieldMode { extensive, mass_weighted, pair_ratio, multi_species_extensive };

constexpr std::string_view to_string(FieldMode m) {
  switch (m) {
    case FieldMode::extensive: return "extensive";
    case FieldMode::mass_weighted: return "mass_weighted";
    case FieldMode::pair_ratio: return "pair_ratio";
    case FieldMode::multi_species_extensive: return "multi_species_extensive";
  }
  return "unknown";
}

// Densities divide by the cell measure; everything else is a weighted mean.
constexpr bool is_density(FieldMode m) {
  return m == FieldMode::extensive || m == FieldMode::multi_species_extensive;
}

// A per-particle scalar: the particle mass, the modulus of its velocity, or a
// named property.
struct Quantity {
  enum class Kind : std::uint8_t { mass, speed, property };
  Kind kind = Kind::mass;
  std::string_view name{};

  static constexpr Quantity mass() { return {Kind::mass, {}}; }
  static constexpr Quantity speed() { return {Kind::speed, {}}; }
  static constexpr Quantity prop(std::string_view n) { return {Kind::property, n}; }

  constexpr bool operator==(const Quantity&) const = default;
};

inline std::string describe(const Quantity& q) {
  switch (q.kind) {
    case Quantity::Kind::mass: return "mass";
    case Quantity::Kind::speed: return "|velocity|";
    case Quantity::Kind::property: return std::string(q.name);
  }
  return "?";
}

struct FieldSpec {
  FieldId id;
  std::string_view prefix;
  std::string_view title;
  FieldMode mode;
  // Species that contribute; more than one only for Mtot.
  std::span<const Species> species;
  // extensive: the deposited quantity. mass_weighted: the property averaged
  // with mass weights. pair_ratio: the numerator.
  Quantity numerator;
  // pair_ratio only.
  std::optional<Quantity> denominator;
  // Storage units; "A" stands for 2 (maps) or 3 (grids).
  std::string_view units;

  std::string units_for(int dimensionality) const {
    std::string u(units);
    if (const auto pos = u.rfind("^A"); pos != std::string::npos) {
      u.replace(pos + 1, 1, std::to_string(dimensionality));
    }
    return u;
  }
};

namespace detail {
inline constexpr std::array<Species, 1> gas_only{Species::gas};
inline constexpr std::array<Species, 1> dm_only{Species::dark_matter};
inline constexpr std::array<Species, 1> star_only{Species::star};
inline constexpr std::array<Species, 4> all_matter{Species::gas, Species::dark_matter, Species::star,
                                                   Species::black_hole};
inline constexpr std::string_view density_units = "h^-1 Msun/(h^-1 kpc)^A";
}  // namespace detail

inline const std::array<FieldSpec, field_count>& field_catalog() {
  using detail::gas_only, detail::dm_only, detail::star_only, detail::all_matter;
  namespace p = property;
  static const std::array<FieldSpec, field_count> catalog{{
      {FieldId::Mgas, "Mgas", "Gas density", FieldMode::extensive, gas_only, Quantity::mass(), {},
       detail::density_units},
      {FieldId::Vgas, "Vgas", "Gas velocity", FieldMode::mass_weighted, gas_only, Quantity::speed(), {},
       "km/s"},
      {FieldId::T, "T", "Gas temperature", FieldMode::mass_weighted, gas_only,
       Quantity::prop(p::temperature), {}, "K"},
      {FieldId::P, "P", "Gas pressure", FieldMode::mass_weighted, gas_only, Quantity::prop(p::pressure),
       {}, "(km/s)(Msun/kpc^3)"},
      {FieldId::Z, "Z", "Gas metallicity", FieldMode::mass_weighted, gas_only,
       Quantity::prop(p::metallicity), {}, "-"},
      {FieldId::HI, "HI", "Neutral hydrogen density", FieldMode::extensive, gas_only,
       Quantity::prop(p::hi_mass), {}, detail::density_units},
      {FieldId::ne, "ne", "Electron number density", FieldMode::extensive, gas_only,
       Quantity::prop(p::electron_count), {}, "h^-1/(h^-1 kpc)^A"},
      {FieldId::B, "B", "Magnetic fields", FieldMode::mass_weighted, gas_only,
       Quantity::prop(p::b_modulus), {}, "Gauss"},
      {FieldId::MgFe, "MgFe", "Magnesium over Iron", FieldMode::pair_ratio, gas_only,
       Quantity::prop(p::mg_mass), Quantity::prop(p::fe_mass), "-"},
      {FieldId::Mcdm, "Mcdm", "Dark matter density", FieldMode::extensive, dm_only, Quantity::mass(), {},
       detail::density_units},
      {FieldId::Vcdm, "Vcdm", "Dark matter velocity", FieldMode::mass_weighted, dm_only,
       Quantity::speed(), {}, "km/s"},
      {FieldId::Mstar, "Mstar", "Stellar mass density", FieldMode::extensive, star_only,
       Quantity::mass(), {}, detail::density_units},
      {FieldId::Mtot, "Mtot", "Total matter density", FieldMode::multi_species_extensive, all_matter,
       Quantity::mass(), {}, detail::density_units},
  }};
  return catalog;
}

inline const FieldSpec& field_spec(FieldId id) {
  const auto index = static_cast<std::size_t>(id);
  if (index >= field_count) fail(ErrorCode::invalid_argument, "unknown field id " + std::to_string(index));
  return field_catalog()[index];
}

inline std::optional<FieldId> parse_field(std::string_view prefix) {
  for (const auto& f : field_catalog()) {
    if (f.prefix == prefix) return f.id;
  }
  return std::nullopt;
}

inline std::string_view field_prefix(FieldId id) { return field_spec(id).prefix; }

// ---------------------------------------------------------------------------
// Per-particle quantities
// ---------------------------------------------------------------------------

inline double vector_modulus(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Values of q for every particle of the set; throws MissingProperty naming the
// property and species when a non-empty set lacks it.
inline std::vector<double> quantity_values(const ParticleSet& set, const Quantity& q) {
  std::vector<double> out(set.count());
  switch (q.kind) {
    case Quantity::Kind::mass:
      out = set.masses;
      break;
    case Quantity::Kind::speed:
      for (std::size_t i = 0; i < set.count(); ++i) out[i] = vector_modulus(set.velocities[i]);
      break;
    case Quantity::Kind::property: {
      if (set.count() == 0) break;
      const auto* values = set.find_property(q.name);
      if (values == nullptr) {
        fail(ErrorCode::missing_property, "property '" + std::string(q.name) + "' missing for species " +
                                              std::string(species_name(set.kind)));
      }
      out = *values;
      if (q.name == property::b_modulus) {
        for (auto& b : out) b = std::fabs(b);
      }
      break;
    }
  }
  return out;
}

// One species' share of a field: numerator per particle and, for mass-weighted
// and ratio fields, the matching weight (empty for densities).
struct ContributionStream {
  Species kind;
  std::vector<double> numerator;
  std::vector<double> weight;
};

// Checks that the snapshot can supply the field and names the first problem.
inline void require_field_inputs(const FieldSpec& spec, const Snapshot& snap) {
  const bool multi = spec.mode == FieldMode::multi_species_extensive;
  for (auto kind : spec.species) {
    const ParticleSet* set = snap.find(kind);
    if (set == nullptr) {
      if (multi) continue;
      fail(ErrorCode::missing_property, "field " + std::string(spec.prefix) + " needs species " +
                                            std::string(species_name(kind)) + ", absent from snapshot");
    }
    if (set->count() == 0) continue;
    for (const auto* q : {&spec.numerator, spec.denominator ? &*spec.denominator : nullptr}) {
      if (q == nullptr || q->kind != Quantity::Kind::property) continue;
      if (set->find_property(q->name) == nullptr) {
        fail(ErrorCode::missing_property, "field " + std::string(spec.prefix) + " needs property '" +
                                              std::string(q->name) + "' on species " +
                                              std::string(species_name(kind)));
      }
    }
  }
}

inline std::vector<ContributionStream> contributions(const FieldSpec& spec, const Snapshot& snap) {
  require_field_inputs(spec, snap);
  std::vector<ContributionStream> out;
  for (auto kind : spec.species) {
    const ParticleSet* set = snap.find(kind);
    if (set == nullptr) continue;
    ContributionStream s{kind, {}, {}};
    switch (spec.mode) {
      case FieldMode::extensive:
      case FieldMode::multi_species_extensive:
        s.numerator = quantity_values(*set, spec.numerator);
        break;
      case FieldMode::mass_weighted: {
        const auto p = quantity_values(*set, spec.numerator);
        s.weight = set->masses;
        s.numerator.resize(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) s.numerator[i] = s.weight[i] * p[i];
        break;
      }
      case FieldMode::pair_ratio:
        s.numerator = quantity_values(*set, spec.numerator);
        s.weight = quantity_values(*set, *spec.denominator);
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace multifield
