#include "rydsense/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "rydsense/csv.hpp"
#include "rydsense/error.hpp"

namespace rydsense {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_integer_multiple(double value, double unit) {
  const double ratio = value / unit;
  return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

}  // namespace

void ArrayGeometry::validate() const {
  if (!(pitch_x_um > 0.0)) throw Error(ErrorCode::InvalidGeometry, "pitch_x must be positive");
  if (rows.empty()) throw Error(ErrorCode::InvalidGeometry, "geometry has no rows");
  double widest = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = "row " + std::to_string(r + 1) + ": ";
    if (row.n_atoms < 1) throw Error(ErrorCode::InvalidGeometry, where + "n_atoms must be >= 1");
    if (row.spacing_um < pitch_x_um) {
      throw Error(ErrorCode::InvalidGeometry, where + "spacing below the tweezer pitch");
    }
    if (!is_integer_multiple(row.spacing_um, pitch_x_um)) {
      throw Error(ErrorCode::InvalidGeometry, where + "spacing " + csv::format(row.spacing_um) +
                                                  " is not a multiple of the pitch " + csv::format(pitch_x_um));
    }
    if (r > 0 && !(row.y_offset_um > rows[r - 1].y_offset_um)) {
      throw Error(ErrorCode::InvalidGeometry, where + "row y offsets must be strictly increasing");
    }
    widest = std::max(widest, row.spacing_um);
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double gap = rows[r].y_offset_um - rows[r - 1].y_offset_um;
    if (gap < kRowDecouplingFactor * widest) {
      throw Error(ErrorCode::InvalidGeometry, "row gap " + csv::format(gap) + " um is below " +
                                                  csv::format(kRowDecouplingFactor) +
                                                  "x the largest spacing; rows would interact");
    }
  }
}

std::vector<AtomSite> row_sites(const ArrayGeometry& geometry, std::size_t row) {
  const auto& spec = geometry.rows.at(row);
  std::vector<AtomSite> sites;
  sites.reserve(static_cast<std::size_t>(spec.n_atoms));
  for (int k = 0; k < spec.n_atoms; ++k) {
    sites.push_back({row, k + 1, k * spec.spacing_um, spec.y_offset_um});
  }
  return sites;
}

std::vector<AtomSite> atom_positions(const ArrayGeometry& geometry) {
  geometry.validate();
  std::vector<AtomSite> sites;
  for (std::size_t r = 0; r < geometry.rows.size(); ++r) {
    auto row = row_sites(geometry, r);
    sites.insert(sites.end(), row.begin(), row.end());
  }
  return sites;
}

std::string_view profile_kind(const FieldProfile& profile) {
  return std::visit(overloaded{
                        [](const UniformField&) { return std::string_view("uniform"); },
                        [](const GradientField&) { return std::string_view("gradient"); },
                        [](const SinusoidField&) { return std::string_view("sinusoid"); },
                        [](const GaussianField&) { return std::string_view("gaussian"); },
                        [](const TabulatedField&) { return std::string_view("tabulated"); },
                    },
                    profile);
}

FieldStrength field_at(const FieldProfile& profile, const SitePoint& p) {
  const double value = std::visit(
      overloaded{
          [](const UniformField& f) { return f.field; },
          [&](const GradientField& f) {
            if (p.row_size <= 1) return f.start;
            const double t = (p.index - 1.0) / (p.row_size - 1);
            return f.start + t * (f.end - f.start);
          },
          [&](const SinusoidField& f) {
            if (!(f.period > 0.0)) throw Error(ErrorCode::InvalidProfile, "sinusoid period must be positive");
            return f.offset + f.amplitude * std::sin(kTwoPi * p.index / f.period + f.phase);
          },
          [&](const GaussianField& f) {
            if (!(f.width_um > 0.0)) throw Error(ErrorCode::InvalidProfile, "gaussian width must be positive");
            const double u = (p.x_um - f.center_um) / f.width_um;
            return f.baseline + (f.peak - f.baseline) * std::exp(-0.5 * u * u);
          },
          [&](const TabulatedField& f) {
            const auto n = f.values.size();
            if (n == 0) throw Error(ErrorCode::InvalidProfile, "tabulated profile is empty");
            if (p.index < 1.0 || p.index > static_cast<double>(n)) {
              throw Error(ErrorCode::InvalidProfile, "atom index outside tabulated profile");
            }
            const auto lo = static_cast<std::size_t>(std::floor(p.index)) - 1;
            const double t = p.index - static_cast<double>(lo + 1);
            if (t == 0.0 || lo + 1 == n) return f.values[lo];
            return f.values[lo] + t * (f.values[lo + 1] - f.values[lo]);
          },
      },
      profile);
  return {value};
}

FieldStrength field_at(const FieldProfile& profile, const AtomSite& site, int row_size) {
  return field_at(profile, SitePoint{static_cast<double>(site.index), row_size, site.x_um, site.y_um});
}

FieldStrength pair_field(const FieldProfile& profile, const AtomSite& a, const AtomSite& b, int row_size) {
  if (a.row != b.row) throw Error(ErrorCode::CrossRowPair, "pair spans rows; rows are simulated independently");
  if (a.index == b.index) throw Error(ErrorCode::InvalidGeometry, "pair of an atom with itself");
  const SitePoint mid{0.5 * (a.index + b.index), row_size, 0.5 * (a.x_um + b.x_um), 0.5 * (a.y_um + b.y_um)};
  return field_at(profile, mid);
}

void validate_profile(const FieldProfile& profile, const ArrayGeometry& geometry, std::size_t row,
                      const StarkTable& table) {
  const auto sites = row_sites(geometry, row);
  const int n = geometry.rows[row].n_atoms;
  if (const auto* tab = std::get_if<TabulatedField>(&profile);
      tab && tab->values.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::InvalidProfile, "tabulated profile has " + std::to_string(tab->values.size()) +
                                               " values for a row of " + std::to_string(n));
  }
  auto check = [&](double e, const std::string& what) {
    if (!std::isfinite(e) || !table.contains(e)) {
      throw Error(ErrorCode::FieldOutOfTableRange, what + " sees " + csv::format(e) + " mV/cm, outside [" +
                                                       csv::format(table.min_field()) + ", " +
                                                       csv::format(table.max_field()) + "]");
    }
  };
  for (const auto& s : sites) check(field_at(profile, s, n).value, "atom " + std::to_string(s.index));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      check(pair_field(profile, sites[i], sites[j], n).value,
            "pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
  }
}

SinusoidField resonant_sinusoid(double peak_field, double first_peak, double separation) {
  // sin(2 pi i / T + phase) = 1 at i = first_peak.
  const double phase = 0.5 * std::numbers::pi - kTwoPi * first_peak / separation;
  return {0.5 * peak_field, 0.5 * peak_field, separation, phase};
}

}  // namespace rydsense
