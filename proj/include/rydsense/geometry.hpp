#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rydsense/pairstate.hpp"

namespace rydsense {

inline constexpr double kDefaultPitchUm = 5.0;
// Rows closer than this multiple of the largest intra-row spacing are rejected.
inline constexpr double kRowDecouplingFactor = 5.0;

struct RowSpec {
  int n_atoms = 1;
  double spacing_um = 0.0;  // integer multiple of the pitch
  double y_offset_um = 0.0;
};

struct ArrayGeometry {
  double pitch_x_um = kDefaultPitchUm;
  std::vector<RowSpec> rows;

  /// Throws InvalidGeometry when an invariant is violated.
  void validate() const;
};

/// An atom in the array. `index` is 1-based within its row.
struct AtomSite {
  std::size_t row = 0;
  int index = 1;
  double x_um = 0.0;
  double y_um = 0.0;
};

/// Row-major, ascending x.
std::vector<AtomSite> atom_positions(const ArrayGeometry& geometry);
std::vector<AtomSite> row_sites(const ArrayGeometry& geometry, std::size_t row);

// Field profiles. Index-based profiles use 1-based (possibly fractional) atom indices.

struct UniformField {
  double field = 0.0;
};

/// Linear in atom index: `start` at atom 1, `end` at atom n.
struct GradientField {
  double start = 0.0;
  double end = 0.0;
};

/// offset + amplitude * sin(2 pi i / period + phase).
struct SinusoidField {
  double offset = 0.0;
  double amplitude = 0.0;
  double period = 1.0;
  double phase = 0.0;
};

/// baseline + (peak - baseline) * exp(-(x - center)^2 / (2 width^2)), x in um along the row.
struct GaussianField {
  double baseline = 0.0;
  double peak = 0.0;
  double center_um = 0.0;
  double width_um = 1.0;
};

/// Explicit per-atom values; fractional indices interpolate linearly.
struct TabulatedField {
  std::vector<double> values;
};

using FieldProfile = std::variant<UniformField, GradientField, SinusoidField, GaussianField, TabulatedField>;

std::string_view profile_kind(const FieldProfile& profile);

/// A point where a profile is evaluated: an atom or the midpoint between two.
struct SitePoint {
  double index = 1.0;
  int row_size = 1;
  double x_um = 0.0;
  double y_um = 0.0;
};

FieldStrength field_at(const FieldProfile& profile, const SitePoint& point);
FieldStrength field_at(const FieldProfile& profile, const AtomSite& site, int row_size);

/// Field used for the pair interaction of two atoms in the same row: the profile at their midpoint.
FieldStrength pair_field(const FieldProfile& profile, const AtomSite& a, const AtomSite& b, int row_size);

/// Checks the profile against a row: every atom and every pair midpoint must lie in the
/// table span (FieldOutOfTableRange), tabulated profiles must match the row size (InvalidProfile).
void validate_profile(const FieldProfile& profile, const ArrayGeometry& geometry, std::size_t row,
                      const StarkTable& table);

/// Sinusoid with period `separation` whose maxima equal `peak_field` at atoms `first_peak` and
/// `first_peak + separation`, and whose minima are zero.
SinusoidField resonant_sinusoid(double peak_field, double first_peak, double separation);

}  // namespace rydsense
