#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace rydsense {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Below this |delta| (rad/us) the crossover and blockade radii are treated as divergent.
inline constexpr double kDefectEpsilon = 1e-6;

/// Electric field strength in mV/cm.
struct FieldStrength {
  double value = 0.0;
};

/// One tabulated point of the Stark map, stored in h-units as read from disk.
struct StarkRow {
  double field;  // mV/cm
  double delta;  // MHz
  double c3;     // MHz um^3
};

/// Pair-state coefficients in angular units (hbar = 1): delta in rad/us, c3 in rad/us um^3.
struct PairCoefficients {
  double delta = 0.0;
  double c3 = 0.0;
};

/// Immutable, validated table of field-dependent Forster coefficients.
///
/// Rows are strictly increasing in field, C3 is positive everywhere and the
/// energy defect changes sign at most once.
class StarkTable {
 public:
  using Metadata = std::map<std::string, std::string>;

  static StarkTable from_rows(std::vector<StarkRow> rows, Metadata metadata = {});

  std::span<const StarkRow> rows() const noexcept { return rows_; }
  const Metadata& metadata() const noexcept { return metadata_; }
  std::size_t size() const noexcept { return rows_.size(); }

  double min_field() const noexcept { return rows_.front().field; }
  double max_field() const noexcept { return rows_.back().field; }
  bool contains(double field) const noexcept { return field >= min_field() && field <= max_field(); }

  /// FNV-1a over the numeric content; identifies the table in cache files and output metadata.
  std::uint64_t checksum() const noexcept { return checksum_; }

 private:
  StarkTable() = default;

  std::vector<StarkRow> rows_;
  Metadata metadata_;
  std::uint64_t checksum_ = 0;
};

StarkTable load_stark_table(std::istream& in);
StarkTable load_stark_table(const std::filesystem::path& path);
void write_stark_table(std::ostream& out, const StarkTable& table);

/// Piecewise-linear interpolation of delta and C3, converted to angular units.
/// Throws OutOfRange outside the table span.
PairCoefficients coefficients_at(const StarkTable& table, FieldStrength field);

/// Root of the piecewise-linear delta(E). Throws NoResonance if delta keeps its sign.
FieldStrength resonance_field(const StarkTable& table);

/// Effective pair interaction (rad/us) at separation r_um: the lowest eigenvalue of
/// the two-level Forster matrix with diagonal {|delta|, 0} and coupling C3/R^3.
/// Always <= 0; equals -C3/R^3 at delta = 0 and -C3^2/(|delta| R^6) in the van der Waals limit.
double effective_interaction(const PairCoefficients& coeffs, double r_um);

/// Separation where |delta| = C3/R^3.
double crossover_radius(const PairCoefficients& coeffs);

/// (C3^2 / (|delta| Omega))^(1/6).
double blockade_radius(const PairCoefficients& coeffs, double omega);

}  // namespace rydsense
