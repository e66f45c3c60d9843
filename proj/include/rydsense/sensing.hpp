#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rydsense/dynamics.hpp"
#include "rydsense/pairstate.hpp"

namespace rydsense {

/// One sensor row: n evenly spaced atoms.
struct SensorRow {
  double spacing_um = 0.0;
  int n_atoms = 3;

  friend bool operator==(const SensorRow&, const SensorRow&) = default;
};

/// F_max(E) of one row under uniform fields.
struct ForwardCurve {
  SensorRow row;
  std::vector<double> fields;  // mV/cm, strictly increasing
  std::vector<double> f_max;
  double omega = 0.0;

  /// Linear interpolation on the grid; throws OutOfRange outside it.
  double at(double field) const;
};

/// Inclusive grid from `start` to `stop`; the last point is clamped to `stop`.
std::vector<double> field_grid(double start, double stop, double step);

/// Default grid: the table span at 0.1 mV/cm.
std::vector<double> field_grid(const StarkTable& table, double step = 0.1);

double row_f_max(const SensorRow& row, double field, const StarkTable& table, double omega,
                 FmaxOptions options = {});

/// Runs f_max at every (row, field) pair; `threads` > 1 spreads the work without changing results.
std::vector<ForwardCurve> forward_curves(std::span<const SensorRow> rows, const StarkTable& table, double omega,
                                         std::span<const double> fields, unsigned threads = 1);

struct RowObservation {
  SensorRow row;
  std::optional<std::int64_t> shots;  // nullopt: exact readout
  double frequency = 0.0;

  bool exact() const { return !shots.has_value(); }
};

struct SensorReadout {
  std::vector<RowObservation> rows;
};

/// Binomial readout with success probability F_max(E_true) per row; exact when `shots` is empty.
SensorReadout simulate_readout(double field_true, std::span<const SensorRow> rows, const StarkTable& table,
                               double omega, std::optional<std::int64_t> shots, std::uint64_t seed);

/// successes / shots for a binomial draw with probability p.
double sample_frequency(double p, std::int64_t shots, std::uint64_t seed);

struct RowResidual {
  SensorRow row;
  bool baseline = false;
  double observed = 0.0;
  double predicted = 0.0;
  double residual = 0.0;  // weighted squared error at the estimate
};

struct FieldEstimate {
  double field = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double residual = 0.0;
  double gain = 1.0;
  std::vector<RowResidual> rows;
  // Set only when EstimatorOptions::allow_ambiguous is on: other disjoint minima within the threshold.
  std::vector<double> alternatives;

  bool ambiguous() const { return !alternatives.empty(); }
};

struct EstimatorOptions {
  // Exact readouts: a second disjoint minimum within this much of the best residual is ambiguous.
  // Noiseless frequencies separate minima down to roughly the curve interpolation error.
  double exact_ambiguity = 1e-12;
  // Report ambiguous minima in FieldEstimate::alternatives instead of throwing AmbiguousEstimate.
  bool allow_ambiguous = false;
};

/// Scans the residual over the curve grid, refines inside each cell, and reports the global
/// minimum. With both baselines (smallest and largest spacing, given >= 3 rows) present the
/// probe frequencies are divided by a least-squares gain fitted on the baselines.
FieldEstimate estimate_field(const SensorReadout& readout, std::span<const ForwardCurve> curves,
                             EstimatorOptions options = {});

// File formats.

struct CurveCacheInfo {
  double omega = 0.0;
  std::uint64_t table_checksum = 0;
};

void write_forward_curves(std::ostream& out, std::span<const ForwardCurve> curves, const CurveCacheInfo& info);

/// Throws CacheMismatch when the cache was built with another Omega or table.
std::vector<ForwardCurve> read_forward_curves(std::istream& in, const std::optional<CurveCacheInfo>& expected);

void write_readout(std::ostream& out, const SensorReadout& readout);
SensorReadout read_readout(std::istream& in);

}  // namespace rydsense
