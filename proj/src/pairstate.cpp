#include "rydsense/pairstate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "rydsense/csv.hpp"
#include "rydsense/error.hpp"
#include "rydsense/hash.hpp"

namespace rydsense {
namespace {

constexpr std::string_view kHeader[] = {"E_mVcm", "delta_MHz", "C3_MHz_um3"};

int sign_of(double v) { return (v > 0) - (v < 0); }

int count_sign_changes(std::span<const StarkRow> rows) {
  int changes = 0;
  int last = 0;
  for (const auto& r : rows) {
    const int s = sign_of(r.delta);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

}  // namespace

StarkTable StarkTable::from_rows(std::vector<StarkRow> rows, Metadata metadata) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::EmptyTable, "a Stark table needs at least two rows, got " + std::to_string(rows.size()));
  }
  Fnv1a hash;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!std::isfinite(r.field) || !std::isfinite(r.delta) || !std::isfinite(r.c3)) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(i) + " has a non-finite value");
    }
    if (r.c3 <= 0.0) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(i) + ": C3 must be positive");
    }
    if (i > 0 && !(r.field > rows[i - 1].field)) {
      throw Error(ErrorCode::NonMonotonicField,
                  "field " + csv::format(r.field) + " does not exceed previous " + csv::format(rows[i - 1].field));
    }
    hash.update(r.field);
    hash.update(r.delta);
    hash.update(r.c3);
  }
  if (count_sign_changes(rows) > 1) {
    throw Error(ErrorCode::MultipleResonances, "energy defect changes sign more than once");
  }
  StarkTable table;
  table.rows_ = std::move(rows);
  table.metadata_ = std::move(metadata);
  table.checksum_ = hash.digest();
  return table;
}

StarkTable load_stark_table(std::istream& in) {
  const auto doc = csv::read(in);
  if (doc.header.empty()) throw Error(ErrorCode::EmptyTable, "no header line");
  if (!std::equal(doc.header.begin(), doc.header.end(), std::begin(kHeader), std::end(kHeader))) {
    throw Error(ErrorCode::MalformedRow, "expected header E_mVcm,delta_MHz,C3_MHz_um3");
  }
  std::vector<StarkRow> rows;
  rows.reserve(doc.rows.size());
  for (const auto& row : doc.rows) {
    const auto where = "line " + std::to_string(row.line);
    if (row.fields.size() != 3) throw Error(ErrorCode::MalformedRow, where + ": expected 3 fields");
    double values[3];
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = csv::parse_double(row.fields[k]);
      if (!v) throw Error(ErrorCode::MalformedRow, where + ": non-numeric field '" + row.fields[k] + "'");
      values[k] = *v;
    }
    rows.push_back({values[0], values[1], values[2]});
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyTable, "table has no data rows");
  return StarkTable::from_rows(std::move(rows), doc.metadata);
}

StarkTable load_stark_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open Stark table " + path.string());
  return load_stark_table(in);
}

void write_stark_table(std::ostream& out, const StarkTable& table) {
  for (const auto& [key, value] : table.metadata()) out << "# " << key << '=' << value << '\n';
  out << "E_mVcm,delta_MHz,C3_MHz_um3\n";
  for (const auto& r : table.rows()) {
    out << csv::format(r.field) << ',' << csv::format(r.delta) << ',' << csv::format(r.c3) << '\n';
  }
}

PairCoefficients coefficients_at(const StarkTable& table, FieldStrength field) {
  const double e = field.value;
  if (!table.contains(e)) {
    throw Error(ErrorCode::OutOfRange, "field " + csv::format(e) + " mV/cm outside table span [" +
                                           csv::format(table.min_field()) + ", " +
                                           csv::format(table.max_field()) + "]");
  }
  const auto rows = table.rows();
  auto upper = std::upper_bound(rows.begin(), rows.end(), e,
                                [](double value, const StarkRow& r) { return value < r.field; });
  const auto lo = static_cast<std::size_t>(std::distance(rows.begin(), upper)) - 1;
  const auto& a = rows[lo];
  if (a.field == e || lo + 1 == rows.size()) return {kTwoPi * a.delta, kTwoPi * a.c3};
  const auto& b = rows[lo + 1];
  const double t = (e - a.field) / (b.field - a.field);
  return {kTwoPi * (a.delta + t * (b.delta - a.delta)), kTwoPi * (a.c3 + t * (b.c3 - a.c3))};
}

FieldStrength resonance_field(const StarkTable& table) {
  const auto rows = table.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].delta == 0.0) return {rows[i].field};
    if (i + 1 < rows.size() && sign_of(rows[i].delta) * sign_of(rows[i + 1].delta) < 0) {
      const auto& a = rows[i];
      const auto& b = rows[i + 1];
      return {a.field + (b.field - a.field) * a.delta / (a.delta - b.delta)};
    }
  }
  throw Error(ErrorCode::NoResonance, "energy defect does not change sign across the table");
}

double effective_interaction(const PairCoefficients& coeffs, double r_um) {
  if (!(r_um > 0.0) || !std::isfinite(r_um)) {
    throw Error(ErrorCode::NonpositiveSeparation, "separation must be positive, got " + csv::format(r_um));
  }
  const double coupling = coeffs.c3 / (r_um * r_um * r_um);
  const double defect = std::abs(coeffs.delta);
  // (|d| - sqrt(d^2 + 4c^2)) / 2 rewritten without the cancellation at large |d|.
  const double root = std::hypot(defect, 2.0 * coupling);
  if (root == 0.0) return 0.0;
  return -2.0 * coupling * coupling / (defect + root);
}

double crossover_radius(const PairCoefficients& coeffs) {
  if (std::abs(coeffs.delta) <= kDefectEpsilon) {
    throw Error(ErrorCode::DegenerateDefect, "|delta| below threshold, crossover radius diverges");
  }
  if (!(coeffs.c3 > 0.0)) throw Error(ErrorCode::DegenerateDefect, "C3 must be positive");
  return std::cbrt(coeffs.c3 / std::abs(coeffs.delta));
}

double blockade_radius(const PairCoefficients& coeffs, double omega) {
  if (!(omega > 0.0)) throw Error(ErrorCode::NonpositiveRabi, "Rabi frequency must be positive");
  if (std::abs(coeffs.delta) <= kDefectEpsilon) {
    throw Error(ErrorCode::DegenerateDefect, "|delta| below threshold, blockade radius diverges");
  }
  if (!(coeffs.c3 > 0.0)) throw Error(ErrorCode::DegenerateDefect, "C3 must be positive");
  return std::pow(coeffs.c3 * coeffs.c3 / (std::abs(coeffs.delta) * omega), 1.0 / 6.0);
}

}  // namespace rydsense
