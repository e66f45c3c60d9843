#include "rydsense/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>

#include "rydsense/csv.hpp"
#include "rydsense/error.hpp"
#include "rydsense/hash.hpp"
#include "rydsense/parallel.hpp"

namespace rydsense {
namespace {

struct PreparedRow {
  const ForwardCurve* curve;
  double observed;
  double weight;
  bool baseline;
};

struct Residual {
  double value;
  double gain;
};

class Objective {
 public:
  Objective(std::vector<PreparedRow> rows, bool use_gain) : rows_(std::move(rows)), use_gain_(use_gain) {}

  // Curves interpolated linearly inside cell k at fraction t.
  Residual at(std::size_t k, double t) const {
    double gain = 1.0;
    if (use_gain_) {
      double num = 0.0;
      double den = 0.0;
      for (const auto& r : rows_) {
        if (!r.baseline) continue;
        const double f = value(r, k, t);
        num += r.weight * r.observed * f;
        den += r.weight * f * f;
      }
      if (den > 0.0) gain = std::max(num / den, 1e-6);
    }
    double sum = 0.0;
    for (const auto& r : rows_) {
      const double d = r.observed / gain - value(r, k, t);
      sum += r.weight * d * d;
    }
    return {sum, gain};
  }

  const std::vector<PreparedRow>& rows() const { return rows_; }

  static double value(const PreparedRow& r, std::size_t k, double t) {
    const auto& f = r.curve->f_max;
    if (t == 0.0) return f[k];
    return f[k] + t * (f[k + 1] - f[k]);
  }

 private:
  std::vector<PreparedRow> rows_;
  bool use_gain_;
};

struct CellMinimum {
  double t = 0.0;
  double residual = 0.0;
};

CellMinimum minimize_cell(const Objective& objective, std::size_t k) {
  // Golden-section on t in [0, 1]; the residual is quadratic in t when the gain is fixed.
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0;
  double hi = 1.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = objective.at(k, x1).value;
  double f2 = objective.at(k, x2).value;
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = objective.at(k, x1).value;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = objective.at(k, x2).value;
    }
  }
  CellMinimum best{0.5 * (lo + hi), objective.at(k, 0.5 * (lo + hi)).value};
  for (double edge : {0.0, 1.0}) {
    const double r = objective.at(k, edge).value;
    if (r < best.residual) best = {edge, r};
  }
  return best;
}

// Crossing of residual == threshold between fraction a (above) and b (below) of cell k.
double crossing(const Objective& objective, std::size_t k, double above, double below, double threshold) {
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (above + below);
    (objective.at(k, mid).value > threshold ? above : below) = mid;
  }
  return 0.5 * (above + below);
}

bool same_grid(const ForwardCurve& a, const ForwardCurve& b) { return a.fields == b.fields; }

}  // namespace

double ForwardCurve::at(double field) const {
  if (fields.empty() || field < fields.front() || field > fields.back()) {
    throw Error(ErrorCode::OutOfRange, "field " + csv::format(field) + " outside forward-curve grid");
  }
  const auto upper = std::upper_bound(fields.begin(), fields.end(), field);
  const auto k = static_cast<std::size_t>(std::distance(fields.begin(), upper)) - 1;
  if (fields[k] == field || k + 1 == fields.size()) return f_max[k];
  const double t = (field - fields[k]) / (fields[k + 1] - fields[k]);
  return f_max[k] + t * (f_max[k + 1] - f_max[k]);
}

std::vector<double> field_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw Error(ErrorCode::ConfigError, "field grid needs step > 0, stop >= start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) grid.push_back(std::min(stop, start + static_cast<double>(k) * step));
  if (stop - grid.back() > 1e-9 * step) grid.push_back(stop);
  return grid;
}

std::vector<double> field_grid(const StarkTable& table, double step) {
  return field_grid(table.min_field(), table.max_field(), step);
}

double row_f_max(const SensorRow& row, double field, const StarkTable& table, double omega, FmaxOptions options) {
  const auto h = uniform_row_hamiltonian(row.n_atoms, row.spacing_um, {field}, table, {omega, 0.0});
  return f_max(h, options).f_max;
}

std::vector<ForwardCurve> forward_curves(std::span<const SensorRow> rows, const StarkTable& table, double omega,
                                         std::span<const double> fields, unsigned threads) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (!table.contains(fields[k])) {
      throw Error(ErrorCode::OutOfRange, "grid field " + csv::format(fields[k]) + " outside the table span");
    }
    if (k > 0 && !(fields[k] > fields[k - 1])) {
      throw Error(ErrorCode::ConfigError, "forward-curve grid must be strictly increasing");
    }
  }
  std::vector<ForwardCurve> curves;
  for (const auto& row : rows) {
    curves.push_back({row, std::vector<double>(fields.begin(), fields.end()),
                      std::vector<double>(fields.size(), 0.0), omega});
  }
  const std::size_t per_row = fields.size();
  parallel_for(rows.size() * per_row, threads, [&](std::size_t job) {
    const auto r = job / per_row;
    const auto k = job % per_row;
    curves[r].f_max[k] = row_f_max(rows[r], fields[k], table, omega);
  });
  return curves;
}

double sample_frequency(double p, std::int64_t shots, std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorCode::ConfigError, "shots must be >= 1");
  std::mt19937_64 rng(seed);
  std::binomial_distribution<std::int64_t> draw(shots, std::clamp(p, 0.0, 1.0));
  return static_cast<double>(draw(rng)) / static_cast<double>(shots);
}

SensorReadout simulate_readout(double field_true, std::span<const SensorRow> rows, const StarkTable& table,
                               double omega, std::optional<std::int64_t> shots, std::uint64_t seed) {
  if (shots && *shots < 1) throw Error(ErrorCode::ConfigError, "shots must be >= 1");
  std::mt19937_64 rng(seed);
  SensorReadout readout;
  for (const auto& row : rows) {
    const double p = row_f_max(row, field_true, table, omega);
    double freq = p;
    if (shots) {
      std::binomial_distribution<std::int64_t> draw(*shots, std::clamp(p, 0.0, 1.0));
      freq = static_cast<double>(draw(rng)) / static_cast<double>(*shots);
    }
    readout.rows.push_back({row, shots, freq});
  }
  return readout;
}

FieldEstimate estimate_field(const SensorReadout& readout, std::span<const ForwardCurve> curves,
                             EstimatorOptions options) {
  if (readout.rows.empty()) throw Error(ErrorCode::NoProbeRows, "readout has no rows");
  if (curves.empty()) throw Error(ErrorCode::CacheMismatch, "no forward curves");
  for (const auto& c : curves) {
    if (!same_grid(c, curves.front()) || c.fields.size() < 2) {
      throw Error(ErrorCode::CacheMismatch, "forward curves must share one grid of >= 2 points");
    }
  }
  const bool exact = std::all_of(readout.rows.begin(), readout.rows.end(), [](const auto& r) { return r.exact(); });

  double min_spacing = std::numeric_limits<double>::infinity();
  double max_spacing = -min_spacing;
  std::vector<double> distinct;
  for (const auto& r : readout.rows) {
    min_spacing = std::min(min_spacing, r.row.spacing_um);
    max_spacing = std::max(max_spacing, r.row.spacing_um);
    if (std::find(distinct.begin(), distinct.end(), r.row.spacing_um) == distinct.end()) {
      distinct.push_back(r.row.spacing_um);
    }
  }
  const bool use_gain = distinct.size() >= 3;

  std::vector<PreparedRow> prepared;
  std::size_t probes = 0;
  for (const auto& r : readout.rows) {
    const auto it = std::find_if(curves.begin(), curves.end(), [&](const auto& c) { return c.row == r.row; });
    if (it == curves.end()) {
      throw Error(ErrorCode::CacheMismatch, "no forward curve for row R=" + csv::format(r.row.spacing_um) +
                                                " N=" + std::to_string(r.row.n_atoms));
    }
    const bool baseline = use_gain && (r.row.spacing_um == min_spacing || r.row.spacing_um == max_spacing);
    if (!baseline) ++probes;
    const double weight = exact ? 1.0 : static_cast<double>(r.shots.value_or(1));
    prepared.push_back({&*it, r.frequency, weight, baseline});
  }
  if (probes == 0) throw Error(ErrorCode::NoProbeRows, "every row is a baseline; add a probe row");

  const Objective objective(std::move(prepared), use_gain);
  const auto& grid = curves.front().fields;
  const std::size_t cells = grid.size() - 1;
  std::vector<CellMinimum> minima(cells);
  for (std::size_t k = 0; k < cells; ++k) minima[k] = minimize_cell(objective, k);

  std::size_t best = 0;
  for (std::size_t k = 1; k < cells; ++k) {
    if (minima[k].residual < minima[best].residual) best = k;
  }
  const double r_min = minima[best].residual;
  auto field_of = [&](std::size_t k, double t) { return grid[k] + t * (grid[k + 1] - grid[k]); };

  double noise_scale = 0.0;
  if (!exact) {
    for (const auto& r : readout.rows) {
      const double p = r.frequency;
      noise_scale = std::max({noise_scale, p * (1.0 - p), 1.0 / static_cast<double>(r.shots.value_or(1))});
    }
  }
  const double threshold = r_min + (exact ? options.exact_ambiguity : noise_scale);

  // Basin of the global minimum: contiguous cells whose minimum stays under the threshold.
  std::size_t first = best;
  std::size_t last = best;
  while (first > 0 && minima[first - 1].residual <= threshold) --first;
  while (last + 1 < cells && minima[last + 1].residual <= threshold) ++last;

  std::vector<double> alternatives;
  for (std::size_t k = 0; k < cells; ++k) {
    if (k >= first && k <= last) continue;
    const bool local = (k == 0 || minima[k].residual <= minima[k - 1].residual) &&
                       (k + 1 == cells || minima[k].residual <= minima[k + 1].residual);
    if (local && minima[k].residual <= threshold) alternatives.push_back(field_of(k, minima[k].t));
  }
  const double e_hat = field_of(best, minima[best].t);
  if (!alternatives.empty() && !options.allow_ambiguous) {
    std::string where;
    for (double a : alternatives) where += " " + csv::format(a);
    throw Error(ErrorCode::AmbiguousEstimate, "minimum at " + csv::format(e_hat) +
                                                  " mV/cm has near-degenerate partners at" + where +
                                                  "; add rows with other spacings");
  }

  FieldEstimate estimate;
  estimate.field = e_hat;
  estimate.residual = r_min;
  estimate.alternatives = std::move(alternatives);
  const auto at_min = objective.at(best, minima[best].t);
  estimate.gain = at_min.gain;
  if (exact) {
    // An estimate on a node is bracketed by both neighbouring cells.
    estimate.lo = grid[minima[best].t == 0.0 && best > 0 ? best - 1 : best];
    estimate.hi = grid[minima[best].t == 1.0 && best + 2 < grid.size() ? best + 2 : best + 1];
  } else {
    estimate.lo = grid[first];
    if (objective.at(first, 0.0).value > threshold) {
      const double t_in = first == best ? minima[best].t : minima[first].t;
      estimate.lo = field_of(first, crossing(objective, first, 0.0, t_in, threshold));
    }
    estimate.hi = grid[last + 1];
    if (objective.at(last, 1.0).value > threshold) {
      const double t_in = last == best ? minima[best].t : minima[last].t;
      estimate.hi = field_of(last, crossing(objective, last, 1.0, t_in, threshold));
    }
    estimate.lo = std::min(estimate.lo, e_hat);
    estimate.hi = std::max(estimate.hi, e_hat);
  }
  for (const auto& r : objective.rows()) {
    const double predicted = Objective::value(r, best, minima[best].t);
    const double d = r.observed / estimate.gain - predicted;
    estimate.rows.push_back({r.curve->row, r.baseline, r.observed, predicted, r.weight * d * d});
  }
  return estimate;
}

void write_forward_curves(std::ostream& out, std::span<const ForwardCurve> curves, const CurveCacheInfo& info) {
  out << "# omega_rad_per_us=" << csv::format(info.omega) << '\n';
  out << "# table_checksum=" << hex_digest(info.table_checksum) << '\n';
  out << "R_um,N,E_mVcm,f_max\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.fields.size(); ++k) {
      out << csv::format(c.row.spacing_um) << ',' << c.row.n_atoms << ',' << csv::format(c.fields[k]) << ','
          << csv::format(c.f_max[k]) << '\n';
    }
  }
}

std::vector<ForwardCurve> read_forward_curves(std::istream& in, const std::optional<CurveCacheInfo>& expected) {
  const auto doc = csv::read(in);
  const std::vector<std::string> header{"R_um", "N", "E_mVcm", "f_max"};
  if (doc.header != header) throw Error(ErrorCode::CacheMismatch, "forward-curve file has an unexpected header");
  const auto omega_it = doc.metadata.find("omega_rad_per_us");
  if (omega_it == doc.metadata.end()) throw Error(ErrorCode::CacheMismatch, "forward-curve file lacks omega");
  const auto omega = csv::parse_double(omega_it->second);
  if (!omega) throw Error(ErrorCode::CacheMismatch, "forward-curve omega is not a number");
  if (expected) {
    const auto sum_it = doc.metadata.find("table_checksum");
    if (*omega != expected->omega) {
      throw Error(ErrorCode::CacheMismatch, "cached curves were built with omega " + omega_it->second);
    }
    if (sum_it == doc.metadata.end() || sum_it->second != hex_digest(expected->table_checksum)) {
      throw Error(ErrorCode::CacheMismatch, "cached curves were built from another Stark table");
    }
  }
  std::vector<ForwardCurve> curves;
  for (const auto& row : doc.rows) {
    if (row.fields.size() != 4) {
      throw Error(ErrorCode::CacheMismatch, "line " + std::to_string(row.line) + ": expected 4 fields");
    }
    const auto r = csv::parse_double(row.fields[0]);
    const auto n = csv::parse_double(row.fields[1]);
    const auto e = csv::parse_double(row.fields[2]);
    const auto f = csv::parse_double(row.fields[3]);
    if (!r || !n || !e || !f) {
      throw Error(ErrorCode::CacheMismatch, "line " + std::to_string(row.line) + ": non-numeric field");
    }
    const SensorRow key{*r, static_cast<int>(*n)};
    if (curves.empty() || !(curves.back().row == key)) curves.push_back({key, {}, {}, *omega});
    auto& c = curves.back();
    if (!c.fields.empty() && !(*e > c.fields.back())) {
      throw Error(ErrorCode::CacheMismatch, "line " + std::to_string(row.line) + ": fields not increasing");
    }
    c.fields.push_back(*e);
    c.f_max.push_back(*f);
  }
  return curves;
}

void write_readout(std::ostream& out, const SensorReadout& readout) {
  out << "R_um,N,shots,freq\n";
  for (const auto& r : readout.rows) {
    out << csv::format(r.row.spacing_um) << ',' << r.row.n_atoms << ','
        << (r.shots ? std::to_string(*r.shots) : std::string("inf")) << ',' << csv::format(r.frequency) << '\n';
  }
}

SensorReadout read_readout(std::istream& in) {
  const auto doc = csv::read(in);
  const std::vector<std::string> header{"R_um", "N", "shots", "freq"};
  if (doc.header != header) throw Error(ErrorCode::ConfigError, "readout file must have header R_um,N,shots,freq");
  SensorReadout readout;
  for (const auto& row : doc.rows) {
    const auto where = "readout line " + std::to_string(row.line);
    if (row.fields.size() != 4) throw Error(ErrorCode::ConfigError, where + ": expected 4 fields");
    const auto r = csv::parse_double(row.fields[0]);
    const auto n = csv::parse_double(row.fields[1]);
    const auto s = csv::parse_double(row.fields[2]);
    const auto f = csv::parse_double(row.fields[3]);
    if (!r || !n || !s || !f) throw Error(ErrorCode::ConfigError, where + ": non-numeric field");
    if (*f < 0.0 || *f > 1.0) throw Error(ErrorCode::ConfigError, where + ": frequency outside [0, 1]");
    std::optional<std::int64_t> shots;
    if (std::isfinite(*s)) {
      if (*s < 1.0) throw Error(ErrorCode::ConfigError, where + ": shots must be >= 1 or inf");
      shots = static_cast<std::int64_t>(*s);
    }
    readout.rows.push_back({{*r, static_cast<int>(*n)}, shots, *f});
  }
  return readout;
}

}  // namespace rydsense
