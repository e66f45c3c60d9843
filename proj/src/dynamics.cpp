#include "rydsense/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "rydsense/csv.hpp"
#include "rydsense/error.hpp"

namespace rydsense {
namespace {

double squared_norm(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

void check_atom_count(int n) {
  if (n < 1 || n > kMaxAtomsPerRow) {
    throw Error(ErrorCode::InvalidState,
                "row size " + std::to_string(n) + " outside [1, " + std::to_string(kMaxAtomsPerRow) + "]");
  }
}

}  // namespace

InteractionMatrix row_interactions(const ArrayGeometry& geometry, std::size_t row, const FieldProfile& profile,
                                   const StarkTable& table) {
  validate_profile(profile, geometry, row, table);
  const auto sites = row_sites(geometry, row);
  const int n = static_cast<int>(sites.size());
  InteractionMatrix m{n, std::vector<double>(static_cast<std::size_t>(n * n), 0.0)};
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& a = sites[static_cast<std::size_t>(i)];
      const auto& b = sites[static_cast<std::size_t>(j)];
      const auto coeffs = coefficients_at(table, pair_field(profile, a, b, n));
      const double v = effective_interaction(coeffs, std::hypot(b.x_um - a.x_um, b.y_um - a.y_um));
      m.values[static_cast<std::size_t>(i * n + j)] = v;
      m.values[static_cast<std::size_t>(j * n + i)] = v;
    }
  }
  return m;
}

HamiltonianSpec hamiltonian_from_interactions(const InteractionMatrix& interactions, DriveSpec drive) {
  const int n = interactions.n;
  check_atom_count(n);
  if (!(drive.omega > 0.0) || !std::isfinite(drive.omega)) {
    throw Error(ErrorCode::NonpositiveRabi, "Rabi frequency must be positive");
  }
  HamiltonianSpec h;
  h.n_atoms = n;
  h.drive = drive;
  h.diagonal.assign(std::size_t{1} << n, 0.0);
  // Peel the lowest excited atom: E(b) = E(rest) + sum_{j in rest} V_ij - detuning.
  for (std::uint64_t b = 1; b < h.diagonal.size(); ++b) {
    const int i = std::countr_zero(b);
    const std::uint64_t rest = b & (b - 1);
    double shift = 0.0;
    for (std::uint64_t r = rest; r != 0; r &= r - 1) shift += interactions(i, std::countr_zero(r));
    h.diagonal[b] = h.diagonal[rest] + shift - drive.detuning;
  }
  return h;
}

HamiltonianSpec build_hamiltonian(const ArrayGeometry& geometry, std::size_t row, const FieldProfile& profile,
                                  const StarkTable& table, DriveSpec drive) {
  geometry.validate();
  if (row >= geometry.rows.size()) throw Error(ErrorCode::InvalidGeometry, "row index out of range");
  check_atom_count(geometry.rows[row].n_atoms);
  return hamiltonian_from_interactions(row_interactions(geometry, row, profile, table), drive);
}

HamiltonianSpec uniform_row_hamiltonian(int n_atoms, double spacing_um, FieldStrength field,
                                        const StarkTable& table, DriveSpec drive) {
  ArrayGeometry geometry;
  geometry.pitch_x_um = std::min(kDefaultPitchUm, spacing_um);
  geometry.rows.push_back({n_atoms, spacing_um, 0.0});
  return build_hamiltonian(geometry, 0, UniformField{field.value}, table, drive);
}

StateVector StateVector::basis(int n_atoms, std::uint64_t index) {
  check_atom_count(n_atoms);
  StateVector s{n_atoms, std::vector<Complex>(std::size_t{1} << n_atoms)};
  if (index >= s.amplitudes.size()) throw Error(ErrorCode::BadLabel, "basis index out of range");
  s.amplitudes[index] = 1.0;
  return s;
}

double StateVector::norm() const { return std::sqrt(squared_norm(amplitudes)); }

std::uint64_t label_to_index(std::string_view label, int n_atoms) {
  if (label.size() != static_cast<std::size_t>(n_atoms)) {
    throw Error(ErrorCode::BadLabel, "label '" + std::string(label) + "' must have " + std::to_string(n_atoms) +
                                         " characters");
  }
  std::uint64_t index = 0;
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (label[k] == '1') {
      index |= std::uint64_t{1} << k;
    } else if (label[k] != '0') {
      throw Error(ErrorCode::BadLabel, "label '" + std::string(label) + "' may only contain 0 and 1");
    }
  }
  return index;
}

std::string index_to_label(std::uint64_t index, int n_atoms) {
  std::string label(static_cast<std::size_t>(n_atoms), '0');
  for (int k = 0; k < n_atoms; ++k) {
    if ((index >> k) & 1U) label[static_cast<std::size_t>(k)] = '1';
  }
  return label;
}

double basis_fidelity(const StateVector& state, std::string_view label) {
  return std::norm(state.amplitudes[label_to_index(label, state.n_atoms)]);
}

void apply_hamiltonian(const HamiltonianSpec& h, std::span<const Complex> in, std::span<Complex> out, double shift,
                       double scale) {
  const std::size_t dim = h.dimension();
  for (std::size_t b = 0; b < dim; ++b) out[b] = (scale * (h.diagonal[b] - shift)) * in[b];
  const double coupling = 0.5 * h.drive.omega * scale;
  for (int i = 0; i < h.n_atoms; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t block = 0; block < dim; block += 2 * bit) {
      for (std::size_t b = block; b < block + bit; ++b) {
        out[b] += coupling * in[b | bit];
        out[b | bit] += coupling * in[b];
      }
    }
  }
}

double energy(const HamiltonianSpec& h, const StateVector& state) {
  std::vector<Complex> hv(state.amplitudes.size());
  apply_hamiltonian(h, state.amplitudes, hv);
  double e = 0.0;
  for (std::size_t b = 0; b < hv.size(); ++b) e += std::real(std::conj(state.amplitudes[b]) * hv[b]);
  return e;
}

std::vector<double> bessel_j_series(double x, std::size_t count) {
  std::vector<double> j(count, 0.0);
  if (count == 0) return j;
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  // Start far enough above both x and the requested order that the seed error is negligible.
  const double reach = std::max(x, static_cast<double>(count));
  std::size_t start = static_cast<std::size_t>(reach + 12.0 * std::cbrt(reach) + 40.0);
  start += start % 2;
  std::vector<double> work(start + 2, 0.0);
  work[start] = 1e-30;
  constexpr double kRescale = 1e200;
  for (std::size_t k = start; k >= 1; --k) {
    work[k - 1] = (2.0 * static_cast<double>(k) / x) * work[k] - work[k + 1];
    if (std::abs(work[k - 1]) > kRescale) {
      for (std::size_t m = k - 1; m <= start; ++m) work[m] /= kRescale;
    }
  }
  double norm = work[0];
  for (std::size_t k = 2; k <= start; k += 2) norm += 2.0 * work[k];
  for (std::size_t k = 0; k < count && k <= start; ++k) j[k] = work[k] / norm;
  return j;
}

ChebyshevPropagator::ChebyshevPropagator(const HamiltonianSpec& h) : h_(&h) {
  const auto [lo_it, hi_it] = std::minmax_element(h.diagonal.begin(), h.diagonal.end());
  // Weyl: spec(D + X) lies within [min D - |X|, max D + |X|], |X| = N Omega / 2.
  const double drive_norm = 0.5 * h.n_atoms * std::abs(h.drive.omega);
  const double lo = *lo_it - drive_norm;
  const double hi = *hi_it + drive_norm;
  center_ = 0.5 * (lo + hi);
  half_width_ = 0.5 * (hi - lo) * (1.0 + 1e-6) + 1e-12;
}

std::size_t ChebyshevPropagator::terms_for(double t) const {
  const double x = half_width_ * std::abs(t);
  return static_cast<std::size_t>(x + 10.0 * std::cbrt(x) + 25.0);
}

StateVector ChebyshevPropagator::propagate(const StateVector& state, double dt) const {
  if (dt == 0.0) return state;
  const std::size_t dim = state.amplitudes.size();
  const std::size_t terms = terms_for(dt);
  const auto bessel = bessel_j_series(half_width_ * dt, terms);

  std::vector<Complex> prev = state.amplitudes;
  std::vector<Complex> curr(dim);
  std::vector<Complex> next(dim);
  apply_hamiltonian(*h_, prev, curr, center_, 1.0 / half_width_);

  StateVector out{state.n_atoms, std::vector<Complex>(dim)};
  for (std::size_t b = 0; b < dim; ++b) out.amplitudes[b] = bessel[0] * prev[b];
  // Coefficients 2 (-i)^k J_k(a dt).
  static constexpr Complex kPhase[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  if (terms > 1) {
    const Complex c1 = 2.0 * bessel[1] * kPhase[1];
    for (std::size_t b = 0; b < dim; ++b) out.amplitudes[b] += c1 * curr[b];
  }
  for (std::size_t k = 2; k < terms; ++k) {
    apply_hamiltonian(*h_, curr, next, center_, 2.0 / half_width_);
    for (std::size_t b = 0; b < dim; ++b) next[b] -= prev[b];
    const Complex ck = 2.0 * bessel[k] * kPhase[k % 4];
    for (std::size_t b = 0; b < dim; ++b) out.amplitudes[b] += ck * next[b];
    std::swap(prev, curr);
    std::swap(curr, next);
  }
  const Complex global = std::polar(1.0, -center_ * dt);
  for (auto& z : out.amplitudes) z *= global;
  return out;
}

std::vector<Complex> ChebyshevPropagator::transition_moments(const StateVector& from, std::uint64_t target,
                                                             std::size_t count) const {
  std::vector<Complex> moments;
  moments.reserve(count);
  if (count == 0) return moments;
  const std::size_t dim = from.amplitudes.size();
  std::vector<Complex> prev = from.amplitudes;
  std::vector<Complex> curr(dim);
  std::vector<Complex> next(dim);
  moments.push_back(prev[target]);
  if (count == 1) return moments;
  apply_hamiltonian(*h_, prev, curr, center_, 1.0 / half_width_);
  moments.push_back(curr[target]);
  for (std::size_t k = 2; k < count; ++k) {
    apply_hamiltonian(*h_, curr, next, center_, 2.0 / half_width_);
    for (std::size_t b = 0; b < dim; ++b) next[b] -= prev[b];
    moments.push_back(next[target]);
    std::swap(prev, curr);
    std::swap(curr, next);
  }
  return moments;
}

Complex ChebyshevPropagator::transition_amplitude(std::span<const Complex> moments, double t) const {
  if (moments.empty()) return {};
  const std::size_t terms = std::min(moments.size(), terms_for(t));
  const auto bessel = bessel_j_series(half_width_ * t, terms);
  static constexpr Complex kPhase[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  Complex sum = bessel[0] * moments[0];
  for (std::size_t k = 1; k < terms; ++k) sum += (2.0 * bessel[k]) * kPhase[k % 4] * moments[k];
  return std::polar(1.0, -center_ * t) * sum;
}

void evolve_each(const HamiltonianSpec& h, const StateVector& initial, std::span<const double> times,
                 const std::function<void(std::size_t, const StateVector&)>& visit, EvolveOptions options) {
  if (initial.amplitudes.size() != h.dimension()) {
    throw Error(ErrorCode::InvalidState, "state dimension does not match the Hamiltonian");
  }
  if (std::abs(initial.norm() - 1.0) > options.norm_tolerance) {
    throw Error(ErrorCode::InvalidState, "initial state is not normalized");
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || times[k] < 0.0 || (k > 0 && times[k] < times[k - 1])) {
      throw Error(ErrorCode::InvalidState, "time grid must be finite, non-negative and ascending");
    }
  }
  const ChebyshevPropagator propagator(h);
  StateVector state = initial;
  double now = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] > now) {
      state = propagator.propagate(state, times[k] - now);
      now = times[k];
      const double drift = std::abs(state.norm() - 1.0);
      if (!(drift <= options.norm_tolerance)) {
        throw Error(ErrorCode::IntegratorFailure,
                    "norm drift " + csv::format(drift) + " at t = " + csv::format(now) + " us");
      }
    }
    visit(k, state);
  }
}

std::vector<StateVector> evolve(const HamiltonianSpec& h, const StateVector& initial, std::span<const double> times,
                                EvolveOptions options) {
  std::vector<StateVector> out;
  out.reserve(times.size());
  evolve_each(h, initial, times, [&](std::size_t, const StateVector& s) { out.push_back(s); }, options);
  return out;
}

PeakFidelity f_max(const HamiltonianSpec& h, FmaxOptions options) {
  if (options.samples < 2) throw Error(ErrorCode::InvalidState, "f_max needs at least two samples");
  const double period = h.drive.rabi_period();
  const ChebyshevPropagator propagator(h);
  const auto full = static_cast<std::uint64_t>(h.dimension() - 1);
  const auto moments =
      propagator.transition_moments(StateVector::ground(h.n_atoms), full, propagator.terms_for(period));
  auto fidelity = [&](double t) { return std::norm(propagator.transition_amplitude(moments, t)); };

  const double step = period / options.samples;
  PeakFidelity best{-1.0, 0.0};
  int best_k = 1;
  for (int k = 1; k <= options.samples; ++k) {
    const double t = step * k;
    const double f = fidelity(t);
    if (f > best.f_max) {
      best = {f, t};
      best_k = k;
    }
  }
  // Golden-section search on the bracketing samples.
  double lo = step * (best_k - 1);
  double hi = std::min(period, step * (best_k + 1));
  const double tolerance = options.time_tolerance * period;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = fidelity(x1);
  double f2 = fidelity(x2);
  while (hi - lo > tolerance) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = fidelity(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = fidelity(x1);
    }
  }
  const double t_mid = 0.5 * (lo + hi);
  const double f_mid = fidelity(t_mid);
  if (f_mid > best.f_max && t_mid > 0.0) best = {f_mid, t_mid};
  best.f_max = std::clamp(best.f_max, 0.0, 1.0);
  return best;
}

Correlator density_correlator(const StateVector& state) {
  const int n = state.n_atoms;
  Correlator c{n, std::vector<double>(static_cast<std::size_t>(n * n), 0.0)};
  for (std::uint64_t b = 0; b < state.amplitudes.size(); ++b) {
    const double p = std::norm(state.amplitudes[b]);
    if (p == 0.0) continue;
    for (std::uint64_t ri = b; ri != 0; ri &= ri - 1) {
      const int i = std::countr_zero(ri);
      for (std::uint64_t rj = b; rj != 0; rj &= rj - 1) {
        c.values[static_cast<std::size_t>(i * n + std::countr_zero(rj))] += p;
      }
    }
  }
  return c;
}

Correlator correlator_at_peak(const HamiltonianSpec& h, FmaxOptions options) {
  const auto peak = f_max(h, options);
  const ChebyshevPropagator propagator(h);
  const auto state = propagator.propagate(StateVector::ground(h.n_atoms), peak.t_star);
  const double drift = std::abs(state.norm() - 1.0);
  if (!(drift <= EvolveOptions{}.norm_tolerance)) {
    throw Error(ErrorCode::IntegratorFailure, "norm drift " + csv::format(drift) + " at t_star");
  }
  auto c = density_correlator(state);
  c.t_star = peak.t_star;
  c.f_max = peak.f_max;
  return c;
}

std::vector<std::string> default_tracked_labels(int n_atoms, bool full) {
  check_atom_count(n_atoms);
  std::vector<std::string> labels;
  if (full) {
    if (n_atoms > 10) throw Error(ErrorCode::BadLabel, "full basis tracking is limited to 10 atoms");
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << n_atoms); ++b) labels.push_back(index_to_label(b, n_atoms));
    return labels;
  }
  labels.push_back(index_to_label(0, n_atoms));
  for (int k = 0; k < n_atoms; ++k) labels.push_back(index_to_label(std::uint64_t{1} << k, n_atoms));
  if (n_atoms > 1) labels.push_back(index_to_label((std::uint64_t{1} << n_atoms) - 1, n_atoms));
  return labels;
}

DynamicsResult simulate_dynamics(const HamiltonianSpec& h, std::span<const double> times,
                                 const std::vector<std::string>& labels, bool with_correlator,
                                 FmaxOptions options, EvolveOptions evolve_options) {
  DynamicsResult result;
  result.times.assign(times.begin(), times.end());
  result.labels = labels;
  std::vector<std::uint64_t> indices;
  for (const auto& l : labels) indices.push_back(label_to_index(l, h.n_atoms));
  result.fidelities.assign(labels.size(), std::vector<double>(times.size(), 0.0));
  evolve_each(h, StateVector::ground(h.n_atoms), times, [&](std::size_t k, const StateVector& s) {
    for (std::size_t m = 0; m < indices.size(); ++m) result.fidelities[m][k] = std::norm(s.amplitudes[indices[m]]);
  }, evolve_options);
  if (with_correlator) {
    auto c = correlator_at_peak(h, options);
    result.t_star = c.t_star;
    result.f_max = c.f_max;
    result.correlator = std::move(c);
  } else {
    const auto peak = f_max(h, options);
    result.t_star = peak.t_star;
    result.f_max = peak.f_max;
  }
  return result;
}

std::vector<double> rabi_time_grid(const DriveSpec& drive, double periods, int samples) {
  if (samples < 1 || !(periods > 0.0)) throw Error(ErrorCode::InvalidState, "time grid needs samples >= 1");
  const double end = periods * drive.rabi_period();
  std::vector<double> t(static_cast<std::size_t>(samples) + 1);
  for (int k = 0; k <= samples; ++k) t[static_cast<std::size_t>(k)] = end * k / samples;
  return t;
}

double calibrate_omega(const std::function<double(double)>& fmax_at, double target, double lo, double hi) {
  if (!(lo > 0.0) || !(hi > lo)) throw Error(ErrorCode::NonpositiveRabi, "calibration bracket must be 0 < lo < hi");
  constexpr int kScan = 64;
  const double ratio = std::pow(hi / lo, 1.0 / kScan);
  double a = lo;
  double fa = fmax_at(a) - target;
  for (int k = 1; k <= kScan; ++k) {
    const double b = lo * std::pow(ratio, k);
    const double fb = fmax_at(b) - target;
    if (fa <= 0.0 && fb >= 0.0) {
      double left = a;
      double right = b;
      for (int it = 0; it < 200 && right - left > 1e-12 * right; ++it) {
        const double mid = 0.5 * (left + right);
        (fmax_at(mid) - target <= 0.0 ? left : right) = mid;
      }
      return 0.5 * (left + right);
    }
    a = b;
    fa = fb;
  }
  throw Error(ErrorCode::OutOfRange, "target F_max " + csv::format(target) + " not reached in Omega bracket");
}

}  // namespace rydsense
