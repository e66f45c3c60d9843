#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rydsense/geometry.hpp"
#include "rydsense/pairstate.hpp"

namespace rydsense {

using Complex = std::complex<double>;

inline constexpr int kMaxAtomsPerRow = 24;

/// Ground-Rydberg drive in angular units (rad/us).
struct DriveSpec {
  double omega = 0.0;
  double detuning = 0.0;

  double rabi_period() const { return kTwoPi / omega; }
};

/// H = Omega/2 sum_i sigma^x_i + diag(E_b), with E_b = sum over excited pairs of V_ij - detuning |b|.
/// The drive term is applied matrix-free; only the 2^N diagonal is stored.
struct HamiltonianSpec {
  int n_atoms = 0;
  std::vector<double> diagonal;
  DriveSpec drive;

  std::size_t dimension() const { return diagonal.size(); }
};

/// Symmetric n x n pair-interaction matrix, row-major, zero diagonal.
struct InteractionMatrix {
  int n = 0;
  std::vector<double> values;

  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i * n + j)]; }
};

/// All-to-all pair interactions of one row, each evaluated at the field of the pair midpoint.
InteractionMatrix row_interactions(const ArrayGeometry& geometry, std::size_t row, const FieldProfile& profile,
                                   const StarkTable& table);

HamiltonianSpec hamiltonian_from_interactions(const InteractionMatrix& interactions, DriveSpec drive);

HamiltonianSpec build_hamiltonian(const ArrayGeometry& geometry, std::size_t row, const FieldProfile& profile,
                                  const StarkTable& table, DriveSpec drive);

/// Evenly spaced row of n atoms at the given spacing in a uniform field.
HamiltonianSpec uniform_row_hamiltonian(int n_atoms, double spacing_um, FieldStrength field,
                                        const StarkTable& table, DriveSpec drive);

/// Amplitudes in the occupation basis; atom k (1-based) is bit k-1.
struct StateVector {
  int n_atoms = 0;
  std::vector<Complex> amplitudes;

  static StateVector basis(int n_atoms, std::uint64_t index);
  static StateVector ground(int n_atoms) { return basis(n_atoms, 0); }

  double norm() const;
};

/// "n1 n2 ... nN" written left to right, e.g. "100" has only atom 1 excited.
std::uint64_t label_to_index(std::string_view label, int n_atoms);
std::string index_to_label(std::uint64_t index, int n_atoms);

double basis_fidelity(const StateVector& state, std::string_view label);

/// out = scale * (H - shift) * in.
void apply_hamiltonian(const HamiltonianSpec& h, std::span<const Complex> in, std::span<Complex> out,
                       double shift = 0.0, double scale = 1.0);

double energy(const HamiltonianSpec& h, const StateVector& state);

struct EvolveOptions {
  double norm_tolerance = 1e-9;
};

/// Propagates exp(-iHt) by Chebyshev expansion over a bound on the spectrum.
class ChebyshevPropagator {
 public:
  explicit ChebyshevPropagator(const HamiltonianSpec& h);

  /// Spectrum is contained in [center - half_width, center + half_width].
  double center() const { return center_; }
  double half_width() const { return half_width_; }

  StateVector propagate(const StateVector& state, double dt) const;

  /// mu_k = <target| T_k(H_scaled) |from> for k < count.
  std::vector<Complex> transition_moments(const StateVector& from, std::uint64_t target, std::size_t count) const;

  /// <target| exp(-iHt) |from> from precomputed moments.
  Complex transition_amplitude(std::span<const Complex> moments, double t) const;

  /// Expansion length that resolves exp(-iHt) to machine precision.
  std::size_t terms_for(double t) const;

 private:
  const HamiltonianSpec* h_;
  double center_ = 0.0;
  double half_width_ = 1.0;
};

/// Bessel functions J_0..J_{count-1} of the first kind at x >= 0 (Miller backward recurrence).
std::vector<double> bessel_j_series(double x, std::size_t count);

/// Visits the state at every time in `times` (ascending, >= 0). Throws IntegratorFailure
/// when the norm drifts beyond the tolerance.
void evolve_each(const HamiltonianSpec& h, const StateVector& initial, std::span<const double> times,
                 const std::function<void(std::size_t, const StateVector&)>& visit, EvolveOptions options = {});

std::vector<StateVector> evolve(const HamiltonianSpec& h, const StateVector& initial, std::span<const double> times,
                                EvolveOptions options = {});

struct FmaxOptions {
  int samples = 2048;
  double time_tolerance = 1e-4;  // fraction of the Rabi period
};

struct PeakFidelity {
  double f_max = 0.0;
  double t_star = 0.0;
};

/// Maximum over (0, 2 pi / Omega] of the fully excited population, starting from |0...0>.
PeakFidelity f_max(const HamiltonianSpec& h, FmaxOptions options = {});

/// N x N row-major matrix of <n_i n_j>.
struct Correlator {
  int n = 0;
  std::vector<double> values;
  double t_star = 0.0;
  double f_max = 0.0;

  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i * n + j)]; }
};

Correlator density_correlator(const StateVector& state);

/// <n_i n_j> at the time the fully excited population peaks.
Correlator correlator_at_peak(const HamiltonianSpec& h, FmaxOptions options = {});

struct DynamicsResult {
  std::vector<double> times;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> fidelities;  // [label][time]
  double t_star = 0.0;
  double f_max = 0.0;
  std::optional<Correlator> correlator;
};

/// Ground, fully excited and the singly excited states; every basis state when full is set.
std::vector<std::string> default_tracked_labels(int n_atoms, bool full = false);

DynamicsResult simulate_dynamics(const HamiltonianSpec& h, std::span<const double> times,
                                 const std::vector<std::string>& labels, bool with_correlator = false,
                                 FmaxOptions options = {}, EvolveOptions evolve_options = {});

/// `samples + 1` points covering [0, periods * 2 pi / Omega].
std::vector<double> rabi_time_grid(const DriveSpec& drive, double periods, int samples);

/// Finds Omega so that `fmax_at(Omega)` hits `target`, scanning [lo, hi] geometrically for the
/// first upward crossing then bisecting.
double calibrate_omega(const std::function<double(double)>& fmax_at, double target, double lo, double hi);

}  // namespace rydsense
