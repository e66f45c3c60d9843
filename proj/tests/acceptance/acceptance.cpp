// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "oracle/dense_oracle.hpp"
#include "rydsense/cli.hpp"
#include "rydsense/csv.hpp"
#include "rydsense/dynamics.hpp"
#include "rydsense/error.hpp"
#include "rydsense/hash.hpp"
#include "rydsense/sensing.hpp"

using namespace rydsense;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Context {
 public:
  explicit Context(fs::path cache_dir) : cache_dir_(std::move(cache_dir)) { fs::create_directories(cache_dir_); }

  const StarkTable& table() {
    if (!table_) table_ = load_stark_table(fs::path(RYDSENSE_DATA_DIR) / "stark_rb87_59D32_bz0.csv");
    return *table_;
  }

  double e_res() { return resonance_field(table()).value; }

  /// Omega fitted so that F_max(E = 0, R = 15 um, N = 3) = 0.938.
  double omega() {
    if (!omega_) {
      const auto fn = [&](double w) { return row_f_max({15.0, 3}, 0.0, table(), w); };
      omega_ = calibrate_omega(fn, 0.938, 0.2, 50.0);
    }
    return *omega_;
  }

  const fs::path& cache_dir() const { return cache_dir_; }

  unsigned threads() const { return std::max(1u, std::thread::hardware_concurrency()); }

 private:
  fs::path cache_dir_;
  std::optional<StarkTable> table_;
  std::optional<double> omega_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

InteractionMatrix uniform_interactions(int n, double spacing, const PairCoefficients& c) {
  InteractionMatrix m{n, std::vector<double>(static_cast<std::size_t>(n * n), 0.0)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) m.values[static_cast<std::size_t>(i * n + j)] = effective_interaction(c, std::abs(i - j) * spacing);
    }
  }
  return m;
}

std::vector<std::vector<double>> nested(const InteractionMatrix& m) {
  std::vector<std::vector<double>> v(static_cast<std::size_t>(m.n), std::vector<double>(static_cast<std::size_t>(m.n)));
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) v[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return v;
}

StateVector random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  auto s = StateVector::ground(n);
  double norm2 = 0.0;
  for (auto& a : s.amplitudes) {
    a = {g(rng), g(rng)};
    norm2 += std::norm(a);
  }
  for (auto& a : s.amplitudes) a /= std::sqrt(norm2);
  return s;
}

Outcome oracle_equivalence(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> n_dist(1, 8);
  std::uniform_real_distribution<double> r_dist(5.0, 40.0);
  std::uniform_real_distribution<double> e_dist(ctx.table().min_field(), ctx.table().max_field());
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = n_dist(rng);
    const double r = r_dist(rng);
    const double e = e_dist(rng);
    const auto v = uniform_interactions(n, r, coefficients_at(ctx.table(), {e}));
    const DriveSpec drive{ctx.omega(), 0.0};
    const auto h = hamiltonian_from_interactions(v, drive);
    const oracle::SpectralPropagator exact(oracle::dense_hamiltonian(nested(v), drive.omega));
    const auto psi0 = StateVector::ground(n);
    oracle::CVector ref0 = oracle::CVector::Zero(static_cast<Eigen::Index>(h.dimension()));
    ref0(0) = 1.0;
    const auto times = rabi_time_grid(drive, 1.0, 16);
    evolve_each(h, psi0, times, [&](std::size_t k, const StateVector& s) {
      const auto ref = exact.propagate(ref0, times[k]);
      for (std::size_t b = 0; b < s.amplitudes.size(); ++b) {
        worst = std::max(worst, std::abs(s.amplitudes[b] - ref(static_cast<Eigen::Index>(b))));
      }
    });
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-8 && elapsed < 60.0,
          "max amplitude error " + fmt(worst, 3) + " over 20 configs, " + fmt(elapsed, 3) + " s"};
}

Outcome analytic_rabi(Context&) {
  const DriveSpec drive{2.0 * kPi * 0.7, 0.0};
  const auto h = hamiltonian_from_interactions({1, {0.0}}, drive);
  const auto times = rabi_time_grid(drive, 2.0, 2000);
  double worst = 0.0;
  evolve_each(h, StateVector::ground(1), times, [&](std::size_t k, const StateVector& s) {
    const double expected = std::pow(std::sin(drive.omega * times[k] / 2.0), 2);
    worst = std::max(worst, std::abs(basis_fidelity(s, "1") - expected));
  });
  const auto peak = f_max(h);
  const double t_err = std::abs(peak.t_star - kPi / drive.omega) / drive.rabi_period();
  return {worst < 1e-9 && std::abs(peak.f_max - 1.0) < 1e-9 && t_err <= 1e-4,
          "trajectory error " + fmt(worst, 3) + ", f_max " + fmt(peak.f_max, 12) + ", t_star offset " +
              fmt(t_err, 3) + " tau"};
}

Outcome conservation(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const auto h = uniform_row_hamiltonian(12, 15.0, {25.0}, ctx.table(), {ctx.omega(), 0.0});
  std::mt19937_64 rng(12);
  // |0...0> has zero energy, so relative drift is measured from a generic state.
  const auto psi0 = random_state(12, rng);
  const double e0 = energy(h, psi0);
  double norm_drift = 0.0;
  double energy_drift = 0.0;
  const auto times = rabi_time_grid(h.drive, 1.0, 20);
  evolve_each(h, psi0, times, [&](std::size_t, const StateVector& s) {
    norm_drift = std::max(norm_drift, std::abs(s.norm() - 1.0));
    energy_drift = std::max(energy_drift, std::abs(energy(h, s) - e0) / std::abs(e0));
  });
  const double elapsed = seconds_since(start);
  return {norm_drift < 1e-9 && energy_drift < 1e-8 && elapsed < 30.0,
          "N=12 norm drift " + fmt(norm_drift, 3) + ", relative energy drift " + fmt(energy_drift, 3) + ", " +
              fmt(elapsed, 3) + " s"};
}

Outcome interaction_limits(Context&) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> log_u(0.0, 1.0);
  const auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, log_u(rng)); };
  double worst_vdw = 0.0;
  double worst_dd = 0.0;
  double worst_oracle = 0.0;
  bool bounded = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const double delta = (trial % 2 ? 1.0 : -1.0) * log_uniform(1e-2, 1e3);
    const double c3 = log_uniform(1.0, 1e5);
    const PairCoefficients coeffs{delta, c3};
    // Pick R so that |delta| / (C3 / R^3) lands in each asymptotic regime.
    const double r_vdw = std::cbrt(c3 * log_uniform(1e2, 1e4) / std::abs(delta));
    const double r_dd = std::cbrt(c3 * log_uniform(1e-4, 1e-2) / std::abs(delta));
    for (double r : {r_vdw, r_dd}) {
      const double v = effective_interaction(coeffs, r);
      bounded = bounded && v <= 0.0;
      const double ref = oracle::lowest_pair_eigenvalue(delta, c3, r);
      // The dense solver's error scales with the matrix norm, not with the (tiny) eigenvalue.
      const double scale = std::max(std::abs(delta), c3 / (r * r * r));
      worst_oracle = std::max(worst_oracle, std::abs(v - ref) / scale);
    }
    const double c_vdw = c3 / std::pow(r_vdw, 3);
    const double v_vdw = effective_interaction(coeffs, r_vdw);
    worst_vdw = std::max(worst_vdw, std::abs(v_vdw + c_vdw * c_vdw / std::abs(delta)) / std::abs(v_vdw));
    const double c_dd = c3 / std::pow(r_dd, 3);
    worst_dd = std::max(worst_dd, std::abs(std::abs(effective_interaction(coeffs, r_dd)) - c_dd) / c_dd);
  }
  return {bounded && worst_vdw < 1e-3 && worst_dd < 2e-2 && worst_oracle < 1e-12,
          "1000 triples: van der Waals rel. error " + fmt(worst_vdw, 3) + ", dipole-dipole rel. error " +
              fmt(worst_dd, 3) + ", vs 2x2 eigenvalue " + fmt(worst_oracle, 3) + " of matrix scale"};
}

Outcome blockade_limits(Context&) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> omega_dist(0.5, 10.0);
  std::uniform_real_distribution<double> factor(1.0, 10.0);
  double strong = 0.0;
  double weak = 1.0;
  for (int trial = 0; trial < 25; ++trial) {
    const double omega = omega_dist(rng);
    const double v_strong = -1e3 * factor(rng) * omega;
    const double v_weak = -1e-3 / factor(rng) * omega;
    strong = std::max(strong, f_max(hamiltonian_from_interactions({2, {0, v_strong, v_strong, 0}}, {omega, 0})).f_max);
    weak = std::min(weak, f_max(hamiltonian_from_interactions({2, {0, v_weak, v_weak, 0}}, {omega, 0})).f_max);
  }
  return {strong < 1e-3 && weak > 0.999,
          "max f_max for |V|/Omega > 1e3: " + fmt(strong, 3) + "; min f_max for |V|/Omega < 1e-3: " + fmt(weak, 8)};
}

Outcome figure2_values(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const double w = ctx.omega();
  const double e_res = ctx.e_res();
  const auto f = [&](double e, double omega) { return row_f_max({15.0, 3}, e, ctx.table(), omega); };
  const double f0 = f(0.0, w);
  const double f25 = f(25.0, w);
  const double fres = f(e_res, w);
  const double f50 = f(50.0, w);
  const bool values = std::abs(f25 - 0.564) <= 0.05 && std::abs(fres - 0.016) <= 0.02 && std::abs(f50 - 0.978) <= 0.05;
  bool ordered = true;
  std::string broken;
  for (int k = 0; k <= 16; ++k) {
    const double omega = w * std::pow(2.0, -1.0 + k / 8.0);
    const double a = f(e_res, omega), b = f(25.0, omega), c = f(0.0, omega), d = f(50.0, omega);
    if (!(a < b && b < c && c < d)) {
      ordered = false;
      broken += " " + fmt(omega);
    }
  }
  const double elapsed = seconds_since(start);
  return {values && ordered && elapsed < 60.0,
          "Omega = " + fmt(w, 6) + " rad/us (" + fmt(w / (2 * kPi), 5) + " MHz): F(0) = " + fmt(f0) + ", F(25) = " +
              fmt(f25) + ", F(E_res) = " + fmt(fres) + ", F(50) = " + fmt(f50) +
              (ordered ? "; ordering holds on [Omega/2, 2 Omega]" : "; ordering broken at Omega =" + broken)};
}

Outcome crossover_radii(Context& ctx) {
  const auto& t = ctx.table();
  struct Ref {
    double e, r;
  };
  bool ok = true;
  std::string detail;
  for (const auto& ref : {Ref{0.0, 6.68}, Ref{28.2, 14.15}, Ref{29.0, 52.95}, Ref{34.4, 9.76}}) {
    const double r = crossover_radius(coefficients_at(t, {ref.e}));
    ok = ok && std::abs(r - ref.r) <= 0.02 * ref.r;
    detail += "R_c(" + fmt(ref.e) + ") = " + fmt(r) + " um; ";
  }
  double best_c = 0.0, best_b = 0.0, e_c = 0.0, e_b = 0.0;
  for (const auto& row : t.rows()) {
    const auto c = coefficients_at(t, {row.field});
    if (std::abs(c.delta) <= kDefectEpsilon) continue;
    if (const double r = crossover_radius(c); r > best_c) best_c = r, e_c = row.field;
    if (const double r = blockade_radius(c, ctx.omega()); r > best_b) best_b = r, e_b = row.field;
  }
  const double step = t.rows()[1].field - t.rows()[0].field;
  const double e_res = ctx.e_res();
  ok = ok && std::abs(e_c - e_res) <= step && std::abs(e_b - e_res) <= step;
  return {ok, detail + "peaks at " + fmt(e_c) + " (R_c) and " + fmt(e_b) + " (R_b), E_res = " + fmt(e_res, 6)};
}

struct CorrelatorChecks {
  double asymmetry = 0.0;
  double projector_excess = 0.0;
};

CorrelatorChecks check_correlator(const Correlator& c) {
  CorrelatorChecks out;
  for (int i = 0; i < c.n; ++i) {
    out.projector_excess = std::max({out.projector_excess, -c(i, i), c(i, i) - 1.0});
    for (int j = 0; j < c.n; ++j) {
      out.asymmetry = std::max(out.asymmetry, std::abs(c(i, j) - c(j, i)));
      out.projector_excess = std::max({out.projector_excess, c(i, j) - std::min(c(i, i), c(j, j)), -c(i, j)});
    }
  }
  return out;
}

std::vector<int> local_minima(const Correlator& c) {
  std::vector<int> out;
  for (int i = 1; i + 1 < c.n; ++i) {
    if (c(i, i) < c(i - 1, i - 1) && c(i, i) < c(i + 1, i + 1)) out.push_back(i + 1);
  }
  return out;
}

Outcome figure3_correlators(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  ArrayGeometry geometry;
  geometry.rows.push_back({19, 15.0, 0.0});
  const double e_res = ctx.e_res();
  const DriveSpec drive{ctx.omega(), 0.0};

  const FieldProfile sinusoid = resonant_sinusoid(e_res, 5.0, 10.0);
  validate_profile(sinusoid, geometry, 0, ctx.table());
  const auto c_sin = correlator_at_peak(build_hamiltonian(geometry, 0, sinusoid, ctx.table(), drive));

  // 2 E_res -> 0 leaves the table span, so the gradient runs 1.6 E_res -> 0.4 E_res (still E_res at atom 10).
  const FieldProfile gradient = GradientField{1.6 * e_res, 0.4 * e_res};
  validate_profile(gradient, geometry, 0, ctx.table());
  const auto c_grad = correlator_at_peak(build_hamiltonian(geometry, 0, gradient, ctx.table(), drive));

  const auto minima_sin = local_minima(c_sin);
  int argmin_grad = 0;
  for (int i = 1; i < 19; ++i) {
    if (c_grad(i, i) < c_grad(argmin_grad, argmin_grad)) argmin_grad = i;
  }
  const auto a = check_correlator(c_sin);
  const auto b = check_correlator(c_grad);
  const double asym = std::max(a.asymmetry, b.asymmetry);
  const double excess = std::max(a.projector_excess, b.projector_excess);
  const double elapsed = seconds_since(start);
  std::string mins;
  for (int m : minima_sin) mins += (mins.empty() ? "" : ",") + std::to_string(m);
  const bool ok = minima_sin == std::vector<int>{5, 15} && std::abs(argmin_grad + 1 - 10) <= 1 && asym <= 1e-8 &&
                  excess <= 1e-8 && elapsed < 600.0;
  return {ok, "sinusoid diagonal minima at atoms {" + mins + "}, gradient minimum at atom " +
                  std::to_string(argmin_grad + 1) + " (<n n> = " + fmt(c_grad(argmin_grad, argmin_grad)) +
                  "), asymmetry " + fmt(asym, 3) + ", projector excess " + fmt(excess, 3) + ", " + fmt(elapsed, 3) +
                  " s for two 2^19 runs"};
}

Outcome atom_number_trend(Context& ctx) {
  std::string detail;
  bool ok = true;
  for (double e : {0.0, ctx.e_res()}) {
    double previous = 2.0;
    detail += "E = " + fmt(e) + ":";
    for (int n = 2; n <= 7; ++n) {
      const double f = row_f_max({15.0, n}, e, ctx.table(), ctx.omega());
      ok = ok && f <= previous + 0.02;
      previous = f;
      detail += " " + fmt(f, 3);
    }
    detail += "; ";
  }
  return {ok, detail + "N = 2..7"};
}

std::vector<ForwardCurve> cached_curves(Context& ctx, const std::vector<SensorRow>& rows, double step) {
  const CurveCacheInfo info{ctx.omega(), ctx.table().checksum()};
  std::string name = "curves";
  for (const auto& r : rows) name += "_" + csv::format(r.spacing_um);
  const auto path = ctx.cache_dir() / (name + "_" + csv::format(step) + ".csv");
  if (std::ifstream in(path); in) {
    try {
      return read_forward_curves(in, info);
    } catch (const Error&) {
      // stale cache: rebuild below
    }
  }
  const auto fields = field_grid(ctx.table(), step);
  auto curves = forward_curves(rows, ctx.table(), ctx.omega(), fields, ctx.threads());
  std::ostringstream out;
  write_forward_curves(out, curves, info);
  csv::write_atomically(path, out.str());
  return curves;
}

Outcome sensing_round_trip(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<SensorRow> rows{{5.0, 3}, {15.0, 3}, {20.0, 3}, {40.0, 3}};
  const double step = 0.1;
  const auto curves = cached_curves(ctx, rows, step);
  const double curve_time = seconds_since(start);
  double worst = 0.0;
  double worst_shift = 0.0;
  int failures = 0;
  std::string failed_at;
  for (int k = 0; k < 100; ++k) {
    const double e_true = 0.25 + 0.5 * k;
    try {
      const auto readout = simulate_readout(e_true, rows, ctx.table(), ctx.omega(), std::nullopt, 0);
      const auto est = estimate_field(readout, curves);
      worst = std::max(worst, std::abs(est.field - e_true));
      auto scaled = readout;
      for (auto& r : scaled.rows) r.frequency *= 0.9;
      const auto est_scaled = estimate_field(scaled, curves);
      worst_shift = std::max(worst_shift, std::abs(est_scaled.field - est.field));
    } catch (const Error& e) {
      ++failures;
      if (failures <= 6) failed_at += " " + fmt(e_true);
    }
  }
  const double elapsed = seconds_since(start);
  const double tol = 1e-9;
  return {failures == 0 && worst <= 2 * step + tol && worst_shift <= step + tol && curve_time < 1200.0,
          "100 fields: max |E_hat - E| = " + fmt(worst, 3) + " mV/cm, max shift under gain 0.9 = " +
              fmt(worst_shift, 3) + " mV/cm" + (failures ? ", " + std::to_string(failures) + " estimator errors, first at" + failed_at : "") + ", curves " +
              fmt(curve_time, 3) + " s, total " + fmt(elapsed, 3) + " s"};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(Context& ctx) {
  const auto dir = ctx.cache_dir() / "determinism";
  fs::remove_all(dir);
  std::ostringstream config;
  config << "table: " << (fs::path(RYDSENSE_DATA_DIR) / "stark_rb87_59D32_bz0.csv").string() << "\n"
         << "drive:\n  omega_rad_per_us: " << csv::format(ctx.omega()) << "\n"
         << "geometry:\n  rows:\n    - {n_atoms: 6, spacing_um: 15}\n"
         << "field:\n  kind: gaussian\n"
         << "  params: {baseline_mVcm: 20, peak_mVcm: E_res, center_um: 37.5, width_um: 20}\n"
         << "output:\n  correlator: true\n"
         << "sweep:\n  n_atoms: [2, 3]\n  spacings_um: [10, 15, 20]\n  fields_mVcm: [0, 25, E_res]\n"
         << "sensing:\n  rows:\n    - {spacing_um: 5}\n    - {spacing_um: 15}\n"
         << "    - {spacing_um: 20}\n    - {spacing_um: 40}\n"
         << "  field_step_mVcm: 1\n  field_true_mVcm: 27.5\n  shots: 2000\n  seed: 17\n"
         << "  curves: curves.csv\n  readout: readout.csv\n  allow_ambiguous: true\n"
         << "threads: 1\n";
  const std::vector<std::string> commands{"coeffs", "dynamics", "fmax", "correlator", "curves", "readout", "sense"};
  for (const auto* run : {"a", "b"}) {
    // Same document in two directories; relative paths keep each run's files apart.
    fs::create_directories(dir / run);
    const auto path = dir / run / "run.yaml";
    std::ofstream(path) << config.str();
    for (const auto& cmd : commands) {
      std::ostringstream sink;
      if (const int code = cli::run({cmd, "-c", path.string()}, sink, sink); code != 0) {
        return {false, cmd + " exited with " + std::to_string(code) + ": " + sink.str()};
      }
    }
  }
  std::size_t files = 0;
  std::string differing;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    if (slurp(entry.path()) != slurp(dir / "b" / entry.path().filename())) {
      differing += " " + entry.path().filename().string();
    }
  }
  return {differing.empty() && files >= 8,
          std::to_string(files) + " CSVs from 7 subcommands" +
              (differing.empty() ? " byte-identical across two runs" : "; differ:" + differing)};
}

struct Criterion {
  std::string_view id;
  Outcome (*run)(Context&);
};

constexpr Criterion kCriteria[] = {
    {"oracle-equivalence", oracle_equivalence},
    {"analytic-rabi", analytic_rabi},
    {"norm-energy-conservation", conservation},
    {"interaction-limits", interaction_limits},
    {"blockade-limits", blockade_limits},
    {"fmax-reference-values", figure2_values},
    {"crossover-radii", crossover_radii},
    {"n19-correlators", figure3_correlators},
    {"fmax-decreases-with-n", atom_number_trend},
    {"sensing-round-trip", sensing_round_trip},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rydsense acceptance suite"};
  std::string cache_dir = (fs::temp_directory_path() / "rydsense_acceptance").string();
  std::string only;
  app.add_option("--cache-dir", cache_dir, "where forward curves and scratch files are kept");
  app.add_option("--only", only, "run a single criterion by id");
  CLI11_PARSE(app, argc, argv);

  Context ctx(cache_dir);
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run(ctx);
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw ") + e.what()};
    }
    failed += outcome.pass ? 0 : 1;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << c.id << ": " << outcome.detail << " [" << fmt(seconds_since(start), 3)
              << " s]" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
