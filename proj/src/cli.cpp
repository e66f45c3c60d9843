#include "rydsense/cli.hpp"

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "rydsense/csv.hpp"
#include "rydsense/error.hpp"
#include "rydsense/hash.hpp"
#include "rydsense/parallel.hpp"

namespace rydsense::cli {
namespace {

namespace fs = std::filesystem;

struct Context {
  std::string source;
  std::set<std::string> overridden;
  const StarkTable* table = nullptr;
};

std::string join_key(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

// A mapping in the config document plus enough context to report where a bad value came from.
class Section {
 public:
  Section(YAML::Node node, std::string path, const Context& ctx) : node_(std::move(node)), path_(std::move(path)), ctx_(&ctx) {}

  const std::string& path() const { return path_; }

  YAML::Node get(std::string_view key) const {
    const YAML::Node& n = node_;
    return n[std::string(key)];
  }

  bool has(std::string_view key) const {
    const auto n = get(key);
    return n.IsDefined() && !n.IsNull();
  }

  std::string where(std::string_view key) const {
    const auto full = join_key(path_, key);
    for (const auto& o : ctx_->overridden) {
      if (full == o || full.starts_with(o + ".")) return "--set " + o;
    }
    auto mark = has(key) ? get(key).Mark() : node_.Mark();
    if (mark.is_null()) return ctx_->source;
    return ctx_->source + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
  }

  [[noreturn]] void fail(std::string_view key, const std::string& message) const {
    config_error(where(key) + ": " + join_key(path_, key) + ": " + message);
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (const auto& entry : node_) {
      const auto key = entry.first.as<std::string>();
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        std::string expected;
        for (auto k : keys) expected += (expected.empty() ? "" : ", ") + std::string(k);
        fail(key, "unknown key (expected one of: " + expected + ")");
      }
    }
  }

  Section child(std::string_view key) const {
    if (!has(key)) fail(key, "missing section");
    const auto n = get(key);
    if (!n.IsMap()) fail(key, "expected a mapping");
    return {n, join_key(path_, key), *ctx_};
  }

  std::string scalar(std::string_view key) const {
    if (!has(key)) fail(key, "missing value");
    const auto n = get(key);
    if (!n.IsScalar()) fail(key, "expected a single value");
    return n.Scalar();
  }

  double number(std::string_view key) const { return to_number(key, scalar(key)); }

  std::optional<double> optional_number(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  double positive(std::string_view key) const {
    const double v = number(key);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  std::int64_t integer(std::string_view key) const { return to_integer(key, scalar(key)); }

  bool boolean(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    try {
      return get(key).as<bool>();
    } catch (const YAML::Exception&) {
      fail(key, "expected true or false");
    }
  }

  /// A field strength in mV/cm: a number, `E_res`, or a multiple such as `0.5*E_res`.
  double field(std::string_view key) const { return to_field(key, scalar(key)); }

  /// A list, a single value, or a {start, stop, step} range.
  std::vector<double> number_list(std::string_view key, bool fields) const {
    const auto n = get(key);
    const auto convert = [&](const std::string& text) { return fields ? to_field(key, text) : to_number(key, text); };
    std::vector<double> out;
    if (n.IsScalar()) {
      out.push_back(convert(n.Scalar()));
    } else if (n.IsSequence()) {
      for (const auto& item : n) {
        if (!item.IsScalar()) fail(key, "list entries must be single values");
        out.push_back(convert(item.Scalar()));
      }
    } else if (n.IsMap()) {
      const Section range(n, join_key(path_, key), *ctx_);
      range.allow_only({"start", "stop", "step"});
      const double start = fields ? range.field("start") : range.number("start");
      const double stop = fields ? range.field("stop") : range.number("stop");
      const double step = range.positive("step");
      if (stop < start) range.fail("stop", "must not be below start");
      out = field_grid(start, stop, step);
    } else {
      fail(key, "missing value");
    }
    if (out.empty()) fail(key, "must not be empty");
    return out;
  }

  std::vector<Section> sequence(std::string_view key) const {
    const auto n = get(key);
    if (!n.IsSequence() || n.size() == 0) fail(key, "expected a non-empty list");
    std::vector<Section> out;
    for (std::size_t k = 0; k < n.size(); ++k) {
      if (!n[k].IsMap()) fail(key, "entry " + std::to_string(k) + " must be a mapping");
      out.emplace_back(n[k], join_key(path_, key) + "." + std::to_string(k), *ctx_);
    }
    return out;
  }

 private:
  double to_number(std::string_view key, const std::string& text) const {
    const auto v = csv::parse_double(text);
    if (!v || !std::isfinite(*v)) fail(key, "expected a number, got '" + text + "'");
    return *v;
  }

  std::int64_t to_integer(std::string_view key, const std::string& text) const {
    std::int64_t v = 0;
    const auto t = csv::trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) fail(key, "expected an integer, got '" + text + "'");
    return v;
  }

  double to_field(std::string_view key, const std::string& text) const {
    if (const auto v = csv::parse_double(text); v && std::isfinite(*v)) return *v;
    auto t = csv::trim(text);
    if (!t.ends_with("E_res")) fail(key, "expected a field in mV/cm or a multiple of E_res, got '" + text + "'");
    t.remove_suffix(5);
    t = csv::trim(t);
    if (t.ends_with('*')) t = csv::trim(t.substr(0, t.size() - 1));
    const auto factor = t.empty() ? std::optional<double>(1.0) : csv::parse_double(t);
    if (!factor || !std::isfinite(*factor)) fail(key, "cannot read the E_res multiple '" + text + "'");
    return *factor * resonance_field(*ctx_->table).value;
  }

  YAML::Node node_;
  std::string path_;
  const Context* ctx_;
};

void set_path(YAML::Node node, std::span<const std::string> keys, const YAML::Node& value, const std::string& spec) {
  const auto& key = keys.front();
  if (node.IsSequence()) {
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
    if (ec != std::errc() || ptr != key.data() + key.size() || idx >= node.size()) {
      config_error("--set " + spec + ": '" + key + "' is not a valid list index");
    }
    if (keys.size() == 1) {
      node[idx] = value;
    } else {
      set_path(node[idx], keys.subspan(1), value, spec);
    }
    return;
  }
  if (!node.IsMap() && !node.IsNull()) config_error("--set " + spec + ": cannot descend into a scalar");
  if (keys.size() == 1) {
    node[key] = value;
    return;
  }
  YAML::Node next = node[key];
  if (!next.IsDefined() || next.IsNull() || next.IsScalar()) {
    node[key] = YAML::Node(YAML::NodeType::Map);
    next = node[key];
  }
  set_path(next, keys.subspan(1), value, spec);
}

std::string apply_override(YAML::Node& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) config_error("--set expects key=value, got '" + spec + "'");
  const std::string key(csv::trim(std::string_view(spec).substr(0, eq)));
  YAML::Node value;
  try {
    value = YAML::Load(spec.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    config_error("--set " + spec + ": " + e.msg);
  }
  std::vector<std::string> keys;
  for (auto part : csv::split(key, '.')) {
    if (part.empty()) config_error("--set " + spec + ": empty key segment");
    keys.emplace_back(part);
  }
  set_path(root, keys, value, spec);
  return key;
}

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

FieldProfile parse_field(const Section& f) {
  f.allow_only({"kind", "params"});
  const auto kind = f.scalar("kind");
  const Section p = f.child("params");
  if (kind == "uniform") {
    p.allow_only({"E_mVcm"});
    return UniformField{p.field("E_mVcm")};
  }
  if (kind == "gradient") {
    p.allow_only({"start_mVcm", "end_mVcm"});
    return GradientField{p.field("start_mVcm"), p.field("end_mVcm")};
  }
  if (kind == "sinusoid") {
    if (p.has("peak_mVcm")) {
      p.allow_only({"peak_mVcm", "first_peak_site", "period_sites"});
      return resonant_sinusoid(p.field("peak_mVcm"), p.number("first_peak_site"), p.positive("period_sites"));
    }
    p.allow_only({"offset_mVcm", "amplitude_mVcm", "period_sites", "phase_rad"});
    return SinusoidField{p.field("offset_mVcm"), p.field("amplitude_mVcm"), p.positive("period_sites"),
                         p.optional_number("phase_rad").value_or(0.0)};
  }
  if (kind == "gaussian") {
    p.allow_only({"baseline_mVcm", "peak_mVcm", "center_um", "width_um"});
    return GaussianField{p.has("baseline_mVcm") ? p.field("baseline_mVcm") : 0.0, p.field("peak_mVcm"),
                         p.number("center_um"), p.positive("width_um")};
  }
  if (kind == "tabulated") {
    p.allow_only({"values_mVcm"});
    if (!p.get("values_mVcm").IsSequence()) p.fail("values_mVcm", "expected a list of per-atom fields");
    return TabulatedField{p.number_list("values_mVcm", true)};
  }
  f.fail("kind", "unknown field kind '" + kind + "' (expected uniform, gradient, sinusoid, gaussian or tabulated)");
}

// Reads `<name>_MHz` or `<name>_rad_per_us`; the unit tag is mandatory.
std::optional<double> angular(const Section& s, std::string_view name, bool required) {
  const std::string mhz = std::string(name) + "_MHz";
  const std::string rad = std::string(name) + "_rad_per_us";
  if (s.has(name)) s.fail(name, "missing unit tag; write " + mhz + " or " + rad);
  if (s.has(mhz) && s.has(rad)) s.fail(rad, "give " + std::string(name) + " in one unit only");
  if (s.has(mhz)) return kTwoPi * s.number(mhz);
  if (s.has(rad)) return s.number(rad);
  if (required) s.fail(mhz, "missing; write " + mhz + " or " + rad);
  return std::nullopt;
}

SensingSettings parse_sensing(const Section& s, const fs::path& base) {
  s.allow_only({"rows", "field_step_mVcm", "field_true_mVcm", "shots", "seed", "curves", "readout", "allow_ambiguous"});
  SensingSettings out;
  if (s.has("rows")) {
    for (const auto& r : s.sequence("rows")) {
      r.allow_only({"spacing_um", "n_atoms"});
      const auto n = r.has("n_atoms") ? r.integer("n_atoms") : 3;
      if (n < 1 || n > kMaxAtomsPerRow) r.fail("n_atoms", "must be between 1 and " + std::to_string(kMaxAtomsPerRow));
      out.rows.push_back({r.positive("spacing_um"), static_cast<int>(n)});
    }
  }
  if (s.has("field_step_mVcm")) out.field_step_mVcm = s.positive("field_step_mVcm");
  if (s.has("field_true_mVcm")) out.field_true_mVcm = s.field("field_true_mVcm");
  if (s.has("shots")) {
    const auto text = s.scalar("shots");
    if (text != "inf" && text != "exact") {
      const auto shots = s.integer("shots");
      if (shots < 1) s.fail("shots", "must be positive, or inf for exact readout");
      out.shots = shots;
    }
  }
  if (s.has("seed")) {
    const auto seed = s.integer("seed");
    if (seed < 0) s.fail("seed", "must be non-negative");
    out.seed = static_cast<std::uint64_t>(seed);
  }
  if (s.has("curves")) out.curves = resolve(base, s.scalar("curves"));
  if (s.has("readout")) out.readout = resolve(base, s.scalar("readout"));
  out.allow_ambiguous = s.boolean("allow_ambiguous", false);
  return out;
}

const DriveSpec& need_drive(const RunConfig& cfg) {
  if (!cfg.drive) config_error(cfg.source + ": this command needs a 'drive' section");
  return *cfg.drive;
}

const SensingSettings& need_sensing(const RunConfig& cfg) {
  if (!cfg.sensing) config_error(cfg.source + ": this command needs a 'sensing' section");
  return *cfg.sensing;
}

std::string metadata(const RunConfig& cfg, std::string_view command, bool physics = true) {
  std::ostringstream out;
  out << "# rydsense_version=" << kVersion << '\n';
  out << "# command=" << command << '\n';
  out << "# config_hash=" << hex_digest(cfg.hash) << '\n';
  if (physics) {
    out << "# table_checksum=" << hex_digest(cfg.table->checksum()) << '\n';
    if (cfg.drive) out << "# omega_rad_per_us=" << csv::format(cfg.drive->omega) << '\n';
  }
  return out.str();
}

fs::path output_file(const RunConfig& cfg, std::string_view name) { return cfg.output.dir / name; }

void emit(const fs::path& path, const std::string& text, std::vector<fs::path>& written, std::ostream& log) {
  csv::write_atomically(path, text);
  written.push_back(path);
  log << "wrote " << path.string() << '\n';
}

struct RowSetup {
  ArrayGeometry geometry;
  FieldProfile field;
  HamiltonianSpec h;
  int n_atoms = 0;
};

RowSetup simulated_row(const RunConfig& cfg) {
  if (!cfg.geometry) config_error(cfg.source + ": this command needs a 'geometry' section");
  if (!cfg.field) config_error(cfg.source + ": this command needs a 'field' section");
  const auto& drive = need_drive(cfg);
  RowSetup s{*cfg.geometry, *cfg.field, {}, cfg.geometry->rows[cfg.row_index].n_atoms};
  validate_profile(s.field, s.geometry, cfg.row_index, *cfg.table);
  s.h = build_hamiltonian(s.geometry, cfg.row_index, s.field, *cfg.table, drive);
  return s;
}

std::string correlator_csv(const RunConfig& cfg, const Correlator& c, std::string_view command) {
  std::ostringstream out;
  out << metadata(cfg, command);
  out << "# n_atoms=" << c.n << '\n';
  out << "# t_star_us=" << csv::format(c.t_star) << '\n';
  out << "# f_max=" << csv::format(c.f_max) << '\n';
  out << "i,j,value\n";
  for (int i = 0; i < c.n; ++i) {
    for (int j = 0; j < c.n; ++j) out << i + 1 << ',' << j + 1 << ',' << csv::format(c(i, j)) << '\n';
  }
  return out.str();
}

std::vector<fs::path> cmd_coeffs(const RunConfig& cfg, std::ostream& log) {
  const auto& table = *cfg.table;
  const auto& drive = need_drive(cfg);
  std::vector<double> fields = cfg.sweep.fields_mVcm;
  if (fields.empty()) {
    for (const auto& r : table.rows()) fields.push_back(r.field);
  }
  std::optional<double> e_res;
  try {
    e_res = resonance_field(table).value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoResonance) throw;
  }
  std::ostringstream out;
  out << metadata(cfg, "coeffs");
  out << "# E_res_mVcm=" << (e_res ? csv::format(*e_res) : std::string("none")) << '\n';
  out << "E_mVcm,delta_MHz,C3_MHz_um3,R_c_um,R_b_um\n";
  const auto inf = std::numeric_limits<double>::infinity();
  for (double e : fields) {
    const auto c = coefficients_at(table, {e});
    const bool degenerate = std::abs(c.delta) <= kDefectEpsilon;
    out << csv::format(e) << ',' << csv::format(c.delta / kTwoPi) << ',' << csv::format(c.c3 / kTwoPi) << ','
        << csv::format(degenerate ? inf : crossover_radius(c)) << ','
        << csv::format(degenerate ? inf : blockade_radius(c, drive.omega)) << '\n';
  }
  if (e_res) log << "E_res = " << csv::format(*e_res) << " mV/cm\n";
  std::vector<fs::path> written;
  emit(output_file(cfg, "coeffs.csv"), out.str(), written, log);
  return written;
}

std::vector<fs::path> cmd_dynamics(const RunConfig& cfg, std::ostream& log) {
  const auto row = simulated_row(cfg);
  const auto& drive = need_drive(cfg);
  const int samples = std::max(1, static_cast<int>(std::lround(cfg.periods * cfg.integrator.steps_per_period)));
  const auto times = rabi_time_grid(drive, cfg.periods, samples);
  const auto labels = cfg.output.labels.empty() ? default_tracked_labels(row.n_atoms, cfg.output.full_basis)
                                                : cfg.output.labels;
  const auto result = simulate_dynamics(row.h, times, labels, cfg.output.correlator, cfg.fmax_options(),
                                        EvolveOptions{cfg.integrator.norm_tolerance});
  std::ostringstream out;
  out << metadata(cfg, "dynamics");
  out << "# n_atoms=" << row.n_atoms << '\n';
  out << "# field_kind=" << profile_kind(row.field) << '\n';
  out << "# t_star_us=" << csv::format(result.t_star) << '\n';
  out << "# f_max=" << csv::format(result.f_max) << '\n';
  out << "t_us";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << csv::format(times[k]);
    for (const auto& f : result.fidelities) out << ',' << csv::format(f[k]);
    out << '\n';
  }
  log << "f_max = " << csv::format(result.f_max) << " at t = " << csv::format(result.t_star) << " us\n";
  std::vector<fs::path> written;
  emit(output_file(cfg, "dynamics.csv"), out.str(), written, log);
  if (result.correlator) emit(output_file(cfg, "correlator.csv"), correlator_csv(cfg, *result.correlator, "dynamics"), written, log);
  return written;
}

std::vector<fs::path> cmd_fmax(const RunConfig& cfg, std::ostream& log) {
  const auto& drive = need_drive(cfg);
  if (cfg.sweep.spacings_um.empty()) config_error(cfg.source + ": fmax needs sweep.spacings_um");
  if (cfg.sweep.fields_mVcm.empty()) config_error(cfg.source + ": fmax needs sweep.fields_mVcm");
  const std::vector<int> counts = cfg.sweep.n_atoms.empty() ? std::vector<int>{3} : cfg.sweep.n_atoms;
  struct Point {
    int n;
    double r;
    double e;
    PeakFidelity peak;
  };
  std::vector<Point> points;
  for (int n : counts)
    for (double r : cfg.sweep.spacings_um)
      for (double e : cfg.sweep.fields_mVcm) points.push_back({n, r, e, {}});
  const auto options = cfg.fmax_options();
  parallel_for(points.size(), cfg.threads, [&](std::size_t k) {
    auto& p = points[k];
    p.peak = f_max(uniform_row_hamiltonian(p.n, p.r, {p.e}, *cfg.table, drive), options);
  });
  std::ostringstream out;
  out << metadata(cfg, "fmax");
  out << "R_um,N,E_mVcm,f_max,t_star_us\n";
  for (const auto& p : points) {
    out << csv::format(p.r) << ',' << p.n << ',' << csv::format(p.e) << ',' << csv::format(p.peak.f_max) << ','
        << csv::format(p.peak.t_star) << '\n';
  }
  std::vector<fs::path> written;
  emit(output_file(cfg, "fmax.csv"), out.str(), written, log);
  return written;
}

std::vector<fs::path> cmd_correlator(const RunConfig& cfg, std::ostream& log) {
  const auto row = simulated_row(cfg);
  const auto c = correlator_at_peak(row.h, cfg.fmax_options());
  std::ostringstream profile;
  profile << metadata(cfg, "correlator");
  profile << "# field_kind=" << profile_kind(row.field) << '\n';
  profile << "i,x_um,E_mVcm\n";
  for (const auto& site : row_sites(row.geometry, cfg.row_index)) {
    profile << site.index << ',' << csv::format(site.x_um) << ','
            << csv::format(field_at(row.field, site, row.n_atoms).value) << '\n';
  }
  log << "f_max = " << csv::format(c.f_max) << " at t = " << csv::format(c.t_star) << " us\n";
  std::vector<fs::path> written;
  emit(output_file(cfg, "correlator.csv"), correlator_csv(cfg, c, "correlator"), written, log);
  emit(output_file(cfg, "profile.csv"), profile.str(), written, log);
  return written;
}

std::vector<fs::path> cmd_curves(const RunConfig& cfg, std::ostream& log) {
  const auto& drive = need_drive(cfg);
  const auto& s = need_sensing(cfg);
  if (s.rows.empty()) config_error(cfg.source + ": curves needs sensing.rows");
  const auto fields = field_grid(*cfg.table, s.field_step_mVcm);
  const auto curves = forward_curves(s.rows, *cfg.table, drive.omega, fields, cfg.threads);
  std::ostringstream out;
  out << metadata(cfg, "curves", false);
  write_forward_curves(out, curves, {drive.omega, cfg.table->checksum()});
  std::vector<fs::path> written;
  emit(s.curves.empty() ? output_file(cfg, "curves.csv") : s.curves, out.str(), written, log);
  return written;
}

std::vector<fs::path> cmd_readout(const RunConfig& cfg, std::ostream& log) {
  const auto& drive = need_drive(cfg);
  const auto& s = need_sensing(cfg);
  if (s.rows.empty()) config_error(cfg.source + ": readout needs sensing.rows");
  if (!s.field_true_mVcm) config_error(cfg.source + ": readout needs sensing.field_true_mVcm");
  const auto readout = simulate_readout(*s.field_true_mVcm, s.rows, *cfg.table, drive.omega, s.shots, s.seed);
  std::ostringstream out;
  out << metadata(cfg, "readout");
  out << "# field_true_mVcm=" << csv::format(*s.field_true_mVcm) << '\n';
  out << "# seed=" << s.seed << '\n';
  write_readout(out, readout);
  std::vector<fs::path> written;
  emit(s.readout.empty() ? output_file(cfg, "readout.csv") : s.readout, out.str(), written, log);
  return written;
}

std::ifstream open_input(const fs::path& path, std::string_view what, const RunConfig& cfg) {
  if (path.empty()) config_error(cfg.source + ": sense needs sensing." + std::string(what));
  std::ifstream in(path);
  if (!in) config_error(cfg.source + ": sensing." + std::string(what) + ": cannot open " + path.string());
  return in;
}

std::vector<fs::path> cmd_sense(const RunConfig& cfg, std::ostream& log) {
  const auto& drive = need_drive(cfg);
  const auto& s = need_sensing(cfg);
  auto curves_in = open_input(s.curves, "curves", cfg);
  const auto curves = read_forward_curves(curves_in, CurveCacheInfo{drive.omega, cfg.table->checksum()});
  auto readout_in = open_input(s.readout, "readout", cfg);
  const auto readout = read_readout(readout_in);
  EstimatorOptions options;
  options.allow_ambiguous = s.allow_ambiguous;
  const auto est = estimate_field(readout, curves, options);
  std::ostringstream out;
  out << metadata(cfg, "sense");
  if (est.ambiguous()) {
    out << "# alternatives_mVcm=";
    for (std::size_t k = 0; k < est.alternatives.size(); ++k) out << (k ? ";" : "") << csv::format(est.alternatives[k]);
    out << '\n';
  }
  out << "E_hat_mVcm,lo_mVcm,hi_mVcm,residual,gain\n";
  out << csv::format(est.field) << ',' << csv::format(est.lo) << ',' << csv::format(est.hi) << ','
      << csv::format(est.residual) << ',' << csv::format(est.gain) << '\n';
  log << "E_hat = " << csv::format(est.field) << " mV/cm [" << csv::format(est.lo) << ", " << csv::format(est.hi)
      << "]\n";
  std::vector<fs::path> written;
  emit(output_file(cfg, "estimate.csv"), out.str(), written, log);
  return written;
}

struct Command {
  std::string_view name;
  std::string_view help;
  std::vector<fs::path> (*fn)(const RunConfig&, std::ostream&);
};

constexpr Command kCommands[] = {
    {"coeffs", "Stark coefficients, crossover and blockade radii vs field", cmd_coeffs},
    {"dynamics", "basis-state populations over time for one row", cmd_dynamics},
    {"fmax", "peak fully excited population over N, R and E sweeps", cmd_fmax},
    {"correlator", "<n_i n_j> at the population peak and the applied field profile", cmd_correlator},
    {"curves", "forward-model cache for the sensor rows", cmd_curves},
    {"readout", "simulated sensor readout at a known field", cmd_readout},
    {"sense", "field estimate from a readout file and cached curves", cmd_sense},
};

}  // namespace

FmaxOptions RunConfig::fmax_options() const { return {integrator.fmax_samples, integrator.fmax_time_tolerance}; }

RunConfig parse_config(std::string_view text, const fs::path& base_dir, const std::vector<std::string>& overrides,
                       std::string source) {
  Context ctx{source, {}, nullptr};
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    config_error(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) + ": " +
                 e.msg);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) config_error(source + ": the top level must be a mapping");
  for (const auto& o : overrides) ctx.overridden.insert(apply_override(root, o));

  RunConfig cfg;
  cfg.source = source;
  {
    // Where results land and how many threads compute them do not change the results.
    YAML::Node hashed = YAML::Clone(root);
    hashed.remove("threads");
    if (hashed["output"].IsMap()) {
      hashed["output"].remove("dir");
      if (hashed["output"].size() == 0) hashed.remove("output");
    }
    cfg.hash = fnv1a(YAML::Dump(hashed));
  }

  const Section top(root, "", ctx);
  top.allow_only({"table", "geometry", "field", "drive", "integrator", "time", "output", "sweep", "sensing", "threads"});

  cfg.table_path = resolve(base_dir, top.scalar("table"));
  if (!fs::is_regular_file(cfg.table_path)) top.fail("table", "file not found: " + cfg.table_path.string());
  cfg.table = load_stark_table(cfg.table_path);
  ctx.table = &*cfg.table;

  if (top.has("geometry")) {
    const auto g = top.child("geometry");
    g.allow_only({"pitch_x_um", "rows", "row_index"});
    ArrayGeometry geo;
    if (g.has("pitch_x_um")) geo.pitch_x_um = g.positive("pitch_x_um");
    for (const auto& r : g.sequence("rows")) {
      r.allow_only({"n_atoms", "spacing_um", "y_offset_um"});
      const auto n = r.integer("n_atoms");
      if (n < 1 || n > kMaxAtomsPerRow) r.fail("n_atoms", "must be between 1 and " + std::to_string(kMaxAtomsPerRow));
      geo.rows.push_back({static_cast<int>(n), r.number("spacing_um"), r.optional_number("y_offset_um").value_or(0.0)});
    }
    try {
      geo.validate();
    } catch (const Error& e) {
      config_error(top.where("geometry") + ": geometry: " + e.what());
    }
    if (g.has("row_index")) {
      const auto idx = g.integer("row_index");
      if (idx < 0 || static_cast<std::size_t>(idx) >= geo.rows.size()) g.fail("row_index", "no such row");
      cfg.row_index = static_cast<std::size_t>(idx);
    }
    cfg.geometry = std::move(geo);
  }

  if (top.has("field")) cfg.field = parse_field(top.child("field"));

  if (top.has("drive")) {
    const auto d = top.child("drive");
    d.allow_only({"omega_MHz", "omega_rad_per_us", "detuning_MHz", "detuning_rad_per_us", "omega", "detuning"});
    DriveSpec drive;
    drive.omega = *angular(d, "omega", true);
    if (!(drive.omega > 0.0)) d.fail(d.has("omega_MHz") ? "omega_MHz" : "omega_rad_per_us", "must be positive");
    drive.detuning = angular(d, "detuning", false).value_or(0.0);
    cfg.drive = drive;
  }

  if (top.has("integrator")) {
    const auto i = top.child("integrator");
    i.allow_only({"steps_per_period", "norm_tolerance", "fmax_samples", "fmax_time_tolerance"});
    if (i.has("steps_per_period")) {
      const auto v = i.integer("steps_per_period");
      if (v < 1) i.fail("steps_per_period", "must be at least 1");
      cfg.integrator.steps_per_period = static_cast<int>(v);
    }
    if (i.has("norm_tolerance")) cfg.integrator.norm_tolerance = i.positive("norm_tolerance");
    if (i.has("fmax_samples")) {
      const auto v = i.integer("fmax_samples");
      if (v < 2) i.fail("fmax_samples", "must be at least 2");
      cfg.integrator.fmax_samples = static_cast<int>(v);
    }
    if (i.has("fmax_time_tolerance")) cfg.integrator.fmax_time_tolerance = i.positive("fmax_time_tolerance");
  }

  if (top.has("time")) {
    const auto t = top.child("time");
    t.allow_only({"periods"});
    if (t.has("periods")) cfg.periods = t.positive("periods");
  }

  cfg.output.dir = base_dir;
  if (top.has("output")) {
    const auto o = top.child("output");
    o.allow_only({"dir", "labels", "full_basis", "correlator"});
    if (o.has("dir")) cfg.output.dir = resolve(base_dir, o.scalar("dir"));
    cfg.output.full_basis = o.boolean("full_basis", false);
    cfg.output.correlator = o.boolean("correlator", false);
    if (o.has("labels")) {
      const auto labels = o.get("labels");
      if (!labels.IsSequence()) o.fail("labels", "expected a list of basis labels such as \"101\"");
      const int n = cfg.geometry ? cfg.geometry->rows[cfg.row_index].n_atoms : 0;
      for (const auto& l : labels) {
        const auto text = l.as<std::string>();
        if (n > 0) {
          try {
            label_to_index(text, n);
          } catch (const Error& e) {
            o.fail("labels", e.what());
          }
        }
        cfg.output.labels.push_back(text);
      }
    }
  }

  if (top.has("sweep")) {
    const auto s = top.child("sweep");
    s.allow_only({"n_atoms", "spacings_um", "fields_mVcm"});
    if (s.has("n_atoms")) {
      for (double v : s.number_list("n_atoms", false)) {
        if (v != std::floor(v) || v < 1 || v > kMaxAtomsPerRow) {
          s.fail("n_atoms", "entries must be integers between 1 and " + std::to_string(kMaxAtomsPerRow));
        }
        cfg.sweep.n_atoms.push_back(static_cast<int>(v));
      }
    }
    if (s.has("spacings_um")) {
      cfg.sweep.spacings_um = s.number_list("spacings_um", false);
      for (double r : cfg.sweep.spacings_um) {
        if (!(r > 0.0)) s.fail("spacings_um", "spacings must be positive");
      }
    }
    if (s.has("fields_mVcm")) cfg.sweep.fields_mVcm = s.number_list("fields_mVcm", true);
  }

  if (top.has("sensing")) cfg.sensing = parse_sensing(top.child("sensing"), base_dir);

  if (top.has("threads")) {
    const auto t = top.integer("threads");
    if (t < 0) top.fail("threads", "must be non-negative (0 uses every core)");
    cfg.threads = t == 0 ? std::max(1u, std::thread::hardware_concurrency()) : static_cast<unsigned>(t);
  }
  return cfg;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(text.str(), base, overrides, path.string());
}

int exit_code_for(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Config:
      return 2;
    case ErrorCategory::Domain:
      return 3;
    case ErrorCategory::Numerical:
      return 4;
  }
  return 1;
}

std::vector<fs::path> run_command(std::string_view command, const RunConfig& config, std::ostream& log) {
  for (const auto& c : kCommands) {
    if (c.name == command) return c.fn(config, log);
  }
  config_error("unknown command '" + std::string(command) + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rydberg-array field sensing: Stark coefficients, blockade dynamics and field estimation", "rydsense"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  app.add_option("-c,--config", config_path, "YAML run configuration")->required();
  app.add_option("--set", sets, "override a config value, e.g. --set drive.omega_MHz=0.35 (repeatable)")
      ->allow_extra_args(false);
  auto* out_opt = app.add_option("-o,--out", out_dir, "output directory (overrides output.dir)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads for sweeps; 0 uses every core");
  auto* seed_opt = app.add_option("--seed", seed, "readout RNG seed (overrides sensing.seed)");
  for (const auto& c : kCommands) app.add_subcommand(std::string(c.name), std::string(c.help));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    auto overrides = sets;
    if (threads_opt->count() > 0) overrides.push_back("threads=" + std::to_string(threads));
    if (seed_opt->count() > 0) overrides.push_back("sensing.seed=" + std::to_string(seed));
    if (out_opt->count() > 0) overrides.push_back("output.dir=\"" + fs::absolute(out_dir).lexically_normal().string() + "\"");
    const auto cfg = load_config(config_path, overrides);
    run_command(app.get_subcommands().front()->get_name(), cfg, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const YAML::Exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rydsense::cli
