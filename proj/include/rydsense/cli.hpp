#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rydsense/dynamics.hpp"
#include "rydsense/error.hpp"
#include "rydsense/geometry.hpp"
#include "rydsense/pairstate.hpp"
#include "rydsense/sensing.hpp"

namespace rydsense::cli {

inline constexpr std::string_view kVersion = "0.1.0";

struct IntegratorSettings {
  int steps_per_period = 200;  // output samples per Rabi period for `dynamics`
  double norm_tolerance = 1e-9;
  int fmax_samples = 2048;
  double fmax_time_tolerance = 1e-4;
};

struct OutputSettings {
  std::filesystem::path dir;
  std::vector<std::string> labels;  // empty: ground, singles and fully excited
  bool full_basis = false;
  bool correlator = false;
};

struct SweepSettings {
  std::vector<int> n_atoms;
  std::vector<double> spacings_um;
  std::vector<double> fields_mVcm;
};

struct SensingSettings {
  std::vector<SensorRow> rows;
  double field_step_mVcm = 0.1;
  std::optional<double> field_true_mVcm;
  std::optional<std::int64_t> shots;  // nullopt: exact readout
  std::uint64_t seed = 1;
  std::filesystem::path curves;
  std::filesystem::path readout;
  bool allow_ambiguous = false;
};

/// Parsed run configuration. Sections a subcommand does not use may be absent; `require_*`
/// checks run when the subcommand needs them.
struct RunConfig {
  std::string source;             // file name used in diagnostics
  std::filesystem::path table_path;
  std::optional<StarkTable> table;
  std::optional<ArrayGeometry> geometry;
  std::size_t row_index = 0;
  std::optional<FieldProfile> field;
  std::optional<DriveSpec> drive;
  IntegratorSettings integrator;
  double periods = 1.0;
  OutputSettings output;
  SweepSettings sweep;
  std::optional<SensingSettings> sensing;
  unsigned threads = 1;
  std::uint64_t hash = 0;  // FNV-1a of the effective document, after overrides

  FmaxOptions fmax_options() const;
};

/// Parses a YAML run configuration. Each override is `dotted.key=value`, applied before
/// validation. Relative paths resolve against `base_dir`. Throws ConfigError with the
/// offending line and key.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       const std::vector<std::string>& overrides = {}, std::string source = "<config>");

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

int exit_code_for(ErrorCategory category) noexcept;

/// Runs one subcommand and returns the files it wrote.
std::vector<std::filesystem::path> run_command(std::string_view command, const RunConfig& config,
                                               std::ostream& log);

/// Full command-line entry point; `args` excludes the program name. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rydsense::cli
