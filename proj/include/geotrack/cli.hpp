#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "geotrack/sim.hpp"

/// Run configuration, the run/report/export commands and their file formats.
namespace geotrack::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConvergenceShortfall = 1,
  kConfigError = 2,
  kLiftOrDataError = 3,
  kInvariantViolation = 4,
};

inline constexpr int kSummarySchemaVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig
{
  std::string scenario;  // satellite | robot | custom-sphere | custom-group
  int n{2};
  algebra::GroupTag group{algebra::GroupTag::parse("R3xSO(3)")};

  // sphere gains
  double k_P{4.0};
  double k_D{4.0};
  double scale{1.0};

  // group gains
  double mass{1.0};
  Eigen::Vector3d J{0.1, 0.15, 0.2};
  double dissipation{2.0};
  double gravity{9.81};
  Eigen::VectorXd inertia_diag;
  Eigen::VectorXd dissipation_diag;
  Eigen::Matrix3d K_x{Eigen::Matrix3d::Identity()};
  Eigen::Matrix3d K_R{Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal()};
  double k{1.0};
  Eigen::VectorXd external_force;

  /// Reference description with any samples_file already loaded.
  nlohmann::json reference;
  lift::LiftOptions lift{};
  sim::BatchConfig batch{};
  sim::RolloutOptions rollout{};

  std::filesystem::path output_directory{"out"};
  bool write_csv{true};
  bool write_json{true};
  double min_convergence_fraction{0.99};

  bool is_sphere() const { return scenario == "satellite" || scenario == "custom-sphere"; }
};

/// Validates and converts a parsed document; relative sample-file paths are
/// resolved against base_dir. Throws ConfigError naming the offending field.
RunConfig parse_config(const nlohmann::json & doc, const std::filesystem::path & base_dir);

/// Reads, parses and validates a configuration file.
RunConfig load_config(const std::filesystem::path & path);

/// Worker count from GEOTRACK_THREADS (0 when unset or invalid).
int threads_from_environment();

int run_command(const std::filesystem::path & config, std::ostream & out, std::ostream & err);
int report_command(const std::filesystem::path & dir, bool json, std::ostream & out, std::ostream & err);
/// kind: trajectories | lyapunov | error-norm. Writes <dir>/<kind>.csv unless
/// an output path is given.
int export_command(const std::filesystem::path & dir, const std::string & kind,
                   const std::optional<std::filesystem::path> & output, std::ostream & out, std::ostream & err);

/// Column groups of rollouts.csv for a configuration.
struct Columns
{
  std::vector<std::string> state;
  std::vector<std::string> reference;
  std::vector<std::string> control;
  std::vector<std::string> error;
};
Columns columns_for(const RunConfig & cfg);

}  // namespace geotrack::cli
