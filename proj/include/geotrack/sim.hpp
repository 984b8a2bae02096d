#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "geotrack/algebra.hpp"
#include "geotrack/control.hpp"
#include "geotrack/lift.hpp"

/// Closed-loop plants, rollouts, sampling and convergence metrics.
namespace geotrack::sim {

using algebra::GroupTag;

// ---------------------------------------------------------------------------
// Plants

/// scale * (q'' + |q'|^2 q) = (I - q q^T) f^T on S^n.
struct SpherePlant
{
  int n{2};
  double scale{1.0};
};

struct SphereState
{
  Vector q;
  Vector q_dot;
};

/// Force policy evaluated at every Runge-Kutta stage.
using SpherePolicy = std::function<RowVector(double t, const Vector & q, const Vector & q_dot)>;

/// One RK4 step with the force held constant over the step.
SphereState step_sphere(const SpherePlant & plant, const SphereState & x, const RowVector & force, double h);
/// One RK4 step with the policy evaluated per stage; q is renormalized and q'
/// re-projected afterwards.
SphereState step_sphere(const SpherePlant & plant, const SphereState & x, double t, double h,
                        const SpherePolicy & policy);

/// Euler-Poincare plant I xi' = ad*_xi I xi + tau + F, g' = g xi^.
struct GroupPlant
{
  algebra::AlgebraMetric inertia;
  /// Constant body-frame external force F (gravity); empty means zero.
  Vector external_force{};

  const GroupTag & tag() const { return inertia.tag(); }
};

struct GroupState
{
  Matrix g;
  Vector xi;
};

using GroupPolicy = std::function<Vector(double t, const Matrix & g, const Vector & xi)>;

/// RK4 Munthe-Kaas step (torque held constant).
GroupState step_group(const GroupPlant & plant, const GroupState & x, const Vector & tau, double h);
/// RK4 Munthe-Kaas step with the torque policy evaluated per stage.
GroupState step_group(const GroupPlant & plant, const GroupState & x, double t, double h, const GroupPolicy & policy);

/// Kinetic energy 1/2 <I xi, xi>.
double kinetic_energy(const GroupPlant & plant, const Vector & xi);

// ---------------------------------------------------------------------------
// Sampling

/// SplitMix64; satisfies UniformRandomBitGenerator.
class SplitMix64
{
public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

private:
  std::uint64_t state_;
};

/// Per-rollout seed derived from the batch seed and rollout index.
std::uint64_t rollout_seed(std::uint64_t batch_seed, int index);

/// Uniform on S^n.
Vector sample_sphere(SplitMix64 & rng, int n);
/// Uniform in the ball of radius r in R^d.
Vector sample_ball(SplitMix64 & rng, int d, double r);
/// Haar-distributed element of SO(m).
Matrix sample_rotation(SplitMix64 & rng, int m);
/// Uniform q on S^n and q' uniform in the tangent ball of radius v_max.
SphereState sample_sphere_state(SplitMix64 & rng, int n, double v_max);
/// Haar rotations, positions uniform in a ball, xi uniform in a ball of radius v_max.
GroupState sample_group_state(SplitMix64 & rng, const GroupTag & tag, double v_max, double position_radius);

// ---------------------------------------------------------------------------
// Compact configuration coordinates (for records and CSV)

/// Per factor: SO(m) row-major entries; R^n coordinates; SE(3) position then
/// row-major rotation.
Eigen::VectorXd compact_config(const GroupTag & tag, const Matrix & g);
Matrix expand_config(const GroupTag & tag, const Eigen::VectorXd & c);
std::vector<std::string> compact_names(const GroupTag & tag, const std::string & prefix);

// ---------------------------------------------------------------------------
// Rollouts

struct RolloutOptions
{
  double h{1e-3};
  double t0{0.0};
  double horizon{10.0};
  int record_every{10};
  double threshold{1e-2};
  double lyapunov_tolerance{1e-8};
  double invariant_tolerance{1e-8};
  /// Lower cut-off of the exponential-rate window.
  double fit_floor{1e-9};
  /// Errors above this level are treated as the transient.
  double fit_ceiling{0.5};
};

struct RolloutSample
{
  double t{0.0};
  Eigen::VectorXd state;      // sphere: q, q'; group: compact g, xi
  Eigen::VectorXd reference;  // sphere: q_d, q_d'; group: compact g_d, xi_d
  Eigen::VectorXd control;    // sphere: force row; group: body torque
  Eigen::VectorXd error;      // sphere: e, e'; group: compact e, xi_e
  double config_error{0.0};
  double velocity_error{0.0};
  double surrogate{0.0};
  double lyapunov{0.0};
};

struct RolloutSummary
{
  bool converged{false};
  double convergence_time{std::numeric_limits<double>::quiet_NaN()};
  bool rate_fitted{false};
  double rate{std::numeric_limits<double>::quiet_NaN()};
  double r_squared{std::numeric_limits<double>::quiet_NaN()};
  int fit_points{0};
  int lyapunov_violations{0};
  double max_lyapunov_increase{0.0};
  bool invariants_ok{true};
  double max_invariant_defect{0.0};
  std::string invariant_message;
  double initial_error{0.0};
  double final_error{0.0};
  double max_error{0.0};
};

struct RolloutRecord
{
  int id{0};
  std::uint64_t seed{0};
  std::vector<RolloutSample> samples;
  RolloutSummary summary;
};

/// Surrogate tracking error: configuration distance plus metric velocity mismatch.
struct SurrogateStateError
{
  double config{0.0};
  double velocity{0.0};
  double total() const { return config + velocity; }
};

struct SphereScenario
{
  SpherePlant plant;
  control::SphereControllerConfig controller{4.0, 4.0, 1.0};
  std::shared_ptr<const lift::LiftedReference> reference;
};

struct GroupScenario
{
  GroupPlant plant;
  control::GroupControllerConfig controller;
  control::ForcedSystem forcing;
  std::shared_ptr<const lift::LiftedReference> reference;
};

RolloutRecord sphere_rollout(const SphereScenario & sc, const SphereState & x0, const RolloutOptions & opt, int id = 0,
                             std::uint64_t seed = 0);
RolloutRecord group_rollout(const GroupScenario & sc, const GroupState & x0, const RolloutOptions & opt, int id = 0,
                            std::uint64_t seed = 0);

/// The reference state at time t.
SphereState sphere_reference_state(const lift::LiftedReference & ref, double t);
GroupState group_reference_state(const lift::LiftedReference & ref, double t);

struct BatchConfig
{
  int count{100};
  std::uint64_t seed{1};
  double v_max{2.0};
  double position_radius{2.0};
  /// Worker threads; 0 means hardware concurrency.
  int threads{0};
};

/// Runs count jobs on up to `threads` workers; results ordered by index.
std::vector<RolloutRecord> run_parallel(int count, int threads, const std::function<RolloutRecord(int)> & job);

std::vector<RolloutRecord> sphere_batch(const SphereScenario & sc, const BatchConfig & batch,
                                        const RolloutOptions & opt);
std::vector<RolloutRecord> group_batch(const GroupScenario & sc, const BatchConfig & batch, const RolloutOptions & opt);

// ---------------------------------------------------------------------------
// Metrics

struct RateFit
{
  bool fitted{false};
  double rate{0.0};  // decay rate, positive for decaying errors
  double slope{0.0};
  double r_squared{0.0};
  int points{0};
};

/// Least-squares line through log(error) on the window after the error first
/// drops below `ceiling`, stopping once it falls below `floor`.
RateFit fit_exponential_rate(const std::vector<double> & t, const std::vector<double> & error, double ceiling = 0.5,
                             double floor = 1e-9);

/// First time after which error stays below threshold; NaN if never.
double convergence_time(const std::vector<double> & t, const std::vector<double> & error, double threshold);

/// Recomputes the derivable summary fields from the record's samples.
RolloutSummary convergence_metrics(const RolloutRecord & record, const RolloutOptions & opt);

struct BatchSummary
{
  int count{0};
  int converged{0};
  double fraction{0.0};
  double median_convergence_time{std::numeric_limits<double>::quiet_NaN()};
  double max_convergence_time{std::numeric_limits<double>::quiet_NaN()};
  double min_rate{std::numeric_limits<double>::quiet_NaN()};
  double median_rate{std::numeric_limits<double>::quiet_NaN()};
  double max_rate{std::numeric_limits<double>::quiet_NaN()};
  double min_r_squared{std::numeric_limits<double>::quiet_NaN()};
  int lyapunov_violations{0};
  int invariant_failures{0};
};

BatchSummary summarize(const std::vector<RolloutRecord> & batch);

// ---------------------------------------------------------------------------
// Scenarios

/// Axisymmetric satellite pointing task on S^2.
struct SatelliteConfig
{
  double k_P{4.0};
  double k_D{4.0};
  double J1{1.0};
  std::shared_ptr<const lift::SphereCurve> reference;  // defaults to the figure-eight
  lift::LiftOptions lift{};
  BatchConfig batch{};
  RolloutOptions rollout{0.001, 0.0, 30.0, 100};
};

/// Omnidirectional aerial robot on R3 x SO(3) with gravity compensation.
struct RobotConfig
{
  double mass{1.0};
  Eigen::Vector3d J{0.1, 0.15, 0.2};
  Eigen::Matrix3d K_x{Eigen::Matrix3d::Identity()};
  Eigen::Matrix3d K_R{Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal()};
  double dissipation{2.0};
  double gravity{9.81};
  std::shared_ptr<const lift::GroupCurve> reference;  // defaults to the screw motion
  lift::LiftOptions lift{};
  BatchConfig batch{20, 1, 2.0, 2.0, 0};
  RolloutOptions rollout{0.001, 0.0, 20.0, 100};
};

SphereScenario make_satellite(const SatelliteConfig & cfg);
GroupScenario make_robot(const RobotConfig & cfg);

std::vector<RolloutRecord> satellite_scenario(const SatelliteConfig & cfg);
std::vector<RolloutRecord> robot_scenario(const RobotConfig & cfg);

/// Body torque e_3 x (R^T f^T) realizing a sphere force f on the axisymmetric
/// rigid body with output y = R e_3.
Eigen::Vector3d pull_back_torque(const Eigen::Matrix3d & R, const Eigen::RowVector3d & f);

}  // namespace geotrack::sim
