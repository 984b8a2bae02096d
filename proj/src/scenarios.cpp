#include "geotrack/sim.hpp"

namespace geotrack::sim {

SphereScenario make_satellite(const SatelliteConfig & cfg)
{
  std::shared_ptr<const lift::SphereCurve> curve = cfg.reference;
  if (!curve) {
    curve = lift::figure_eight();
  }
  if (curve->dim() != 2) {
    throw ConfigError("satellite: the reference must lie on S^2");
  }
  const control::SphereControllerConfig ctrl(cfg.k_P, cfg.k_D, cfg.J1);
  const double t0 = cfg.rollout.t0;
  const auto q0 = homogeneous::SpherePoint::normalized(curve->position(t0));
  const auto g0 = lift::initial_lift(q0);
  auto ref = std::make_shared<const lift::LiftedReference>(
    lift::horizontal_lift(*curve, t0, t0 + cfg.rollout.horizon, g0, cfg.lift));
  return {SpherePlant{2, cfg.J1}, ctrl, std::move(ref)};
}

GroupScenario make_robot(const RobotConfig & cfg)
{
  const GroupTag tag = GroupTag::parse("R3xSO(3)");
  std::shared_ptr<const lift::GroupCurve> curve = cfg.reference;
  if (!curve) {
    curve = lift::screw_motion(tag);
  }
  if (!(curve->tag() == tag)) {
    throw ConfigError("robot: the reference must lie in R3xSO(3)");
  }
  if (!(cfg.mass > 0.0) || !(cfg.J.minCoeff() > 0.0)) {
    throw ConfigError("robot: mass and inertia must be positive");
  }
  if (!(cfg.dissipation > 0.0)) {
    throw ConfigError("robot: dissipation must be positive");
  }
  Vector inertia(6), damping(6), gravity(6);
  inertia << cfg.mass, cfg.mass, cfg.mass, cfg.J(0), cfg.J(1), cfg.J(2);
  damping.setConstant(cfg.dissipation);
  gravity << 0.0, 0.0, -cfg.mass * cfg.gravity, 0.0, 0.0, 0.0;
  const auto I = algebra::AlgebraMetric::diagonal(tag, inertia);
  const auto D = algebra::AlgebraMetric::diagonal(tag, damping);
  control::GroupControllerConfig ctrl(I, D, navigation::GroupNavigation(tag, cfg.K_x, cfg.K_R));
  control::ForcedSystem forcing{1.0, gravity, false};
  const double t0 = cfg.rollout.t0;
  auto ref =
    std::make_shared<const lift::LiftedReference>(lift::lift_on_group(*curve, t0, t0 + cfg.rollout.horizon, cfg.lift));
  return {GroupPlant{I, gravity}, std::move(ctrl), std::move(forcing), std::move(ref)};
}

std::vector<RolloutRecord> satellite_scenario(const SatelliteConfig & cfg)
{
  return sphere_batch(make_satellite(cfg), cfg.batch, cfg.rollout);
}

std::vector<RolloutRecord> robot_scenario(const RobotConfig & cfg)
{
  return group_batch(make_robot(cfg), cfg.batch, cfg.rollout);
}

}  // namespace geotrack::sim
