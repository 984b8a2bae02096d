#include "geotrack/control.hpp"

#include <cmath>

namespace geotrack::control {

SphereControllerConfig::SphereControllerConfig(double k_P_, double k_D_, double scale_)
  : k_P(k_P_), k_D(k_D_), scale(scale_)
{
  if (!(k_P > 0.0)) {
    throw ConfigError("sphere controller: k_P must be positive");
  }
  if (!(k_D > 0.0)) {
    throw ConfigError("sphere controller: k_D must be positive");
  }
  if (!(scale > 0.0)) {
    throw ConfigError("sphere controller: metric scale must be positive");
  }
}

GroupControllerConfig::GroupControllerConfig(AlgebraMetric inertia_, AlgebraMetric dissipation_,
                                             navigation::GroupNavigation navigation_)
  : inertia(std::move(inertia_)), dissipation(std::move(dissipation_)), navigation(std::move(navigation_))
{
  if (!(inertia.tag() == dissipation.tag()) || !(inertia.tag() == navigation.tag())) {
    throw ConfigError("group controller: inertia, dissipation and navigation must share one group");
  }
}

bool SphereErrorState::on_reference(double tol) const { return dist <= tol && e_dot.vec().norm() <= tol; }

bool GroupErrorState::on_reference(double tol) const { return dist <= tol && xi_e.coords.norm() <= tol; }

SphereErrorState sphere_error(const Matrix & R_d, const Matrix & R_d_dot, const SpherePoint & q,
                              const SphereTangent & q_dot)
{
  const int m = static_cast<int>(q.coords().size());
  if (R_d.rows() != m || R_d.cols() != m || R_d_dot.rows() != m || R_d_dot.cols() != m) {
    throw DomainError("sphere_error: reference dimension mismatch");
  }
  Vector e = R_d.transpose() * q.coords();
  e /= e.norm();
  Vector ed = R_d.transpose() * q_dot.vec() + R_d_dot.transpose() * q.coords();
  ed -= e * e.dot(ed);
  const SpherePoint ep(e);
  const double dist = homogeneous::geodesic_distance(ep, SpherePoint::origin(m - 1));
  return {ep, SphereTangent(ep, ed), dist, 0.0};
}

SphereErrorState sphere_error(const SphereControllerConfig & cfg, const Matrix & R_d, const Matrix & R_d_dot,
                              const SpherePoint & q, const SphereTangent & q_dot)
{
  SphereErrorState s = sphere_error(R_d, R_d_dot, q, q_dot);
  const Vector & e = s.e.coords();
  s.lyapunov = cfg.k_P * (1.0 - e(e.size() - 1)) + 0.5 * cfg.scale * s.e_dot.vec().squaredNorm();
  return s;
}

double group_distance(const GroupElement & e)
{
  try {
    return algebra::log(e).coords.norm();
  } catch (const CutLocusError &) {
    const int m = e.tag().matrix_size();
    return (e.matrix() - Matrix::Identity(m, m)).norm();
  }
}

GroupErrorState group_error(const GroupElement & g_d, const AlgebraVector & xi_d, const GroupElement & g,
                            const AlgebraVector & xi)
{
  if (!(g_d.tag() == g.tag()) || !(xi_d.tag == g.tag()) || !(xi.tag == g.tag())) {
    throw DomainError("group_error: tag mismatch");
  }
  const GroupElement e = algebra::compose(algebra::inverse(g_d), g);
  const AlgebraVector ad = algebra::Ad(algebra::inverse(e), xi_d);
  AlgebraVector xi_e{g.tag(), xi.coords - ad.coords};
  const double dist = group_distance(e);
  return {e, std::move(xi_e), dist, 0.0};
}

GroupErrorState group_error(const GroupControllerConfig & cfg, const GroupElement & g_d, const AlgebraVector & xi_d,
                            const GroupElement & g, const AlgebraVector & xi)
{
  GroupErrorState s = group_error(g_d, xi_d, g, xi);
  s.lyapunov = navigation::group_nav_value(cfg.navigation, s.e) + 0.5 * cfg.inertia.inner(s.xi_e, s.xi_e);
  return s;
}

RowVector sphere_control_raw(const SphereControllerConfig & cfg, const Matrix & R_d, const Matrix & R_d_dot,
                             const Matrix & R_d_ddot, const Vector & q, const Vector & q_dot)
{
  const int n = static_cast<int>(q.size()) - 1;
  const Vector q_d = R_d.col(n);
  // (q q^T - I) applied from the right to a row r is (r.q) q^T - r.
  auto project = [&q](const RowVector & r) -> RowVector { return r.dot(q.transpose()) * q.transpose() - r; };
  const RowVector potential = -cfg.k_P * project(q_d.transpose());
  const RowVector damping = -cfg.k_D * (q_dot.transpose() + q.transpose() * R_d_dot * R_d.transpose());
  const RowVector ff = (q.transpose() * R_d_ddot + 2.0 * q_dot.transpose() * R_d_dot) * R_d.transpose();
  return potential + damping + cfg.scale * project(ff);
}

SphereCovector sphere_control(const SphereControllerConfig & cfg, const Matrix & R_d, const Matrix & R_d_dot,
                              const Matrix & R_d_ddot, const SpherePoint & q, const SphereTangent & q_dot, double)
{
  const int m = static_cast<int>(q.coords().size());
  if (R_d.rows() != m || R_d_dot.rows() != m || R_d_ddot.rows() != m) {
    throw DomainError("sphere_control: reference dimension mismatch");
  }
  RowVector f = sphere_control_raw(cfg, R_d, R_d_dot, R_d_ddot, q.coords(), q_dot.vec());
  // The damping term is tangent only up to the lift's orthogonality; remove
  // the residual normal component.
  f -= f.dot(q.coords().transpose()) * q.coords().transpose();
  return SphereCovector(q, f);
}

AlgebraCovector group_control(const GroupControllerConfig & cfg, const GroupElement & g_d, const AlgebraVector & xi_d,
                              const AlgebraVector & xi_d_dot, const GroupElement & g, const AlgebraVector & xi, double)
{
  const auto & tag = g.tag();
  if (!(cfg.inertia.tag() == tag) || !(xi_d_dot.tag == tag)) {
    throw DomainError("group_control: tag mismatch");
  }
  const GroupErrorState err = group_error(g_d, xi_d, g, xi);
  const GroupElement e_inv = algebra::inverse(err.e);
  const AlgebraCovector zeta = navigation::zeta_P(cfg.navigation, err.e);
  const AlgebraCovector d_xi_e = cfg.dissipation.flat(err.xi_e);
  const AlgebraVector acc{tag, algebra::Ad(e_inv, xi_d_dot).coords + algebra::ad(xi, err.xi_e).coords};
  const AlgebraCovector i_acc = cfg.inertia.flat(acc);
  const AlgebraCovector a = algebra::ad_star(err.xi_e, cfg.inertia.flat(err.xi_e));
  const AlgebraCovector b = algebra::ad_star(xi, cfg.inertia.flat(xi));
  return {tag, -zeta.coords - d_xi_e.coords + i_acc.coords + a.coords - b.coords};
}

Vector feedback_transform(const ForcedSystem & system, const Vector & virtual_force)
{
  if (system.difference_tensor) {
    throw UnsupportedFeature(
      "feedback_transform: plants whose connection differs from the invariant one are not supported");
  }
  if (!(system.metric_ratio > 0.0)) {
    throw ConfigError("feedback_transform: metric ratio must be positive");
  }
  if (system.external_force.size() == 0) {
    return system.metric_ratio * virtual_force;
  }
  if (system.external_force.size() != virtual_force.size()) {
    throw DomainError("feedback_transform: force dimension mismatch");
  }
  return system.metric_ratio * virtual_force - system.external_force;
}

}  // namespace geotrack::control
