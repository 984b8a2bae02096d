#pragma once

#include "geotrack/algebra.hpp"
#include "geotrack/homogeneous.hpp"
#include "geotrack/navigation.hpp"

/// Tracking error maps and the closed-form tracking controllers on S^n and on
/// Lie groups, plus the feedback transformation to canonical form.
///
/// Force representations: sphere forces are ambient row covectors at q; group
/// forces are body-frame (left-trivialized) covectors.
namespace geotrack::control {

using algebra::AlgebraCovector;
using algebra::AlgebraMetric;
using algebra::AlgebraVector;
using algebra::GroupElement;
using homogeneous::SphereCovector;
using homogeneous::SpherePoint;
using homogeneous::SphereTangent;

/// Gains for the sphere tracker; the plant metric is scale * round metric.
struct SphereControllerConfig
{
  double k_P{4.0};
  double k_D{4.0};
  double scale{1.0};

  SphereControllerConfig(double k_P, double k_D, double scale = 1.0);
};

struct GroupControllerConfig
{
  AlgebraMetric inertia;
  AlgebraMetric dissipation;
  navigation::GroupNavigation navigation;

  GroupControllerConfig(AlgebraMetric inertia, AlgebraMetric dissipation, navigation::GroupNavigation navigation);
};

/// e = R_d^T q, e' = R_d^T q' + R_d'^T q, dist = d(e, e_n).
struct SphereErrorState
{
  SpherePoint e;
  SphereTangent e_dot;
  double dist{0.0};
  /// P(e) - min P + scale/2 |e'|^2; zero unless computed with a config.
  double lyapunov{0.0};

  /// dist <= tol and |e'| <= tol.
  bool on_reference(double tol = 1e-9) const;
};

/// e = g_d^-1 g, xi_e = xi - Ad(e^-1) xi_d.
struct GroupErrorState
{
  GroupElement e;
  AlgebraVector xi_e;
  /// |log e| where the logarithm exists, else the chordal |e - I|_F.
  double dist{0.0};
  /// P(e) + 1/2 <I xi_e, xi_e>; zero unless computed with a config.
  double lyapunov{0.0};

  bool on_reference(double tol = 1e-9) const;
};

SphereErrorState sphere_error(const Matrix & R_d, const Matrix & R_d_dot, const SpherePoint & q,
                              const SphereTangent & q_dot);
SphereErrorState sphere_error(const SphereControllerConfig & cfg, const Matrix & R_d, const Matrix & R_d_dot,
                              const SpherePoint & q, const SphereTangent & q_dot);

GroupErrorState group_error(const GroupElement & g_d, const AlgebraVector & xi_d, const GroupElement & g,
                            const AlgebraVector & xi);
GroupErrorState group_error(const GroupControllerConfig & cfg, const GroupElement & g_d, const AlgebraVector & xi_d,
                            const GroupElement & g, const AlgebraVector & xi);

/// Group geodesic surrogate: |log e|, or |e - I|_F on the cut locus.
double group_distance(const GroupElement & e);

/// Tracking force
///   -k_P q_d^T (q q^T - I) - k_D (q'^T + q^T R_d' R_d^T)
///     + scale (q^T R_d'' + 2 q'^T R_d') R_d^T (q q^T - I),   q_d = R_d e_n.
/// With the plant scale * q'' = ... the error obeys
///   scale * D_t e' = -(dP(e) + k_D e'),  P = -k_P e_n . e.
SphereCovector sphere_control(const SphereControllerConfig & cfg, const Matrix & R_d, const Matrix & R_d_dot,
                              const Matrix & R_d_ddot, const SpherePoint & q, const SphereTangent & q_dot, double t);

/// Unchecked kernel of sphere_control for the simulation loop.
RowVector sphere_control_raw(const SphereControllerConfig & cfg, const Matrix & R_d, const Matrix & R_d_dot,
                             const Matrix & R_d_ddot, const Vector & q, const Vector & q_dot);

/// Body-frame tracking torque
///   tau = -zeta_P(e) - D xi_e + I (Ad(e^-1) xi_d' + [xi, xi_e]) + ad*_{xi_e} I xi_e - ad*_xi I xi.
AlgebraCovector group_control(const GroupControllerConfig & cfg, const GroupElement & g_d, const AlgebraVector & xi_d,
                              const AlgebraVector & xi_d_dot, const GroupElement & g, const AlgebraVector & xi,
                              double t);

/// A plant that differs from the canonical invariant form by a constant
/// metric factor (kappa~ = metric_ratio * kappa) and a constant external force
/// (for example gravity), both in the same force representation as the
/// virtual input.
struct ForcedSystem
{
  double metric_ratio{1.0};
  Vector external_force;
  /// Set when the plant's connection differs from the invariant one by a
  /// non-zero difference tensor; not supported.
  bool difference_tensor{false};
};

/// Physical force f such that the forced plant driven by f behaves as the
/// canonical plant driven by the virtual force: f = metric_ratio * f' - F.
Vector feedback_transform(const ForcedSystem & system, const Vector & virtual_force);

}  // namespace geotrack::control
