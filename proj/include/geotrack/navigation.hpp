#pragma once

#include <Eigen/Core>

#include "geotrack/algebra.hpp"
#include "geotrack/homogeneous.hpp"

namespace geotrack::navigation {

using algebra::AlgebraCovector;
using algebra::GroupElement;
using algebra::GroupTag;
using homogeneous::SphereCovector;
using homogeneous::SpherePoint;

/// q -> -k_P origin^T q on S^n.
struct SphereNavigation
{
  double k_P{1.0};
  SpherePoint origin{SpherePoint::origin(2)};

  SphereNavigation(double k_P, SpherePoint origin);
  explicit SphereNavigation(int n, double k_P = 1.0);
};

double sphere_nav_value(const SphereNavigation & p, const SpherePoint & q);
SphereCovector sphere_nav_differential(const SphereNavigation & p, const SpherePoint & q);

/// Sum over factors of
///   SO(3):  tr(K_R (I - R))
///   SE(3):  tr(K_R (I - R)) + x^T K_x x
///   R^3:    x^T K_x x
///   R^n:    k |x|^2              (n != 3)
///   SO(m):  k tr(I - R)          (m != 3)
/// K_x must be SPD; K_R SPD with eigenvalue gaps above 1e-6; k > 0.
class GroupNavigation
{
public:
  GroupNavigation(GroupTag tag, const Eigen::Matrix3d & K_x, const Eigen::Matrix3d & K_R, double k = 1.0);
  /// K_x = I, K_R = diag(1, 2, 3), k = 1.
  static GroupNavigation defaults(const GroupTag & tag);

  const GroupTag & tag() const { return tag_; }
  const Eigen::Matrix3d & K_x() const { return K_x_; }
  const Eigen::Matrix3d & K_R() const { return K_R_; }
  double k() const { return k_; }

private:
  GroupTag tag_;
  Eigen::Matrix3d K_x_;
  Eigen::Matrix3d K_R_;
  double k_;
};

double group_nav_value(const GroupNavigation & p, const GroupElement & g);

/// Left-trivialized differential: <zeta_P(g), eta> = d/dt P(g exp(t eta)) at 0.
AlgebraCovector zeta_P(const GroupNavigation & p, const GroupElement & g);

}  // namespace geotrack::navigation
