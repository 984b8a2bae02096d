#include "geotrack/navigation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace geotrack::navigation {

using algebra::FactorKind;

SphereNavigation::SphereNavigation(double k_P_, SpherePoint origin_) : k_P(k_P_), origin(std::move(origin_))
{
  if (!(k_P > 0.0)) {
    throw ConfigError("sphere navigation: k_P must be positive");
  }
}

SphereNavigation::SphereNavigation(int n, double k_P_) : SphereNavigation(k_P_, SpherePoint::origin(n)) {}

double sphere_nav_value(const SphereNavigation & p, const SpherePoint & q)
{
  return -p.k_P * p.origin.coords().dot(q.coords());
}

SphereCovector sphere_nav_differential(const SphereNavigation & p, const SpherePoint & q)
{
  const Vector & x = q.coords();
  const Vector & o = p.origin.coords();
  // -k_P o^T (I - q q^T)
  const RowVector row = -p.k_P * (o - x * x.dot(o)).transpose();
  return SphereCovector(q, row);
}

GroupNavigation::GroupNavigation(GroupTag tag, const Eigen::Matrix3d & K_x, const Eigen::Matrix3d & K_R, double k)
  : tag_(tag), K_x_(K_x), K_R_(K_R), k_(k)
{
  if (!(k_ > 0.0)) {
    throw ConfigError("group navigation: k must be positive");
  }
  if ((K_x_ - K_x_.transpose()).cwiseAbs().maxCoeff() > 1e-12 || (K_R_ - K_R_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("group navigation: K_x and K_R must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ex(K_x_, Eigen::EigenvaluesOnly);
  if (!(ex.eigenvalues().minCoeff() > 0.0)) {
    throw ConfigError("group navigation: K_x must be positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> er(K_R_, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = er.eigenvalues();  // ascending
  if (!(ev(0) > 0.0)) {
    throw ConfigError("group navigation: K_R must be positive definite");
  }
  if (!(ev(1) - ev(0) > 1e-6 && ev(2) - ev(1) > 1e-6)) {
    throw ConfigError("group navigation: K_R must have distinct eigenvalues (gap > 1e-6)");
  }
}

GroupNavigation GroupNavigation::defaults(const GroupTag & tag)
{
  return GroupNavigation(tag, Eigen::Matrix3d::Identity(), Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal());
}

namespace {

void check_tag(const GroupNavigation & p, const GroupElement & g, const char * op)
{
  if (!(p.tag() == g.tag())) {
    throw DomainError(std::string(op) + ": tag mismatch (" + p.tag().name() + " vs " + g.tag().name() + ")");
  }
}

Matrix rotation_gain(const GroupNavigation & p, int m)
{
  if (m == 3) {
    return p.K_R();
  }
  return p.k() * Matrix::Identity(m, m);
}

Matrix translation_gain(const GroupNavigation & p, int n)
{
  if (n == 3) {
    return p.K_x();
  }
  return p.k() * Matrix::Identity(n, n);
}

}  // namespace

double group_nav_value(const GroupNavigation & p, const GroupElement & g)
{
  check_tag(p, g, "group_nav_value");
  double value = 0.0;
  const GroupTag & tag = g.tag();
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const Matrix blk = g.factor_block(i);
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal: {
      const Matrix k = rotation_gain(p, f.dim);
      value += (k * (Matrix::Identity(f.dim, f.dim) - blk)).trace();
      break;
    }
    case FactorKind::SpecialEuclidean3: {
      const Eigen::Matrix3d r = blk.topLeftCorner(3, 3);
      const Eigen::Vector3d x = blk.block(0, 3, 3, 1);
      value += (p.K_R() * (Eigen::Matrix3d::Identity() - r)).trace() + x.dot(p.K_x() * x);
      break;
    }
    case FactorKind::Translation: {
      const Vector x = blk.block(0, f.dim, f.dim, 1);
      value += x.dot(translation_gain(p, f.dim) * x);
      break;
    }
    }
  }
  return value;
}

AlgebraCovector zeta_P(const GroupNavigation & p, const GroupElement & g)
{
  check_tag(p, g, "zeta_P");
  const GroupTag & tag = g.tag();
  Vector out(tag.algebra_dim());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const Matrix blk = g.factor_block(i);
    auto y = out.segment(tag.algebra_offset(i), f.algebra_dim());
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal: {
      // d/dt tr(K (I - R exp(t eta^))) = -tr(K R eta^)  =>  zeta = vee(K R - R^T K)
      const Matrix k = rotation_gain(p, f.dim);
      const Matrix a = k * blk;
      y = algebra::vee(GroupTag::so(f.dim), a - a.transpose());
      break;
    }
    case FactorKind::SpecialEuclidean3: {
      const Eigen::Matrix3d r = blk.topLeftCorner(3, 3);
      const Eigen::Vector3d x = blk.block(0, 3, 3, 1);
      const Eigen::Matrix3d a = p.K_R() * r;
      y.head<3>() = 2.0 * r.transpose() * p.K_x() * x;
      y.tail<3>() = algebra::vee(GroupTag::so(3), a - a.transpose());
      break;
    }
    case FactorKind::Translation: {
      const Vector x = blk.block(0, f.dim, f.dim, 1);
      y = 2.0 * translation_gain(p, f.dim) * x;
      break;
    }
    }
  }
  return {tag, out};
}

}  // namespace geotrack::navigation
