#include "geotrack/homogeneous.hpp"

#include <cmath>

namespace geotrack::homogeneous {

namespace {

constexpr double kTolerance = 1e-9;
constexpr double kRenormalize = 1e-12;

void check_dims(const GroupElement & r, int ambient, const char * op)
{
  const auto & tag = r.tag();
  if (tag.is_product() || tag.factor(0).kind != algebra::FactorKind::SpecialOrthogonal ||
      tag.factor(0).dim != ambient) {
    throw DomainError(std::string(op) + ": expected SO(" + std::to_string(ambient) + "), got " + tag.name());
  }
}

}  // namespace

SpherePoint::SpherePoint(Vector coords) : coords_(std::move(coords))
{
  if (coords_.size() < 2) {
    throw DomainError("SpherePoint: ambient dimension must be at least 2");
  }
  if (!(std::abs(coords_.norm() - 1.0) <= kTolerance)) {
    throw DomainError("SpherePoint: coordinates must have unit norm");
  }
}

SpherePoint SpherePoint::normalized(const Vector & v)
{
  const double nrm = v.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) {
    throw DomainError("SpherePoint: cannot normalize a zero or non-finite vector");
  }
  return SpherePoint(v / nrm, NoCheck{});
}

SpherePoint SpherePoint::origin(int n)
{
  Vector e = Vector::Zero(n + 1);
  e(n) = 1.0;
  return SpherePoint(e, NoCheck{});
}

SphereTangent::SphereTangent(SpherePoint base, Vector vec) : base_(std::move(base)), vec_(std::move(vec))
{
  if (vec_.size() != base_.coords().size()) {
    throw DomainError("SphereTangent: dimension mismatch");
  }
  if (!(std::abs(base_.coords().dot(vec_)) <= kTolerance * std::max(1.0, vec_.norm()))) {
    throw DomainError("SphereTangent: vector is not tangent at its base point");
  }
}

SphereTangent SphereTangent::zero(const SpherePoint & base)
{
  return SphereTangent(base, Vector::Zero(base.coords().size()));
}

SphereCovector::SphereCovector(SpherePoint base, RowVector row) : base_(std::move(base)), row_(std::move(row))
{
  if (row_.size() != base_.coords().size()) {
    throw DomainError("SphereCovector: dimension mismatch");
  }
  if (!(std::abs(row_.dot(base_.coords().transpose())) <= kTolerance * std::max(1.0, row_.norm()))) {
    throw DomainError("SphereCovector: covector is not tangent at its base point");
  }
}

double inner(const SphereTangent & v, const SphereTangent & w) { return v.vec().dot(w.vec()); }

SpherePoint act(const GroupElement & r, const SpherePoint & q)
{
  check_dims(r, static_cast<int>(q.coords().size()), "act");
  Vector y = r.matrix() * q.coords();
  if (std::abs(y.norm() - 1.0) > kRenormalize) {
    y.normalize();
  }
  return SpherePoint(std::move(y));
}

SphereTangent act_tangent(const GroupElement & r, const SphereTangent & v)
{
  const SpherePoint base = act(r, v.base());
  Vector w = r.matrix() * v.vec();
  return SphereTangent(base, std::move(w));
}

SphereTangent project_tangent(const SpherePoint & q, const Vector & w)
{
  if (w.size() != q.coords().size()) {
    throw DomainError("project_tangent: dimension mismatch");
  }
  const Vector & p = q.coords();
  return SphereTangent(q, w - p * p.dot(w));
}

SphereCovector flat(const SphereTangent & v) { return SphereCovector(v.base(), v.vec().transpose()); }

SphereTangent sharp(const SphereCovector & f) { return SphereTangent(f.base(), f.row().transpose()); }

double geodesic_distance(const SpherePoint & p, const SpherePoint & q)
{
  if (p.coords().size() != q.coords().size()) {
    throw DomainError("geodesic_distance: dimension mismatch");
  }
  return 2.0 * std::atan2((p.coords() - q.coords()).norm(), (p.coords() + q.coords()).norm());
}

Vector covariant_derivative_along(std::span<const Vector> curve, std::span<const Vector> field, double h,
                                  std::size_t i)
{
  if (curve.size() != field.size()) {
    throw DomainError("covariant_derivative_along: curve and field sample counts differ");
  }
  if (i == 0 || i + 1 >= curve.size()) {
    throw DomainError("covariant_derivative_along: index must be interior (no one-sided differences)");
  }
  if (!(h > 0.0)) {
    throw DomainError("covariant_derivative_along: step must be positive");
  }
  const Vector & g = curve[i];
  const Vector dx = (field[i + 1] - field[i - 1]) / (2.0 * h);
  return dx - g * g.dot(dx);
}

ReductiveSplit::ReductiveSplit(int n) : n_(n), tag_(algebra::GroupTag::so(n + 1)), origin_(SpherePoint::origin(n))
{
  if (n < 1) {
    throw DomainError("reductive_split: n must be at least 1");
  }
  const int m = n + 1;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      Matrix b = Matrix::Zero(m, m);
      b(i, j) = 1.0;
      b(j, i) = -1.0;
      stabilizer_.push_back(algebra::vee(tag_, b));
    }
  }
  for (int k = 0; k < n; ++k) {
    Vector u = Vector::Zero(n);
    u(k) = 1.0;
    horizontal_.push_back(embed_horizontal(u));
  }
}

Vector ReductiveSplit::horizontal_coords(const Vector & xi) const
{
  const Matrix x = algebra::hat(tag_, xi);
  return x.block(0, n_, n_, 1);
}

Vector ReductiveSplit::embed_horizontal(const Vector & u) const
{
  const int m = n_ + 1;
  Matrix x = Matrix::Zero(m, m);
  x.block(0, n_, n_, 1) = u;
  x.block(n_, 0, 1, n_) = -u.transpose();
  return algebra::vee(tag_, x);
}

Vector ReductiveSplit::horizontal_part(const Vector & xi) const { return embed_horizontal(horizontal_coords(xi)); }

Vector ReductiveSplit::stabilizer_part(const Vector & xi) const { return xi - horizontal_part(xi); }

ReductiveSplit reductive_split(int n) { return ReductiveSplit(n); }

}  // namespace geotrack::homogeneous
