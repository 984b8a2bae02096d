#pragma once

#include <span>
#include <vector>

#include "geotrack/algebra.hpp"

/// The sphere S^n as an SO(n+1)-homogeneous Riemannian manifold with the
/// round metric and origin e_n = (0, ..., 0, 1).
namespace geotrack::homogeneous {

using algebra::GroupElement;

class SpherePoint
{
public:
  /// Requires | coords | = 1 within 1e-9.
  explicit SpherePoint(Vector coords);
  /// Normalizes instead of validating.
  static SpherePoint normalized(const Vector & v);
  /// e_n of S^n.
  static SpherePoint origin(int n);

  const Vector & coords() const { return coords_; }
  /// Manifold dimension n (ambient n + 1).
  int dim() const { return static_cast<int>(coords_.size()) - 1; }

private:
  struct NoCheck
  {
  };
  SpherePoint(Vector coords, NoCheck) : coords_(std::move(coords)) {}
  Vector coords_;
};

class SphereTangent
{
public:
  /// Requires base . vec = 0 within 1e-9.
  SphereTangent(SpherePoint base, Vector vec);
  static SphereTangent zero(const SpherePoint & base);

  const SpherePoint & base() const { return base_; }
  const Vector & vec() const { return vec_; }

private:
  SpherePoint base_;
  Vector vec_;
};

/// Row covector at a point; tangency base . row^T = 0 within 1e-9.
class SphereCovector
{
public:
  SphereCovector(SpherePoint base, RowVector row);

  const SpherePoint & base() const { return base_; }
  const RowVector & row() const { return row_; }

private:
  SpherePoint base_;
  RowVector row_;
};

/// Riemannian (round-metric) inner product of two tangent vectors at the same
/// point.
double inner(const SphereTangent & v, const SphereTangent & w);

SpherePoint act(const GroupElement & r, const SpherePoint & q);
SphereTangent act_tangent(const GroupElement & r, const SphereTangent & v);

/// (I - q q^T) w.
SphereTangent project_tangent(const SpherePoint & q, const Vector & w);

/// rho-flat and rho-sharp: transpose.
SphereCovector flat(const SphereTangent & v);
SphereTangent sharp(const SphereCovector & f);

/// Geodesic distance in [0, pi]; evaluated as 2 atan2(|p - q|, |p + q|), which
/// equals arccos(p . q) and stays accurate near 0 and pi.
double geodesic_distance(const SpherePoint & p, const SpherePoint & q);

/// Finite-difference covariant derivative of a vector field X along a curve
/// gamma, both uniformly sampled with spacing h: (I - g g^T)(X[i+1] - X[i-1]) / 2h.
/// Test oracle only; i must be interior.
Vector covariant_derivative_along(std::span<const Vector> curve, std::span<const Vector> field, double h,
                                  std::size_t i);

/// Reductive decomposition so(n+1) = f + q at the origin e_n.
///   f: so(n) in the upper-left block (stabilizer of e_n)
///   q: matrices (0 u; -u^T 0), u in R^n
class ReductiveSplit
{
public:
  explicit ReductiveSplit(int n);

  int n() const { return n_; }
  const algebra::GroupTag & tag() const { return tag_; }
  const SpherePoint & origin() const { return origin_; }
  /// Coordinates (in the so(n+1) basis) of a basis of f, size n(n-1)/2.
  const std::vector<Vector> & stabilizer_basis() const { return stabilizer_; }
  /// Coordinates of the q basis element with last column e_k, k < n.
  const std::vector<Vector> & horizontal_basis() const { return horizontal_; }

  /// u such that the q-component of xi is (0 u; -u^T 0): the last column of
  /// hat(xi) above the diagonal.
  Vector horizontal_coords(const Vector & xi) const;
  /// q-component of xi, in so(n+1) coordinates.
  Vector horizontal_part(const Vector & xi) const;
  /// f-component of xi, in so(n+1) coordinates.
  Vector stabilizer_part(const Vector & xi) const;
  /// Embeds u in R^n as a q element.
  Vector embed_horizontal(const Vector & u) const;

private:
  int n_;
  algebra::GroupTag tag_;
  SpherePoint origin_;
  std::vector<Vector> stabilizer_;
  std::vector<Vector> horizontal_;
};

ReductiveSplit reductive_split(int n);

}  // namespace geotrack::homogeneous
