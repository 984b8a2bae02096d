#pragma once

#include <array>
#include <initializer_list>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>

#include "geotrack/errors.hpp"
#include "geotrack/types.hpp"

/// Matrix Lie group kernel for SO(m), SE(3), translation groups R^n and their
/// finite products.
///
/// Coordinate conventions for the Lie algebra (all coordinate vectors are
/// meaningless without their tag):
///   - so(3): hat basis, hat(a) b = a x b.
///   - so(m), m != 3: strictly-lower-triangular lexicographic basis, the c-th
///     element is E_ij - E_ji for the c-th pair (i > j) ordered by (i, j).
///   - se(3): (linear, angular).
///   - R^n: the translation itself.
///   - products: concatenation of factor coordinates in factor order.
namespace geotrack::algebra {

enum class FactorKind { SpecialOrthogonal, SpecialEuclidean3, Translation };

struct Factor
{
  FactorKind kind{FactorKind::SpecialOrthogonal};
  int dim{3};  // SO(dim), R^dim; always 3 for SE(3)

  int matrix_size() const;
  int algebra_dim() const;
  std::string name() const;

  bool operator==(const Factor &) const = default;
};

/// Group identifier. Single groups are one-factor products; products flatten.
class GroupTag
{
public:
  static constexpr int kMaxFactors = 4;

  GroupTag() = default;

  static GroupTag so(int m);
  static GroupTag se3();
  static GroupTag translation(int n);
  static GroupTag product(std::initializer_list<GroupTag> parts);

  /// Parses names such as "SO(3)", "SE(3)", "R3", "R^3", "R3xSO(3)".
  static GroupTag parse(std::string_view text);

  int factor_count() const { return count_; }
  const Factor & factor(int i) const { return factors_[static_cast<std::size_t>(i)]; }
  bool is_product() const { return count_ > 1; }

  int matrix_size() const;
  int algebra_dim() const;
  int matrix_offset(int i) const;
  int algebra_offset(int i) const;

  std::string name() const;

  bool operator==(const GroupTag & other) const;

private:
  std::array<Factor, kMaxFactors> factors_{};
  int count_{0};
};

struct AlgebraVector
{
  GroupTag tag;
  Vector coords;
};

/// Coordinate dual of AlgebraVector: pairing is the Euclidean dot product of
/// coordinates.
struct AlgebraCovector
{
  GroupTag tag;
  Vector coords;
};

class GroupElement
{
public:
  /// Validates the group invariants (orthogonality within 1e-9, SE(3) bottom
  /// row, block-diagonal products).
  GroupElement(GroupTag tag, Matrix matrix);

  /// Skips validation; for internal hot paths that already guarantee membership
  /// up to interpolation error.
  static GroupElement unchecked(GroupTag tag, Matrix matrix);
  static GroupElement identity(const GroupTag & tag);

  const GroupTag & tag() const { return tag_; }
  const Matrix & matrix() const { return matrix_; }
  Matrix factor_block(int i) const;

private:
  struct NoCheck
  {
  };
  GroupElement(GroupTag tag, Matrix matrix, NoCheck);

  GroupTag tag_;
  Matrix matrix_;
};

Matrix hat(const GroupTag & tag, const Vector & coords);

/// Reads algebra coordinates off a matrix; for matrices slightly outside the
/// algebra this is the orthogonal projection (skew part of SO blocks).
Vector vee(const GroupTag & tag, const Matrix & m);

inline Matrix hat(const AlgebraVector & x) { return hat(x.tag, x.coords); }

GroupElement compose(const GroupElement & a, const GroupElement & b);
GroupElement inverse(const GroupElement & g);
GroupElement exp(const AlgebraVector & xi);
AlgebraVector log(const GroupElement & g);

AlgebraVector Ad(const GroupElement & g, const AlgebraVector & xi);
AlgebraVector ad(const AlgebraVector & u, const AlgebraVector & v);
AlgebraCovector ad_star(const AlgebraVector & u, const AlgebraCovector & mu);

/// Matrix of eta -> ad(u, eta) in the coordinate basis.
AlgebraMatrix ad_matrix(const AlgebraVector & u);

/// Nearest rotation in the Frobenius sense, R (R^T R)^{-1/2}.
Matrix orthonormalize(const Matrix & r);

/// max |R^T R - I| entry.
double orthogonality_defect(const Matrix & r);

/// exp of a square matrix by scaling and squaring with a degree-6 Pade
/// approximant.
Matrix expm_pade6(const Matrix & a);

/// Symmetric positive-definite inner product on the algebra (inertia or
/// dissipation).
class AlgebraMetric
{
public:
  AlgebraMetric(GroupTag tag, const AlgebraMatrix & matrix);

  static AlgebraMetric identity(const GroupTag & tag);
  static AlgebraMetric diagonal(const GroupTag & tag, const Vector & diag);

  const GroupTag & tag() const { return tag_; }
  const AlgebraMatrix & matrix() const { return matrix_; }

  AlgebraCovector flat(const AlgebraVector & xi) const;
  AlgebraVector sharp(const AlgebraCovector & tau) const;
  double inner(const AlgebraVector & a, const AlgebraVector & b) const;
  double norm(const AlgebraVector & a) const;

private:
  GroupTag tag_;
  AlgebraMatrix matrix_;
  Eigen::LLT<AlgebraMatrix> llt_;
};

}  // namespace geotrack::algebra
