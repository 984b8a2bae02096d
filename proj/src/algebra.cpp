#include "geotrack/algebra.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace geotrack::algebra {

namespace {

constexpr double kOrthoTolerance = 1e-9;
constexpr double kRepairThreshold = 1e-12;

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

Mat3 skew3(const Vec3 & a)
{
  Mat3 m;
  m << 0.0, -a(2), a(1),
       a(2), 0.0, -a(0),
      -a(1), a(0), 0.0;
  return m;
}

Vec3 vee3(const Mat3 & m)
{
  return Vec3(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1)));
}

Mat3 rodrigues(const Vec3 & w)
{
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = skew3(w);
  double a;
  double b;
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3 & r)
{
  const double tr = r.trace();
  if (!(tr > -1.0 + 1e-9)) {
    throw CutLocusError("log: rotation by pi (antipodal/pi-rotation) is on the cut locus");
  }
  const double cos_theta = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
  const Vec3 s = vee3(r);  // sin(theta) * axis
  const double sin_theta = s.norm();
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta < 1e-4) {
    return s * (1.0 + theta * theta / 6.0);
  }
  if (theta < 3.0) {
    return s * (theta / sin_theta);
  }
  // near pi: axis from the symmetric part, sign from the skew part
  const Mat3 b = 0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k) / std::sqrt(b(k, k) * (1.0 - cos_theta));
  axis.normalize();
  if (axis.dot(s) < 0.0) {
    axis = -axis;
  }
  return axis * theta;
}

// Pairs (i, j), i > j, of the lower-triangular lexicographic so(m) basis.
std::pair<int, int> so_pair(int c)
{
  int i = 1;
  while (c >= i) {
    c -= i;
    ++i;
  }
  return {i, c};
}

Matrix hat_factor(const Factor & f, const Vector & x)
{
  const int n = f.matrix_size();
  Matrix m = Matrix::Zero(n, n);
  switch (f.kind) {
  case FactorKind::SpecialOrthogonal:
    if (f.dim == 3) {
      m = skew3(x.head<3>());
    } else {
      for (int c = 0; c < f.algebra_dim(); ++c) {
        const auto [i, j] = so_pair(c);
        m(i, j) = x(c);
        m(j, i) = -x(c);
      }
    }
    break;
  case FactorKind::SpecialEuclidean3:
    m.topLeftCorner(3, 3) = skew3(x.tail<3>());
    m.block(0, 3, 3, 1) = x.head<3>();
    break;
  case FactorKind::Translation:
    m.block(0, f.dim, f.dim, 1) = x;
    break;
  }
  return m;
}

Vector vee_factor(const Factor & f, const Matrix & m)
{
  Vector x(f.algebra_dim());
  switch (f.kind) {
  case FactorKind::SpecialOrthogonal:
    if (f.dim == 3) {
      x = vee3(m);
    } else {
      for (int c = 0; c < f.algebra_dim(); ++c) {
        const auto [i, j] = so_pair(c);
        x(c) = 0.5 * (m(i, j) - m(j, i));
      }
    }
    break;
  case FactorKind::SpecialEuclidean3:
    x.head<3>() = m.block(0, 3, 3, 1);
    x.tail<3>() = vee3(m.topLeftCorner(3, 3));
    break;
  case FactorKind::Translation:
    x = m.block(0, f.dim, f.dim, 1);
    break;
  }
  return x;
}

void check_same(const GroupTag & a, const GroupTag & b, const char * op)
{
  if (!(a == b)) {
    throw DomainError(std::string(op) + ": tag mismatch (" + a.name() + " vs " + b.name() + ")");
  }
}

Matrix validated_factor(const Factor & f, const Matrix & block)
{
  switch (f.kind) {
  case FactorKind::SpecialOrthogonal:
    if (orthogonality_defect(block) > kOrthoTolerance || std::abs(block.determinant() - 1.0) > kOrthoTolerance) {
      throw DomainError("GroupElement: block is not in " + f.name());
    }
    break;
  case FactorKind::SpecialEuclidean3: {
    Eigen::RowVector4d bottom = block.row(3);
    if (bottom != Eigen::RowVector4d(0, 0, 0, 1)) {
      throw DomainError("GroupElement: SE(3) bottom row must be (0,0,0,1)");
    }
    const Matrix r = block.topLeftCorner(3, 3);
    if (orthogonality_defect(r) > kOrthoTolerance || std::abs(r.determinant() - 1.0) > kOrthoTolerance) {
      throw DomainError("GroupElement: SE(3) rotation block is not in SO(3)");
    }
    break;
  }
  case FactorKind::Translation: {
    const int n = f.dim;
    Matrix expect = Matrix::Identity(n + 1, n + 1);
    expect.block(0, n, n, 1) = block.block(0, n, n, 1);
    if ((block - expect).cwiseAbs().maxCoeff() > 0.0) {
      throw DomainError("GroupElement: translation block must be [I x; 0 1]");
    }
    break;
  }
  }
  return block;
}

// Rotation blocks are repaired only once drift is visible.
Matrix repaired_factor(const Factor & f, Matrix block)
{
  if (f.kind == FactorKind::SpecialOrthogonal) {
    if (orthogonality_defect(block) > kRepairThreshold) {
      block = orthonormalize(block);
    }
  } else if (f.kind == FactorKind::SpecialEuclidean3) {
    Matrix r = block.topLeftCorner(3, 3);
    if (orthogonality_defect(r) > kRepairThreshold) {
      block.topLeftCorner(3, 3) = orthonormalize(r);
    }
    block.row(3) << 0, 0, 0, 1;
  }
  return block;
}

Matrix exp_factor(const Factor & f, const Vector & x)
{
  const int n = f.matrix_size();
  Matrix m = Matrix::Identity(n, n);
  switch (f.kind) {
  case FactorKind::SpecialOrthogonal:
    if (f.dim == 2) {
      const double c = std::cos(x(0));
      const double s = std::sin(x(0));
      m << c, -s, s, c;
    } else if (f.dim == 3) {
      m = rodrigues(x.head<3>());
    } else {
      m = expm_pade6(hat_factor(f, x));
      if (orthogonality_defect(m) > kRepairThreshold) {
        m = orthonormalize(m);
      }
    }
    break;
  case FactorKind::SpecialEuclidean3: {
    const Vec3 v = x.head<3>();
    const Vec3 w = x.tail<3>();
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 k = skew3(w);
    double b;
    double c;
    if (theta < 1e-4) {
      b = 0.5 - theta2 / 24.0;
      c = 1.0 / 6.0 - theta2 / 120.0;
    } else {
      b = (1.0 - std::cos(theta)) / theta2;
      c = (theta - std::sin(theta)) / (theta2 * theta);
    }
    const Mat3 vmat = Mat3::Identity() + b * k + c * k * k;
    m.topLeftCorner(3, 3) = rodrigues(w);
    m.block(0, 3, 3, 1) = vmat * v;
    break;
  }
  case FactorKind::Translation:
    m.block(0, f.dim, f.dim, 1) = x;
    break;
  }
  return m;
}

Vector log_factor(const Factor & f, const Matrix & m)
{
  Vector x(f.algebra_dim());
  switch (f.kind) {
  case FactorKind::SpecialOrthogonal:
    if (f.dim == 2) {
      if (!(m(0, 0) > -1.0 + 5e-10)) {
        throw CutLocusError("log: rotation by pi (antipodal/pi-rotation) is on the cut locus");
      }
      x(0) = std::atan2(m(1, 0) - m(0, 1), m(0, 0) + m(1, 1));
    } else if (f.dim == 3) {
      x = log_so3(m);
    } else {
      const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > -1.0 + 5e-10)) {
        throw CutLocusError("log: rotation by pi (antipodal/pi-rotation) is on the cut locus");
      }
      const Eigen::MatrixXd dense = m;
      const Eigen::MatrixXd l = dense.log();
      x = vee_factor(f, Matrix(l));
    }
    break;
  case FactorKind::SpecialEuclidean3: {
    const Vec3 w = log_so3(m.topLeftCorner(3, 3));
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 k = skew3(w);
    double d;
    if (theta < 1e-4) {
      d = 1.0 / 12.0 + theta2 / 720.0;
    } else {
      d = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / theta2;
    }
    const Mat3 vinv = Mat3::Identity() - 0.5 * k + d * k * k;
    x.head<3>() = vinv * Vec3(m.block(0, 3, 3, 1));
    x.tail<3>() = w;
    break;
  }
  case FactorKind::Translation:
    x = m.block(0, f.dim, f.dim, 1);
    break;
  }
  return x;
}

AlgebraMatrix ad_matrix_factor(const Factor & f, const Vector & u)
{
  const int d = f.algebra_dim();
  AlgebraMatrix a = AlgebraMatrix::Zero(d, d);
  switch (f.kind) {
  case FactorKind::SpecialOrthogonal:
    if (f.dim == 3) {
      a = skew3(u.head<3>());
    } else if (f.dim > 3) {
      const Matrix uh = hat_factor(f, u);
      for (int c = 0; c < d; ++c) {
        Vector e = Vector::Zero(d);
        e(c) = 1.0;
        const Matrix eh = hat_factor(f, e);
        a.col(c) = vee_factor(f, uh * eh - eh * uh);
      }
    }
    break;
  case FactorKind::SpecialEuclidean3: {
    const Mat3 vh = skew3(u.head<3>());
    const Mat3 wh = skew3(u.tail<3>());
    a.topLeftCorner(3, 3) = wh;
    a.topRightCorner(3, 3) = vh;
    a.bottomRightCorner(3, 3) = wh;
    break;
  }
  case FactorKind::Translation:
    break;
  }
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// tags

int Factor::matrix_size() const
{
  switch (kind) {
  case FactorKind::SpecialOrthogonal:
    return dim;
  case FactorKind::SpecialEuclidean3:
    return 4;
  case FactorKind::Translation:
    return dim + 1;
  }
  return 0;
}

int Factor::algebra_dim() const
{
  switch (kind) {
  case FactorKind::SpecialOrthogonal:
    return dim * (dim - 1) / 2;
  case FactorKind::SpecialEuclidean3:
    return 6;
  case FactorKind::Translation:
    return dim;
  }
  return 0;
}

std::string Factor::name() const
{
  switch (kind) {
  case FactorKind::SpecialOrthogonal:
    return "SO(" + std::to_string(dim) + ")";
  case FactorKind::SpecialEuclidean3:
    return "SE(3)";
  case FactorKind::Translation:
    return "R" + std::to_string(dim);
  }
  return "?";
}

GroupTag GroupTag::so(int m)
{
  if (m < 2 || m > kMaxMatrix) {
    throw DomainError("SO(m) supported for 2 <= m <= " + std::to_string(kMaxMatrix));
  }
  GroupTag t;
  t.factors_[0] = Factor{FactorKind::SpecialOrthogonal, m};
  t.count_ = 1;
  return t;
}

GroupTag GroupTag::se3()
{
  GroupTag t;
  t.factors_[0] = Factor{FactorKind::SpecialEuclidean3, 3};
  t.count_ = 1;
  return t;
}

GroupTag GroupTag::translation(int n)
{
  if (n < 1 || n + 1 > kMaxMatrix) {
    throw DomainError("R^n supported for 1 <= n <= " + std::to_string(kMaxMatrix - 1));
  }
  GroupTag t;
  t.factors_[0] = Factor{FactorKind::Translation, n};
  t.count_ = 1;
  return t;
}

GroupTag GroupTag::product(std::initializer_list<GroupTag> parts)
{
  GroupTag t;
  for (const GroupTag & p : parts) {
    for (int i = 0; i < p.count_; ++i) {
      if (t.count_ == kMaxFactors) {
        throw DomainError("product: too many factors");
      }
      t.factors_[static_cast<std::size_t>(t.count_++)] = p.factor(i);
    }
  }
  if (t.count_ == 0) {
    throw DomainError("product: no factors");
  }
  if (t.matrix_size() > kMaxMatrix) {
    throw DomainError("product: representation exceeds " + std::to_string(kMaxMatrix) + "x" +
                      std::to_string(kMaxMatrix));
  }
  return t;
}

GroupTag GroupTag::parse(std::string_view text)
{
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '^') {
      s.push_back(c);
    }
  }
  GroupTag out;
  bool first = true;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find_first_of("x*", pos);
    // 'x' also appears in nothing else we accept, so splitting is unambiguous
    const std::string part = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    GroupTag f;
    try {
      if (part.rfind("SO(", 0) == 0 && part.back() == ')') {
        f = so(std::stoi(part.substr(3, part.size() - 4)));
      } else if (part == "SE(3)" || part == "SE3") {
        f = se3();
      } else if (part.rfind("SO", 0) == 0 && part.size() > 2) {
        f = so(std::stoi(part.substr(2)));
      } else if (!part.empty() && part[0] == 'R' && part.size() > 1) {
        f = translation(std::stoi(part.substr(1)));
      } else {
        throw DomainError("unknown group '" + part + "'");
      }
    } catch (const std::invalid_argument &) {
      throw DomainError("unknown group '" + part + "'");
    }
    out = first ? f : product({out, f});
    first = false;
    if (next == std::string::npos) {
      break;
    }
    pos = next + 1;
  }
  return out;
}

int GroupTag::matrix_size() const
{
  int n = 0;
  for (int i = 0; i < count_; ++i) {
    n += factor(i).matrix_size();
  }
  return n;
}

int GroupTag::algebra_dim() const
{
  int d = 0;
  for (int i = 0; i < count_; ++i) {
    d += factor(i).algebra_dim();
  }
  return d;
}

int GroupTag::matrix_offset(int i) const
{
  int n = 0;
  for (int k = 0; k < i; ++k) {
    n += factor(k).matrix_size();
  }
  return n;
}

int GroupTag::algebra_offset(int i) const
{
  int d = 0;
  for (int k = 0; k < i; ++k) {
    d += factor(k).algebra_dim();
  }
  return d;
}

std::string GroupTag::name() const
{
  std::string s;
  for (int i = 0; i < count_; ++i) {
    if (i > 0) {
      s += "x";
    }
    s += factor(i).name();
  }
  return s;
}

bool GroupTag::operator==(const GroupTag & other) const
{
  if (count_ != other.count_) {
    return false;
  }
  for (int i = 0; i < count_; ++i) {
    if (!(factor(i) == other.factor(i))) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// elements

GroupElement::GroupElement(GroupTag tag, Matrix matrix) : tag_(tag), matrix_(std::move(matrix))
{
  const int n = tag_.matrix_size();
  if (matrix_.rows() != n || matrix_.cols() != n) {
    throw DomainError("GroupElement: matrix size does not match " + tag_.name());
  }
  for (int i = 0; i < tag_.factor_count(); ++i) {
    const int off = tag_.matrix_offset(i);
    const int sz = tag_.factor(i).matrix_size();
    validated_factor(tag_.factor(i), matrix_.block(off, off, sz, sz));
    if (tag_.is_product()) {
      // off-diagonal blocks must vanish
      Matrix mask = matrix_;
      mask.block(off, off, sz, sz).setZero();
      for (int r = off; r < off + sz; ++r) {
        if (mask.row(r).cwiseAbs().maxCoeff() != 0.0 || mask.col(r).cwiseAbs().maxCoeff() != 0.0) {
          throw DomainError("GroupElement: product matrix must be block-diagonal");
        }
      }
    }
  }
}

GroupElement::GroupElement(GroupTag tag, Matrix matrix, NoCheck) : tag_(tag), matrix_(std::move(matrix)) {}

GroupElement GroupElement::unchecked(GroupTag tag, Matrix matrix)
{
  return GroupElement(tag, std::move(matrix), NoCheck{});
}

GroupElement GroupElement::identity(const GroupTag & tag)
{
  const int n = tag.matrix_size();
  return GroupElement(tag, Matrix::Identity(n, n), NoCheck{});
}

Matrix GroupElement::factor_block(int i) const
{
  const int off = tag_.matrix_offset(i);
  const int sz = tag_.factor(i).matrix_size();
  return matrix_.block(off, off, sz, sz);
}

Matrix hat(const GroupTag & tag, const Vector & coords)
{
  if (coords.size() != tag.algebra_dim()) {
    throw DomainError("hat: coordinate dimension does not match " + tag.name());
  }
  const int n = tag.matrix_size();
  Matrix m = Matrix::Zero(n, n);
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    m.block(tag.matrix_offset(i), tag.matrix_offset(i), f.matrix_size(), f.matrix_size()) =
      hat_factor(f, coords.segment(tag.algebra_offset(i), f.algebra_dim()));
  }
  return m;
}

Vector vee(const GroupTag & tag, const Matrix & m)
{
  Vector x(tag.algebra_dim());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int off = tag.matrix_offset(i);
    x.segment(tag.algebra_offset(i), f.algebra_dim()) =
      vee_factor(f, m.block(off, off, f.matrix_size(), f.matrix_size()));
  }
  return x;
}

GroupElement compose(const GroupElement & a, const GroupElement & b)
{
  check_same(a.tag(), b.tag(), "compose");
  const GroupTag & tag = a.tag();
  Matrix m = Matrix::Zero(tag.matrix_size(), tag.matrix_size());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int off = tag.matrix_offset(i);
    const int sz = f.matrix_size();
    m.block(off, off, sz, sz) =
      repaired_factor(f, a.matrix().block(off, off, sz, sz) * b.matrix().block(off, off, sz, sz));
  }
  return GroupElement::unchecked(tag, std::move(m));
}

GroupElement inverse(const GroupElement & g)
{
  const GroupTag & tag = g.tag();
  Matrix m = Matrix::Zero(tag.matrix_size(), tag.matrix_size());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int off = tag.matrix_offset(i);
    const int sz = f.matrix_size();
    const auto blk = g.matrix().block(off, off, sz, sz);
    auto out = m.block(off, off, sz, sz);
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      out = blk.transpose();
      break;
    case FactorKind::SpecialEuclidean3: {
      const Mat3 rt = blk.topLeftCorner(3, 3).transpose();
      out.topLeftCorner(3, 3) = rt;
      out.block(0, 3, 3, 1) = -rt * Vec3(blk.block(0, 3, 3, 1));
      out(3, 3) = 1.0;
      break;
    }
    case FactorKind::Translation:
      out.setIdentity();
      out.block(0, f.dim, f.dim, 1) = -blk.block(0, f.dim, f.dim, 1);
      break;
    }
  }
  return GroupElement::unchecked(tag, std::move(m));
}

GroupElement exp(const AlgebraVector & xi)
{
  const GroupTag & tag = xi.tag;
  if (xi.coords.size() != tag.algebra_dim()) {
    throw DomainError("exp: coordinate dimension does not match " + tag.name());
  }
  Matrix m = Matrix::Zero(tag.matrix_size(), tag.matrix_size());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int off = tag.matrix_offset(i);
    m.block(off, off, f.matrix_size(), f.matrix_size()) =
      exp_factor(f, xi.coords.segment(tag.algebra_offset(i), f.algebra_dim()));
  }
  return GroupElement::unchecked(tag, std::move(m));
}

AlgebraVector log(const GroupElement & g)
{
  const GroupTag & tag = g.tag();
  Vector x(tag.algebra_dim());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    x.segment(tag.algebra_offset(i), f.algebra_dim()) = log_factor(f, g.factor_block(i));
  }
  return {tag, x};
}

AlgebraVector Ad(const GroupElement & g, const AlgebraVector & xi)
{
  check_same(g.tag(), xi.tag, "Ad");
  const GroupTag & tag = g.tag();
  Vector out(tag.algebra_dim());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int aoff = tag.algebra_offset(i);
    const Vector x = xi.coords.segment(aoff, f.algebra_dim());
    auto y = out.segment(aoff, f.algebra_dim());
    const Matrix blk = g.factor_block(i);
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      if (f.dim == 2) {
        y = x;
      } else if (f.dim == 3) {
        y = Mat3(blk) * Vec3(x);
      } else {
        y = vee_factor(f, blk * hat_factor(f, x) * blk.transpose());
      }
      break;
    case FactorKind::SpecialEuclidean3: {
      const Mat3 r = blk.topLeftCorner(3, 3);
      const Vec3 p = blk.block(0, 3, 3, 1);
      const Vec3 rw = r * Vec3(x.tail<3>());
      y.head<3>() = r * Vec3(x.head<3>()) + p.cross(rw);
      y.tail<3>() = rw;
      break;
    }
    case FactorKind::Translation:
      y = x;
      break;
    }
  }
  return {tag, out};
}

AlgebraVector ad(const AlgebraVector & u, const AlgebraVector & v)
{
  check_same(u.tag, v.tag, "ad");
  const GroupTag & tag = u.tag;
  Vector out(tag.algebra_dim());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int aoff = tag.algebra_offset(i);
    const Vector a = u.coords.segment(aoff, f.algebra_dim());
    const Vector b = v.coords.segment(aoff, f.algebra_dim());
    auto y = out.segment(aoff, f.algebra_dim());
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      if (f.dim == 2) {
        y.setZero();
      } else if (f.dim == 3) {
        y = Vec3(a).cross(Vec3(b));
      } else {
        const Matrix ah = hat_factor(f, a);
        const Matrix bh = hat_factor(f, b);
        y = vee_factor(f, ah * bh - bh * ah);
      }
      break;
    case FactorKind::SpecialEuclidean3: {
      const Vec3 v1 = a.head<3>();
      const Vec3 w1 = a.tail<3>();
      const Vec3 v2 = b.head<3>();
      const Vec3 w2 = b.tail<3>();
      y.head<3>() = w1.cross(v2) - w2.cross(v1);
      y.tail<3>() = w1.cross(w2);
      break;
    }
    case FactorKind::Translation:
      y.setZero();
      break;
    }
  }
  return {tag, out};
}

AlgebraMatrix ad_matrix(const AlgebraVector & u)
{
  const GroupTag & tag = u.tag;
  const int d = tag.algebra_dim();
  AlgebraMatrix a = AlgebraMatrix::Zero(d, d);
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int aoff = tag.algebra_offset(i);
    a.block(aoff, aoff, f.algebra_dim(), f.algebra_dim()) =
      ad_matrix_factor(f, u.coords.segment(aoff, f.algebra_dim()));
  }
  return a;
}

AlgebraCovector ad_star(const AlgebraVector & u, const AlgebraCovector & mu)
{
  check_same(u.tag, mu.tag, "ad_star");
  const GroupTag & tag = u.tag;
  Vector out(tag.algebra_dim());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const Factor & f = tag.factor(i);
    const int aoff = tag.algebra_offset(i);
    const int d = f.algebra_dim();
    const Vector a = u.coords.segment(aoff, d);
    const Vector m = mu.coords.segment(aoff, d);
    auto y = out.segment(aoff, d);
    if (f.kind == FactorKind::SpecialOrthogonal && f.dim == 3) {
      y = Vec3(m).cross(Vec3(a));
    } else if (f.kind == FactorKind::SpecialEuclidean3) {
      // transpose of [[w^, v^], [0, w^]]
      const Vec3 v = a.head<3>();
      const Vec3 w = a.tail<3>();
      const Vec3 ml = m.head<3>();
      const Vec3 ma = m.tail<3>();
      y.head<3>() = ml.cross(w);
      y.tail<3>() = ml.cross(v) + ma.cross(w);
    } else {
      y = ad_matrix_factor(f, a).transpose() * m;
    }
  }
  return {tag, out};
}

double orthogonality_defect(const Matrix & r)
{
  return (r.transpose() * r - Matrix::Identity(r.cols(), r.cols())).cwiseAbs().maxCoeff();
}

Matrix orthonormalize(const Matrix & r)
{
  const Eigen::MatrixXd rtr = r.transpose() * r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rtr);
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd inv_root = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return Matrix(r * inv_root);
}

Matrix expm_pade6(const Matrix & a)
{
  constexpr int p = 6;
  // c_k = (2p-k)! p! / ((2p)! k! (p-k)!)
  std::array<double, p + 1> c{};
  c[0] = 1.0;
  for (int k = 1; k <= p; ++k) {
    c[static_cast<std::size_t>(k)] =
      c[static_cast<std::size_t>(k - 1)] * static_cast<double>(p - k + 1) / static_cast<double>(k * (2 * p - k + 1));
  }
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) {
    s = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
  }
  const Matrix x = a / std::ldexp(1.0, s);
  const int n = static_cast<int>(a.rows());
  Matrix num = Matrix::Identity(n, n) * c[0];
  Matrix den = num;
  Matrix power = Matrix::Identity(n, n);
  for (int k = 1; k <= p; ++k) {
    power = power * x;
    const double ck = c[static_cast<std::size_t>(k)];
    num += ck * power;
    den += ((k % 2 == 0) ? ck : -ck) * power;
  }
  Matrix e = den.partialPivLu().solve(num);
  for (int k = 0; k < s; ++k) {
    e = e * e;
  }
  return e;
}

// ---------------------------------------------------------------------------
// metrics

AlgebraMetric::AlgebraMetric(GroupTag tag, const AlgebraMatrix & matrix) : tag_(tag), matrix_(matrix)
{
  const int d = tag_.algebra_dim();
  if (matrix_.rows() != d || matrix_.cols() != d) {
    throw ConfigError("metric: matrix must be " + std::to_string(d) + "x" + std::to_string(d) + " for " +
                      tag_.name());
  }
  if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, matrix_.cwiseAbs().maxCoeff())) {
    throw ConfigError("metric: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(matrix_), Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw ConfigError("metric: matrix is not positive definite");
  }
  llt_.compute(matrix_);
  if (llt_.info() != Eigen::Success) {
    throw ConfigError("metric: Cholesky factorization failed");
  }
}

AlgebraMetric AlgebraMetric::identity(const GroupTag & tag)
{
  const int d = tag.algebra_dim();
  return AlgebraMetric(tag, AlgebraMatrix::Identity(d, d));
}

AlgebraMetric AlgebraMetric::diagonal(const GroupTag & tag, const Vector & diag)
{
  AlgebraMatrix m = AlgebraMatrix::Zero(diag.size(), diag.size());
  m.diagonal() = diag;
  return AlgebraMetric(tag, m);
}

AlgebraCovector AlgebraMetric::flat(const AlgebraVector & xi) const
{
  check_same(tag_, xi.tag, "metric_flat");
  return {tag_, matrix_ * xi.coords};
}

AlgebraVector AlgebraMetric::sharp(const AlgebraCovector & tau) const
{
  check_same(tag_, tau.tag, "metric_sharp");
  return {tag_, llt_.solve(tau.coords)};
}

double AlgebraMetric::inner(const AlgebraVector & a, const AlgebraVector & b) const
{
  return a.coords.dot(matrix_ * b.coords);
}

double AlgebraMetric::norm(const AlgebraVector & a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

}  // namespace geotrack::algebra
