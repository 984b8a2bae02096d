#pragma once

// Shared generators and independent oracles for the unit tests. Oracles here
// deliberately avoid the library's own kernels (closed forms, Taylor series,
// quaternions) so that agreement is a real check.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <doctest.h>

#include "geotrack/algebra.hpp"

namespace gt_test {

using geotrack::Matrix;
using geotrack::Vector;

class Gen
{
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }

  Eigen::VectorXd normal_vector(int n)
  {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      v(i) = normal();
    }
    return v;
  }

  Eigen::VectorXd unit_vector(int n)
  {
    Eigen::VectorXd v;
    do {
      v = normal_vector(n);
    } while (v.norm() < 1e-6);
    return v.normalized();
  }

  /// Uniform rotation from a unit quaternion.
  Eigen::Matrix3d rotation3()
  {
    const Eigen::Vector4d q = unit_vector(4);
    return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  }

  /// Rotation in SO(m) from Gram-Schmidt on a Gaussian matrix with sign fix.
  Eigen::MatrixXd rotation(int m)
  {
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        a(i, j) = normal();
      }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < m; ++i) {
      if (r(i, i) < 0) {
        q.col(i) *= -1.0;
      }
    }
    if (q.determinant() < 0) {
      q.col(0) *= -1.0;
    }
    return q;
  }

  /// Tangent vector at q of ambient dimension q.size().
  Eigen::VectorXd tangent(const Eigen::VectorXd & q, double scale = 1.0)
  {
    Eigen::VectorXd v = normal_vector(static_cast<int>(q.size()));
    return scale * (v - q * q.dot(v));
  }

  std::mt19937_64 & engine() { return rng_; }

private:
  std::mt19937_64 rng_;
};

inline double max_abs(const Eigen::MatrixXd & a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

inline Eigen::Matrix3d skew(const Eigen::Vector3d & w)
{
  Eigen::Matrix3d s;
  s << 0, -w(2), w(1), w(2), 0, -w(0), -w(1), w(0), 0;
  return s;
}

/// Rodrigues formula.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d & w)
{
  const double th = w.norm();
  const Eigen::Matrix3d k = skew(w);
  if (th < 1e-12) {
    return Eigen::Matrix3d::Identity() + k;
  }
  return Eigen::Matrix3d::Identity() + std::sin(th) / th * k + (1 - std::cos(th)) / (th * th) * k * k;
}

inline Eigen::Matrix3d rot_x(double a) { return rodrigues(a * Eigen::Vector3d::UnitX()); }
inline Eigen::Matrix3d rot_y(double a) { return rodrigues(a * Eigen::Vector3d::UnitY()); }
inline Eigen::Matrix3d rot_z(double a)
{
  Eigen::Matrix3d r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

/// Matrix exponential by scaling and squaring a long Taylor series.
inline Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd & a)
{
  int s = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.1) {
    norm /= 2;
    ++s;
  }
  const Eigen::MatrixXd b = a / std::ldexp(1.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * b / k;
    sum += term;
  }
  for (int i = 0; i < s; ++i) {
    sum = sum * sum;
  }
  return sum;
}

/// 4x4 homogeneous transform.
inline Eigen::Matrix4d se3(const Eigen::Matrix3d & r, const Eigen::Vector3d & x)
{
  Eigen::Matrix4d g = Eigen::Matrix4d::Identity();
  g.topLeftCorner<3, 3>() = r;
  g.topRightCorner<3, 1>() = x;
  return g;
}

/// Block-diagonal R3 x SO(3) element (translation block first).
inline Eigen::MatrixXd r3_so3(const Eigen::Vector3d & x, const Eigen::Matrix3d & r)
{
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(7, 7);
  g.block<3, 1>(0, 3) = x;
  g.block<3, 3>(4, 4) = r;
  return g;
}

/// Random element of a group with the library's matrix layout, built from
/// quaternions and Gaussian translations.
inline Eigen::MatrixXd random_element(Gen & gen, const geotrack::algebra::GroupTag & tag, double spread = 1.0)
{
  using geotrack::algebra::FactorKind;
  const int m = tag.matrix_size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(m, m);
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const int o = tag.matrix_offset(i);
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      g.block(o, o, f.dim, f.dim) = f.dim == 3 ? Eigen::MatrixXd(gen.rotation3()) : gen.rotation(f.dim);
      break;
    case FactorKind::SpecialEuclidean3:
      g.block(o, o, 4, 4) = se3(gen.rotation3(), spread * gen.normal_vector(3));
      break;
    case FactorKind::Translation:
      g.block(o, o + f.dim, f.dim, 1) = spread * gen.normal_vector(f.dim);
      break;
    }
  }
  return g;
}

inline Vector random_coords(Gen & gen, const geotrack::algebra::GroupTag & tag, double scale = 1.0)
{
  return scale * gen.normal_vector(tag.algebra_dim());
}

/// Tags covered by the generic property tests.
inline std::vector<geotrack::algebra::GroupTag> sample_tags()
{
  using geotrack::algebra::GroupTag;
  return {GroupTag::so(2), GroupTag::so(3), GroupTag::so(4), GroupTag::so(5),  GroupTag::se3(),
          GroupTag::translation(3), GroupTag::translation(2), GroupTag::parse("R3xSO(3)"),
          GroupTag::parse("SO(3)xSO(3)")};
}

}  // namespace gt_test
