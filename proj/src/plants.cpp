#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "geotrack/sim.hpp"

namespace geotrack::sim {

using algebra::FactorKind;

namespace {

struct SphereDeriv
{
  Vector dq;
  Vector dv;
};

SphereDeriv sphere_rhs(const SpherePlant & plant, const Vector & q, const Vector & v, const RowVector & f)
{
  const Vector ft = f.transpose();
  return {v, -v.squaredNorm() * q + (ft - q * q.dot(ft)) / plant.scale};
}

void check_step(double h)
{
  if (!(h > 0.0)) {
    throw DomainError("step: h must be positive");
  }
}

SphereState finish_sphere(Vector q, Vector v)
{
  q /= q.norm();
  v -= q * q.dot(v);
  return {std::move(q), std::move(v)};
}

}  // namespace

SphereState step_sphere(const SpherePlant & plant, const SphereState & x, const RowVector & force, double h)
{
  return step_sphere(plant, x, 0.0, h, [&force](double, const Vector &, const Vector &) { return force; });
}

SphereState step_sphere(const SpherePlant & plant, const SphereState & x, double t, double h,
                        const SpherePolicy & policy)
{
  check_step(h);
  if (x.q.size() != plant.n + 1 || x.q_dot.size() != plant.n + 1) {
    throw DomainError("step_sphere: state dimension mismatch");
  }
  const SphereDeriv k1 = sphere_rhs(plant, x.q, x.q_dot, policy(t, x.q, x.q_dot));
  const Vector q2 = x.q + 0.5 * h * k1.dq, v2 = x.q_dot + 0.5 * h * k1.dv;
  const SphereDeriv k2 = sphere_rhs(plant, q2, v2, policy(t + 0.5 * h, q2, v2));
  const Vector q3 = x.q + 0.5 * h * k2.dq, v3 = x.q_dot + 0.5 * h * k2.dv;
  const SphereDeriv k3 = sphere_rhs(plant, q3, v3, policy(t + 0.5 * h, q3, v3));
  const Vector q4 = x.q + h * k3.dq, v4 = x.q_dot + h * k3.dv;
  const SphereDeriv k4 = sphere_rhs(plant, q4, v4, policy(t + h, q4, v4));
  return finish_sphere(x.q + (h / 6.0) * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq),
                       x.q_dot + (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv));
}

namespace {

Vector group_accel(const GroupPlant & plant, const Vector & xi, const Vector & tau)
{
  const auto & tag = plant.tag();
  const algebra::AlgebraVector x{tag, xi};
  Vector rhs = algebra::ad_star(x, plant.inertia.flat(x)).coords + tau;
  if (plant.external_force.size() != 0) {
    rhs += plant.external_force;
  }
  return plant.inertia.sharp({tag, rhs}).coords;
}

Vector dexpinv_right(const GroupTag & tag, const Vector & theta, const Vector & a)
{
  const Vector b = algebra::ad({tag, theta}, {tag, a}).coords;
  const Vector c = algebra::ad({tag, theta}, {tag, b}).coords;
  return a + 0.5 * b + c / 12.0;
}

Matrix right_exp(const GroupTag & tag, const Matrix & g, const Vector & theta)
{
  return algebra::compose(algebra::GroupElement::unchecked(tag, g), algebra::exp({tag, theta})).matrix();
}

}  // namespace

GroupState step_group(const GroupPlant & plant, const GroupState & x, const Vector & tau, double h)
{
  return step_group(plant, x, 0.0, h, [&tau](double, const Matrix &, const Vector &) { return tau; });
}

GroupState step_group(const GroupPlant & plant, const GroupState & x, double t, double h, const GroupPolicy & policy)
{
  check_step(h);
  const auto & tag = plant.tag();
  if (x.g.rows() != tag.matrix_size() || x.xi.size() != tag.algebra_dim()) {
    throw DomainError("step_group: state does not match the plant's group " + tag.name());
  }
  const Vector a1 = group_accel(plant, x.xi, policy(t, x.g, x.xi));
  const Vector th1 = x.xi;

  const Vector xi2 = x.xi + 0.5 * h * a1;
  const Vector u2 = 0.5 * h * th1;
  const Matrix g2 = right_exp(tag, x.g, u2);
  const Vector a2 = group_accel(plant, xi2, policy(t + 0.5 * h, g2, xi2));
  const Vector th2 = dexpinv_right(tag, u2, xi2);

  const Vector xi3 = x.xi + 0.5 * h * a2;
  const Vector u3 = 0.5 * h * th2;
  const Matrix g3 = right_exp(tag, x.g, u3);
  const Vector a3 = group_accel(plant, xi3, policy(t + 0.5 * h, g3, xi3));
  const Vector th3 = dexpinv_right(tag, u3, xi3);

  const Vector xi4 = x.xi + h * a3;
  const Vector u4 = h * th3;
  const Matrix g4 = right_exp(tag, x.g, u4);
  const Vector a4 = group_accel(plant, xi4, policy(t + h, g4, xi4));
  const Vector th4 = dexpinv_right(tag, u4, xi4);

  const Vector theta = (h / 6.0) * (th1 + 2.0 * th2 + 2.0 * th3 + th4);
  return {right_exp(tag, x.g, theta), x.xi + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)};
}

double kinetic_energy(const GroupPlant & plant, const Vector & xi)
{
  const algebra::AlgebraVector x{plant.tag(), xi};
  return 0.5 * plant.inertia.inner(x, x);
}

Eigen::Vector3d pull_back_torque(const Eigen::Matrix3d & R, const Eigen::RowVector3d & f)
{
  const Eigen::Vector3d u = R.transpose() * f.transpose();
  return Eigen::Vector3d::UnitZ().cross(u);
}

// ---------------------------------------------------------------------------

SplitMix64::result_type SplitMix64::operator()()
{
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rollout_seed(std::uint64_t batch_seed, int index)
{
  SplitMix64 mix(batch_seed ^ (0x632be59bd9b4e019ULL * static_cast<std::uint64_t>(index + 1)));
  return mix();
}

namespace {

Vector gaussian(SplitMix64 & rng, int d)
{
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector v(d);
  for (int i = 0; i < d; ++i) {
    v(i) = n01(rng);
  }
  return v;
}

double uniform01(SplitMix64 & rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

}  // namespace

Vector sample_sphere(SplitMix64 & rng, int n)
{
  for (;;) {
    const Vector v = gaussian(rng, n + 1);
    const double r = v.norm();
    if (r > 1e-12) {
      return v / r;
    }
  }
}

Vector sample_ball(SplitMix64 & rng, int d, double r)
{
  if (d == 0) {
    return Vector(0);
  }
  const Vector dir = sample_sphere(rng, d - 1);
  return dir * (r * std::pow(uniform01(rng), 1.0 / d));
}

Matrix sample_rotation(SplitMix64 & rng, int m)
{
  Eigen::MatrixXd a(m, m);
  for (int j = 0; j < m; ++j) {
    a.col(j) = gaussian(rng, m);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign fix makes the distribution Haar on O(m); then move to SO(m).
  for (int j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) {
      q.col(j) *= -1.0;
    }
  }
  if (q.determinant() < 0.0) {
    q.col(0) *= -1.0;
  }
  return algebra::orthonormalize(Matrix(q));
}

SphereState sample_sphere_state(SplitMix64 & rng, int n, double v_max)
{
  const Vector q = sample_sphere(rng, n);
  // Uniform in the tangent ball: an orthonormal tangent frame times a ball sample.
  Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(n + 1, n + 1) - q * q.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(frame, Eigen::ComputeFullU);
  const Eigen::MatrixXd basis = svd.matrixU().leftCols(n);
  const Vector c = sample_ball(rng, n, v_max);
  Vector v = basis * Eigen::VectorXd(c);
  v -= q * q.dot(v);
  return {q, v};
}

GroupState sample_group_state(SplitMix64 & rng, const GroupTag & tag, double v_max, double position_radius)
{
  Matrix g = Matrix::Identity(tag.matrix_size(), tag.matrix_size());
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const int o = tag.matrix_offset(i);
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      g.block(o, o, f.dim, f.dim) = sample_rotation(rng, f.dim);
      break;
    case FactorKind::SpecialEuclidean3:
      g.block(o, o, 3, 3) = sample_rotation(rng, 3);
      g.block(o, o + 3, 3, 1) = sample_ball(rng, 3, position_radius);
      break;
    case FactorKind::Translation:
      g.block(o, o + f.dim, f.dim, 1) = sample_ball(rng, f.dim, position_radius);
      break;
    }
  }
  return {g, sample_ball(rng, tag.algebra_dim(), v_max)};
}

// ---------------------------------------------------------------------------

Eigen::VectorXd compact_config(const GroupTag & tag, const Matrix & g)
{
  std::vector<double> out;
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const int o = tag.matrix_offset(i);
    auto rot = [&](int r0, int m) {
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          out.push_back(g(r0 + a, r0 + b));
        }
      }
    };
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      rot(o, f.dim);
      break;
    case FactorKind::SpecialEuclidean3:
      for (int a = 0; a < 3; ++a) {
        out.push_back(g(o + a, o + 3));
      }
      rot(o, 3);
      break;
    case FactorKind::Translation:
      for (int a = 0; a < f.dim; ++a) {
        out.push_back(g(o + a, o + f.dim));
      }
      break;
    }
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Matrix expand_config(const GroupTag & tag, const Eigen::VectorXd & c)
{
  Matrix g = Matrix::Identity(tag.matrix_size(), tag.matrix_size());
  int k = 0;
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const int o = tag.matrix_offset(i);
    auto rot = [&](int r0, int m) {
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          g(r0 + a, r0 + b) = c(k++);
        }
      }
    };
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      rot(o, f.dim);
      break;
    case FactorKind::SpecialEuclidean3:
      for (int a = 0; a < 3; ++a) {
        g(o + a, o + 3) = c(k++);
      }
      rot(o, 3);
      break;
    case FactorKind::Translation:
      for (int a = 0; a < f.dim; ++a) {
        g(o + a, o + f.dim) = c(k++);
      }
      break;
    }
  }
  if (k != c.size()) {
    throw DomainError("expand_config: coordinate count does not match " + tag.name());
  }
  return g;
}

std::vector<std::string> compact_names(const GroupTag & tag, const std::string & prefix)
{
  static const char * axes = "xyz";
  std::vector<std::string> out;
  // Factor indices are added only when two factors would produce the same
  // names (two rotation blocks or two position blocks).
  int rotations = 0, positions = 0;
  for (int i = 0; i < tag.factor_count(); ++i) {
    rotations += tag.factor(i).kind != FactorKind::Translation ? 1 : 0;
    positions += tag.factor(i).kind != FactorKind::SpecialOrthogonal ? 1 : 0;
  }
  auto repeated = [&](FactorKind kind) {
    return (kind != FactorKind::Translation && rotations > 1) || (kind != FactorKind::SpecialOrthogonal && positions > 1);
  };
  for (int i = 0; i < tag.factor_count(); ++i) {
    const auto & f = tag.factor(i);
    const std::string p = prefix + (repeated(f.kind) ? std::to_string(i) + "_" : std::string());
    auto rot = [&](int m) {
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          out.push_back(p + "r" + std::to_string(a) + std::to_string(b));
        }
      }
    };
    auto pos = [&](int n) {
      for (int a = 0; a < n; ++a) {
        out.push_back(p + (n == 3 ? std::string(1, axes[a]) : "x" + std::to_string(a)));
      }
    };
    switch (f.kind) {
    case FactorKind::SpecialOrthogonal:
      rot(f.dim);
      break;
    case FactorKind::SpecialEuclidean3:
      pos(3);
      rot(3);
      break;
    case FactorKind::Translation:
      pos(f.dim);
      break;
    }
  }
  return out;
}

}  // namespace geotrack::sim
