#include "support.hpp"

#include "geotrack/control.hpp"
#include "geotrack/sim.hpp"

using namespace geotrack;
using namespace geotrack::control;
using namespace gt_test;
using algebra::GroupTag;

namespace {

/// R(t) = exp(t A) exp(sin(t) B) with closed-form first and second derivatives.
struct AnalyticRotation
{
  Eigen::MatrixXd A, B;

  Eigen::MatrixXd E1(double t) const { return taylor_expm(t * A); }
  Eigen::MatrixXd E2(double t) const { return taylor_expm(std::sin(t) * B); }
  Eigen::MatrixXd R(double t) const { return E1(t) * E2(t); }
  Eigen::MatrixXd dR(double t) const { return A * R(t) + E1(t) * std::cos(t) * B * E2(t); }
  Eigen::MatrixXd ddR(double t) const
  {
    const Eigen::MatrixXd e1 = E1(t), e2 = E2(t);
    const double c = std::cos(t), s = std::sin(t);
    return A * A * e1 * e2 + 2 * A * e1 * c * B * e2 + e1 * (-s * B + c * c * B * B) * e2;
  }
};

AnalyticRotation random_reference(Gen & gen, int m, double speed = 0.6)
{
  const auto tag = GroupTag::so(m);
  return {algebra::hat(tag, random_coords(gen, tag, speed)), algebra::hat(tag, random_coords(gen, tag, speed))};
}

Vector origin(int n)
{
  Vector v = Vector::Zero(n + 1);
  v(n) = 1.0;
  return v;
}

}  // namespace

TEST_CASE("gain validation")
{
  CHECK_THROWS_AS(SphereControllerConfig(-1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(SphereControllerConfig(1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(SphereControllerConfig(1.0, 1.0, 0.0), ConfigError);
  const auto so3 = GroupTag::so(3);
  const auto nav = navigation::GroupNavigation::defaults(GroupTag::se3());
  CHECK_THROWS_AS(GroupControllerConfig(algebra::AlgebraMetric::identity(so3), algebra::AlgebraMetric::identity(so3),
                                        nav),
                  ConfigError);
}

TEST_CASE("sphere tracking error")
{
  Gen gen(51);
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 4;
    const auto ref = random_reference(gen, n + 1);
    const double t = gen.uniform(0, 3);
    const Matrix Rd = ref.R(t), Rdd = ref.dR(t);
    // on the reference
    const Vector qd = Rd.col(n);
    const Vector qd_dot = Rdd.col(n);
    const auto on = sphere_error(Rd, Rdd, homogeneous::SpherePoint::normalized(qd),
                                 homogeneous::SphereTangent(homogeneous::SpherePoint::normalized(qd), qd_dot));
    CHECK((on.e.coords() - origin(n)).norm() < 1e-12);
    CHECK(on.e_dot.vec().norm() < 1e-12);
    CHECK(on.on_reference());

    // distance invariance: d(e, origin) = d(q, q_d)
    const auto q = homogeneous::SpherePoint::normalized(Vector(gen.unit_vector(n + 1)));
    const homogeneous::SphereTangent v(q, Vector(gen.tangent(q.coords())));
    const auto err = sphere_error(Rd, Rdd, q, v);
    CHECK(std::abs(err.dist - homogeneous::geodesic_distance(q, homogeneous::SpherePoint::normalized(qd))) < 1e-10);

    // identity lift
    const auto id = sphere_error(Matrix::Identity(n + 1, n + 1), Matrix::Zero(n + 1, n + 1), q, v);
    CHECK((id.e.coords() - q.coords()).norm() < 1e-15);
    CHECK((id.e_dot.vec() - v.vec()).norm() < 1e-14);

    const SphereControllerConfig cfg(2.0, 3.0, 1.5);
    const auto lyap = sphere_error(cfg, Rd, Rdd, q, v);
    const double expected = 2.0 * (1.0 - lyap.e.coords()(n)) + 0.75 * lyap.e_dot.vec().squaredNorm();
    CHECK(lyap.lyapunov == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("group tracking error")
{
  Gen gen(52);
  for (const auto & tag : sample_tags()) {
    for (int k = 0; k < 20; ++k) {
      const algebra::GroupElement gd(tag, random_element(gen, tag));
      const algebra::GroupElement g(tag, random_element(gen, tag));
      const algebra::AlgebraVector xid{tag, random_coords(gen, tag)};
      const algebra::AlgebraVector xi{tag, random_coords(gen, tag)};
      const auto on = group_error(gd, xid, gd, xid);
      CHECK(on.dist < 1e-12);
      CHECK(on.xi_e.coords.norm() < 1e-12);
      CHECK(on.on_reference());
      const auto err = group_error(gd, xid, g, xi);
      CHECK(max_abs(gd.matrix() * err.e.matrix() - g.matrix()) < 1e-12);
    }
  }
  // abelian: e = x - x_d, xi_e = x' - x_d'
  const auto r3 = GroupTag::translation(3);
  const Eigen::Vector3d x(1, 2, 3), xd(0.5, -1, 2), v(0.1, 0.2, 0.3), vd(-1, 0, 1);
  Eigen::Matrix4d g = Eigen::Matrix4d::Identity(), gd = g;
  g.topRightCorner<3, 1>() = x;
  gd.topRightCorner<3, 1>() = xd;
  const auto err = group_error(algebra::GroupElement(r3, gd), {r3, Vector(vd)}, algebra::GroupElement(r3, g),
                               {r3, Vector(v)});
  CHECK((Eigen::Vector3d(err.e.matrix().topRightCorner(3, 1)) - (x - xd)).norm() == 0.0);
  CHECK((err.xi_e.coords - Vector(v - vd)).norm() == 0.0);
  CHECK(err.dist == doctest::Approx((x - xd).norm()));
  // chordal fallback on the cut locus
  const algebra::GroupElement flip(GroupTag::so(3), rot_z(M_PI));
  CHECK(group_distance(flip) == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("sphere control in special configurations")
{
  Gen gen(53);
  const SphereControllerConfig cfg(2.0, 1.0, 1.0);
  const Matrix Rd = gen.rotation3(), Z = Matrix::Zero(3, 3);
  const auto qd = homogeneous::SpherePoint::normalized(Rd.col(2));
  // on a static reference
  CHECK(sphere_control(cfg, Rd, Z, Z, qd, homogeneous::SphereTangent::zero(qd), 0.0).row().norm() < 1e-15);
  // at rest elsewhere: only the potential term remains
  const auto q = homogeneous::SpherePoint::normalized(Vector(gen.unit_vector(3)));
  const RowVector f = sphere_control(cfg, Rd, Z, Z, q, homogeneous::SphereTangent::zero(q), 0.0).row();
  const Eigen::Vector3d qv = q.coords(), qdv = qd.coords();
  const Eigen::RowVector3d expected = -2.0 * qdv.transpose() * (qv * qv.transpose() - Eigen::Matrix3d::Identity());
  CHECK(max_abs(f - expected) < 1e-15);
}

TEST_CASE("sphere closed loop follows the error dynamics")
{
  // scale D_t e' = k_P (I - e e^T) e_n - k_D e', observed by finite differences
  // along a closed-loop rollout.
  Gen gen(54);
  const double h = 1e-4;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 2;
    const auto ref = random_reference(gen, n + 1);
    const SphereControllerConfig cfg(gen.uniform(1, 4), gen.uniform(1, 4), gen.uniform(0.5, 2.0));
    const sim::SpherePlant plant{n, cfg.scale};
    const sim::SpherePolicy policy = [&](double t, const Vector & q, const Vector & qd) {
      return sphere_control_raw(cfg, ref.R(t), ref.dR(t), ref.ddR(t), q, qd);
    };
    sim::SphereState x{Vector(gen.unit_vector(n + 1)), Vector::Zero(n + 1)};
    x.q_dot = gen.tangent(x.q, 1.5);
    std::vector<Vector> e, ed;
    double t = 0.0;
    for (int k = 0; k < 400; ++k) {
      const auto err = sphere_error(ref.R(t), ref.dR(t), homogeneous::SpherePoint::normalized(x.q),
                                    homogeneous::project_tangent(homogeneous::SpherePoint::normalized(x.q), x.q_dot));
      e.push_back(err.e.coords());
      ed.push_back(err.e_dot.vec());
      x = sim::step_sphere(plant, x, t, h, policy);
      t += h;
    }
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < e.size(); ++i) {
      const Vector acc = homogeneous::covariant_derivative_along(e, ed, h, i);
      const Vector P = Eigen::VectorXd::Unit(n + 1, n) - e[i] * e[i](n);
      const Vector rhs = (cfg.k_P * P - cfg.k_D * ed[i]) / cfg.scale;
      worst = std::max(worst, (acc - rhs).norm() / (1.0 + ed[i].squaredNorm()));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("group control in special configurations")
{
  Gen gen(55);
  const auto so3 = GroupTag::so(3);
  Vector inertia(3);
  inertia << 1.0, 2.0, 3.0;
  const GroupControllerConfig cfg(algebra::AlgebraMetric::diagonal(so3, inertia),
                                  algebra::AlgebraMetric::identity(so3), navigation::GroupNavigation::defaults(so3));
  const algebra::GroupElement gd(so3, gen.rotation3());
  const algebra::AlgebraVector xid{so3, random_coords(gen, so3)};
  const algebra::AlgebraVector zero{so3, Vector::Zero(3)};
  const Vector tau = group_control(cfg, gd, xid, zero, gd, xid, 0.0).coords;
  const Vector expected = -algebra::ad_star(xid, cfg.inertia.flat(xid)).coords;
  CHECK((tau - expected).norm() < 1e-14);
}

TEST_CASE("abelian group control is PD plus feedforward")
{
  Gen gen(56);
  const auto r3 = GroupTag::translation(3);
  const Eigen::Matrix3d Kx = Eigen::Vector3d(1.0, 2.0, 0.5).asDiagonal();
  const double m = 1.7;
  const Eigen::Vector3d d(0.4, 0.9, 1.3);
  const GroupControllerConfig cfg(algebra::AlgebraMetric::diagonal(r3, Vector(Eigen::Vector3d::Constant(m))),
                                  algebra::AlgebraMetric::diagonal(r3, Vector(d)),
                                  navigation::GroupNavigation(r3, Kx, Eigen::Vector3d(1, 2, 3).asDiagonal()));
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector3d x = gen.normal_vector(3), xd = gen.normal_vector(3);
    const Eigen::Vector3d v = gen.normal_vector(3), vd = gen.normal_vector(3), ad = gen.normal_vector(3);
    Eigen::Matrix4d g = Eigen::Matrix4d::Identity(), gdm = g;
    g.topRightCorner<3, 1>() = x;
    gdm.topRightCorner<3, 1>() = xd;
    const Vector tau = group_control(cfg, algebra::GroupElement(r3, gdm), {r3, Vector(vd)}, {r3, Vector(ad)},
                                     algebra::GroupElement(r3, g), {r3, Vector(v)}, 0.0)
                         .coords;
    const Eigen::Vector3d classical = -2.0 * Kx * (x - xd) - d.asDiagonal() * (v - vd) + m * ad;
    CHECK((Eigen::Vector3d(tau) - classical).norm() <= 1e-14 * std::max(1.0, classical.norm()));
  }
}

TEST_CASE("group closed loop follows the error dynamics")
{
  // I xi_e' = ad*_{xi_e} I xi_e - zeta_P(e) - D xi_e along closed-loop rollouts.
  Gen gen(57);
  const double h = 1e-4;
  for (const auto & tag : {GroupTag::so(3), GroupTag::se3(), GroupTag::parse("R3xSO(3)")}) {
    const int d = tag.algebra_dim();
    Vector idiag = Vector::Zero(d), ddiag = Vector::Zero(d);
    for (int i = 0; i < d; ++i) {
      idiag(i) = gen.uniform(0.5, 2.0);
      ddiag(i) = gen.uniform(0.5, 2.0);
    }
    const GroupControllerConfig cfg(algebra::AlgebraMetric::diagonal(tag, idiag),
                                    algebra::AlgebraMetric::diagonal(tag, ddiag),
                                    navigation::GroupNavigation::defaults(tag));
    const Vector xi_d = random_coords(gen, tag, 0.5);
    const Eigen::MatrixXd gd0 = random_element(gen, tag);
    // one-parameter subgroup traversed at a varying speed, so xi_d' != 0
    auto ref_xi = [&](double t) { return Vector((1.0 + 0.3 * std::sin(t)) * xi_d); };
    auto ref_xi_dot = [&](double t) { return Vector(0.3 * std::cos(t) * xi_d); };
    auto ref_g = [&](double t) {
      const double s = t - 0.3 * std::cos(t) + 0.3;  // integral of the speed factor
      return Matrix(gd0 * taylor_expm(s * Eigen::MatrixXd(algebra::hat(tag, xi_d))));
    };
    const sim::GroupPlant plant{cfg.inertia, Vector()};
    const sim::GroupPolicy policy = [&](double t, const Matrix & g, const Vector & xi) {
      return group_control(cfg, algebra::GroupElement::unchecked(tag, ref_g(t)), {tag, ref_xi(t)},
                           {tag, ref_xi_dot(t)}, algebra::GroupElement::unchecked(tag, g), {tag, xi}, t)
        .coords;
    };
    sim::GroupState x{Matrix(random_element(gen, tag, 0.5)), Vector(random_coords(gen, tag, 1.0))};
    std::vector<Vector> xe;
    std::vector<algebra::GroupElement> es;
    double t = 0.0;
    for (int k = 0; k < 300; ++k) {
      const auto err =
        group_error(algebra::GroupElement::unchecked(tag, ref_g(t)), {tag, ref_xi(t)},
                    algebra::GroupElement::unchecked(tag, x.g), {tag, x.xi});
      xe.push_back(err.xi_e.coords);
      es.push_back(err.e);
      x = sim::step_group(plant, x, t, h, policy);
      t += h;
    }
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < xe.size(); ++i) {
      const Vector lhs = cfg.inertia.flat({tag, Vector((xe[i + 1] - xe[i - 1]) / (2 * h))}).coords;
      const algebra::AlgebraVector v{tag, xe[i]};
      const Vector rhs = algebra::ad_star(v, cfg.inertia.flat(v)).coords -
                         navigation::zeta_P(cfg.navigation, es[i]).coords - cfg.dissipation.flat(v).coords;
      worst = std::max(worst, (lhs - rhs).norm() / (1.0 + xe[i].squaredNorm()));
    }
    MESSAGE(tag.name() << ": worst error-dynamics residual " << worst);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("feedback transformation")
{
  Vector f(6);
  f << 1, 2, 3, 4, 5, 6;
  CHECK((feedback_transform(ForcedSystem{1.0, Vector(), false}, f) - f).norm() == 0.0);
  Vector gravity = Vector::Zero(6);
  gravity(2) = -9.81;
  const Vector comp = feedback_transform(ForcedSystem{1.0, gravity, false}, f);
  CHECK(comp(2) == doctest::Approx(3.0 + 9.81));
  CHECK((comp.head(2) - f.head(2)).norm() == 0.0);
  // a plant with metric c * kappa needs c times the force for the same acceleration
  CHECK((feedback_transform(ForcedSystem{2.5, Vector(), false}, f) - 2.5 * f).norm() < 1e-15);
  CHECK_THROWS_AS(feedback_transform(ForcedSystem{1.0, Vector(), true}, f), UnsupportedFeature);
  CHECK_THROWS_AS(feedback_transform(ForcedSystem{0.0, Vector(), false}, f), ConfigError);
}

TEST_CASE("zero error is reported exactly on the reference")
{
  Gen gen(58);
  int false_pos = 0, false_neg = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto ref = random_reference(gen, 3);
    const double t = gen.uniform(0, 5);
    const Matrix Rd = ref.R(t), Rdd = ref.dR(t);
    const Vector qd = Rd.col(2), qd_dot = Rdd.col(2);
    const bool exact = k % 2 == 0;
    Vector q = qd, v = qd_dot;
    if (!exact) {
      // perturb position, velocity or both by at least 1e-6
      const int which = k % 3;
      if (which != 1) {
        q = (qd + gen.tangent(qd, 1e-3)).normalized();
      }
      if (which != 0 || q == qd) {
        v = qd_dot + gen.tangent(q, 1e-3);
      }
      v -= q * q.dot(v);
    }
    const auto qp = homogeneous::SpherePoint::normalized(q);
    const auto err = sphere_error(Rd, Rdd, qp, homogeneous::SphereTangent(qp, v));
    if (exact && !err.on_reference()) {
      ++false_neg;
    }
    if (!exact && err.on_reference()) {
      ++false_pos;
    }
  }
  CHECK(false_pos == 0);
  CHECK(false_neg == 0);
}
