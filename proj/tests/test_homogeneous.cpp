#include "support.hpp"

#include "geotrack/homogeneous.hpp"

using namespace geotrack;
using namespace geotrack::homogeneous;
using namespace gt_test;
using algebra::GroupElement;
using algebra::GroupTag;

namespace {

SpherePoint point(const Eigen::VectorXd & v) { return SpherePoint::normalized(Vector(v)); }

Vector e(int n, int k)
{
  Vector v = Vector::Zero(n + 1);
  v(k) = 1.0;
  return v;
}

/// Two-parameter family E(r, s) = exp(phi(r) A) exp(psi(s) B) p with
/// closed-form partial derivatives.
struct Family
{
  Eigen::Matrix3d A, B;
  Eigen::Vector3d p;
  double a1, a2, b1, b2;

  double phi(double r) const { return a1 * r + a2 * r * r; }
  double dphi(double r) const { return a1 + 2 * a2 * r; }
  double psi(double s) const { return b1 * s + b2 * std::sin(s); }
  double dpsi(double s) const { return b1 + b2 * std::cos(s); }
  double ddpsi(double s) const { return -b2 * std::sin(s); }

  Eigen::Matrix3d Er(double r) const { return taylor_expm(phi(r) * A); }
  Eigen::Matrix3d Es(double s) const { return taylor_expm(psi(s) * B); }
  Eigen::Vector3d E(double r, double s) const { return Er(r) * Es(s) * p; }
  Eigen::Vector3d Er_(double r, double s) const { return dphi(r) * A * E(r, s); }
  Eigen::Vector3d Es_(double r, double s) const { return Er(r) * dpsi(s) * B * Es(s) * p; }
  Eigen::Vector3d Err(double r, double s) const { return (2 * a2 * A + dphi(r) * dphi(r) * A * A) * E(r, s); }
  Eigen::Vector3d Ers(double r, double s) const { return dphi(r) * A * Es_(r, s); }
  Eigen::Vector3d Ess(double r, double s) const
  {
    return Er(r) * (ddpsi(s) * B + dpsi(s) * dpsi(s) * B * B) * Es(s) * p;
  }
};

Family random_family(Gen & gen)
{
  Family f;
  f.A = skew(gen.normal_vector(3));
  f.B = skew(gen.normal_vector(3));
  f.p = gen.unit_vector(3);
  f.a1 = gen.uniform();
  f.a2 = gen.uniform(-0.5, 0.5);
  f.b1 = gen.uniform();
  f.b2 = gen.uniform(-0.5, 0.5);
  return f;
}

}  // namespace

TEST_CASE("points and tangents validate their invariants")
{
  Vector v(3);
  v << 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(SpherePoint{v}, DomainError);
  CHECK(SpherePoint::normalized(v).coords().norm() == doctest::Approx(1.0).epsilon(1e-15));
  const auto o = SpherePoint::origin(2);
  CHECK(o.dim() == 2);
  CHECK(o.coords()(2) == 1.0);
  CHECK_THROWS_AS(SphereTangent(o, e(2, 2)), DomainError);
  CHECK_NOTHROW(SphereTangent(o, e(2, 0)));
}

TEST_CASE("rotation action on points and tangents")
{
  Gen gen(21);
  const auto tag = GroupTag::so(3);
  const auto I = GroupElement::identity(tag);
  const auto q = point(gen.unit_vector(3));
  CHECK((act(I, q).coords() - q.coords()).norm() == 0.0);

  const GroupElement rz(tag, rot_z(M_PI / 2));
  CHECK((act(rz, SpherePoint(e(2, 0))).coords() - e(2, 1)).norm() < 1e-15);

  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + k % 5;
    const GroupElement r(GroupTag::so(n + 1), gen.rotation(n + 1));
    const auto p = point(gen.unit_vector(n + 1));
    const auto s = point(gen.unit_vector(n + 1));
    CHECK(std::abs(act(r, p).coords().norm() - 1.0) < 1e-14);

    const SphereTangent v(p, Vector(gen.tangent(p.coords())));
    const SphereTangent w(p, Vector(gen.tangent(p.coords())));
    const double before = inner(v, w);
    const double after = inner(act_tangent(r, v), act_tangent(r, w));
    CHECK(std::abs(after - before) <= 1e-12 * std::max(1.0, std::abs(before)));

    const auto z = act_tangent(r, SphereTangent::zero(p));
    CHECK(z.vec().norm() == 0.0);
    CHECK((z.base().coords() - act(r, p).coords()).norm() < 1e-15);

    const double d = geodesic_distance(p, s);
    CHECK(std::abs(geodesic_distance(act(r, p), act(r, s)) - d) < 1e-10);
  }
}

TEST_CASE("flat and sharp commute with the action")
{
  // rho_flat(dPsi_R(rho_sharp(f))) = f R^T
  Gen gen(22);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Matrix3d r = gen.rotation3();
    const auto q = point(gen.unit_vector(3));
    const RowVector f = gen.tangent(q.coords()).transpose();
    const SphereCovector cov(q, f);
    const auto moved = flat(act_tangent(GroupElement(GroupTag::so(3), r), sharp(cov)));
    CHECK(max_abs(moved.row() - f * r.transpose()) < 1e-12);
  }
}

TEST_CASE("tangent projection")
{
  Gen gen(23);
  for (int k = 0; k < 200; ++k) {
    const auto q = point(gen.unit_vector(4));
    CHECK(project_tangent(q, q.coords()).vec().norm() < 1e-15);
    const Vector v = gen.tangent(q.coords());
    CHECK((project_tangent(q, v).vec() - v).norm() < 1e-15);
    const Vector w = gen.normal_vector(4);
    const Vector once = project_tangent(q, w).vec();
    CHECK((project_tangent(q, once).vec() - once).norm() < 1e-14);
  }
}

TEST_CASE("geodesic distance")
{
  Gen gen(24);
  const auto q = point(gen.unit_vector(3));
  CHECK(geodesic_distance(q, q) == 0.0);
  CHECK(geodesic_distance(SpherePoint(e(2, 2)), SpherePoint(Vector(-e(2, 2)))) == doctest::Approx(M_PI));
  CHECK(geodesic_distance(SpherePoint(e(2, 0)), SpherePoint(e(2, 1))) == doctest::Approx(M_PI / 2));
  // accurate for tiny separations where acos(p . q) loses everything
  Vector a = e(2, 2), b = e(2, 2);
  b(0) = 1e-10;
  CHECK(geodesic_distance(SpherePoint(a), SpherePoint::normalized(b)) == doctest::Approx(1e-10).epsilon(1e-6));
}

TEST_CASE("covariant derivative along sampled curves")
{
  const double h = 1e-4;
  // constant curve, constant tangent field
  {
    std::vector<Vector> c(3, e(2, 2)), x(3, e(2, 0));
    CHECK(covariant_derivative_along(c, x, h, 1).norm() == 0.0);
  }
  // unit-speed great circle: its velocity is parallel
  {
    std::vector<Vector> c, x;
    for (int i = 0; i < 3; ++i) {
      const double t = 0.4 + (i - 1) * h;
      Vector q(3), v(3);
      q << std::cos(t), std::sin(t), 0.0;
      v << -std::sin(t), std::cos(t), 0.0;
      c.push_back(q);
      x.push_back(v);
    }
    CHECK(covariant_derivative_along(c, x, h, 1).norm() < 1e-8);
  }
  // analytic curve vs. closed form (I - q q^T) d/dt v
  Gen gen(25);
  for (int k = 0; k < 20; ++k) {
    const Family f = random_family(gen);
    const double t = gen.uniform();
    std::vector<Vector> c, x;
    for (int i = -1; i <= 1; ++i) {
      const double ti = t + i * h;
      c.push_back(Vector(f.E(ti, 0.3)));
      x.push_back(Vector(f.Er_(ti, 0.3)));
    }
    const Eigen::Vector3d q = f.E(t, 0.3);
    const Eigen::Vector3d exact = (Eigen::Matrix3d::Identity() - q * q.transpose()) * f.Err(t, 0.3);
    CHECK((covariant_derivative_along(c, x, h, 1) - Vector(exact)).norm() < 1e-6);
  }
}

TEST_CASE("diagonal curve acceleration splits into partial covariant derivatives")
{
  Gen gen(26);
  const double h = 1e-4;
  for (int k = 0; k < 20; ++k) {
    const Family f = random_family(gen);
    const double t = gen.uniform();
    std::vector<Vector> c, x;
    for (int i = -1; i <= 1; ++i) {
      const double ti = t + i * h;
      c.push_back(Vector(f.E(ti, ti)));
      x.push_back(Vector(f.Er_(ti, ti) + f.Es_(ti, ti)));
    }
    const Eigen::Vector3d q = f.E(t, t);
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - q * q.transpose();
    const Eigen::Vector3d rhs = P * (f.Err(t, t) + 2 * f.Ers(t, t) + f.Ess(t, t));
    CHECK((covariant_derivative_along(c, x, h, 1) - Vector(rhs)).norm() < 1e-4);
  }
}

TEST_CASE("reductive split of so(n+1)")
{
  const auto s2 = reductive_split(2);
  CHECK(s2.stabilizer_basis().size() == 1);
  CHECK(s2.horizontal_basis().size() == 2);
  const auto s1 = reductive_split(1);
  CHECK(s1.stabilizer_basis().empty());
  CHECK(s1.horizontal_basis().size() == 1);

  Gen gen(27);
  for (int n = 1; n <= 6; ++n) {
    const auto split = reductive_split(n);
    const auto tag = split.tag();
    for (int k = 0; k < 20; ++k) {
      const Vector xi = random_coords(gen, tag);
      const Vector hor = split.horizontal_part(xi);
      const Vector ver = split.stabilizer_part(xi);
      CHECK((hor + ver - xi).norm() < 1e-15);
      CHECK(split.stabilizer_part(hor).norm() < 1e-15);
      CHECK(split.horizontal_part(ver).norm() < 1e-15);
      // f fixes the origin, q moves it along u
      const Eigen::MatrixXd H = algebra::hat(tag, hor), F = algebra::hat(tag, ver);
      CHECK((F * Eigen::VectorXd(split.origin().coords())).norm() < 1e-15);
      const Vector u = split.horizontal_coords(xi);
      CHECK((H * Eigen::VectorXd(split.origin().coords())).head(n).isApprox(Eigen::VectorXd(u), 1e-14));
      CHECK((split.embed_horizontal(u) - hor).norm() < 1e-15);
    }
  }
}
