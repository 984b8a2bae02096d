#include <atomic>
#include <set>

#include "support.hpp"

#include "geotrack/sim.hpp"

using namespace geotrack;
using namespace geotrack::sim;
using namespace gt_test;

namespace {

Vector origin(int n)
{
  Vector v = Vector::Zero(n + 1);
  v(n) = 1.0;
  return v;
}

double sphere_geodesic_error(int steps)
{
  // unit-speed geodesic q(t) = cos t q0 + sin t v0, integrated to t = 1
  const SpherePlant plant{2, 1.0};
  Vector q0(3), v0(3);
  q0 << 0.6, 0.0, 0.8;
  v0 << -0.8, 0.0, 0.6;
  SphereState x{q0, v0};
  const RowVector zero = RowVector::Zero(3);
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    x = step_sphere(plant, x, zero, h);
  }
  return (x.q - (std::cos(1.0) * q0 + std::sin(1.0) * v0)).norm();
}

SatelliteConfig short_satellite(double horizon)
{
  SatelliteConfig cfg;
  cfg.rollout.horizon = horizon;
  cfg.rollout.record_every = 10;
  return cfg;
}

RobotConfig short_robot(double horizon)
{
  RobotConfig cfg;
  cfg.rollout.horizon = horizon;
  cfg.rollout.record_every = 10;
  return cfg;
}

}  // namespace

TEST_CASE("sphere plant steps")
{
  const SpherePlant plant{2, 1.0};
  const SphereState rest{origin(2), Vector::Zero(3)};
  const auto still = step_sphere(plant, rest, RowVector::Zero(3), 1e-3);
  CHECK((still.q - rest.q).norm() == 0.0);
  CHECK(still.q_dot.norm() == 0.0);

  CHECK(sphere_geodesic_error(1000) < 1e-8);

  // fourth-order convergence to the closed-form geodesic
  const double e1 = sphere_geodesic_error(10), e2 = sphere_geodesic_error(20);
  MESSAGE("sphere geodesic error ratio " << e1 / e2);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);

  // doubling the metric scale halves the response to a force
  RowVector f(3);
  f << 0.3, -0.2, 0.0;
  const double h = 1e-3;
  const auto a1 = step_sphere(SpherePlant{2, 1.0}, rest, f, h);
  const auto a2 = step_sphere(SpherePlant{2, 2.0}, rest, f, h);
  CHECK(std::abs(a1.q_dot.norm() / a2.q_dot.norm() - 2.0) < 1e-6);

  CHECK_THROWS_AS(step_sphere(plant, rest, f, 0.0), DomainError);
}

TEST_CASE("group plant steps")
{
  const auto so3 = GroupTag::so(3);
  const double h = 1e-3;
  // isotropic inertia: xi is constant
  {
    const GroupPlant plant{algebra::AlgebraMetric::identity(so3), Vector()};
    GroupState x{Matrix::Identity(3, 3), Vector(Eigen::Vector3d(0.3, -0.5, 0.9))};
    const Vector xi0 = x.xi;
    for (int k = 0; k < 1000; ++k) {
      x = step_group(plant, x, Vector::Zero(3), h);
    }
    CHECK((x.xi - xi0).norm() < 1e-14);
    CHECK(max_abs(x.g - taylor_expm(Eigen::MatrixXd(algebra::hat(so3, xi0)))) < 1e-12);
  }
  // free asymmetric top: energy and spatial angular momentum are conserved
  {
    Vector J(3);
    J << 1.0, 2.0, 3.0;
    const GroupPlant plant{algebra::AlgebraMetric::diagonal(so3, J), Vector()};
    GroupState x{Matrix::Identity(3, 3), Vector(Eigen::Vector3d(0.7, -1.1, 0.4))};
    const double E0 = kinetic_energy(plant, x.xi);
    const Eigen::Vector3d L0 = Eigen::Matrix3d(x.g) * J.cwiseProduct(x.xi);
    for (int k = 0; k < 10000; ++k) {
      x = step_group(plant, x, Vector::Zero(3), h);
    }
    const Eigen::Vector3d L = Eigen::Matrix3d(x.g) * J.cwiseProduct(x.xi);
    CHECK(std::abs(kinetic_energy(plant, x.xi) - E0) < 1e-8);
    CHECK(std::abs(J.cwiseProduct(x.xi).norm() - J.cwiseProduct(Vector(Eigen::Vector3d(0.7, -1.1, 0.4))).norm()) <
          1e-8);
    CHECK((L - L0).norm() < 1e-8);
    CHECK(algebra::orthogonality_defect(x.g) < 1e-12);
  }
  // translations: x'' = tau / m exactly
  {
    const auto r3 = GroupTag::translation(3);
    const double m = 2.0;
    const GroupPlant plant{algebra::AlgebraMetric::diagonal(r3, Vector(Eigen::Vector3d::Constant(m))), Vector()};
    const Eigen::Vector3d tau(1.0, -2.0, 0.5), v0(0.1, 0.2, 0.3);
    GroupState x{Matrix::Identity(4, 4), Vector(v0)};
    const int steps = 100;
    for (int k = 0; k < steps; ++k) {
      x = step_group(plant, x, Vector(tau), 0.01);
    }
    const Eigen::Vector3d pos = v0 + 0.5 * tau / m;  // t = 1
    CHECK((Eigen::Vector3d(x.g.topRightCorner(3, 1)) - pos).norm() < 1e-13);
    CHECK((Eigen::Vector3d(x.xi) - (v0 + tau / m)).norm() < 1e-13);
  }
}

TEST_CASE("group integrator is fourth order")
{
  const auto so3 = GroupTag::so(3);
  Vector J(3);
  J << 1.0, 2.0, 3.0;
  const GroupPlant plant{algebra::AlgebraMetric::diagonal(so3, J), Vector()};
  auto run = [&](int steps) {
    GroupState x{Matrix::Identity(3, 3), Vector(Eigen::Vector3d(0.7, -1.1, 0.4))};
    for (int k = 0; k < steps; ++k) {
      x = step_group(plant, x, Vector::Zero(3), 2.0 / steps);
    }
    return x;
  };
  const auto exact = run(6400);
  const double e1 = max_abs(run(40).g - exact.g), e2 = max_abs(run(80).g - exact.g);
  MESSAGE("group integrator error ratio " << e1 / e2);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("sampling")
{
  SplitMix64 a(7), b(7);
  for (int i = 0; i < 10; ++i) {
    CHECK(a() == b());
  }
  CHECK(rollout_seed(1, 0) != rollout_seed(1, 1));
  CHECK(rollout_seed(1, 5) == rollout_seed(1, 5));
  CHECK(rollout_seed(2, 5) != rollout_seed(1, 5));

  SplitMix64 rng(11);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rmean = Eigen::Matrix3d::Zero();
  const int N = 20000;
  for (int i = 0; i < N; ++i) {
    const Vector q = sample_sphere(rng, 2);
    CHECK(std::abs(q.norm() - 1.0) < 1e-15);
    mean += Eigen::Vector3d(q);
    const Matrix r = sample_rotation(rng, 3);
    CHECK(algebra::orthogonality_defect(r) < 1e-14);
    CHECK(Eigen::Matrix3d(r).determinant() > 0.0);
    rmean += Eigen::Matrix3d(r);
  }
  // uniform measures have zero mean
  CHECK((mean / N).norm() < 0.03);
  CHECK(max_abs(rmean / N) < 0.03);

  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_sphere_state(rng, 3, 2.0);
    CHECK(std::abs(s.q.dot(s.q_dot)) < 1e-14);
    CHECK(s.q_dot.norm() <= 2.0 + 1e-14);
    CHECK(sample_ball(rng, 4, 0.5).norm() <= 0.5);
    const auto tag = GroupTag::parse("R3xSO(3)");
    const auto g = sample_group_state(rng, tag, 2.0, 3.0);
    CHECK_NOTHROW(algebra::GroupElement(tag, g.g));
    CHECK(g.xi.norm() <= 2.0 + 1e-14);
    CHECK(Eigen::Vector3d(g.g.block(0, 3, 3, 1)).norm() <= 3.0 + 1e-14);
  }
}

TEST_CASE("compact configuration coordinates")
{
  Gen gen(61);
  for (const auto & tag : sample_tags()) {
    const Matrix g = random_element(gen, tag);
    const Eigen::VectorXd c = compact_config(tag, g);
    CHECK(static_cast<std::size_t>(c.size()) == compact_names(tag, "").size());
    CHECK(max_abs(expand_config(tag, c) - g) == 0.0);
  }
  const auto names = compact_names(GroupTag::parse("R3xSO(3)"), "e_");
  CHECK(names.front() == "e_x");
  CHECK(names[3] == "e_r00");
  CHECK(names.back() == "e_r22");
  const auto two = compact_names(GroupTag::parse("SO(3)xSO(3)"), "");
  CHECK(std::set<std::string>(two.begin(), two.end()).size() == two.size());
}

TEST_CASE("parallel runner")
{
  std::atomic<int> calls{0};
  const auto out = run_parallel(37, 4, [&](int i) {
    ++calls;
    RolloutRecord r;
    r.id = i;
    return r;
  });
  CHECK(calls == 37);
  REQUIRE(out.size() == 37);
  for (int i = 0; i < 37; ++i) {
    CHECK(out[static_cast<std::size_t>(i)].id == i);
  }
  CHECK_THROWS_AS(run_parallel(8, 3,
                               [](int i) -> RolloutRecord {
                                 if (i == 5) {
                                   throw DomainError("job 5");
                                 }
                                 return {};
                               }),
                  DomainError);
}

TEST_CASE("convergence metrics")
{
  std::vector<double> t, e;
  for (int i = 0; i <= 1000; ++i) {
    t.push_back(0.01 * i);
    e.push_back(std::exp(-2.0 * t.back()));
  }
  const auto fit = fit_exponential_rate(t, e);
  CHECK(fit.fitted);
  CHECK(std::abs(fit.rate - 2.0) < 0.01);
  CHECK(fit.r_squared > 0.999);
  CHECK(convergence_time(t, e, 1e-2) == doctest::Approx(2.31).epsilon(1e-9));

  RolloutRecord grow;
  for (int i = 0; i <= 100; ++i) {
    RolloutSample s;
    s.t = 0.1 * i;
    s.surrogate = std::exp(0.3 * s.t) * 1e-3;
    s.lyapunov = s.surrogate;
    grow.samples.push_back(s);
  }
  const auto sum = convergence_metrics(grow, RolloutOptions{});
  CHECK_FALSE(sum.converged);
  CHECK(sum.lyapunov_violations == 100);

  std::vector<RolloutRecord> batch(4);
  batch[0].summary.converged = true;
  batch[0].summary.convergence_time = 3.0;
  batch[1].summary.converged = true;
  batch[1].summary.convergence_time = 5.0;
  const auto agg = summarize(batch);
  CHECK(agg.converged == 2);
  CHECK(agg.fraction == 0.5);
  CHECK(agg.median_convergence_time == 4.0);
  CHECK(agg.max_convergence_time == 5.0);
}

TEST_CASE("satellite rollouts")
{
  const auto sc = make_satellite(short_satellite(8.0));
  const RolloutOptions opt = short_satellite(8.0).rollout;

  // starting on the reference stays on it
  const auto on = sphere_rollout(sc, sphere_reference_state(*sc.reference, 0.0), opt);
  double worst = 0.0;
  for (const auto & s : on.samples) {
    worst = std::max(worst, s.surrogate);
  }
  CHECK(worst < 1e-6);
  CHECK(on.summary.invariants_ok);

  // antipodal start at rest: reported, not asserted
  SphereState anti{-sphere_reference_state(*sc.reference, 0.0).q, Vector::Zero(3)};
  auto far = make_satellite(short_satellite(30.0));
  const auto slow = sphere_rollout(far, anti, short_satellite(30.0).rollout);
  MESSAGE("antipodal start: converged " << slow.summary.converged << " at t = " << slow.summary.convergence_time);

  // plant invariants and Lyapunov decrease on a small random batch
  BatchConfig b;
  b.count = 6;
  b.threads = 2;
  const auto batch = sphere_batch(sc, b, opt);
  for (const auto & r : batch) {
    CHECK(r.summary.invariants_ok);
    CHECK(r.summary.lyapunov_violations == 0);
    CHECK(r.samples.front().t == 0.0);
    CHECK(r.samples.back().t == doctest::Approx(8.0));
  }
  // determinism across worker counts
  b.threads = 1;
  const auto again = sphere_batch(sc, b, opt);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i].seed == again[i].seed);
    CHECK(batch[i].samples.back().state == again[i].samples.back().state);
  }
}

TEST_CASE("error trajectories do not depend on the start time")
{
  // Same error state at t0 = 0 and t0 = 1.3 on a time-varying reference.
  SatelliteConfig cfg = short_satellite(6.0);
  const auto sc0 = make_satellite(cfg);
  cfg.rollout.t0 = 1.3;
  const auto sc1 = make_satellite(cfg);
  RolloutOptions o0 = short_satellite(6.0).rollout, o1 = o0;
  o1.t0 = 1.3;

  Vector e0(3), ed0(3);
  e0 << 0.6, 0.0, 0.8;
  ed0 << 0.2, 0.5, -0.15;
  auto state_for = [&](const lift::LiftedReference & ref, double t) {
    const auto s = ref.at(t);
    SphereState x;
    x.q = s.g * e0;
    // e' = R^T q' + R'^T q  =>  q' = R (e' - R'^T q)
    x.q_dot = s.g * (ed0 - s.g_dot.transpose() * x.q);
    return x;
  };
  const auto r0 = sphere_rollout(sc0, state_for(*sc0.reference, 0.0), o0);
  const auto r1 = sphere_rollout(sc1, state_for(*sc1.reference, 1.3), o1);
  REQUIRE(r0.samples.size() == r1.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < r0.samples.size(); ++i) {
    worst = std::max(worst, (r0.samples[i].error - r1.samples[i].error).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("robot rollouts")
{
  const auto cfg = short_robot(6.0);
  const auto sc = make_robot(cfg);
  const auto on = group_rollout(sc, group_reference_state(*sc.reference, 0.0), cfg.rollout);
  double worst = 0.0;
  for (const auto & s : on.samples) {
    worst = std::max(worst, s.surrogate);
  }
  CHECK(worst < 1e-6);

  // Half-turn attitude error about a generic axis converges. About a
  // principal axis of K_R the start is itself a critical point of the
  // potential and the reference spin keeps the error on an invariant set of
  // saddles; that case is only reported.
  const auto long_cfg = short_robot(20.0);
  const auto long_sc = make_robot(long_cfg);
  auto half_turn_start = [&](const Eigen::Vector3d & axis) {
    auto x = group_reference_state(*long_sc.reference, 0.0);
    x.g.block(4, 4, 3, 3) = Eigen::Matrix3d(x.g.block(4, 4, 3, 3)) * rodrigues(M_PI * axis.normalized());
    x.xi.setZero();
    return group_rollout(long_sc, x, long_cfg.rollout);
  };
  const auto flip = half_turn_start(Eigen::Vector3d(1.0, 0.7, 0.4));
  MESSAGE("half-turn start: converged " << flip.summary.converged << " at t = " << flip.summary.convergence_time);
  CHECK(flip.summary.converged);
  const auto saddle = half_turn_start(Eigen::Vector3d::UnitX());
  MESSAGE("half-turn about a principal axis: converged " << saddle.summary.converged << ", final error "
                                                          << saddle.summary.final_error);
  CHECK(flip.summary.invariants_ok);
}

TEST_CASE("pull-back torque realizes sphere forces on the rigid body")
{
  // R^T f^T = e3 x tau + component along e3 that the body cannot feel
  Gen gen(62);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Matrix3d R = gen.rotation3();
    const Eigen::Vector3d y = R.col(2);
    const Eigen::RowVector3d f = gen.tangent(y).transpose();
    const Eigen::Vector3d tau = pull_back_torque(R, f);
    CHECK(std::abs(tau(2)) < 1e-15);
    // the induced output acceleration direction R (tau x e3) equals f^T
    CHECK((R * tau.cross(Eigen::Vector3d::UnitZ()) - f.transpose()).norm() < 1e-14);
  }
}
