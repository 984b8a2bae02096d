#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "geotrack/sim.hpp"

namespace geotrack::sim {

namespace {

/// Remembers the last two reference evaluations; RK4 stages share times.
class ReferenceCache
{
public:
  explicit ReferenceCache(const lift::LiftedReference & ref) : ref_(ref) {}

  struct Entry
  {
    double t{std::numeric_limits<double>::quiet_NaN()};
    lift::ReferenceSample s;
    Vector xi, xi_dot;
  };

  const Entry & get(double t, bool rates)
  {
    for (auto & e : slots_) {
      if (e.t == t) {
        return e;
      }
    }
    Entry & e = slots_[next_];
    next_ = 1 - next_;
    e.t = t;
    e.s = ref_.at(t);
    if (rates) {
      lift::body_rates(ref_.tag(), e.s, e.xi, e.xi_dot);
    }
    return e;
  }

private:
  const lift::LiftedReference & ref_;
  Entry slots_[2];
  int next_{0};
};

void check_options(const RolloutOptions & opt, const lift::LiftedReference & ref)
{
  if (!(opt.h > 0.0)) {
    throw DomainError("rollout: h must be positive");
  }
  if (!(opt.horizon > 0.0)) {
    throw DomainError("rollout: horizon must be positive");
  }
  if (opt.record_every < 1) {
    throw DomainError("rollout: record_every must be at least 1");
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(opt.t0 + opt.horizon));
  if (opt.t0 < ref.t_begin() - tol || opt.t0 + opt.horizon > ref.t_end() + tol) {
    throw DomainError("rollout: reference does not cover the rollout horizon");
  }
}

/// Online bookkeeping shared by both plant families.
struct Monitor
{
  const RolloutOptions & opt;
  RolloutSummary sum;
  double prev_v{std::numeric_limits<double>::quiet_NaN()};
  long last_bad{-1};

  void observe(long k, double error, double v)
  {
    if (!(error < opt.threshold)) {
      last_bad = k;
    }
    if (k == 0) {
      sum.initial_error = error;
    }
    sum.max_error = std::max(sum.max_error, error);
    sum.final_error = error;
    if (k > 0) {
      const double inc = v - prev_v;
      sum.max_lyapunov_increase = std::max(sum.max_lyapunov_increase, inc);
      if (inc > opt.lyapunov_tolerance) {
        ++sum.lyapunov_violations;
      }
    }
    prev_v = v;
  }

  void invariant(double defect, double t, const char * what)
  {
    sum.max_invariant_defect = std::max(sum.max_invariant_defect, std::isfinite(defect) ? defect : HUGE_VAL);
    if (sum.invariants_ok && !(defect <= opt.invariant_tolerance)) {
      sum.invariants_ok = false;
      sum.invariant_message = std::string(what) + " violated at t = " + std::to_string(t);
    }
  }

  void finish(RolloutRecord & rec, long steps)
  {
    const double t_end = opt.t0 + steps * opt.h;
    sum.converged = last_bad < steps && sum.invariants_ok;
    if (sum.converged) {
      sum.convergence_time = last_bad < 0 ? opt.t0 : std::min(t_end, opt.t0 + (last_bad + 1) * opt.h);
      std::vector<double> t, e;
      for (const auto & s : rec.samples) {
        t.push_back(s.t);
        e.push_back(s.surrogate);
      }
      const RateFit fit = fit_exponential_rate(t, e, opt.fit_ceiling, opt.fit_floor);
      sum.rate_fitted = fit.fitted;
      sum.fit_points = fit.points;
      if (fit.fitted) {
        sum.rate = fit.rate;
        sum.r_squared = fit.r_squared;
      }
    }
    rec.summary = sum;
  }
};

long step_count(const RolloutOptions & opt)
{
  return std::max(1L, std::lround(opt.horizon / opt.h));
}

}  // namespace

SphereState sphere_reference_state(const lift::LiftedReference & ref, double t)
{
  const lift::ReferenceSample s = ref.at(t);
  const int n = static_cast<int>(s.g.rows()) - 1;
  Vector q = s.g.col(n);
  q /= q.norm();
  Vector v = s.g_dot.col(n);
  v -= q * q.dot(v);
  return {q, v};
}

GroupState group_reference_state(const lift::LiftedReference & ref, double t)
{
  const lift::ReferenceSample s = ref.at(t);
  Vector xi, xi_dot;
  lift::body_rates(ref.tag(), s, xi, xi_dot);
  return {s.g, xi};
}

RolloutRecord sphere_rollout(const SphereScenario & sc, const SphereState & x0, const RolloutOptions & opt, int id,
                             std::uint64_t seed)
{
  const lift::LiftedReference & ref = *sc.reference;
  check_options(opt, ref);
  const int n = sc.plant.n;
  if (x0.q.size() != n + 1 || ref.tag() != GroupTag::so(n + 1)) {
    throw DomainError("sphere_rollout: dimension mismatch between plant, state and reference");
  }
  const auto & cfg = sc.controller;
  ReferenceCache cache(ref);
  const SpherePolicy policy = [&](double t, const Vector & q, const Vector & v) {
    const auto & e = cache.get(t, false);
    return control::sphere_control_raw(cfg, e.s.g, e.s.g_dot, e.s.g_ddot, q, v);
  };

  RolloutRecord rec;
  rec.id = id;
  rec.seed = seed;
  Monitor mon{opt, {}};
  const long steps = step_count(opt);
  SphereState x = x0;
  for (long k = 0;; ++k) {
    const double t = opt.t0 + k * opt.h;
    const auto & r = cache.get(t, false);
    const Matrix & rd = r.s.g;
    Vector e = rd.transpose() * x.q;
    e /= e.norm();
    Vector ed = rd.transpose() * x.q_dot + r.s.g_dot.transpose() * x.q;
    ed -= e * e.dot(ed);
    Vector qd = rd.col(n);
    qd /= qd.norm();
    const double dist = 2.0 * std::atan2((x.q - qd).norm(), (x.q + qd).norm());
    const double vel = std::sqrt(cfg.scale) * ed.norm();
    const double lyap = cfg.k_P * (1.0 - e(n)) + 0.5 * cfg.scale * ed.squaredNorm();
    mon.observe(k, dist + vel, lyap);
    mon.invariant(std::max(std::abs(x.q.norm() - 1.0), std::abs(x.q.dot(x.q_dot))), t, "sphere state invariant");
    if (k % opt.record_every == 0 || k == steps) {
      RolloutSample s;
      s.t = t;
      s.state.resize(2 * (n + 1));
      s.state << Eigen::VectorXd(x.q), Eigen::VectorXd(x.q_dot);
      Vector qd_dot = r.s.g_dot.col(n);
      qd_dot -= qd * qd.dot(qd_dot);
      s.reference.resize(2 * (n + 1));
      s.reference << Eigen::VectorXd(qd), Eigen::VectorXd(qd_dot);
      s.control = Eigen::VectorXd(policy(t, x.q, x.q_dot).transpose());
      s.error.resize(2 * (n + 1));
      s.error << Eigen::VectorXd(e), Eigen::VectorXd(ed);
      s.config_error = dist;
      s.velocity_error = vel;
      s.surrogate = dist + vel;
      s.lyapunov = lyap;
      rec.samples.push_back(std::move(s));
    }
    if (k == steps || !mon.sum.invariants_ok) {
      mon.finish(rec, k == steps ? steps : k);
      return rec;
    }
    x = step_sphere(sc.plant, x, t, opt.h, policy);
  }
}

RolloutRecord group_rollout(const GroupScenario & sc, const GroupState & x0, const RolloutOptions & opt, int id,
                            std::uint64_t seed)
{
  const lift::LiftedReference & ref = *sc.reference;
  check_options(opt, ref);
  const GroupTag & tag = sc.plant.tag();
  if (!(ref.tag() == tag) || !(sc.controller.inertia.tag() == tag)) {
    throw DomainError("group_rollout: plant, controller and reference groups differ");
  }
  const auto & cfg = sc.controller;
  ReferenceCache cache(ref);
  const GroupPolicy policy = [&](double t, const Matrix & g, const Vector & xi) -> Vector {
    const auto & e = cache.get(t, true);
    const algebra::AlgebraCovector tau =
      control::group_control(cfg, algebra::GroupElement::unchecked(tag, e.s.g), {tag, e.xi}, {tag, e.xi_dot},
                             algebra::GroupElement::unchecked(tag, g), {tag, xi}, t);
    return control::feedback_transform(sc.forcing, tau.coords);
  };

  RolloutRecord rec;
  rec.id = id;
  rec.seed = seed;
  Monitor mon{opt, {}};
  const long steps = step_count(opt);
  GroupState x = x0;
  for (long k = 0;; ++k) {
    const double t = opt.t0 + k * opt.h;
    const auto & r = cache.get(t, true);
    const control::GroupErrorState err =
      control::group_error(cfg, algebra::GroupElement::unchecked(tag, r.s.g), {tag, r.xi},
                           algebra::GroupElement::unchecked(tag, x.g), {tag, x.xi});
    const double vel = cfg.inertia.norm(err.xi_e);
    mon.observe(k, err.dist + vel, err.lyapunov);
    double defect = x.g.allFinite() && x.xi.allFinite() ? 0.0 : HUGE_VAL;
    for (int i = 0; i < tag.factor_count(); ++i) {
      const auto & f = tag.factor(i);
      if (f.kind != algebra::FactorKind::Translation) {
        const int m = f.kind == algebra::FactorKind::SpecialOrthogonal ? f.dim : 3;
        const int o = tag.matrix_offset(i);
        defect = std::max(defect, algebra::orthogonality_defect(x.g.block(o, o, m, m)));
      }
    }
    mon.invariant(defect, t, "group orthonormality");
    if (k % opt.record_every == 0 || k == steps) {
      RolloutSample s;
      s.t = t;
      const Eigen::VectorXd gc = compact_config(tag, x.g);
      s.state.resize(gc.size() + x.xi.size());
      s.state << gc, Eigen::VectorXd(x.xi);
      const Eigen::VectorXd rc = compact_config(tag, r.s.g);
      s.reference.resize(rc.size() + r.xi.size());
      s.reference << rc, Eigen::VectorXd(r.xi);
      s.control = Eigen::VectorXd(policy(t, x.g, x.xi));
      const Eigen::VectorXd ec = compact_config(tag, err.e.matrix());
      s.error.resize(ec.size() + err.xi_e.coords.size());
      s.error << ec, Eigen::VectorXd(err.xi_e.coords);
      s.config_error = err.dist;
      s.velocity_error = vel;
      s.surrogate = err.dist + vel;
      s.lyapunov = err.lyapunov;
      rec.samples.push_back(std::move(s));
    }
    if (k == steps || !mon.sum.invariants_ok) {
      mon.finish(rec, k == steps ? steps : k);
      return rec;
    }
    x = step_group(sc.plant, x, t, opt.h, policy);
  }
}

std::vector<RolloutRecord> run_parallel(int count, int threads, const std::function<RolloutRecord(int)> & job)
{
  std::vector<RolloutRecord> out(static_cast<std::size_t>(std::max(0, count)));
  if (count <= 0) {
    return out;
  }
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next++; i < count; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
    for (auto & th : pool) {
      th.join();
    }
  }
  for (auto & e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return out;
}

std::vector<RolloutRecord> sphere_batch(const SphereScenario & sc, const BatchConfig & batch, const RolloutOptions & opt)
{
  return run_parallel(batch.count, batch.threads, [&](int i) {
    const std::uint64_t seed = rollout_seed(batch.seed, i);
    SplitMix64 rng(seed);
    const SphereState x0 = sample_sphere_state(rng, sc.plant.n, batch.v_max);
    return sphere_rollout(sc, x0, opt, i, seed);
  });
}

std::vector<RolloutRecord> group_batch(const GroupScenario & sc, const BatchConfig & batch, const RolloutOptions & opt)
{
  return run_parallel(batch.count, batch.threads, [&](int i) {
    const std::uint64_t seed = rollout_seed(batch.seed, i);
    SplitMix64 rng(seed);
    const GroupState x0 = sample_group_state(rng, sc.plant.tag(), batch.v_max, batch.position_radius);
    return group_rollout(sc, x0, opt, i, seed);
  });
}

}  // namespace geotrack::sim
