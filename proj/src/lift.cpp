#include "geotrack/lift.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace geotrack::lift {

namespace {

double sphere_distance(const Vector & p, const Vector & q)
{
  return 2.0 * std::atan2((p - q).norm(), (p + q).norm());
}

/// Rotation taking a to b and its derivative in b along v.
void geodesic_rotation_with_derivative(const Vector & a, const Vector & b, const Vector & v, Matrix & r, Matrix & dr)
{
  const int m = static_cast<int>(a.size());
  const double c = a.dot(b);
  const double s = 1.0 + c;
  const Matrix k = b * a.transpose() - a * b.transpose();
  const Matrix dk = v * a.transpose() - a * v.transpose();
  const double dc = a.dot(v);
  const Matrix k2 = k * k;
  r = Matrix::Identity(m, m) + k + k2 / s;
  dr = dk + (dk * k + k * dk) / s - k2 * (dc / (s * s));
}

}  // namespace

Matrix geodesic_rotation(const Vector & a, const Vector & b)
{
  if (a.size() != b.size()) {
    throw DomainError("geodesic_rotation: dimension mismatch");
  }
  const double s = 1.0 + a.dot(b);
  if (!(s > 1e-14)) {
    throw DomainError("geodesic_rotation: antipodal endpoints have no unique geodesic rotation");
  }
  const int m = static_cast<int>(a.size());
  const Matrix k = b * a.transpose() - a * b.transpose();
  return Matrix::Identity(m, m) + k + k * k / s;
}

Matrix half_turn(int n)
{
  Matrix c = Matrix::Identity(n + 1, n + 1);
  c(0, 0) = -1.0;
  c(n, n) = -1.0;
  return c;
}

Trivialization::Trivialization(int id, Matrix chart_rotation, double cap_half_angle)
  : id_(id), c_(std::move(chart_rotation)), cap_(cap_half_angle), split_(static_cast<int>(c_.rows()) - 1)
{
  const int m = static_cast<int>(c_.rows());
  if (m < 2 || c_.cols() != m) {
    throw DomainError("Trivialization: chart rotation must be square of size n + 1 >= 2");
  }
  (void)GroupElement(GroupTag::so(m), c_);
  if (!(cap_ >= 0.0 && cap_ < M_PI)) {
    throw DomainError("Trivialization: cap half-angle must lie in [0, pi)");
  }
  base_ = c_.col(m - 1);
  excluded_ = -base_;
}

double Trivialization::clearance(const Vector & q) const { return sphere_distance(q, excluded_) - cap_; }

void Trivialization::require_domain(const Vector & q, const char * op) const
{
  if (!contains(q)) {
    throw ChartError(std::string(op) + ": point outside the domain of chart " + std::to_string(id_));
  }
}

Matrix Trivialization::section_raw(const Vector & q) const
{
  const double s = 1.0 + base_.dot(q);
  const int m = static_cast<int>(q.size());
  const Matrix k = q * base_.transpose() - base_ * q.transpose();
  return (Matrix::Identity(m, m) + k + k * k / s) * c_;
}

Vector Trivialization::connection_raw(const Vector & q, const Vector & v) const
{
  Matrix r, dr;
  geodesic_rotation_with_derivative(base_, q, v, r, dr);
  const Matrix x = c_.transpose() * (r.transpose() * dr) * c_;
  return split_.stabilizer_part(algebra::vee(split_.tag(), x));
}

Matrix Trivialization::section(const SpherePoint & q) const
{
  require_domain(q.coords(), "section");
  return section_raw(q.coords());
}

Matrix Trivialization::section_derivative(const SphereTangent & v) const
{
  require_domain(v.base().coords(), "section_derivative");
  Matrix r, dr;
  geodesic_rotation_with_derivative(base_, v.base().coords(), v.vec(), r, dr);
  return dr * c_;
}

Matrix Trivialization::fiber(const GroupElement & g) const
{
  const int m = static_cast<int>(c_.rows());
  if (!(g.tag() == GroupTag::so(m))) {
    throw DomainError("fiber: expected SO(" + std::to_string(m) + "), got " + g.tag().name());
  }
  const Vector q = g.matrix().col(m - 1).normalized();
  require_domain(q, "fiber");
  return g.matrix().transpose() * section_raw(q);
}

GroupElement Trivialization::reconstruct(const SpherePoint & q, const Matrix & f) const
{
  require_domain(q.coords(), "reconstruct");
  return GroupElement::unchecked(split_.tag(), section_raw(q.coords()) * f.transpose());
}

AlgebraVector Trivialization::connection_form(const SphereTangent & v) const
{
  require_domain(v.base().coords(), "connection_form");
  return {split_.tag(), connection_raw(v.base().coords(), v.vec())};
}

std::vector<Trivialization> sphere_charts(int n, double cap_half_angle)
{
  std::vector<Trivialization> charts;
  charts.emplace_back(0, Matrix::Identity(n + 1, n + 1), cap_half_angle);
  charts.emplace_back(1, half_turn(n), cap_half_angle);
  return charts;
}

GroupElement initial_lift(const SpherePoint & q0)
{
  const int n = q0.dim();
  const Vector e = SpherePoint::origin(n).coords();
  const GroupTag tag = GroupTag::so(n + 1);
  if (1.0 + e.dot(q0.coords()) < 1e-12) {
    return GroupElement(tag, half_turn(n));
  }
  return GroupElement(tag, algebra::orthonormalize(geodesic_rotation(e, q0.coords())));
}

namespace {

/// Unit point and tangent velocity of the curve at t.
void curve_state(const SphereCurve & c, double t, Vector & q, Vector & v)
{
  q = c.position(t);
  q /= q.norm();
  v = c.velocity(t);
  v -= q * q.dot(v);
}

Vector connection_at(const Trivialization & chart, const SphereCurve & c, double t)
{
  Vector q, v;
  curve_state(c, t, q, v);
  return chart.connection_raw(q, v);
}

Vector dexpinv_right(const GroupTag & tag, const Vector & theta, const Vector & a)
{
  const Vector b = algebra::ad({tag, theta}, {tag, a}).coords;
  const Vector c = algebra::ad({tag, theta}, {tag, b}).coords;
  return a + 0.5 * b + c / 12.0;
}

/// One RKMK4 step of f' = f A(t) from ta to ta + h.
Matrix rkmk_step(const Trivialization & chart, const SphereCurve & c, const Matrix & f, double ta, double h)
{
  const GroupTag tag = GroupTag::so(chart.n() + 1);
  const Vector a1 = connection_at(chart, c, ta);
  const Vector a2 = connection_at(chart, c, ta + 0.5 * h);
  const Vector a4 = connection_at(chart, c, ta + h);
  const Vector k1 = a1;
  const Vector k2 = dexpinv_right(tag, 0.5 * h * k1, a2);
  const Vector k3 = dexpinv_right(tag, 0.5 * h * k2, a2);
  const Vector k4 = dexpinv_right(tag, h * k3, a4);
  const Vector theta = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  Matrix out = f * algebra::exp({tag, theta}).matrix();
  if (algebra::orthogonality_defect(out) > 1e-12) {
    out = algebra::orthonormalize(out);
  }
  return out;
}

Matrix fiber_interval(const Trivialization & chart, const SphereCurve & c, Matrix f, double ta, double tb, int substeps)
{
  const double h = (tb - ta) / substeps;
  for (int s = 0; s < substeps; ++s) {
    f = rkmk_step(chart, c, f, ta + s * h, h);
  }
  return f;
}

/// Smallest clearance over the stage points of [ta, tb]; also reports where.
double interval_clearance(const Trivialization & chart, const SphereCurve & c, double ta, double tb, int substeps,
                          double * where = nullptr)
{
  double worst = std::numeric_limits<double>::infinity();
  const int pts = 2 * substeps;
  for (int i = 0; i <= pts; ++i) {
    const double t = ta + (tb - ta) * i / pts;
    Vector q = c.position(t);
    q /= q.norm();
    const double cl = chart.clearance(q);
    if (cl < worst) {
      worst = cl;
      if (where) {
        *where = t;
      }
    }
  }
  return worst;
}

struct Grid
{
  double dt{0.0};
  int pad_lo{0};
  int pad_hi{0};
  int n{0};  // stored intervals
  std::vector<double> t;  // all points including padding

  int size() const { return static_cast<int>(t.size()); }
};

Grid make_grid(double t0, double t1, double dt_nominal, double tb, double te)
{
  if (!(t1 > t0)) {
    throw DomainError("lift: time range must be non-empty");
  }
  if (!(dt_nominal > 0.0)) {
    throw DomainError("lift: sample interval must be positive");
  }
  if (t0 < tb - 1e-12 || t1 > te + 1e-12) {
    throw DomainError("lift: time range exceeds the reference curve's domain");
  }
  Grid g;
  g.n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / dt_nominal - 1e-9)));
  g.dt = (t1 - t0) / g.n;
  g.pad_lo = t0 - 2.0 * g.dt >= tb ? 2 : 0;
  g.pad_hi = t1 + 2.0 * g.dt <= te ? 2 : 0;
  if (g.n + 1 + g.pad_lo + g.pad_hi < 5) {
    g.n = 4;
    g.dt = (t1 - t0) / g.n;
  }
  for (int k = -g.pad_lo; k <= g.n + g.pad_hi; ++k) {
    g.t.push_back(k == g.n ? t1 : t0 + k * g.dt);
  }
  return g;
}

/// Five-point derivatives at full index j with spacing `step` (in samples).
/// Central where possible, one-sided near the ends.
void stencil(const std::vector<Matrix> & x, int j, int step, double dt, Matrix & d1, Matrix & d2)
{
  const int m = static_cast<int>(x.size());
  auto at = [&](int o) -> const Matrix & { return x[static_cast<std::size_t>(j + o * step)]; };
  const double h = dt * step;
  if (j - 2 * step >= 0 && j + 2 * step < m) {
    d1 = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    d2 = (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h);
    return;
  }
  const bool left = j - 2 * step < 0;
  const double sgn = left ? 1.0 : -1.0;
  auto f = [&](int o) -> const Matrix & { return at(left ? o : -o); };
  if (j - step < 0 || j + step >= m) {
    d1 = sgn * (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) / (12.0 * h);
    d2 = (35.0 * f(0) - 104.0 * f(1) + 114.0 * f(2) - 56.0 * f(3) + 11.0 * f(4)) / (12.0 * h * h);
  } else {
    d1 = sgn * (-3.0 * f(-1) - 10.0 * f(0) + 18.0 * f(1) - 6.0 * f(2) + f(3)) / (12.0 * h);
    d2 = (11.0 * f(-1) - 20.0 * f(0) + 6.0 * f(1) + 4.0 * f(2) - f(3)) / (12.0 * h * h);
  }
}

/// Fills the stored samples and derivatives of `out` from the full padded
/// sample list; returns the Richardson error estimate.
double finish(const GroupTag & tag, const Grid & grid, const std::vector<Matrix> & all, std::vector<double> & times,
              std::vector<Matrix> & g, std::vector<Matrix> & gd, std::vector<Matrix> & gdd)
{
  const int m = grid.size();
  times.clear();
  g.clear();
  gd.clear();
  gdd.clear();
  double est = 0.0;
  for (int k = 0; k <= grid.n; ++k) {
    const int j = k + grid.pad_lo;
    Matrix d1, d2;
    stencil(all, j, 1, grid.dt, d1, d2);
    if (j - 4 >= 0 && j + 4 < m) {
      Matrix c1, c2;
      stencil(all, j, 2, grid.dt, c1, c2);
      est = std::max(est, (d1 - c1).cwiseAbs().maxCoeff() / 15.0);
      est = std::max(est, (d2 - c2).cwiseAbs().maxCoeff() / 15.0);
    }
    // Project onto the tangent structure of the group: g' = g xi^,
    // g'' = g (xi^2 + eta^) with xi, eta in the algebra.
    const Matrix & x = all[static_cast<std::size_t>(j)];
    const Matrix xinv = algebra::inverse(GroupElement::unchecked(tag, x)).matrix();
    const Matrix xi = algebra::hat(tag, algebra::vee(tag, xinv * d1));
    const Matrix xi2 = xi * xi;
    const Matrix eta = algebra::hat(tag, algebra::vee(tag, xinv * d2 - xi2));
    times.push_back(grid.t[static_cast<std::size_t>(j)]);
    g.push_back(x);
    gd.push_back(x * xi);
    gdd.push_back(x * (xi2 + eta));
  }
  return est;
}

}  // namespace

FiberSolution fiber_ivp(const Trivialization & chart, const SphereCurve & q_d, std::span<const double> times,
                        const Matrix & f0, int substeps)
{
  if (substeps < 1) {
    throw DomainError("fiber_ivp: substeps must be positive");
  }
  FiberSolution out;
  if (times.empty()) {
    return out;
  }
  Vector q0 = q_d.position(times[0]);
  q0 /= q0.norm();
  if (!chart.contains(q0)) {
    throw ChartError("fiber_ivp: initial point outside chart " + std::to_string(chart.id()));
  }
  out.f.push_back(f0);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    if (interval_clearance(chart, q_d, times[k], times[k + 1], substeps) <= 0.0) {
      out.switch_at = k;
      return out;
    }
    out.f.push_back(fiber_interval(chart, q_d, out.f.back(), times[k], times[k + 1], substeps));
  }
  return out;
}

void body_rates(const GroupTag & tag, const ReferenceSample & s, Vector & xi, Vector & xi_dot)
{
  const Matrix ginv = algebra::inverse(GroupElement::unchecked(tag, s.g)).matrix();
  const Matrix a = ginv * s.g_dot;
  xi = algebra::vee(tag, a);
  xi_dot = algebra::vee(tag, ginv * s.g_ddot - a * a);
}

ReferenceSample LiftedReference::at(double t) const
{
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  if (t < times_.front() - tol || t > times_.back() + tol) {
    throw DomainError("LiftedReference: time " + std::to_string(t) + " outside [" + std::to_string(times_.front()) +
                      ", " + std::to_string(times_.back()) + "]");
  }
  const std::size_t last = times_.size() - 2;
  const double u = (t - times_.front()) / dt_;
  std::size_t k = u <= 0.0 ? 0 : static_cast<std::size_t>(u);
  k = std::min(k, last);
  const double h = times_[k + 1] - times_[k];
  const double s = (t - times_[k]) / h;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  // Quintic Hermite basis (value, slope, curvature at each end) and its
  // first two derivatives in s.
  const double b0[3] = {1 - 10 * s3 + 15 * s4 - 6 * s5, -30 * s2 + 60 * s3 - 30 * s4, -60 * s + 180 * s2 - 120 * s3};
  const double b1[3] = {s - 6 * s3 + 8 * s4 - 3 * s5, 1 - 18 * s2 + 32 * s3 - 15 * s4, -36 * s + 96 * s2 - 60 * s3};
  const double b2[3] = {0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5, s - 4.5 * s2 + 6 * s3 - 2.5 * s4,
                        1 - 9 * s + 18 * s2 - 10 * s3};
  const double b3[3] = {0.5 * s3 - s4 + 0.5 * s5, 1.5 * s2 - 4 * s3 + 2.5 * s4, 3 * s - 12 * s2 + 10 * s3};
  const double b4[3] = {-4 * s3 + 7 * s4 - 3 * s5, -12 * s2 + 28 * s3 - 15 * s4, -24 * s + 84 * s2 - 60 * s3};
  const double b5[3] = {10 * s3 - 15 * s4 + 6 * s5, 30 * s2 - 60 * s3 + 30 * s4, 60 * s - 180 * s2 + 120 * s3};
  const double scale[3] = {1.0, 1.0 / h, 1.0 / (h * h)};
  ReferenceSample out;
  Matrix * dst[3] = {&out.g, &out.g_dot, &out.g_ddot};
  for (int d = 0; d < 3; ++d) {
    *dst[d] = (b0[d] * g_[k] + b1[d] * h * gd_[k] + b2[d] * h * h * gdd_[k] + b5[d] * g_[k + 1] +
               b4[d] * h * gd_[k + 1] + b3[d] * h * h * gdd_[k + 1]) *
              scale[d];
  }
  return out;
}

Vector LiftedReference::body_velocity(std::size_t i) const
{
  const Matrix ginv = algebra::inverse(GroupElement::unchecked(tag_, g_[i])).matrix();
  return algebra::vee(tag_, ginv * gd_[i]);
}

double LiftedReference::max_body_speed() const
{
  double best = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    best = std::max(best, body_velocity(i).norm());
  }
  return best;
}

double LiftedReference::horizontality_residual() const
{
  if (q_.empty()) {
    return 0.0;
  }
  const homogeneous::ReductiveSplit split(static_cast<int>(q_.front().size()) - 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    worst = std::max(worst, split.stabilizer_part(body_velocity(i)).norm());
  }
  return worst;
}

double LiftedReference::exactness_residual() const
{
  double worst = 0.0;
  for (std::size_t i = 0; i < q_.size(); ++i) {
    worst = std::max(worst, (g_[i].col(g_[i].cols() - 1) - q_[i]).norm());
  }
  return worst;
}

LiftedReference horizontal_lift(const SphereCurve & q_d, double t0, double t1, const GroupElement & g0,
                                const LiftOptions & options, const std::vector<Trivialization> & charts)
{
  const int n = q_d.dim();
  const GroupTag tag = GroupTag::so(n + 1);
  if (!(g0.tag() == tag)) {
    throw DomainError("horizontal_lift: g0 must lie in SO(" + std::to_string(n + 1) + ")");
  }
  if (charts.empty()) {
    throw DomainError("horizontal_lift: no charts");
  }
  if (options.substeps < 1) {
    throw DomainError("horizontal_lift: substeps must be positive");
  }
  {
    Vector q0 = q_d.position(t0);
    const Vector p0 = g0.matrix().col(n);
    if ((p0 - q0).norm() > 1e-9) {
      throw DomainError("horizontal_lift: g0 does not project to q_d(t0)");
    }
  }

  double dt = options.sample_interval;
  LiftedReference out;
  for (int attempt = 0;; ++attempt) {
    const Grid grid = make_grid(t0, t1, dt, q_d.t_begin(), q_d.t_end());
    const int m = grid.size();
    std::vector<Matrix> all(static_cast<std::size_t>(m));
    std::vector<int> chart_of(static_cast<std::size_t>(m), -1);
    int switches = 0;

    auto sweep = [&](int from, int to) {
      const int dir = to >= from ? 1 : -1;
      Vector q0 = q_d.position(grid.t[static_cast<std::size_t>(from)]);
      q0 /= q0.norm();
      std::size_t ci = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < charts.size(); ++c) {
        const double cl = charts[c].clearance(q0);
        if (cl > best) {
          best = cl;
          ci = c;
        }
      }
      if (!(best > 0.0)) {
        throw LiftError("horizontal_lift: no chart covers q_d(t)", grid.t[static_cast<std::size_t>(from)]);
      }
      Matrix f = charts[ci].fiber(g0);
      all[static_cast<std::size_t>(from)] = g0.matrix();
      chart_of[static_cast<std::size_t>(from)] = charts[ci].id();
      for (int j = from; j != to; j += dir) {
        const double ta = grid.t[static_cast<std::size_t>(j)];
        const double tb = grid.t[static_cast<std::size_t>(j + dir)];
        if (interval_clearance(charts[ci], q_d, ta, tb, options.substeps) < options.guard) {
          std::size_t pick = ci;
          double pick_cl = -std::numeric_limits<double>::infinity();
          double where = ta;
          for (std::size_t c = 0; c < charts.size(); ++c) {
            double w = ta;
            const double cl = interval_clearance(charts[c], q_d, ta, tb, options.substeps, &w);
            if (cl > pick_cl) {
              pick_cl = cl;
              pick = c;
              where = w;
            }
          }
          if (!(pick_cl > 0.0)) {
            throw LiftError("horizontal_lift: no chart covers q_d near t = " + std::to_string(where), where);
          }
          if (pick != ci) {
            ci = pick;
            f = charts[ci].fiber(GroupElement::unchecked(tag, all[static_cast<std::size_t>(j)]));
            ++switches;
          }
        }
        f = fiber_interval(charts[ci], q_d, f, ta, tb, options.substeps);
        Vector q = q_d.position(tb);
        q /= q.norm();
        all[static_cast<std::size_t>(j + dir)] = charts[ci].section_raw(q) * f.transpose();
        chart_of[static_cast<std::size_t>(j + dir)] = charts[ci].id();
      }
    };
    sweep(grid.pad_lo, m - 1);
    sweep(grid.pad_lo, 0);

    out = LiftedReference{};
    out.tag_ = tag;
    out.dt_ = grid.dt;
    out.switches_ = switches;
    out.deriv_err_ = finish(tag, grid, all, out.times_, out.g_, out.gd_, out.gdd_);
    for (int k = 0; k <= grid.n; ++k) {
      Vector q = q_d.position(out.times_[static_cast<std::size_t>(k)]);
      out.q_.push_back(q / q.norm());
      out.chart_.push_back(chart_of[static_cast<std::size_t>(k + grid.pad_lo)]);
    }
    if (!options.refine || out.deriv_err_ <= options.derivative_tolerance || attempt >= options.max_refinements) {
      return out;
    }
    dt *= 0.5;
  }
}

LiftedReference horizontal_lift(const SphereCurve & q_d, double t0, double t1, const GroupElement & g0,
                                const LiftOptions & options)
{
  return horizontal_lift(q_d, t0, t1, g0, options, sphere_charts(q_d.dim(), options.cap_half_angle));
}

LiftedReference lift_on_group(const GroupCurve & g_d, double t0, double t1, const LiftOptions & options)
{
  const GroupTag tag = g_d.tag();
  const bool sampled = std::isfinite(g_d.t_begin()) && std::isfinite(g_d.t_end());
  double dt = options.sample_interval;
  if (sampled) {
    const std::vector<double> ts = g_d.sample_times();
    if (ts.size() < 2) {
      throw DomainError("lift_on_group: sampled curve without a sample grid");
    }
    dt = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
  }
  LiftedReference out;
  for (int attempt = 0;; ++attempt) {
    const Grid grid = make_grid(t0, t1, dt, g_d.t_begin(), g_d.t_end());
    std::vector<Matrix> all;
    all.reserve(grid.t.size());
    for (double t : grid.t) {
      all.push_back(GroupElement(tag, g_d.position(t)).matrix());
    }
    out = LiftedReference{};
    out.tag_ = tag;
    out.dt_ = grid.dt;
    out.deriv_err_ = finish(tag, grid, all, out.times_, out.g_, out.gd_, out.gdd_);
    if (sampled || !options.refine || out.deriv_err_ <= options.derivative_tolerance ||
        attempt >= options.max_refinements) {
      return out;
    }
    dt *= 0.5;
  }
}

}  // namespace geotrack::lift
