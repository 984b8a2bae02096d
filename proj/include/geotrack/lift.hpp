#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "geotrack/algebra.hpp"
#include "geotrack/homogeneous.hpp"
#include "geotrack/reference.hpp"

/// Horizontal lifts through SO(n+1) -> S^n and trivial lifts on Lie groups.
///
/// Conventions: a chart with rotation C has section
///   sigma(q) = geodesic_rotation(C e_n, q) C,
/// excluded point -C e_n, fiber coordinate phi(g) = g^T sigma(pi(g)) in the
/// stabilizer F = SO(n) x {1}, and reconstruction g = sigma(q) f^T. With these
/// conventions horizontal lifts satisfy f' = f A(q_d'), A the f-part of
/// sigma^-1 d sigma.
namespace geotrack::lift {

using algebra::AlgebraVector;
using algebra::GroupElement;
using algebra::GroupTag;
using homogeneous::SpherePoint;
using homogeneous::SphereTangent;

/// The rotation in span{a, b} taking unit a to unit b; requires a != -b.
Matrix geodesic_rotation(const Vector & a, const Vector & b);

/// Rotation by pi in the (e_1, e_n) plane of R^(n+1).
Matrix half_turn(int n);

class Trivialization
{
public:
  Trivialization(int id, Matrix chart_rotation, double cap_half_angle = 0.2);

  int id() const { return id_; }
  int n() const { return static_cast<int>(c_.rows()) - 1; }
  const Matrix & chart_rotation() const { return c_; }
  const Vector & excluded_point() const { return excluded_; }
  double cap_half_angle() const { return cap_; }

  /// Geodesic distance from q to the excluded cap; positive on the domain.
  double clearance(const Vector & q) const;
  bool contains(const Vector & q) const { return clearance(q) > 0.0; }

  Matrix section(const SpherePoint & q) const;
  /// d sigma_q(v).
  Matrix section_derivative(const SphereTangent & v) const;
  /// phi(g) = g^T sigma(pi(g)).
  Matrix fiber(const GroupElement & g) const;
  /// sigma(q) f^T.
  GroupElement reconstruct(const SpherePoint & q, const Matrix & f) const;
  /// f-part of sigma^-1 d sigma(v), in so(n+1) coordinates.
  AlgebraVector connection_form(const SphereTangent & v) const;

  // Unchecked variants for the integrator; q unit, v tangent, q in domain.
  Matrix section_raw(const Vector & q) const;
  Vector connection_raw(const Vector & q, const Vector & v) const;

private:
  void require_domain(const Vector & q, const char * op) const;

  int id_;
  Matrix c_;
  Vector base_;  // C e_n
  Vector excluded_;
  double cap_;
  homogeneous::ReductiveSplit split_;
};

/// Two charts: C = I (excluded -e_n) and C = half_turn(n) (excluded +e_n).
std::vector<Trivialization> sphere_charts(int n, double cap_half_angle = 0.2);

/// Geodesic rotation taking e_n to q0; half_turn(n) when q0 = -e_n.
GroupElement initial_lift(const SpherePoint & q0);

struct FiberSolution
{
  std::vector<Matrix> f;  // one per time reached, starting with f0
  /// Index k such that q_d leaves the chart during [t_k, t_k+1]; integration
  /// stopped at t_k.
  std::optional<std::size_t> switch_at;
};

/// RK4 Munthe-Kaas integration of f' = f A(q_d'(t)) across the given times
/// with `substeps` steps per interval.
FiberSolution fiber_ivp(const Trivialization & chart, const SphereCurve & q_d, std::span<const double> times,
                        const Matrix & f0, int substeps = 4);

struct LiftOptions
{
  double sample_interval{0.01};
  int substeps{4};
  double guard{0.05};
  double cap_half_angle{0.2};
  double derivative_tolerance{1e-6};
  int max_refinements{3};
  /// Halve the sample interval until the derivative error estimate meets the
  /// tolerance.
  bool refine{true};
};

struct ReferenceSample
{
  Matrix g;
  Matrix g_dot;
  Matrix g_ddot;
};

/// Body velocity vee(g^-1 g') and its derivative vee(g^-1 g'' - (g^-1 g')^2).
void body_rates(const GroupTag & tag, const ReferenceSample & s, Vector & xi, Vector & xi_dot);

class LiftedReference
{
public:
  const GroupTag & tag() const { return tag_; }
  std::size_t size() const { return times_.size(); }
  const std::vector<double> & times() const { return times_; }
  double interval() const { return dt_; }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }

  const Matrix & g(std::size_t i) const { return g_[i]; }
  const Matrix & g_dot(std::size_t i) const { return gd_[i]; }
  const Matrix & g_ddot(std::size_t i) const { return gdd_[i]; }
  /// Sphere lifts only: the projected curve and the chart used per sample.
  const std::vector<Vector> & q_d() const { return q_; }
  const std::vector<int> & charts() const { return chart_; }
  int chart_switches() const { return switches_; }

  /// Quintic Hermite interpolation through (g, g', g'') at the samples.
  ReferenceSample at(double t) const;

  Vector body_velocity(std::size_t i) const;
  double max_body_speed() const;
  /// max |f-part of vee(g^-1 g')| over samples (sphere lifts).
  double horizontality_residual() const;
  /// max |g e_n - q_d| over samples (sphere lifts).
  double exactness_residual() const;
  /// Richardson estimate of the finite-difference derivative error.
  double derivative_error_estimate() const { return deriv_err_; }

private:
  friend LiftedReference horizontal_lift(const SphereCurve &, double, double, const GroupElement &, const LiftOptions &,
                                         const std::vector<Trivialization> &);
  friend LiftedReference lift_on_group(const GroupCurve &, double, double, const LiftOptions &);

  GroupTag tag_;
  std::vector<double> times_;
  double dt_{0.0};
  std::vector<Matrix> g_, gd_, gdd_;
  std::vector<Vector> q_;
  std::vector<int> chart_;
  int switches_{0};
  double deriv_err_{0.0};
};

/// Horizontal lift of q_d on [t0, t1] through g0 (act(g0, e_n) = q_d(t0)).
LiftedReference horizontal_lift(const SphereCurve & q_d, double t0, double t1, const GroupElement & g0,
                                const LiftOptions & options, const std::vector<Trivialization> & charts);
LiftedReference horizontal_lift(const SphereCurve & q_d, double t0, double t1, const GroupElement & g0,
                                const LiftOptions & options = {});

/// The curve itself, with derivatives by the same stencils as the sphere path.
/// Sampled curves use their own sample grid.
LiftedReference lift_on_group(const GroupCurve & g_d, double t0, double t1, const LiftOptions & options = {});

}  // namespace geotrack::lift
