#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "geotrack/algebra.hpp"

/// Reference trajectories: closed-form built-ins and sampled curves.
namespace geotrack::lift {

/// A smooth curve t -> q_d(t) on S^n with its velocity.
class SphereCurve
{
public:
  virtual ~SphereCurve() = default;
  virtual int dim() const = 0;
  virtual Vector position(double t) const = 0;
  virtual Vector velocity(double t) const = 0;
  virtual double t_begin() const { return -std::numeric_limits<double>::infinity(); }
  virtual double t_end() const { return std::numeric_limits<double>::infinity(); }
};

/// A smooth curve t -> g_d(t) in a matrix Lie group.
class GroupCurve
{
public:
  virtual ~GroupCurve() = default;
  virtual algebra::GroupTag tag() const = 0;
  virtual Matrix position(double t) const = 0;
  virtual double t_begin() const { return -std::numeric_limits<double>::infinity(); }
  virtual double t_end() const { return std::numeric_limits<double>::infinity(); }
  /// Uniform sample grid of a sampled curve; empty for closed-form curves.
  virtual std::vector<double> sample_times() const { return {}; }
};

/// cos(w t + phase) a + sin(w t + phase) b with a, b orthonormal.
std::unique_ptr<SphereCurve> great_circle(const Vector & a, const Vector & b, double omega, double phase = 0.0);

/// Figure-eight around e_3 on S^2: longitude B sin(w t), latitude A sin(2 w t).
std::unique_ptr<SphereCurve> figure_eight(double omega = 0.5, double amp_lon = 1.0, double amp_lat = 0.5);

/// Latitude circle at colatitude alpha around e_n (n = 2), bounding a cap of
/// solid angle 2 pi (1 - cos alpha); one loop per 2 pi / omega.
std::unique_ptr<SphereCurve> latitude_circle(double alpha, double omega = 1.0);

/// C^2 cubic spline through the given points (normalized on evaluation).
/// Times must be strictly increasing; at least two samples.
std::unique_ptr<SphereCurve> sampled_sphere_curve(std::vector<double> times, std::vector<Vector> points);

/// Helix: rotation w t about e_3, position r (cos w t, sin w t, 0) + pitch w t e_3.
/// Represented in SE(3) or in R3 x SO(3).
std::unique_ptr<GroupCurve> screw_motion(const algebra::GroupTag & tag, double omega = 0.5, double radius = 1.0,
                                         double pitch = 0.2);

/// R3 x SO(3) Lissajous: x_i = A_i sin(f_i t + d_i), R = exp(hat(a_i sin(g_i t))).
std::unique_ptr<GroupCurve> lissajous(const algebra::GroupTag & tag, const Eigen::Vector3d & amplitude,
                                      const Eigen::Vector3d & frequency, const Eigen::Vector3d & phase,
                                      const Eigen::Vector3d & angle_amplitude,
                                      const Eigen::Vector3d & angle_frequency);

/// Uniformly sampled group curve; evaluation only at sample times.
std::unique_ptr<GroupCurve> sampled_group_curve(const algebra::GroupTag & tag, std::vector<double> times,
                                                std::vector<Matrix> samples);

/// Builds a sphere curve from {"analytic": name, "params": {...}} or
/// {"samples": [[t, x0, ..., xn], ...]}. Throws ConfigError on bad input.
std::unique_ptr<SphereCurve> make_sphere_curve(const nlohmann::json & desc, int n);

/// Builds a group curve from {"analytic": name, "params": {...}} or
/// {"samples": [[t, row-major matrix entries...], ...]}.
std::unique_ptr<GroupCurve> make_group_curve(const nlohmann::json & desc, const algebra::GroupTag & tag);

/// Names of the analytic built-ins.
std::vector<std::string> builtin_references();

/// (R, x) packed into the representation of tag (SE(3) or R3 x SO(3)).
Matrix pack_rigid(const algebra::GroupTag & tag, const Eigen::Matrix3d & r, const Eigen::Vector3d & x);

}  // namespace geotrack::lift
