#include "geotrack/reference.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace geotrack::lift {

using algebra::FactorKind;
using algebra::GroupTag;
using nlohmann::json;

namespace {

class GreatCircle final : public SphereCurve
{
public:
  GreatCircle(Vector a, Vector b, double omega, double phase) : a_(std::move(a)), b_(std::move(b)), w_(omega), p_(phase) {}
  int dim() const override { return static_cast<int>(a_.size()) - 1; }
  Vector position(double t) const override { return std::cos(w_ * t + p_) * a_ + std::sin(w_ * t + p_) * b_; }
  Vector velocity(double t) const override
  {
    return w_ * (-std::sin(w_ * t + p_) * a_ + std::cos(w_ * t + p_) * b_);
  }

private:
  Vector a_, b_;
  double w_, p_;
};

class FigureEight final : public SphereCurve
{
public:
  FigureEight(double w, double lon, double lat) : w_(w), lon_(lon), lat_(lat) {}
  int dim() const override { return 2; }
  Vector position(double t) const override
  {
    const double ph = lon_ * std::sin(w_ * t);
    const double th = lat_ * std::sin(2.0 * w_ * t);
    Vector q(3);
    q << std::cos(th) * std::sin(ph), std::sin(th), std::cos(th) * std::cos(ph);
    return q;
  }
  Vector velocity(double t) const override
  {
    const double ph = lon_ * std::sin(w_ * t);
    const double th = lat_ * std::sin(2.0 * w_ * t);
    const double dph = lon_ * w_ * std::cos(w_ * t);
    const double dth = 2.0 * lat_ * w_ * std::cos(2.0 * w_ * t);
    Vector v(3);
    v << std::cos(th) * std::cos(ph) * dph - std::sin(th) * std::sin(ph) * dth, std::cos(th) * dth,
      -std::cos(th) * std::sin(ph) * dph - std::sin(th) * std::cos(ph) * dth;
    return v;
  }

private:
  double w_, lon_, lat_;
};

class LatitudeCircle final : public SphereCurve
{
public:
  LatitudeCircle(double alpha, double w) : alpha_(alpha), w_(w) {}
  int dim() const override { return 2; }
  Vector position(double t) const override
  {
    Vector q(3);
    q << std::sin(alpha_) * std::cos(w_ * t), std::sin(alpha_) * std::sin(w_ * t), std::cos(alpha_);
    return q;
  }
  Vector velocity(double t) const override
  {
    Vector v(3);
    v << -w_ * std::sin(alpha_) * std::sin(w_ * t), w_ * std::sin(alpha_) * std::cos(w_ * t), 0.0;
    return v;
  }

private:
  double alpha_, w_;
};

/// Natural cubic spline of each ambient coordinate, normalized on evaluation.
class SampledSphere final : public SphereCurve
{
public:
  SampledSphere(std::vector<double> times, std::vector<Vector> pts) : t_(std::move(times)), p_(std::move(pts))
  {
    const std::size_t n = t_.size();
    const int d = static_cast<int>(p_.front().size());
    m_.assign(n, Vector::Zero(d));
    if (n < 3) {
      return;
    }
    // Tridiagonal system for the second derivatives (natural end conditions).
    std::vector<double> diag(n, 0.0), sup(n, 0.0);
    std::vector<Vector> rhs(n, Vector::Zero(d));
    diag[0] = 1.0;
    diag[n - 1] = 1.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t_[i] - t_[i - 1];
      const double h1 = t_[i + 1] - t_[i];
      const double sub = h0 / 6.0;
      diag[i] = (h0 + h1) / 3.0;
      sup[i] = h1 / 6.0;
      rhs[i] = (p_[i + 1] - p_[i]) / h1 - (p_[i] - p_[i - 1]) / h0;
      // forward elimination against row i - 1
      const double w = sub / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[n - 1].setZero();
    for (std::size_t i = n - 1; i-- > 1;) {
      m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
    }
    m_[0].setZero();
  }

  int dim() const override { return static_cast<int>(p_.front().size()) - 1; }
  double t_begin() const override { return t_.front(); }
  double t_end() const override { return t_.back(); }

  Vector position(double t) const override
  {
    Vector x, dx;
    raw(t, x, dx);
    return x / x.norm();
  }

  Vector velocity(double t) const override
  {
    Vector x, dx;
    raw(t, x, dx);
    const double r = x.norm();
    const Vector u = x / r;
    return (dx - u * u.dot(dx)) / r;
  }

private:
  void raw(double t, Vector & x, Vector & dx) const
  {
    if (t < t_.front() - 1e-12 || t > t_.back() + 1e-12) {
      throw DomainError("sampled reference evaluated outside its time range");
    }
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t k = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    k = std::min(k, t_.size() - 2);
    const double h = t_[k + 1] - t_[k];
    const double a = (t_[k + 1] - t) / h;
    const double b = (t - t_[k]) / h;
    x = a * p_[k] + b * p_[k + 1] + ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * (h * h / 6.0);
    dx = (p_[k + 1] - p_[k]) / h + ((1.0 - 3.0 * a * a) * m_[k] + (3.0 * b * b - 1.0) * m_[k + 1]) * (h / 6.0);
  }

  std::vector<double> t_;
  std::vector<Vector> p_;
  std::vector<Vector> m_;
};

class Screw final : public GroupCurve
{
public:
  Screw(GroupTag tag, double w, double r, double pitch) : tag_(tag), w_(w), r_(r), pitch_(pitch) {}
  GroupTag tag() const override { return tag_; }
  Matrix position(double t) const override
  {
    const double a = w_ * t;
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d x(r_ * std::cos(a), r_ * std::sin(a), pitch_ * a);
    return pack_rigid(tag_, rot, x);
  }

private:
  GroupTag tag_;
  double w_, r_, pitch_;
};

class Lissajous final : public GroupCurve
{
public:
  Lissajous(GroupTag tag, Eigen::Vector3d amp, Eigen::Vector3d freq, Eigen::Vector3d phase, Eigen::Vector3d ang_amp,
            Eigen::Vector3d ang_freq)
    : tag_(tag), amp_(amp), freq_(freq), phase_(phase), ang_amp_(ang_amp), ang_freq_(ang_freq)
  {
  }
  GroupTag tag() const override { return tag_; }
  Matrix position(double t) const override
  {
    Eigen::Vector3d x, w;
    for (int i = 0; i < 3; ++i) {
      x(i) = amp_(i) * std::sin(freq_(i) * t + phase_(i));
      w(i) = ang_amp_(i) * std::sin(ang_freq_(i) * t);
    }
    const Matrix r = algebra::exp({GroupTag::so(3), Vector(w)}).matrix();
    return pack_rigid(tag_, r, x);
  }

private:
  GroupTag tag_;
  Eigen::Vector3d amp_, freq_, phase_, ang_amp_, ang_freq_;
};

class SampledGroup final : public GroupCurve
{
public:
  SampledGroup(GroupTag tag, std::vector<double> t, std::vector<Matrix> g) : tag_(tag), t_(std::move(t)), g_(std::move(g))
  {
  }
  GroupTag tag() const override { return tag_; }
  double t_begin() const override { return t_.front(); }
  double t_end() const override { return t_.back(); }
  std::vector<double> sample_times() const override { return t_; }
  Matrix position(double t) const override
  {
    const double h = (t_.back() - t_.front()) / static_cast<double>(t_.size() - 1);
    const double s = (t - t_.front()) / h;
    const double k = std::round(s);
    if (std::abs(s - k) > 1e-6 || k < 0.0 || k > static_cast<double>(t_.size() - 1)) {
      throw DomainError("sampled group reference evaluated off its sample grid");
    }
    return g_[static_cast<std::size_t>(k)];
  }

private:
  GroupTag tag_;
  std::vector<double> t_;
  std::vector<Matrix> g_;
};

void check_rigid_tag(const GroupTag & tag)
{
  const bool se3 = tag.factor_count() == 1 && tag.factor(0).kind == FactorKind::SpecialEuclidean3;
  const bool split = tag.factor_count() == 2 && tag.factor(0) == algebra::Factor{FactorKind::Translation, 3} &&
                     tag.factor(1) == algebra::Factor{FactorKind::SpecialOrthogonal, 3};
  if (!se3 && !split) {
    throw ConfigError("reference: rigid-body references need SE(3) or R3xSO(3), got " + tag.name());
  }
}

double number(const json & params, const char * key, double fallback)
{
  if (!params.contains(key)) {
    return fallback;
  }
  const json & v = params.at(key);
  if (!v.is_number()) {
    throw ConfigError(std::string("reference.params.") + key + ": expected a number");
  }
  return v.get<double>();
}

Eigen::Vector3d vec3(const json & params, const char * key, const Eigen::Vector3d & fallback)
{
  if (!params.contains(key)) {
    return fallback;
  }
  const json & v = params.at(key);
  if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json & x) { return x.is_number(); })) {
    throw ConfigError(std::string("reference.params.") + key + ": expected an array of 3 numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

Vector vecn(const json & params, const char * key, const Vector & fallback)
{
  if (!params.contains(key)) {
    return fallback;
  }
  const json & v = params.at(key);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != fallback.size()) {
    throw ConfigError(std::string("reference.params.") + key + ": expected an array of " +
                      std::to_string(fallback.size()) + " numbers");
  }
  Vector out(fallback.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError(std::string("reference.params.") + key + ": expected numbers");
    }
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

/// Rows of [t, values...] with strictly increasing t.
void read_samples(const json & rows, std::size_t width, std::vector<double> & t, std::vector<Vector> & values)
{
  if (!rows.is_array() || rows.size() < 2) {
    throw ConfigError("reference.samples: expected an array of at least two rows");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json & row = rows[i];
    if (!row.is_array() || row.size() != width + 1) {
      throw ConfigError("reference.samples[" + std::to_string(i) + "]: expected " + std::to_string(width + 1) +
                        " numbers");
    }
    Vector v(static_cast<Eigen::Index>(width));
    for (std::size_t j = 0; j <= width; ++j) {
      if (!row[j].is_number()) {
        throw ConfigError("reference.samples[" + std::to_string(i) + "]: non-numeric entry");
      }
    }
    for (std::size_t j = 0; j < width; ++j) {
      v(static_cast<Eigen::Index>(j)) = row[j + 1].get<double>();
    }
    const double ti = row[0].get<double>();
    if (!t.empty() && !(ti > t.back())) {
      throw ConfigError("reference.samples[" + std::to_string(i) + "]: times must be strictly increasing");
    }
    t.push_back(ti);
    values.push_back(std::move(v));
  }
}

}  // namespace

Matrix pack_rigid(const GroupTag & tag, const Eigen::Matrix3d & r, const Eigen::Vector3d & x)
{
  check_rigid_tag(tag);
  if (tag.factor_count() == 1) {
    Matrix g = Matrix::Identity(4, 4);
    g.topLeftCorner(3, 3) = r;
    g.block(0, 3, 3, 1) = x;
    return g;
  }
  Matrix g = Matrix::Identity(7, 7);
  g.block(0, 3, 3, 1) = x;
  g.bottomRightCorner(3, 3) = r;
  return g;
}

std::unique_ptr<SphereCurve> great_circle(const Vector & a, const Vector & b, double omega, double phase)
{
  if (a.size() != b.size() || a.size() < 2) {
    throw DomainError("great_circle: a and b must have equal ambient dimension >= 2");
  }
  if (std::abs(a.norm() - 1.0) > 1e-9 || std::abs(b.norm() - 1.0) > 1e-9 || std::abs(a.dot(b)) > 1e-9) {
    throw DomainError("great_circle: a and b must be orthonormal");
  }
  return std::make_unique<GreatCircle>(a, b, omega, phase);
}

std::unique_ptr<SphereCurve> figure_eight(double omega, double amp_lon, double amp_lat)
{
  return std::make_unique<FigureEight>(omega, amp_lon, amp_lat);
}

std::unique_ptr<SphereCurve> latitude_circle(double alpha, double omega)
{
  return std::make_unique<LatitudeCircle>(alpha, omega);
}

std::unique_ptr<SphereCurve> sampled_sphere_curve(std::vector<double> times, std::vector<Vector> points)
{
  if (times.size() < 2 || times.size() != points.size()) {
    throw DomainError("sampled_sphere_curve: need at least two samples with matching times");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw DomainError("sampled_sphere_curve: times must be strictly increasing");
    }
  }
  for (auto & p : points) {
    if (p.size() != points.front().size() || p.size() < 2 || !(p.norm() > 0.0)) {
      throw DomainError("sampled_sphere_curve: inconsistent or zero sample");
    }
    p /= p.norm();
  }
  return std::make_unique<SampledSphere>(std::move(times), std::move(points));
}

std::unique_ptr<GroupCurve> screw_motion(const GroupTag & tag, double omega, double radius, double pitch)
{
  check_rigid_tag(tag);
  return std::make_unique<Screw>(tag, omega, radius, pitch);
}

std::unique_ptr<GroupCurve> lissajous(const GroupTag & tag, const Eigen::Vector3d & amplitude,
                                      const Eigen::Vector3d & frequency, const Eigen::Vector3d & phase,
                                      const Eigen::Vector3d & angle_amplitude, const Eigen::Vector3d & angle_frequency)
{
  check_rigid_tag(tag);
  return std::make_unique<Lissajous>(tag, amplitude, frequency, phase, angle_amplitude, angle_frequency);
}

std::unique_ptr<GroupCurve> sampled_group_curve(const GroupTag & tag, std::vector<double> times,
                                                std::vector<Matrix> samples)
{
  if (times.size() < 5 || times.size() != samples.size()) {
    throw DomainError("sampled_group_curve: need at least five samples with matching times");
  }
  const double h = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - (times.front() + h * static_cast<double>(i))) > 1e-9 * std::max(1.0, std::abs(times[i]))) {
      throw DomainError("sampled_group_curve: samples must be uniformly spaced");
    }
    // validates membership
    (void)algebra::GroupElement(tag, samples[i]);
  }
  return std::make_unique<SampledGroup>(tag, std::move(times), std::move(samples));
}

std::vector<std::string> builtin_references()
{
  return {"great-circle", "figure-eight", "latitude-circle", "screw-motion", "lissajous"};
}

std::unique_ptr<SphereCurve> make_sphere_curve(const json & desc, int n)
{
  if (!desc.is_object()) {
    throw ConfigError("reference: expected an object");
  }
  if (desc.contains("samples")) {
    std::vector<double> t;
    std::vector<Vector> p;
    read_samples(desc.at("samples"), static_cast<std::size_t>(n + 1), t, p);
    try {
      return sampled_sphere_curve(std::move(t), std::move(p));
    } catch (const DomainError & e) {
      throw ConfigError(std::string("reference.samples: ") + e.what());
    }
  }
  if (!desc.contains("analytic") || !desc.at("analytic").is_string()) {
    throw ConfigError("reference.analytic: expected a built-in name or a samples array");
  }
  const std::string name = desc.at("analytic").get<std::string>();
  const json params = desc.value("params", json::object());
  if (!params.is_object()) {
    throw ConfigError("reference.params: expected an object");
  }
  if (name == "great-circle") {
    Vector a = Vector::Zero(n + 1);
    Vector b = Vector::Zero(n + 1);
    a(n) = 1.0;
    b(0) = 1.0;
    a = vecn(params, "a", a);
    b = vecn(params, "b", b);
    // Gram-Schmidt so that users may give any two independent directions.
    if (!(a.norm() > 0.0)) {
      throw ConfigError("reference.params.a: must be nonzero");
    }
    a.normalize();
    b -= a * a.dot(b);
    if (!(b.norm() > 1e-9)) {
      throw ConfigError("reference.params.b: must be independent of a");
    }
    b.normalize();
    return great_circle(a, b, number(params, "omega", 1.0), number(params, "phase", 0.0));
  }
  if (name == "figure-eight" || name == "latitude-circle") {
    if (n != 2) {
      throw ConfigError("reference.analytic: " + name + " is defined on S^2 only");
    }
    if (name == "figure-eight") {
      return figure_eight(number(params, "omega", 0.5), number(params, "amplitude_lon", 1.0),
                          number(params, "amplitude_lat", 0.5));
    }
    return latitude_circle(number(params, "alpha", 0.5), number(params, "omega", 1.0));
  }
  throw ConfigError("reference.analytic: unknown sphere reference '" + name + "'");
}

std::unique_ptr<GroupCurve> make_group_curve(const json & desc, const GroupTag & tag)
{
  if (!desc.is_object()) {
    throw ConfigError("reference: expected an object");
  }
  if (desc.contains("samples")) {
    const int m = tag.matrix_size();
    std::vector<double> t;
    std::vector<Vector> flat;
    read_samples(desc.at("samples"), static_cast<std::size_t>(m * m), t, flat);
    std::vector<Matrix> g;
    for (const auto & v : flat) {
      Matrix x(m, m);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          x(i, j) = v(i * m + j);
        }
      }
      g.push_back(std::move(x));
    }
    try {
      return sampled_group_curve(tag, std::move(t), std::move(g));
    } catch (const DomainError & e) {
      throw ConfigError(std::string("reference.samples: ") + e.what());
    }
  }
  if (!desc.contains("analytic") || !desc.at("analytic").is_string()) {
    throw ConfigError("reference.analytic: expected a built-in name or a samples array");
  }
  const std::string name = desc.at("analytic").get<std::string>();
  const json params = desc.value("params", json::object());
  if (!params.is_object()) {
    throw ConfigError("reference.params: expected an object");
  }
  if (name == "screw-motion") {
    return screw_motion(tag, number(params, "omega", 0.5), number(params, "radius", 1.0), number(params, "pitch", 0.2));
  }
  if (name == "lissajous") {
    return lissajous(tag, vec3(params, "amplitude", {1.0, 0.8, 0.5}), vec3(params, "frequency", {0.5, 1.0, 0.75}),
                     vec3(params, "phase", {0.0, 0.5, 1.0}), vec3(params, "angle_amplitude", {0.6, 0.4, 0.8}),
                     vec3(params, "angle_frequency", {0.4, 0.7, 0.3}));
  }
  throw ConfigError("reference.analytic: unknown group reference '" + name + "'");
}

}  // namespace geotrack::lift
