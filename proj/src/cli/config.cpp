#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "geotrack/cli.hpp"

namespace geotrack::cli {

using nlohmann::json;

namespace {

std::string join(const std::string & prefix, const std::string & key)
{
  return prefix.empty() ? key : prefix + "." + key;
}

[[noreturn]] void fail(const std::string & field, const std::string & what)
{
  throw ConfigError(field + ": " + what);
}

const json & section(const json & doc, const char * key)
{
  static const json empty = json::object();
  if (!doc.contains(key)) {
    return empty;
  }
  const json & s = doc.at(key);
  if (!s.is_object()) {
    fail(key, "expected an object");
  }
  return s;
}

void allow_only(const json & obj, const std::string & prefix, std::initializer_list<const char *> keys)
{
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      fail(join(prefix, it.key()), "unknown field");
    }
  }
}

double number(const json & obj, const std::string & prefix, const char * key, double fallback)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  const json & v = obj.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    fail(join(prefix, key), "expected a finite number");
  }
  return v.get<double>();
}

double positive(const json & obj, const std::string & prefix, const char * key, double fallback)
{
  const double v = number(obj, prefix, key, fallback);
  if (!(v > 0.0)) {
    fail(join(prefix, key), "must be positive");
  }
  return v;
}

double non_negative(const json & obj, const std::string & prefix, const char * key, double fallback)
{
  const double v = number(obj, prefix, key, fallback);
  if (!(v >= 0.0)) {
    fail(join(prefix, key), "must be non-negative");
  }
  return v;
}

long long integer(const json & obj, const std::string & prefix, const char * key, long long fallback, long long lo)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  const json & v = obj.at(key);
  if (!v.is_number_integer()) {
    fail(join(prefix, key), "expected an integer");
  }
  const long long x = v.get<long long>();
  if (x < lo) {
    fail(join(prefix, key), "must be at least " + std::to_string(lo));
  }
  return x;
}

Eigen::VectorXd vector(const json & obj, const std::string & prefix, const char * key, int size,
                       const Eigen::VectorXd & fallback)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  const json & v = obj.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != size) {
    fail(join(prefix, key), "expected an array of " + std::to_string(size) + " numbers");
  }
  Eigen::VectorXd out(size);
  for (int i = 0; i < size; ++i) {
    const json & x = v[static_cast<std::size_t>(i)];
    if (!x.is_number() || !std::isfinite(x.get<double>())) {
      fail(join(prefix, key), "expected numbers");
    }
    out(i) = x.get<double>();
  }
  return out;
}

Eigen::VectorXd positive_vector(const json & obj, const std::string & prefix, const char * key, int size,
                                const Eigen::VectorXd & fallback)
{
  Eigen::VectorXd v = vector(obj, prefix, key, size, fallback);
  if (!(v.minCoeff() > 0.0)) {
    fail(join(prefix, key), "entries must be positive");
  }
  return v;
}

/// A 3-vector (diagonal) or a 3x3 nested array.
Eigen::Matrix3d matrix3(const json & obj, const std::string & prefix, const char * key, const Eigen::Matrix3d & fallback)
{
  if (!obj.contains(key)) {
    return fallback;
  }
  const json & v = obj.at(key);
  if (v.is_array() && v.size() == 3 && v[0].is_number()) {
    return vector(obj, prefix, key, 3, Eigen::VectorXd()).asDiagonal();
  }
  if (!v.is_array() || v.size() != 3) {
    fail(join(prefix, key), "expected 3 diagonal entries or a 3x3 array");
  }
  Eigen::Matrix3d m;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_array() || v[i].size() != 3) {
      fail(join(prefix, key), "expected 3 diagonal entries or a 3x3 array");
    }
    for (std::size_t j = 0; j < 3; ++j) {
      if (!v[i][j].is_number()) {
        fail(join(prefix, key), "expected numbers");
      }
      m(static_cast<int>(i), static_cast<int>(j)) = v[i][j].get<double>();
    }
  }
  return m;
}

json load_json(const std::filesystem::path & path, const std::string & field)
{
  std::ifstream in(path);
  if (!in) {
    fail(field, "cannot read '" + path.string() + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error & e) {
    fail(field, std::string("invalid JSON: ") + e.what());
  }
}

json resolve_reference(const json & doc, const std::filesystem::path & base_dir, bool required)
{
  if (!doc.contains("reference")) {
    if (required) {
      fail("reference", "required for custom scenarios");
    }
    return json();
  }
  const json & r = doc.at("reference");
  if (!r.is_object()) {
    fail("reference", "expected an object");
  }
  allow_only(r, "reference", {"analytic", "params", "samples", "samples_file"});
  const int kinds = (r.contains("analytic") ? 1 : 0) + (r.contains("samples") ? 1 : 0) +
                    (r.contains("samples_file") ? 1 : 0);
  if (kinds != 1) {
    fail("reference", "give exactly one of analytic, samples, samples_file");
  }
  if (!r.contains("samples_file")) {
    return r;
  }
  if (!r.at("samples_file").is_string()) {
    fail("reference.samples_file", "expected a path");
  }
  std::filesystem::path p = r.at("samples_file").get<std::string>();
  if (p.is_relative()) {
    p = base_dir / p;
  }
  if (!std::filesystem::exists(p)) {
    fail("reference.samples_file", "file not found: '" + p.string() + "'");
  }
  const json data = load_json(p, "reference.samples_file");
  json out = json::object();
  out["samples"] = data.is_object() && data.contains("samples") ? data.at("samples") : data;
  return out;
}

}  // namespace

RunConfig parse_config(const json & doc, const std::filesystem::path & base_dir)
{
  if (!doc.is_object()) {
    fail("(root)", "expected a JSON object");
  }
  allow_only(doc, "",
             {"schema_version", "scenario", "manifold", "gains", "reference", "lift", "batch", "integration", "output",
              "acceptance"});
  if (doc.contains("schema_version") &&
      (!doc.at("schema_version").is_number_integer() || doc.at("schema_version").get<int>() != kConfigSchemaVersion)) {
    fail("schema_version", "unsupported version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  RunConfig cfg;
  if (!doc.contains("scenario") || !doc.at("scenario").is_string()) {
    fail("scenario", "required: satellite, robot, custom-sphere or custom-group");
  }
  cfg.scenario = doc.at("scenario").get<std::string>();
  const std::set<std::string> scenarios{"satellite", "robot", "custom-sphere", "custom-group"};
  if (!scenarios.count(cfg.scenario)) {
    fail("scenario", "unknown scenario '" + cfg.scenario + "'");
  }
  const bool sphere = cfg.is_sphere();

  // Scenario defaults mirror the bundled demos.
  if (cfg.scenario == "satellite") {
    cfg.batch.count = 100;
    cfg.rollout.horizon = 30.0;
    cfg.rollout.record_every = 100;
  } else if (cfg.scenario == "robot") {
    cfg.batch.count = 20;
    cfg.rollout.horizon = 20.0;
    cfg.rollout.record_every = 100;
  } else {
    cfg.batch.count = 10;
    cfg.rollout.horizon = 10.0;
  }

  const json & man = section(doc, "manifold");
  allow_only(man, "manifold", {"n", "group"});
  if (sphere) {
    if (man.contains("group")) {
      fail("manifold.group", "not used by sphere scenarios");
    }
    cfg.n = static_cast<int>(integer(man, "manifold", "n", 2, 1));
    if (cfg.n + 1 > kMaxMatrix) {
      fail("manifold.n", "at most " + std::to_string(kMaxMatrix - 1));
    }
    if (cfg.scenario == "satellite" && cfg.n != 2) {
      fail("manifold.n", "the satellite scenario lives on S^2");
    }
  } else {
    if (man.contains("n")) {
      fail("manifold.n", "not used by group scenarios");
    }
    if (man.contains("group")) {
      if (!man.at("group").is_string()) {
        fail("manifold.group", "expected a group name such as \"R3xSO(3)\"");
      }
      try {
        cfg.group = algebra::GroupTag::parse(man.at("group").get<std::string>());
      } catch (const Error & e) {
        fail("manifold.group", e.what());
      }
    }
    if (cfg.scenario == "robot" && !(cfg.group == algebra::GroupTag::parse("R3xSO(3)"))) {
      fail("manifold.group", "the robot scenario lives on R3xSO(3)");
    }
  }

  const json & gains = section(doc, "gains");
  if (cfg.scenario == "satellite" || cfg.scenario == "custom-sphere") {
    const bool sat = cfg.scenario == "satellite";
    if (sat) {
      allow_only(gains, "gains", {"k_P", "k_D", "J1"});
    } else {
      allow_only(gains, "gains", {"k_P", "k_D", "scale"});
    }
    cfg.k_P = positive(gains, "gains", "k_P", 4.0);
    cfg.k_D = positive(gains, "gains", "k_D", 4.0);
    cfg.scale = positive(gains, "gains", sat ? "J1" : "scale", 1.0);
  } else if (cfg.scenario == "robot") {
    allow_only(gains, "gains", {"mass", "J", "K_x", "K_R", "dissipation", "gravity"});
    cfg.mass = positive(gains, "gains", "mass", 1.0);
    cfg.J = positive_vector(gains, "gains", "J", 3, Eigen::Vector3d(0.1, 0.15, 0.2));
    cfg.K_x = matrix3(gains, "gains", "K_x", cfg.K_x);
    cfg.K_R = matrix3(gains, "gains", "K_R", cfg.K_R);
    cfg.dissipation = positive(gains, "gains", "dissipation", 2.0);
    cfg.gravity = non_negative(gains, "gains", "gravity", 9.81);
  } else {
    allow_only(gains, "gains", {"inertia", "dissipation", "K_x", "K_R", "k", "external_force"});
    const int d = cfg.group.algebra_dim();
    cfg.inertia_diag = positive_vector(gains, "gains", "inertia", d, Eigen::VectorXd::Ones(d));
    cfg.dissipation_diag = positive_vector(gains, "gains", "dissipation", d, Eigen::VectorXd::Constant(d, 2.0));
    cfg.K_x = matrix3(gains, "gains", "K_x", cfg.K_x);
    cfg.K_R = matrix3(gains, "gains", "K_R", cfg.K_R);
    cfg.k = positive(gains, "gains", "k", 1.0);
    cfg.external_force = vector(gains, "gains", "external_force", d, Eigen::VectorXd::Zero(d));
  }
  if (!sphere) {
    // Same checks as the navigation function, reported against the field.
    try {
      navigation::GroupNavigation(cfg.group, cfg.K_x, cfg.K_R, cfg.k);
    } catch (const ConfigError & e) {
      const std::string msg = e.what();
      fail(msg.find("K_R") != std::string::npos ? "gains.K_R" : "gains.K_x", msg);
    }
  }

  cfg.reference = resolve_reference(doc, base_dir, cfg.scenario.rfind("custom", 0) == 0);
  if (!cfg.reference.is_null()) {
    // Builds the curve once so that reference errors surface as config errors.
    if (sphere) {
      (void)lift::make_sphere_curve(cfg.reference, cfg.n);
    } else {
      (void)lift::make_group_curve(cfg.reference, cfg.group);
    }
  }

  const json & lf = section(doc, "lift");
  allow_only(lf, "lift",
             {"sample_interval", "substeps", "cap_half_angle", "guard", "derivative_tolerance", "max_refinements"});
  cfg.lift.sample_interval = positive(lf, "lift", "sample_interval", cfg.lift.sample_interval);
  cfg.lift.substeps = static_cast<int>(integer(lf, "lift", "substeps", cfg.lift.substeps, 1));
  cfg.lift.cap_half_angle = positive(lf, "lift", "cap_half_angle", cfg.lift.cap_half_angle);
  if (!(cfg.lift.cap_half_angle < M_PI / 2)) {
    fail("lift.cap_half_angle", "must be below pi/2 so that the two charts overlap");
  }
  cfg.lift.guard = non_negative(lf, "lift", "guard", cfg.lift.guard);
  cfg.lift.derivative_tolerance = positive(lf, "lift", "derivative_tolerance", cfg.lift.derivative_tolerance);
  cfg.lift.max_refinements = static_cast<int>(integer(lf, "lift", "max_refinements", cfg.lift.max_refinements, 0));

  const json & b = section(doc, "batch");
  allow_only(b, "batch", {"count", "seed", "v_max", "position_radius"});
  cfg.batch.count = static_cast<int>(integer(b, "batch", "count", cfg.batch.count, 1));
  if (b.contains("seed") && !b.at("seed").is_number_unsigned()) {
    fail("batch.seed", "expected a non-negative integer");
  }
  cfg.batch.seed = b.value("seed", cfg.batch.seed);
  cfg.batch.v_max = non_negative(b, "batch", "v_max", cfg.batch.v_max);
  cfg.batch.position_radius = non_negative(b, "batch", "position_radius", cfg.batch.position_radius);

  const json & in = section(doc, "integration");
  allow_only(in, "integration", {"h", "horizon", "t0"});
  cfg.rollout.h = positive(in, "integration", "h", cfg.rollout.h);
  cfg.rollout.horizon = positive(in, "integration", "horizon", cfg.rollout.horizon);
  cfg.rollout.t0 = number(in, "integration", "t0", cfg.rollout.t0);
  if (cfg.rollout.h > cfg.rollout.horizon) {
    fail("integration.h", "must not exceed the horizon");
  }

  const json & out = section(doc, "output");
  allow_only(out, "output", {"directory", "formats", "record_every"});
  if (out.contains("directory")) {
    if (!out.at("directory").is_string() || out.at("directory").get<std::string>().empty()) {
      fail("output.directory", "expected a non-empty path");
    }
    cfg.output_directory = out.at("directory").get<std::string>();
  } else {
    cfg.output_directory = std::filesystem::path("out") / cfg.scenario;
  }
  if (out.contains("formats")) {
    const json & f = out.at("formats");
    if (!f.is_array()) {
      fail("output.formats", "expected an array of \"csv\" and/or \"json\"");
    }
    cfg.write_csv = cfg.write_json = false;
    for (const auto & x : f) {
      if (x == "csv") {
        cfg.write_csv = true;
      } else if (x == "json") {
        cfg.write_json = true;
      } else {
        fail("output.formats", "unknown format " + x.dump());
      }
    }
  }
  cfg.rollout.record_every = static_cast<int>(integer(out, "output", "record_every", cfg.rollout.record_every, 1));

  const json & acc = section(doc, "acceptance");
  allow_only(acc, "acceptance", {"convergence_threshold", "min_convergence_fraction"});
  cfg.rollout.threshold = positive(acc, "acceptance", "convergence_threshold", cfg.rollout.threshold);
  cfg.min_convergence_fraction =
    non_negative(acc, "acceptance", "min_convergence_fraction", cfg.min_convergence_fraction);
  if (cfg.min_convergence_fraction > 1.0) {
    fail("acceptance.min_convergence_fraction", "must not exceed 1");
  }
  cfg.batch.threads = threads_from_environment();
  return cfg;
}

RunConfig load_config(const std::filesystem::path & path)
{
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config: file not found: '" + path.string() + "'");
  }
  const json doc = load_json(path, "config");
  return parse_config(doc, path.parent_path());
}

int threads_from_environment()
{
  const char * s = std::getenv("GEOTRACK_THREADS");
  if (!s || !*s) {
    return 0;
  }
  char * end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1) {
    return 0;
  }
  return static_cast<int>(std::min(v, 1024L));
}

}  // namespace geotrack::cli
