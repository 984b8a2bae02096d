#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "geotrack/cli.hpp"

namespace geotrack::cli {

using nlohmann::json;

namespace {

std::vector<std::string> axis_names(const std::string & prefix, int size)
{
  std::vector<std::string> out;
  static const char * xyz[] = {"x", "y", "z"};
  for (int i = 0; i < size; ++i) {
    out.push_back(size == 3 ? prefix + xyz[i] : prefix + std::to_string(i));
  }
  return out;
}

void append(std::vector<std::string> & to, const std::vector<std::string> & from)
{
  to.insert(to.end(), from.begin(), from.end());
}

std::vector<std::string> prefixed(const std::string & prefix, const std::vector<std::string> & names)
{
  std::vector<std::string> out;
  for (const auto & n : names) {
    out.push_back(prefix + n);
  }
  return out;
}

std::string fmt(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json number_or_null(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

struct Built
{
  std::optional<sim::SphereScenario> sphere;
  std::optional<sim::GroupScenario> group;

  const lift::LiftedReference & reference() const { return sphere ? *sphere->reference : *group->reference; }
};

Built build(const RunConfig & cfg)
{
  Built b;
  const double t0 = cfg.rollout.t0;
  if (cfg.scenario == "satellite") {
    sim::SatelliteConfig sc;
    sc.k_P = cfg.k_P;
    sc.k_D = cfg.k_D;
    sc.J1 = cfg.scale;
    if (!cfg.reference.is_null()) {
      sc.reference = lift::make_sphere_curve(cfg.reference, 2);
    }
    sc.lift = cfg.lift;
    sc.rollout = cfg.rollout;
    b.sphere = sim::make_satellite(sc);
  } else if (cfg.scenario == "custom-sphere") {
    const auto curve = lift::make_sphere_curve(cfg.reference, cfg.n);
    const auto q0 = homogeneous::SpherePoint::normalized(curve->position(t0));
    auto ref = std::make_shared<const lift::LiftedReference>(
      lift::horizontal_lift(*curve, t0, t0 + cfg.rollout.horizon, lift::initial_lift(q0), cfg.lift));
    b.sphere = sim::SphereScenario{sim::SpherePlant{cfg.n, cfg.scale},
                                   control::SphereControllerConfig(cfg.k_P, cfg.k_D, cfg.scale), std::move(ref)};
  } else if (cfg.scenario == "robot") {
    sim::RobotConfig rc;
    rc.mass = cfg.mass;
    rc.J = cfg.J;
    rc.K_x = cfg.K_x;
    rc.K_R = cfg.K_R;
    rc.dissipation = cfg.dissipation;
    rc.gravity = cfg.gravity;
    if (!cfg.reference.is_null()) {
      rc.reference = lift::make_group_curve(cfg.reference, cfg.group);
    }
    rc.lift = cfg.lift;
    rc.rollout = cfg.rollout;
    b.group = sim::make_robot(rc);
  } else {
    const auto curve = lift::make_group_curve(cfg.reference, cfg.group);
    const auto I = algebra::AlgebraMetric::diagonal(cfg.group, cfg.inertia_diag);
    const auto D = algebra::AlgebraMetric::diagonal(cfg.group, cfg.dissipation_diag);
    control::GroupControllerConfig ctrl(I, D, navigation::GroupNavigation(cfg.group, cfg.K_x, cfg.K_R, cfg.k));
    auto ref = std::make_shared<const lift::LiftedReference>(
      lift::lift_on_group(*curve, t0, t0 + cfg.rollout.horizon, cfg.lift));
    b.group = sim::GroupScenario{sim::GroupPlant{I, cfg.external_force}, std::move(ctrl),
                                 control::ForcedSystem{1.0, cfg.external_force, false}, std::move(ref)};
  }
  return b;
}

void write_csv(const std::filesystem::path & path, const Columns & cols, const std::vector<sim::RolloutRecord> & batch)
{
  std::ofstream out(path);
  if (!out) {
    throw DomainError("cannot write '" + path.string() + "'");
  }
  out << "rollout_id,t";
  for (const auto * group : {&cols.state, &cols.reference, &cols.control, &cols.error}) {
    for (const auto & c : *group) {
      out << ',' << c;
    }
  }
  out << ",config_error,velocity_error,surrogate,lyapunov\n";
  for (const auto & r : batch) {
    for (const auto & s : r.samples) {
      out << r.id << ',' << fmt(s.t);
      for (const auto * v : {&s.state, &s.reference, &s.control, &s.error}) {
        for (Eigen::Index i = 0; i < v->size(); ++i) {
          out << ',' << fmt((*v)(i));
        }
      }
      out << ',' << fmt(s.config_error) << ',' << fmt(s.velocity_error) << ',' << fmt(s.surrogate) << ','
          << fmt(s.lyapunov) << '\n';
    }
  }
  if (!out) {
    throw DomainError("write failed for '" + path.string() + "'");
  }
}

json summary_document(const RunConfig & cfg, const Columns & cols, const lift::LiftedReference & ref,
                      const std::vector<sim::RolloutRecord> & batch, const sim::BatchSummary & agg, double seconds,
                      const std::string & status)
{
  json doc;
  doc["schema_version"] = kSummarySchemaVersion;
  doc["scenario"] = cfg.scenario;
  doc["manifold"] = cfg.is_sphere() ? json{{"n", cfg.n}} : json{{"group", cfg.group.name()}};
  doc["batch"] = {{"count", cfg.batch.count},
                  {"seed", cfg.batch.seed},
                  {"v_max", cfg.batch.v_max},
                  {"position_radius", cfg.batch.position_radius}};
  doc["integration"] = {{"h", cfg.rollout.h},
                        {"t0", cfg.rollout.t0},
                        {"horizon", cfg.rollout.horizon},
                        {"record_every", cfg.rollout.record_every}};
  doc["acceptance"] = {{"convergence_threshold", cfg.rollout.threshold},
                       {"min_convergence_fraction", cfg.min_convergence_fraction}};
  doc["reference"] = {{"samples", ref.size()},
                      {"interval", ref.interval()},
                      {"chart_switches", ref.chart_switches()},
                      {"max_body_speed", number_or_null(ref.max_body_speed())},
                      {"horizontality_residual", number_or_null(ref.horizontality_residual())},
                      {"exactness_residual", number_or_null(ref.exactness_residual())},
                      {"derivative_error_estimate", number_or_null(ref.derivative_error_estimate())}};
  doc["aggregate"] = {{"count", agg.count},
                      {"converged", agg.converged},
                      {"fraction", agg.fraction},
                      {"median_convergence_time", number_or_null(agg.median_convergence_time)},
                      {"max_convergence_time", number_or_null(agg.max_convergence_time)},
                      {"min_rate", number_or_null(agg.min_rate)},
                      {"median_rate", number_or_null(agg.median_rate)},
                      {"max_rate", number_or_null(agg.max_rate)},
                      {"min_r_squared", number_or_null(agg.min_r_squared)},
                      {"lyapunov_violations", agg.lyapunov_violations},
                      {"invariant_failures", agg.invariant_failures}};
  json rollouts = json::array();
  for (const auto & r : batch) {
    const auto & s = r.summary;
    rollouts.push_back({{"id", r.id},
                        {"seed", r.seed},
                        {"converged", s.converged},
                        {"convergence_time", number_or_null(s.convergence_time)},
                        {"rate", s.rate_fitted ? number_or_null(s.rate) : json(nullptr)},
                        {"r_squared", s.rate_fitted ? number_or_null(s.r_squared) : json(nullptr)},
                        {"fit_points", s.fit_points},
                        {"lyapunov_violations", s.lyapunov_violations},
                        {"max_lyapunov_increase", number_or_null(s.max_lyapunov_increase)},
                        {"invariants_ok", s.invariants_ok},
                        {"max_invariant_defect", number_or_null(s.max_invariant_defect)},
                        {"invariant_message", s.invariant_message},
                        {"initial_error", number_or_null(s.initial_error)},
                        {"final_error", number_or_null(s.final_error)},
                        {"max_error", number_or_null(s.max_error)}});
  }
  doc["rollouts"] = std::move(rollouts);
  doc["columns"] = {{"state", cols.state}, {"reference", cols.reference}, {"control", cols.control},
                    {"error", cols.error}};
  json files = json::array();
  if (cfg.write_csv) {
    files.push_back("rollouts.csv");
  }
  files.push_back("summary.json");
  doc["files"] = std::move(files);
  doc["wall_time_seconds"] = seconds;
  doc["status"] = status;
  return doc;
}

// ---------------------------------------------------------------------------
// Reading run outputs back

class DataError : public Error
{
public:
  using Error::Error;
};

json read_summary(const std::filesystem::path & dir)
{
  const auto path = dir / "summary.json";
  std::ifstream in(path);
  if (!in) {
    throw DataError("missing " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error & e) {
    throw DataError("corrupt " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || !doc.contains("aggregate") ||
      !doc.contains("rollouts") || !doc.contains("columns")) {
    throw DataError("corrupt " + path.string() + ": missing required fields");
  }
  if (doc.at("schema_version") != kSummarySchemaVersion) {
    throw DataError(path.string() + ": unsupported schema_version " + doc.at("schema_version").dump());
  }
  return doc;
}

struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string & name) const
  {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) {
        return i;
      }
    }
    throw DataError("rollouts.csv: missing column '" + name + "'");
  }
};

std::vector<std::string> split(const std::string & line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

Table read_rollouts(const std::filesystem::path & dir)
{
  const auto path = dir / "rollouts.csv";
  std::ifstream in(path);
  if (!in) {
    throw DataError("missing " + path.string());
  }
  Table t;
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("corrupt " + path.string() + ": empty file");
  }
  t.header = split(line);
  if (t.header.size() < 2 || t.header[0] != "rollout_id" || t.header[1] != "t") {
    throw DataError("corrupt " + path.string() + ": unexpected header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw DataError("corrupt " + path.string() + ": wrong field count on line " + std::to_string(lineno));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      char * end = nullptr;
      row[i] = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || *end != '\0') {
        throw DataError("corrupt " + path.string() + ": bad number on line " + std::to_string(lineno));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string cell(const json & v, int precision = 4)
{
  if (v.is_null()) {
    return "-";
  }
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(precision) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

}  // namespace

Columns columns_for(const RunConfig & cfg)
{
  Columns c;
  if (cfg.is_sphere()) {
    const int m = cfg.n + 1;
    append(c.state, axis_names("q", m));
    append(c.state, axis_names("qd", m));
    c.reference = prefixed("ref_", c.state);
    c.control = axis_names("f", m);
    append(c.error, axis_names("e", m));
    append(c.error, axis_names("ed", m));
  } else {
    const int d = cfg.group.algebra_dim();
    c.state = sim::compact_names(cfg.group, "");
    append(c.state, axis_names("xi", d));
    c.reference = prefixed("ref_", c.state);
    c.control = axis_names("tau", d);
    c.error = sim::compact_names(cfg.group, "e_");
    append(c.error, axis_names("xie", d));
  }
  return c;
}

int run_command(const std::filesystem::path & config, std::ostream & out, std::ostream & err)
{
  RunConfig cfg;
  try {
    cfg = load_config(config);
  } catch (const Error & e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  const auto start = std::chrono::steady_clock::now();
  Built built;
  try {
    built = build(cfg);
  } catch (const ConfigError & e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error & e) {
    err << "lift failed: " << e.what() << '\n';
    return kLiftOrDataError;
  }

  std::vector<sim::RolloutRecord> batch;
  try {
    batch = built.sphere ? sim::sphere_batch(*built.sphere, cfg.batch, cfg.rollout)
                         : sim::group_batch(*built.group, cfg.batch, cfg.rollout);
  } catch (const Error & e) {
    err << "rollout failed: " << e.what() << '\n';
    return kLiftOrDataError;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto agg = sim::summarize(batch);

  int code = kOk;
  std::string status = "ok";
  for (const auto & r : batch) {
    if (!r.summary.invariants_ok) {
      err << "invariant violation in rollout " << r.id << ": " << r.summary.invariant_message << '\n';
      if (code == kOk) {
        code = kInvariantViolation;
        status = "invariant_violation";
      }
    }
  }
  if (code == kOk && agg.fraction < cfg.min_convergence_fraction) {
    code = kConvergenceShortfall;
    status = "convergence_shortfall";
    err << "converged fraction " << agg.fraction << " below required " << cfg.min_convergence_fraction << '\n';
  }

  const Columns cols = columns_for(cfg);
  try {
    std::filesystem::create_directories(cfg.output_directory);
    if (cfg.write_csv) {
      write_csv(cfg.output_directory / "rollouts.csv", cols, batch);
    }
    // summary.json is always written; report reads it.
    const json doc = summary_document(cfg, cols, built.reference(), batch, agg, seconds, status);
    std::ofstream js(cfg.output_directory / "summary.json");
    js << std::setw(2) << doc << '\n';
    if (!js) {
      throw DomainError("cannot write summary.json");
    }
  } catch (const std::exception & e) {
    err << "output error: " << e.what() << '\n';
    return kLiftOrDataError;
  }

  out << cfg.scenario << ": " << agg.converged << "/" << agg.count << " converged, median time "
      << agg.median_convergence_time << ", lyapunov violations " << agg.lyapunov_violations << ", " << seconds
      << " s -> " << cfg.output_directory.string() << '\n';
  return code;
}

int report_command(const std::filesystem::path & dir, bool as_json, std::ostream & out, std::ostream & err)
{
  json doc;
  try {
    doc = read_summary(dir);
    for (const auto & f : doc.value("files", json::array())) {
      if (!std::filesystem::exists(dir / f.get<std::string>())) {
        throw DataError("missing " + (dir / f.get<std::string>()).string());
      }
    }
  } catch (const std::exception & e) {
    err << "report: " << e.what() << '\n';
    return kLiftOrDataError;
  }

  const json & agg = doc.at("aggregate");
  if (as_json) {
    json rep;
    rep["schema_version"] = kSummarySchemaVersion;
    rep["scenario"] = doc.value("scenario", "");
    rep["status"] = doc.value("status", "");
    rep["aggregate"] = agg;
    rep["reference"] = doc.value("reference", json::object());
    json per = json::array();
    for (const auto & r : doc.at("rollouts")) {
      per.push_back({{"id", r.at("id")},
                     {"converged", r.at("converged")},
                     {"convergence_time", r.at("convergence_time")},
                     {"rate", r.at("rate")},
                     {"r_squared", r.at("r_squared")},
                     {"lyapunov_violations", r.at("lyapunov_violations")}});
    }
    rep["rollouts"] = std::move(per);
    out << rep.dump(2) << '\n';
    return kOk;
  }

  out << "scenario            " << doc.value("scenario", "") << '\n'
      << "status              " << doc.value("status", "") << '\n'
      << "rollouts            " << cell(agg.at("count")) << '\n'
      << "converged           " << cell(agg.at("converged")) << " (" << cell(agg.at("fraction")) << ")\n"
      << "convergence time    median " << cell(agg.at("median_convergence_time")) << ", max "
      << cell(agg.at("max_convergence_time")) << '\n'
      << "exponential rate    min " << cell(agg.at("min_rate")) << ", median " << cell(agg.at("median_rate"))
      << ", max " << cell(agg.at("max_rate")) << ", min R^2 " << cell(agg.at("min_r_squared"), 6) << '\n'
      << "lyapunov violations " << cell(agg.at("lyapunov_violations")) << '\n'
      << "invariant failures  " << cell(agg.at("invariant_failures")) << "\n\n";
  out << std::left << std::setw(6) << "id" << std::setw(11) << "converged" << std::setw(12) << "t_conv"
      << std::setw(12) << "rate" << std::setw(12) << "R^2" << "V_viol\n";
  for (const auto & r : doc.at("rollouts")) {
    out << std::setw(6) << cell(r.at("id")) << std::setw(11) << (r.at("converged").get<bool>() ? "yes" : "no")
        << std::setw(12) << cell(r.at("convergence_time")) << std::setw(12) << cell(r.at("rate")) << std::setw(12)
        << cell(r.at("r_squared"), 6) << cell(r.at("lyapunov_violations")) << '\n';
  }
  return kOk;
}

int export_command(const std::filesystem::path & dir, const std::string & kind,
                   const std::optional<std::filesystem::path> & output, std::ostream & out, std::ostream & err)
{
  if (kind != "trajectories" && kind != "lyapunov" && kind != "error-norm") {
    err << "export: unknown kind '" << kind << "' (expected trajectories, lyapunov or error-norm)\n";
    return kConfigError;
  }
  Table t;
  json doc;
  try {
    doc = read_summary(dir);
    t = read_rollouts(dir);
  } catch (const std::exception & e) {
    err << "export: " << e.what() << '\n';
    return kLiftOrDataError;
  }

  std::vector<std::string> names;
  std::vector<std::size_t> idx;
  std::vector<std::string> header{"rollout_id", "t"};
  bool clamp = false;
  try {
    if (kind == "trajectories") {
      for (const char * g : {"state", "reference"}) {
        for (const auto & c : doc.at("columns").at(g)) {
          names.push_back(c.get<std::string>());
        }
      }
      header.insert(header.end(), names.begin(), names.end());
    } else if (kind == "lyapunov") {
      names = {"lyapunov"};
      header.push_back("V");
    } else {
      names = {"surrogate", "config_error", "velocity_error"};
      header.insert(header.end(), {"error_norm", "config_error", "velocity_error"});
      clamp = true;
    }
    for (const auto & n : names) {
      idx.push_back(t.column(n));
    }
  } catch (const std::exception & e) {
    err << "export: " << e.what() << '\n';
    return kLiftOrDataError;
  }

  const auto path = output.value_or(dir / (kind + ".csv"));
  std::ofstream csv(path);
  if (!csv) {
    err << "export: cannot write '" << path.string() << "'\n";
    return kLiftOrDataError;
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    csv << (i ? "," : "") << header[i];
  }
  csv << '\n';
  constexpr double tiny = std::numeric_limits<double>::min();
  for (const auto & row : t.rows) {
    csv << static_cast<long long>(row[0]) << ',' << fmt(row[1]);
    for (const auto i : idx) {
      csv << ',' << fmt(clamp ? std::max(row[i], tiny) : row[i]);
    }
    csv << '\n';
  }
  if (!csv) {
    err << "export: write failed for '" << path.string() << "'\n";
    return kLiftOrDataError;
  }
  out << "wrote " << path.string() << " (" << t.rows.size() << " rows)\n";
  return kOk;
}

}  // namespace geotrack::cli
