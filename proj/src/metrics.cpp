#include <algorithm>
#include <cmath>

#include "geotrack/sim.hpp"

namespace geotrack::sim {

namespace {

double median(std::vector<double> v)
{
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

RateFit fit_exponential_rate(const std::vector<double> & t, const std::vector<double> & error, double ceiling,
                             double floor)
{
  RateFit fit;
  if (t.size() != error.size()) {
    throw DomainError("fit_exponential_rate: size mismatch");
  }
  std::size_t begin = t.size();
  for (std::size_t i = 0; i < error.size(); ++i) {
    if (error[i] < ceiling) {
      begin = i;
      break;
    }
  }
  std::vector<double> x, y;
  for (std::size_t i = begin; i < error.size(); ++i) {
    if (!(error[i] > floor)) {
      break;
    }
    x.push_back(t[i]);
    y.push_back(std::log(error[i]));
  }
  fit.points = static_cast<int>(x.size());
  if (x.size() < 3) {
    return fit;
  }
  const double nx = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) {
    return fit;
  }
  fit.fitted = true;
  fit.slope = sxy / sxx;
  fit.rate = -fit.slope;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

double convergence_time(const std::vector<double> & t, const std::vector<double> & error, double threshold)
{
  if (t.size() != error.size()) {
    throw DomainError("convergence_time: size mismatch");
  }
  if (t.empty() || !(error.back() < threshold)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t k = error.size() - 1;
  while (k > 0 && error[k - 1] < threshold) {
    --k;
  }
  return t[k];
}

RolloutSummary convergence_metrics(const RolloutRecord & record, const RolloutOptions & opt)
{
  RolloutSummary sum;
  std::vector<double> t, e;
  for (const auto & s : record.samples) {
    t.push_back(s.t);
    e.push_back(s.surrogate);
  }
  if (t.empty()) {
    return sum;
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw DomainError("convergence_metrics: sample times must be strictly increasing");
    }
  }
  sum.initial_error = e.front();
  sum.final_error = e.back();
  sum.max_error = *std::max_element(e.begin(), e.end());
  for (std::size_t i = 1; i < record.samples.size(); ++i) {
    const double inc = record.samples[i].lyapunov - record.samples[i - 1].lyapunov;
    sum.max_lyapunov_increase = std::max(sum.max_lyapunov_increase, inc);
    if (inc > opt.lyapunov_tolerance) {
      ++sum.lyapunov_violations;
    }
  }
  sum.invariants_ok = record.summary.invariants_ok;
  sum.invariant_message = record.summary.invariant_message;
  sum.max_invariant_defect = record.summary.max_invariant_defect;
  sum.convergence_time = convergence_time(t, e, opt.threshold);
  sum.converged = std::isfinite(sum.convergence_time) && sum.invariants_ok;
  if (sum.converged) {
    const RateFit fit = fit_exponential_rate(t, e, opt.fit_ceiling, opt.fit_floor);
    sum.rate_fitted = fit.fitted;
    sum.fit_points = fit.points;
    if (fit.fitted) {
      sum.rate = fit.rate;
      sum.r_squared = fit.r_squared;
    }
  }
  return sum;
}

BatchSummary summarize(const std::vector<RolloutRecord> & batch)
{
  BatchSummary out;
  out.count = static_cast<int>(batch.size());
  std::vector<double> times, rates, r2;
  for (const auto & r : batch) {
    const auto & s = r.summary;
    if (s.converged) {
      ++out.converged;
      times.push_back(s.convergence_time);
      if (s.rate_fitted) {
        rates.push_back(s.rate);
        r2.push_back(s.r_squared);
      }
    }
    out.lyapunov_violations += s.lyapunov_violations;
    out.invariant_failures += s.invariants_ok ? 0 : 1;
  }
  out.fraction = out.count > 0 ? static_cast<double>(out.converged) / out.count : 0.0;
  out.median_convergence_time = median(times);
  if (!times.empty()) {
    out.max_convergence_time = *std::max_element(times.begin(), times.end());
  }
  if (!rates.empty()) {
    out.min_rate = *std::min_element(rates.begin(), rates.end());
    out.max_rate = *std::max_element(rates.begin(), rates.end());
    out.median_rate = median(rates);
    out.min_r_squared = *std::min_element(r2.begin(), r2.end());
  }
  return out;
}

}  // namespace geotrack::sim
