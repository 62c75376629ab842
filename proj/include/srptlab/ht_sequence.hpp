#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "distributions.hpp"

namespace srpt {

struct HeavyTrafficSpec {
  ServiceDistribution service;
  // Only the family and coefficient of variation are used; each model gets
  // this law rescaled to mean 1/alpha^r.
  InterarrivalDistribution interarrival_shape;
  double gamma = 0.0;
  std::vector<double> r_values;
  double w0 = 0.0;

  // Limiting arrival rate alpha = 1 / <chi, nu>.
  double alpha() const { return 1.0 / service.mean(); }
  // Limiting interarrival standard deviation a.
  double a() const { return interarrival_shape.with_mean(1.0 / alpha()).std_dev(); }
};

struct ModelAtR {
  double r = 1.0;
  double alpha_r = 1.0;
  InterarrivalDistribution interarrival;
  ServiceDistribution service;
  std::vector<double> initial_jobs;

  double rho() const { return alpha_r * service.mean(); }
  double a_r() const { return interarrival.std_dev(); }
};

// Deterministic initial state with scaled workload close to w0. For bounded
// service laws the jobs sit at x*; otherwise floor(sqrt r) equal jobs carry
// the work so the scaled mass vanishes.
inline std::vector<double> initial_condition(double r, double w0, const ServiceDistribution& nu) {
  if (!(w0 >= 0.0)) throw std::invalid_argument("w0 must be >= 0");
  if (!(r > 0.0)) throw std::invalid_argument("r must be > 0");
  if (w0 == 0.0) return {};
  const auto xs = nu.moments().x_star;
  if (xs.is_finite()) {
    const auto n = static_cast<std::size_t>(std::floor(r * w0 / xs.value()));
    return std::vector<double>(n, xs.value());
  }
  const auto n = static_cast<std::size_t>(std::floor(std::sqrt(r)));
  if (n == 0) return {};
  return std::vector<double>(n, r * w0 / static_cast<double>(n));
}

inline std::vector<ModelAtR> build(const HeavyTrafficSpec& spec) {
  if (!std::isfinite(spec.gamma)) throw std::invalid_argument("gamma must be finite");
  const double beta = spec.alpha();
  std::vector<ModelAtR> out;
  double prev = 0.0;
  for (double r : spec.r_values) {
    if (!(r >= 1.0)) throw std::invalid_argument("r values must be >= 1");
    if (!(r > prev)) throw std::invalid_argument("r values must be increasing");
    prev = r;
    if (!(spec.gamma / r < 1.0))
      throw std::invalid_argument("gamma / r must be < 1 (r = " + std::to_string(r) + ")");
    const double alpha_r = beta * (1.0 - spec.gamma / r);
    out.push_back(ModelAtR{r, alpha_r, spec.interarrival_shape.with_mean(1.0 / alpha_r), spec.service,
                           initial_condition(r, spec.w0, spec.service)});
  }
  return out;
}

enum class Verdict { pass, fail, not_applicable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "not_applicable";
  }
}

struct AssumptionCheck {
  double r = 0.0;
  std::string name;
  Verdict verdict = Verdict::pass;
  double value = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (c.verdict == Verdict::fail) return false;
    return true;
  }
};

// Tail work r * <chi 1_(x, inf), nu^r> for some x > x*. Must vanish as r grows.
inline double tail_work_quantity(double r, const ServiceDistribution& nu_r, double x) {
  return r * nu_r.truncated_moments(x).mean_above;
}

// Analytic checks of the service-law and heavy-traffic assumptions for each
// model in the ladder. `limit` is the limiting law nu.
inline AssumptionReport validate(const std::vector<ModelAtR>& models, const ServiceDistribution& limit,
                                 double gamma) {
  AssumptionReport rep;
  const Moments lim = limit.moments();
  for (const auto& m : models) {
    const Moments mr = m.service.moments();
    const double r = m.r;

    const bool no_zero_mass = !(m.service.truncated_moments(0.0).mean_below > 0.0) &&
                              m.service.is_continuity_point(0.0);
    rep.checks.push_back({r, "service_no_mass_at_zero", no_zero_mass ? Verdict::pass : Verdict::fail,
                          no_zero_mass ? 0.0 : 1.0, "nu({0})"});

    const bool finite_second = mr.second_moment > 0.0 && std::isfinite(mr.second_moment);
    rep.checks.push_back({r, "service_finite_second_moment", finite_second ? Verdict::pass : Verdict::fail,
                          mr.second_moment, "<chi^2, nu^r>"});

    const double d2 = std::abs(mr.second_moment - lim.second_moment);
    rep.checks.push_back({r, "service_second_moment_convergence",
                          d2 <= 1e-12 * std::max(1.0, lim.second_moment) ? Verdict::pass : Verdict::fail, d2,
                          "|<chi^2, nu^r> - <chi^2, nu>|"});

    const double ht = r * (1.0 - m.rho());
    rep.checks.push_back({r, "heavy_traffic", std::abs(ht - gamma) <= 1e-9 ? Verdict::pass : Verdict::fail, ht,
                          "r (1 - rho^r)"});

    if (lim.x_star.is_finite()) {
      const double x = lim.x_star.value() * (1.0 + 1e-9) + 1e-12;
      const double q = tail_work_quantity(r, m.service, x);
      rep.checks.push_back({r, "tail_work_above_xstar", q <= 1e-12 ? Verdict::pass : Verdict::fail, q,
                            "r <chi 1_(x, inf), nu^r>, x just above x*"});
    } else {
      rep.checks.push_back({r, "tail_work_above_xstar", Verdict::not_applicable, 0.0, "x* unbounded"});
    }
  }
  return rep;
}

}  // namespace srpt
