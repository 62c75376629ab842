#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace srpt {

using Rng = std::mt19937_64;

// Supremum of the support of a service law. Unbounded laws carry no value;
// callers must branch instead of dividing by infinity.
class SupportBound {
 public:
  static SupportBound finite(double x) { return SupportBound(x); }
  static SupportBound unbounded() { return SupportBound(); }

  bool is_finite() const { return value_.has_value(); }
  double value() const {
    if (!value_) throw std::logic_error("support bound is unbounded");
    return *value_;
  }

  bool operator==(const SupportBound&) const = default;

 private:
  SupportBound() = default;
  explicit SupportBound(double x) : value_(x) {}
  std::optional<double> value_;
};

struct Moments {
  double mean = 0.0;
  double second_moment = 0.0;
  double std_dev = 0.0;
  SupportBound x_star = SupportBound::unbounded();
};

// Partial moments <chi 1_[0,x], nu>, <chi^2 1_[0,x], nu> and the tail parts
// over (x, inf). These are not conditional moments.
struct TruncatedMoments {
  double mean_below = 0.0;
  double second_below = 0.0;
  double mean_above = 0.0;
  double second_above = 0.0;
};

namespace service {

struct TwoPoint {
  double x1, p1, x2;
};
struct DiscreteFinite {
  std::vector<std::pair<double, double>> points;  // (value, probability)
};
struct Uniform {
  double lo, hi;
};
struct Deterministic {
  double x;
};
struct Exponential {
  double rate;
};
// Density proportional to x^{-shape-1} on [lo, hi].
struct BoundedPareto {
  double shape, lo, hi;
};

}  // namespace service

class ServiceDistribution {
 public:
  using Family = std::variant<service::TwoPoint, service::DiscreteFinite, service::Uniform,
                              service::Deterministic, service::Exponential,
                              service::BoundedPareto>;

  explicit ServiceDistribution(Family f) : family_(std::move(f)) {
    std::visit([this](auto& p) { validate(p); }, family_);
  }

  static ServiceDistribution two_point(double x1, double p1, double x2) {
    return ServiceDistribution(service::TwoPoint{x1, p1, x2});
  }
  static ServiceDistribution discrete(std::vector<std::pair<double, double>> pts) {
    return ServiceDistribution(service::DiscreteFinite{std::move(pts)});
  }
  static ServiceDistribution uniform(double lo, double hi) {
    return ServiceDistribution(service::Uniform{lo, hi});
  }
  static ServiceDistribution deterministic(double x) {
    return ServiceDistribution(service::Deterministic{x});
  }
  static ServiceDistribution exponential(double rate) {
    return ServiceDistribution(service::Exponential{rate});
  }
  static ServiceDistribution bounded_pareto(double shape, double lo, double hi) {
    return ServiceDistribution(service::BoundedPareto{shape, lo, hi});
  }

  const Family& family() const { return family_; }

  double sample(Rng& rng) const {
    return std::visit([&rng](const auto& p) { return draw(p, rng); }, family_);
  }

  Moments moments() const {
    Moments m;
    const auto t = truncated_moments(0.0);
    m.mean = t.mean_above;
    m.second_moment = t.second_above;
    m.std_dev = std::sqrt(std::max(0.0, m.second_moment - m.mean * m.mean));
    m.x_star = std::visit([](const auto& p) { return sup(p); }, family_);
    return m;
  }

  double mean() const { return moments().mean; }

  TruncatedMoments truncated_moments(double x) const {
    if (!(x >= 0.0)) throw std::invalid_argument("truncation level must be >= 0");
    return std::visit([x](const auto& p) { return partial(p, x); }, family_);
  }

  // nu({x}) == 0
  bool is_continuity_point(double x) const {
    return std::visit([x](const auto& p) { return atom_mass(p, x) == 0.0; }, family_);
  }

  std::string name() const {
    return std::visit([](const auto& p) { return family_name(p); }, family_);
  }

 private:
  // validation
  static void validate(service::TwoPoint& p) {
    if (!(p.x1 > 0.0 && p.x2 > 0.0 && std::isfinite(p.x1) && std::isfinite(p.x2)))
      throw std::invalid_argument("two_point: values must be finite and > 0");
    if (!(p.p1 >= 0.0 && p.p1 <= 1.0)) throw std::invalid_argument("two_point: p1 must be in [0,1]");
  }
  static void validate(service::DiscreteFinite& p) {
    if (p.points.empty()) throw std::invalid_argument("discrete: no support points");
    double total = 0.0;
    for (const auto& [x, w] : p.points) {
      if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("discrete: values must be > 0");
      if (!(w >= 0.0)) throw std::invalid_argument("discrete: probabilities must be >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete: probabilities must sum to 1");
  }
  static void validate(service::Uniform& p) {
    if (!(p.lo >= 0.0 && p.hi > p.lo && std::isfinite(p.hi)))
      throw std::invalid_argument("uniform: need 0 <= lo < hi < inf");
  }
  static void validate(service::Deterministic& p) {
    if (!(p.x > 0.0) || !std::isfinite(p.x)) throw std::invalid_argument("deterministic: value must be > 0");
  }
  static void validate(service::Exponential& p) {
    if (!(p.rate > 0.0) || !std::isfinite(p.rate)) throw std::invalid_argument("exponential: rate must be > 0");
  }
  static void validate(service::BoundedPareto& p) {
    if (!(p.shape > 0.0 && p.lo > 0.0 && p.hi > p.lo && std::isfinite(p.hi)))
      throw std::invalid_argument("bounded_pareto: need shape > 0 and 0 < lo < hi < inf");
  }

  // sampling
  static double draw(const service::TwoPoint& p, Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p.p1 ? p.x1 : p.x2;
  }
  static double draw(const service::DiscreteFinite& p, Rng& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (const auto& [x, w] : p.points) {
      if (u < w) return x;
      u -= w;
    }
    for (auto it = p.points.rbegin(); it != p.points.rend(); ++it)
      if (it->second > 0.0) return it->first;
    return p.points.back().first;
  }
  static double draw(const service::Uniform& p, Rng& rng) {
    std::uniform_real_distribution<double> d(p.lo, p.hi);
    double v = d(rng);
    while (v <= 0.0) v = d(rng);
    return v;
  }
  static double draw(const service::Deterministic& p, Rng&) { return p.x; }
  static double draw(const service::Exponential& p, Rng& rng) {
    std::exponential_distribution<double> d(p.rate);
    double v = d(rng);
    while (v <= 0.0) v = d(rng);
    return v;
  }
  static double draw(const service::BoundedPareto& p, Rng& rng) {
    // inverse CDF: F(x) = (1 - (lo/x)^a) / (1 - (lo/hi)^a)
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double c = 1.0 - std::pow(p.lo / p.hi, p.shape);
    return p.lo * std::pow(1.0 - u * c, -1.0 / p.shape);
  }

  // support supremum
  static SupportBound sup(const service::TwoPoint& p) {
    if (p.p1 == 1.0) return SupportBound::finite(p.x1);
    if (p.p1 == 0.0) return SupportBound::finite(p.x2);
    return SupportBound::finite(std::max(p.x1, p.x2));
  }
  static SupportBound sup(const service::DiscreteFinite& p) {
    double m = 0.0;
    for (const auto& [x, w] : p.points)
      if (w > 0.0) m = std::max(m, x);
    return SupportBound::finite(m);
  }
  static SupportBound sup(const service::Uniform& p) { return SupportBound::finite(p.hi); }
  static SupportBound sup(const service::Deterministic& p) { return SupportBound::finite(p.x); }
  static SupportBound sup(const service::Exponential&) { return SupportBound::unbounded(); }
  static SupportBound sup(const service::BoundedPareto& p) { return SupportBound::finite(p.hi); }

  // partial moments
  static TruncatedMoments from_atoms(const std::vector<std::pair<double, double>>& pts, double x) {
    TruncatedMoments t;
    for (const auto& [v, w] : pts) {
      if (v <= x) {
        t.mean_below += w * v;
        t.second_below += w * v * v;
      } else {
        t.mean_above += w * v;
        t.second_above += w * v * v;
      }
    }
    return t;
  }
  static TruncatedMoments partial(const service::TwoPoint& p, double x) {
    return from_atoms({{p.x1, p.p1}, {p.x2, 1.0 - p.p1}}, x);
  }
  static TruncatedMoments partial(const service::DiscreteFinite& p, double x) {
    return from_atoms(p.points, x);
  }
  static TruncatedMoments partial(const service::Deterministic& p, double x) {
    return from_atoms({{p.x, 1.0}}, x);
  }
  static TruncatedMoments partial(const service::Uniform& p, double x) {
    const double w = p.hi - p.lo;
    const double c = std::clamp(x, p.lo, p.hi);
    TruncatedMoments t;
    t.mean_below = (c * c - p.lo * p.lo) / (2.0 * w);
    t.second_below = (c * c * c - p.lo * p.lo * p.lo) / (3.0 * w);
    t.mean_above = (p.hi * p.hi - c * c) / (2.0 * w);
    t.second_above = (p.hi * p.hi * p.hi - c * c * c) / (3.0 * w);
    return t;
  }
  static TruncatedMoments partial(const service::Exponential& p, double x) {
    const double l = p.rate;
    const double e = std::exp(-l * x);
    TruncatedMoments t;
    t.mean_above = e * (x + 1.0 / l);
    t.second_above = e * (x * x + 2.0 * x / l + 2.0 / (l * l));
    t.mean_below = 1.0 / l - t.mean_above;
    t.second_below = 2.0 / (l * l) - t.second_above;
    // direct forms avoid cancellation near x = 0
    if (l * x < 1e-3) {
      t.mean_below = -std::expm1(-l * x) / l - x * e;
      t.second_below = 2.0 / (l * l) * (-std::expm1(-l * x)) - e * (x * x + 2.0 * x / l);
    }
    return t;
  }
  // integral of x^k over [a, b] against the bounded Pareto density
  static double pareto_partial(const service::BoundedPareto& p, int k, double a, double b) {
    if (b <= a) return 0.0;
    const double norm = p.shape * std::pow(p.lo, p.shape) / (1.0 - std::pow(p.lo / p.hi, p.shape));
    const double e = k - p.shape;
    if (std::abs(e) < 1e-14) return norm * std::log(b / a);
    return norm * (std::pow(b, e) - std::pow(a, e)) / e;
  }
  static TruncatedMoments partial(const service::BoundedPareto& p, double x) {
    const double c = std::clamp(x, p.lo, p.hi);
    TruncatedMoments t;
    t.mean_below = pareto_partial(p, 1, p.lo, c);
    t.second_below = pareto_partial(p, 2, p.lo, c);
    t.mean_above = pareto_partial(p, 1, c, p.hi);
    t.second_above = pareto_partial(p, 2, c, p.hi);
    return t;
  }

  // point masses
  static double atom_mass(const service::TwoPoint& p, double x) {
    double m = 0.0;
    if (x == p.x1) m += p.p1;
    if (x == p.x2) m += 1.0 - p.p1;
    return m;
  }
  static double atom_mass(const service::DiscreteFinite& p, double x) {
    double m = 0.0;
    for (const auto& [v, w] : p.points)
      if (v == x) m += w;
    return m;
  }
  static double atom_mass(const service::Deterministic& p, double x) { return x == p.x ? 1.0 : 0.0; }
  template <class Continuous>
  static double atom_mass(const Continuous&, double) {
    return 0.0;
  }

  static std::string family_name(const service::TwoPoint&) { return "two_point"; }
  static std::string family_name(const service::DiscreteFinite&) { return "discrete"; }
  static std::string family_name(const service::Uniform&) { return "uniform"; }
  static std::string family_name(const service::Deterministic&) { return "deterministic"; }
  static std::string family_name(const service::Exponential&) { return "exponential"; }
  static std::string family_name(const service::BoundedPareto&) { return "bounded_pareto"; }

  Family family_;
};

namespace interarrival {

struct Exponential {
  double rate;
};
struct Deterministic {
  double gap;
};
struct ScaledGamma {
  double shape, mean;
};
struct ScaledUniform {
  double mean, halfwidth;
};

}  // namespace interarrival

class InterarrivalDistribution {
 public:
  using Family = std::variant<interarrival::Exponential, interarrival::Deterministic,
                              interarrival::ScaledGamma, interarrival::ScaledUniform>;

  explicit InterarrivalDistribution(Family f) : family_(std::move(f)) {
    std::visit([](const auto& p) { validate(p); }, family_);
  }

  static InterarrivalDistribution exponential(double rate) {
    return InterarrivalDistribution(interarrival::Exponential{rate});
  }
  static InterarrivalDistribution deterministic(double gap) {
    return InterarrivalDistribution(interarrival::Deterministic{gap});
  }
  static InterarrivalDistribution scaled_gamma(double shape, double mean) {
    return InterarrivalDistribution(interarrival::ScaledGamma{shape, mean});
  }
  static InterarrivalDistribution scaled_uniform(double mean, double halfwidth) {
    return InterarrivalDistribution(interarrival::ScaledUniform{mean, halfwidth});
  }
  // Gamma law with the given mean and standard deviation (sd > 0).
  static InterarrivalDistribution gamma_with_sd(double mean, double sd) {
    return scaled_gamma((mean / sd) * (mean / sd), mean);
  }

  const Family& family() const { return family_; }

  double mean() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, interarrival::Exponential>) return 1.0 / p.rate;
          else if constexpr (std::is_same_v<T, interarrival::Deterministic>) return p.gap;
          else return p.mean;
        },
        family_);
  }

  double rate() const { return 1.0 / mean(); }

  double std_dev() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, interarrival::Exponential>) return 1.0 / p.rate;
          else if constexpr (std::is_same_v<T, interarrival::Deterministic>) return 0.0;
          else if constexpr (std::is_same_v<T, interarrival::ScaledGamma>)
            return p.mean / std::sqrt(p.shape);
          else return p.halfwidth / std::sqrt(3.0);
        },
        family_);
  }

  // Same family and coefficient of variation, new mean.
  InterarrivalDistribution with_mean(double new_mean) const {
    if (!(new_mean > 0.0)) throw std::invalid_argument("interarrival mean must be > 0");
    const double k = new_mean / mean();
    return std::visit(
        [&](const auto& p) -> InterarrivalDistribution {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, interarrival::Exponential>) return exponential(1.0 / new_mean);
          else if constexpr (std::is_same_v<T, interarrival::Deterministic>) return deterministic(new_mean);
          else if constexpr (std::is_same_v<T, interarrival::ScaledGamma>) return scaled_gamma(p.shape, new_mean);
          else return scaled_uniform(new_mean, p.halfwidth * k);
        },
        family_);
  }

  double sample(Rng& rng) const {
    double v = 0.0;
    do {
      v = std::visit(
          [&rng](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, interarrival::Exponential>)
              return std::exponential_distribution<double>(p.rate)(rng);
            else if constexpr (std::is_same_v<T, interarrival::Deterministic>)
              return p.gap;
            else if constexpr (std::is_same_v<T, interarrival::ScaledGamma>)
              return std::gamma_distribution<double>(p.shape, p.mean / p.shape)(rng);
            else
              return std::uniform_real_distribution<double>(p.mean - p.halfwidth,
                                                            p.mean + p.halfwidth)(rng);
          },
          family_);
    } while (!(v > 0.0));
    return v;
  }

  std::string name() const {
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, interarrival::Exponential>) return "exponential";
          else if constexpr (std::is_same_v<T, interarrival::Deterministic>) return "deterministic";
          else if constexpr (std::is_same_v<T, interarrival::ScaledGamma>) return "scaled_gamma";
          else return "scaled_uniform";
        },
        family_);
  }

 private:
  static void validate(const interarrival::Exponential& p) {
    if (!(p.rate > 0.0) || !std::isfinite(p.rate)) throw std::invalid_argument("exponential: rate must be > 0");
  }
  static void validate(const interarrival::Deterministic& p) {
    if (!(p.gap > 0.0) || !std::isfinite(p.gap)) throw std::invalid_argument("deterministic: gap must be > 0");
  }
  static void validate(const interarrival::ScaledGamma& p) {
    if (!(p.shape > 0.0 && p.mean > 0.0)) throw std::invalid_argument("scaled_gamma: shape and mean must be > 0");
  }
  static void validate(const interarrival::ScaledUniform& p) {
    if (!(p.mean > 0.0 && p.halfwidth >= 0.0 && p.halfwidth < p.mean))
      throw std::invalid_argument("scaled_uniform: need 0 <= halfwidth < mean");
  }

  Family family_;
};

// ---------------------------------------------------------------------------
// JSON config encoding. Unknown keys are rejected.

namespace detail {

inline void require_keys(const nlohmann::json& j, std::set<std::string> allowed) {
  if (!j.is_object()) throw std::invalid_argument("distribution spec must be a JSON object");
  allowed.insert("family");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument("unknown key '" + k + "' in distribution spec");
  for (const auto& k : allowed)
    if (!j.contains(k)) throw std::invalid_argument("missing key '" + k + "' in distribution spec");
}

inline double num(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string("key '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace detail

inline ServiceDistribution service_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw std::invalid_argument("distribution spec needs a string 'family'");
  const auto fam = j["family"].get<std::string>();
  using detail::num;
  if (fam == "two_point") {
    detail::require_keys(j, {"x1", "p1", "x2"});
    return ServiceDistribution::two_point(num(j, "x1"), num(j, "p1"), num(j, "x2"));
  }
  if (fam == "discrete") {
    detail::require_keys(j, {"points"});
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : j["points"]) {
      if (!p.is_array() || p.size() != 2) throw std::invalid_argument("discrete: points are [value, probability]");
      pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return ServiceDistribution::discrete(std::move(pts));
  }
  if (fam == "uniform") {
    detail::require_keys(j, {"lo", "hi"});
    return ServiceDistribution::uniform(num(j, "lo"), num(j, "hi"));
  }
  if (fam == "deterministic") {
    detail::require_keys(j, {"x"});
    return ServiceDistribution::deterministic(num(j, "x"));
  }
  if (fam == "exponential") {
    detail::require_keys(j, {"rate"});
    return ServiceDistribution::exponential(num(j, "rate"));
  }
  if (fam == "bounded_pareto") {
    detail::require_keys(j, {"shape", "lo", "hi"});
    return ServiceDistribution::bounded_pareto(num(j, "shape"), num(j, "lo"), num(j, "hi"));
  }
  throw std::invalid_argument("unknown service family '" + fam + "'");
}

inline InterarrivalDistribution interarrival_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw std::invalid_argument("distribution spec needs a string 'family'");
  const auto fam = j["family"].get<std::string>();
  using detail::num;
  if (fam == "exponential") {
    detail::require_keys(j, {"rate"});
    return InterarrivalDistribution::exponential(num(j, "rate"));
  }
  if (fam == "deterministic") {
    detail::require_keys(j, {"gap"});
    return InterarrivalDistribution::deterministic(num(j, "gap"));
  }
  if (fam == "scaled_gamma") {
    detail::require_keys(j, {"shape", "mean"});
    return InterarrivalDistribution::scaled_gamma(num(j, "shape"), num(j, "mean"));
  }
  if (fam == "scaled_uniform") {
    detail::require_keys(j, {"mean", "halfwidth"});
    return InterarrivalDistribution::scaled_uniform(num(j, "mean"), num(j, "halfwidth"));
  }
  throw std::invalid_argument("unknown interarrival family '" + fam + "'");
}

inline nlohmann::json to_json(const ServiceDistribution& d) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, service::TwoPoint>)
          return {{"family", "two_point"}, {"x1", p.x1}, {"p1", p.p1}, {"x2", p.x2}};
        else if constexpr (std::is_same_v<T, service::DiscreteFinite>) {
          nlohmann::json pts = nlohmann::json::array();
          for (const auto& [x, w] : p.points) pts.push_back({x, w});
          return {{"family", "discrete"}, {"points", pts}};
        } else if constexpr (std::is_same_v<T, service::Uniform>)
          return {{"family", "uniform"}, {"lo", p.lo}, {"hi", p.hi}};
        else if constexpr (std::is_same_v<T, service::Deterministic>)
          return {{"family", "deterministic"}, {"x", p.x}};
        else if constexpr (std::is_same_v<T, service::Exponential>)
          return {{"family", "exponential"}, {"rate", p.rate}};
        else
          return {{"family", "bounded_pareto"}, {"shape", p.shape}, {"lo", p.lo}, {"hi", p.hi}};
      },
      d.family());
}

inline nlohmann::json to_json(const InterarrivalDistribution& d) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, interarrival::Exponential>)
          return {{"family", "exponential"}, {"rate", p.rate}};
        else if constexpr (std::is_same_v<T, interarrival::Deterministic>)
          return {{"family", "deterministic"}, {"gap", p.gap}};
        else if constexpr (std::is_same_v<T, interarrival::ScaledGamma>)
          return {{"family", "scaled_gamma"}, {"shape", p.shape}, {"mean", p.mean}};
        else
          return {{"family", "scaled_uniform"}, {"mean", p.mean}, {"halfwidth", p.halfwidth}};
      },
      d.family());
}

}  // namespace srpt
