#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "distributions.hpp"
#include "engine.hpp"
#include "ht_sequence.hpp"
#include "point_measure.hpp"
#include "rbm.hpp"
#include "scaling.hpp"

namespace srpt {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double max = 0.0;
};

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  if (s.n > 1) s.std_error = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  s.q50 = quantile_sorted(sorted, 0.5);
  s.q90 = quantile_sorted(sorted, 0.9);
  s.max = sorted.back();
  return s;
}

struct VarianceEstimate {
  double variance = 0.0;
  double std_error = 0.0;
};

// Unbiased sample variance with the large-sample standard error
// sqrt((m4 - s^4) / n).
inline VarianceEstimate sample_variance(std::span<const double> xs) {
  VarianceEstimate v;
  const auto n = static_cast<double>(xs.size());
  if (xs.size() < 2) return v;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  v.variance = m2 / (n - 1.0);
  const double pop2 = m2 / n;
  v.std_error = std::sqrt(std::max(0.0, m4 / n - pop2 * pop2) / n);
  return v;
}

// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of the
// samples and a continuous CDF.
inline double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return std::clamp(d, 0.0, 1.0);
}

// Approximate standard deviation of the KS statistic at sample size n
// (asymptotic Kolmogorov law, sd ~= 0.2603).
inline double ks_std_error(std::size_t n) { return 0.2603 / std::sqrt(static_cast<double>(n)); }

// ---------------------------------------------------------------------------
// Queue length versus workload / x*.

struct QueueWorkloadStats {
  std::vector<double> deviation;  // per replication: max_t |Zhat - What/x*|
  Summary summary;
  Summary relative;  // deviation / (max_t What/x* + 0.01)
};

inline double max_deviation(const ScaledPath& path, double x_star) {
  double d = 0.0;
  for (const auto& p : path.points) d = std::max(d, std::abs(p.queue - p.workload / x_star));
  return d;
}

inline QueueWorkloadStats queue_vs_workload(std::span<const ScaledPath> paths, const SupportBound& x_star) {
  if (!x_star.is_finite()) throw std::invalid_argument("queue_vs_workload needs a finite x*");
  const double xs = x_star.value();
  QueueWorkloadStats out;
  std::vector<double> rel;
  for (const auto& path : paths) {
    const double d = max_deviation(path, xs);
    double wmax = 0.0;
    for (const auto& p : path.points) wmax = std::max(wmax, p.workload / xs);
    out.deviation.push_back(d);
    rel.push_back(d / (wmax + 0.01));
  }
  out.summary = summarize(out.deviation);
  out.relative = summarize(rel);
  return out;
}

inline double max_queue(const ScaledPath& path) {
  double m = 0.0;
  for (const auto& p : path.points) m = std::max(m, p.queue);
  return m;
}

// ---------------------------------------------------------------------------
// Concentration of the scaled state at x*.

struct ConcentrationRow {
  double below_mass_max = 0.0;  // max_t Zhat_{x*-eps}
  double above_mass_max = 0.0;  // max_t <1_(x*+eps, inf), Zhat>
  double band_gap_mean = 0.0;   // grid mean of |<chi 1_(x*-eps, x*+eps], Zhat> - What|
};

struct ConcentrationProfile {
  std::vector<ConcentrationRow> rows;
  Summary below, above, band;
};

inline ConcentrationRow concentration_row(const ScaledPath& path, double x_star, double eps) {
  ConcentrationRow row;
  const double lo = x_star - eps;
  const double hi = x_star + eps;
  double band_sum = 0.0;
  for (const auto& p : path.points) {
    const auto below = p.state.truncated(std::max(lo, 0.0));
    const auto upto = p.state.truncated(hi);
    const double band_mass = upto.mass_below - (lo >= 0.0 ? below.mass_below : 0.0);
    const double band_work = upto.work_below - (lo >= 0.0 ? below.work_below : 0.0);
    const double below_mass = lo >= 0.0 ? below.mass_below : 0.0;
    const double total = p.state.mass();
    if (std::abs(total - (below_mass + band_mass + upto.mass_above)) > 1e-9)
      throw InvariantViolation("scaled mass does not split into below/band/above");
    row.below_mass_max = std::max(row.below_mass_max, below_mass);
    row.above_mass_max = std::max(row.above_mass_max, upto.mass_above);
    band_sum += std::abs(band_work - p.workload);
  }
  if (!path.points.empty()) row.band_gap_mean = band_sum / static_cast<double>(path.points.size());
  return row;
}

inline ConcentrationProfile concentration_profile(std::span<const ScaledPath> paths, const ServiceDistribution& nu,
                                                  double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("concentration_profile: eps must be > 0");
  const auto xs = nu.moments().x_star;
  if (!xs.is_finite()) throw std::invalid_argument("concentration_profile needs a finite x*");
  const double x_star = xs.value();
  if (!nu.is_continuity_point(x_star - eps) || !nu.is_continuity_point(x_star + eps))
    throw std::invalid_argument("concentration_profile: x* +/- eps must be continuity points");
  ConcentrationProfile out;
  std::vector<double> b, a, g;
  for (const auto& path : paths) {
    out.rows.push_back(concentration_row(path, x_star, eps));
    b.push_back(out.rows.back().below_mass_max);
    a.push_back(out.rows.back().above_mass_max);
    g.push_back(out.rows.back().band_gap_mean);
  }
  out.below = summarize(b);
  out.above = summarize(a);
  out.band = summarize(g);
  return out;
}

// BL distance between Zhat(t) and its claimed limit (What(t)/x*) delta_{x*}.
inline double bl_to_concentrated(const ScaledPoint& p, double x_star) {
  PointMeasure limit;
  if (p.workload > 0.0) limit.add(x_star, p.workload / x_star);
  return bl_distance(p.state, limit);
}

// ---------------------------------------------------------------------------
// Workload marginal versus the RBM law.

struct KsVerdict {
  double r = 0.0;
  std::size_t n = 0;
  double ks = 0.0;
  double std_error = 0.0;
};

inline std::size_t grid_index(const ScaledPath& path, double t0) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < path.points.size(); ++i)
    if (std::abs(path.points[i].t - t0) < std::abs(path.points[best].t - t0)) best = i;
  if (path.points.empty() || std::abs(path.points[best].t - t0) > 1e-12)
    throw std::invalid_argument("t0 is not a grid point of the scaled path");
  return best;
}

inline KsVerdict workload_law_check(std::span<const double> workload_at_t0, const RbmParams& params, double t0,
                                    double r = 0.0) {
  if (workload_at_t0.size() < 200) throw std::invalid_argument("workload_law_check needs >= 200 replications");
  KsVerdict v;
  v.r = r;
  v.n = workload_at_t0.size();
  v.ks = ks_statistic(workload_at_t0, [&](double x) { return rbm_marginal_cdf(params, t0, x); });
  v.std_error = ks_std_error(v.n);
  return v;
}

inline KsVerdict workload_law_check(std::span<const ScaledPath> paths, const RbmParams& params, double t0) {
  std::vector<double> w;
  for (const auto& p : paths) w.push_back(p.points[grid_index(p, t0)].workload);
  return workload_law_check(w, params, t0, paths.empty() ? 0.0 : paths.front().r);
}

// ---------------------------------------------------------------------------
// Load FCLT variances.

struct VarianceRow {
  std::string process;  // "load", "load_below", "tail"
  double x = 0.0;
  double sample_variance = 0.0;
  double std_error = 0.0;
  double target = 0.0;  // t0 * variance per unit time of the limit
  double ratio = 0.0;   // sample / target (0 when target is 0)
};

inline std::vector<VarianceRow> fclt_variance_check(std::span<const ScaledLoadPath> paths, const ModelAtR& model,
                                                    double alpha, double a, const std::vector<double>& x_levels,
                                                    double t0) {
  if (paths.size() < 1000) throw std::invalid_argument("fclt_variance_check needs >= 1000 replications");
  const auto& nu = model.service;
  auto at_t0 = [&](const ScaledLoadPath& p) -> const ScaledLoadPoint& {
    for (const auto& q : p.points)
      if (std::abs(q.t - t0) <= 1e-12) return q;
    throw std::invalid_argument("t0 is not a grid point of the load path");
  };
  auto row = [](std::string name, double x, std::span<const double> xs, double target) {
    const auto v = sample_variance(xs);
    VarianceRow r{std::move(name), x, v.variance, v.std_error, target, 0.0};
    r.ratio = target > 0.0 ? v.variance / target : 0.0;
    return r;
  };

  std::vector<VarianceRow> out;
  std::vector<double> total;
  for (const auto& p : paths) total.push_back(at_t0(p).load);
  out.push_back(row("load", 0.0, total, t0 * load_variance(nu, alpha, a)));

  for (std::size_t i = 0; i < x_levels.size(); ++i) {
    const double x = x_levels[i];
    std::vector<double> below, tail;
    for (const auto& p : paths) {
      const auto& pt = at_t0(p);
      std::size_t k = 0;
      while (k < p.x_levels.size() && p.x_levels[k] != x) ++k;
      if (k == p.x_levels.size()) throw std::invalid_argument("load path lacks truncation level");
      below.push_back(pt.load_below[k]);
      tail.push_back(pt.tail[k]);
    }
    out.push_back(row("load_below", x, below, t0 * truncated_variance(nu, alpha, a, x)));
    out.push_back(row("tail", x, tail, t0 * tail_variance(nu, alpha, a, x)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trend verdicts and the convergence report.

struct TrendPoint {
  double r = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

// Strict decrease along the r-ladder, allowing at most one inversion whose
// size is below two combined standard errors.
inline bool decreasing_trend(std::span<const TrendPoint> pts, std::string* detail = nullptr) {
  int inversions = 0;
  bool ok = true;
  std::ostringstream msg;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].value < pts[i - 1].value) continue;
    const double combined = std::hypot(pts[i].std_error, pts[i - 1].std_error);
    const bool small = (pts[i].value - pts[i - 1].value) < 2.0 * combined;
    ++inversions;
    msg << "inversion at r=" << pts[i - 1].r << "->" << pts[i].r << (small ? " (within 2 SE)" : " (significant)")
        << "; ";
    if (!small || inversions > 1) ok = false;
  }
  if (detail) *detail = msg.str();
  return ok;
}

struct ReportRow {
  double r = 0.0;
  std::size_t replications = 0;
  std::string statistic;
  double value = 0.0;
  double std_error = 0.0;
};

struct ReportVerdict {
  std::string statistic;
  std::string check;  // "decreasing" or "threshold"
  bool passed = false;
  std::string detail;
};

class ConvergenceReport {
 public:
  void add(ReportRow row) { rows_.push_back(std::move(row)); }
  void add_verdict(ReportVerdict v) { verdicts_.push_back(std::move(v)); }

  // Rows grouped by statistic in first-seen order, sorted by r within a group.
  std::vector<ReportRow> rows() const {
    std::vector<std::string> order;
    for (const auto& r : rows_)
      if (std::find(order.begin(), order.end(), r.statistic) == order.end()) order.push_back(r.statistic);
    std::vector<ReportRow> out = rows_;
    std::stable_sort(out.begin(), out.end(), [&](const ReportRow& a, const ReportRow& b) {
      const auto ia = std::find(order.begin(), order.end(), a.statistic) - order.begin();
      const auto ib = std::find(order.begin(), order.end(), b.statistic) - order.begin();
      if (ia != ib) return ia < ib;
      return a.r < b.r;
    });
    return out;
  }

  const std::vector<ReportVerdict>& verdicts() const { return verdicts_; }

  std::vector<TrendPoint> series(const std::string& statistic) const {
    std::vector<TrendPoint> out;
    for (const auto& r : rows())
      if (r.statistic == statistic) out.push_back({r.r, r.value, r.std_error});
    return out;
  }

  void write_csv(std::ostream& os) const {
    os << "r,replications,statistic,value,std_error\n";
    const auto old = os.precision(17);
    for (const auto& r : rows())
      os << r.r << ',' << r.replications << ',' << r.statistic << ',' << r.value << ',' << r.std_error << '\n';
    os.precision(old);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["note"] = "finite-r thresholds are pilot-calibrated engineering choices, not values from theory";
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows())
      j["rows"].push_back({{"r", r.r},
                           {"replications", r.replications},
                           {"statistic", r.statistic},
                           {"value", r.value},
                           {"std_error", r.std_error}});
    j["verdicts"] = nlohmann::json::array();
    for (const auto& v : verdicts_)
      j["verdicts"].push_back(
          {{"statistic", v.statistic}, {"check", v.check}, {"passed", v.passed}, {"detail", v.detail}});
    return j;
  }

  // Line plot of one statistic against r on a log-x axis.
  std::string svg(const std::string& statistic) const {
    const auto pts = series(statistic);
    const double w = 480, h = 320, m = 50;
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << statistic << " vs r</text>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\"" << h - m
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m << "\" stroke=\"black\"/>\n";
    if (!pts.empty()) {
      double lx0 = std::log(pts.front().r), lx1 = std::log(pts.back().r);
      if (lx1 <= lx0) lx1 = lx0 + 1.0;
      double y0 = 0.0, y1 = 0.0;
      for (const auto& p : pts) y1 = std::max(y1, p.value + p.std_error);
      if (y1 <= y0) y1 = 1.0;
      auto px = [&](double r) { return m + (std::log(r) - lx0) / (lx1 - lx0) * (w - 2 * m); };
      auto py = [&](double v) { return h - m - (v - y0) / (y1 - y0) * (h - 2 * m); };
      os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
      for (const auto& p : pts) os << px(p.r) << ',' << py(p.value) << ' ';
      os << "\"/>\n";
      for (const auto& p : pts) {
        os << "<circle cx=\"" << px(p.r) << "\" cy=\"" << py(p.value) << "\" r=\"3\" fill=\"steelblue\"/>\n";
        os << "<line x1=\"" << px(p.r) << "\" y1=\"" << py(p.value - p.std_error) << "\" x2=\"" << px(p.r)
           << "\" y2=\"" << py(p.value + p.std_error) << "\" stroke=\"steelblue\"/>\n";
        os << "<text x=\"" << px(p.r) << "\" y=\"" << h - m + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << p.r << "</text>\n";
      }
      os << "<text x=\"" << m - 4 << "\" y=\"" << py(y1)
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << y1 << "</text>\n";
      os << "<text x=\"" << m - 4 << "\" y=\"" << py(y0)
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << y0 << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
  }

  std::vector<std::string> statistics() const {
    std::vector<std::string> out;
    for (const auto& r : rows())
      if (std::find(out.begin(), out.end(), r.statistic) == out.end()) out.push_back(r.statistic);
    return out;
  }

 private:
  std::vector<ReportRow> rows_;
  std::vector<ReportVerdict> verdicts_;
};

}  // namespace srpt
