#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "distributions.hpp"
#include "engine.hpp"
#include "ht_sequence.hpp"
#include "point_measure.hpp"
#include "primitives.hpp"

namespace srpt {

// Uniform grid of n points on [0, horizon], both ends included.
inline std::vector<double> uniform_grid(double horizon, std::size_t n) {
  if (n < 2) throw std::invalid_argument("grid needs at least two points");
  if (!(horizon > 0.0)) throw std::invalid_argument("grid horizon must be > 0");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = horizon * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = horizon;
  return g;
}

// Unscaled sample times r^2 t for a scaled grid.
inline std::vector<double> unscaled_times(double r, std::span<const double> grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(r * r * t);
  return out;
}

struct ScaledPoint {
  double t = 0.0;
  PointMeasure state;  // (1/r) Z(r^2 t)
  double queue = 0.0;     // Zhat
  double workload = 0.0;  // What
  std::vector<double> queue_below;     // Zhat_x
  std::vector<double> workload_below;  // What_x
};

struct ScaledPath {
  double r = 1.0;
  std::vector<double> x_levels;
  std::vector<ScaledPoint> points;
};

// Scales a trajectory that was sampled at r^2 * grid.
inline ScaledPath scale_state(const Trajectory& traj, double r, std::span<const double> grid,
                              const std::vector<double>& x_levels = {}) {
  if (!(r > 0.0)) throw std::invalid_argument("r must be > 0");
  if (traj.snapshots.size() != grid.size())
    throw std::invalid_argument("trajectory was not sampled on r^2 * grid (insufficient horizon or wrong grid)");
  ScaledPath path;
  path.r = r;
  path.x_levels = x_levels;
  path.points.reserve(grid.size());
  const double inv = 1.0 / r;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& s = traj.snapshots[i];
    if (s.t != r * r * grid[i])
      throw std::invalid_argument("trajectory snapshot time does not match r^2 * grid");
    ScaledPoint p;
    p.t = grid[i];
    p.state = s.state.empty() ? PointMeasure{} : s.state.scaled(inv);
    p.queue = static_cast<double>(s.queue_length) * inv;
    p.workload = p.state.first_moment();
    for (double x : x_levels) {
      const auto st = p.state.truncated(x);
      p.queue_below.push_back(st.mass_below);
      p.workload_below.push_back(st.work_below);
    }
    path.points.push_back(std::move(p));
  }
  return path;
}

struct ScaledLoadPoint {
  double t = 0.0;
  double arrivals = 0.0;  // Ehat
  double load = 0.0;      // Vhat
  std::vector<double> load_below;  // Vhat_x
  std::vector<double> tail;        // Vhat - Vhat_x
};

struct ScaledLoadPath {
  double r = 1.0;
  std::vector<double> x_levels;
  std::vector<ScaledLoadPoint> points;
};

// Centred and scaled arrival and load processes. Centring uses the model's
// exact alpha^r and analytic partial means of nu^r.
inline ScaledLoadPath scale_load(const PrimitiveStreams& streams, const ModelAtR& model,
                                 std::span<const double> grid, const std::vector<double>& x_levels = {}) {
  const double r = model.r;
  for (double t : grid)
    if (r * r * t > streams.horizon()) throw std::invalid_argument("stream horizon does not cover r^2 * grid");
  const double mean = model.service.mean();
  std::vector<double> mean_below;
  for (double x : x_levels) mean_below.push_back(model.service.truncated_moments(x).mean_below);

  const auto& times = streams.arrival_times();
  const auto& sizes = streams.service_sizes();
  ScaledLoadPath out;
  out.r = r;
  out.x_levels = x_levels;
  std::size_t k = 0;
  double v = 0.0;
  std::vector<double> vx(x_levels.size(), 0.0);
  for (double t : grid) {
    const double u = r * r * t;
    while (k < times.size() && times[k] <= u) {
      v += sizes[k];
      for (std::size_t i = 0; i < x_levels.size(); ++i)
        if (sizes[k] <= x_levels[i]) vx[i] += sizes[k];
      ++k;
    }
    ScaledLoadPoint p;
    p.t = t;
    const double expected_count = u * model.alpha_r;
    p.arrivals = (static_cast<double>(k) - expected_count) / r;
    p.load = (v - expected_count * mean) / r;
    for (std::size_t i = 0; i < x_levels.size(); ++i) {
      p.load_below.push_back((vx[i] - expected_count * mean_below[i]) / r);
      p.tail.push_back(p.load - p.load_below.back());
    }
    out.points.push_back(std::move(p));
  }
  return out;
}

// Variance per unit time of the limiting tail-load Brownian motion above x:
// alpha (<chi^2 1_(x,inf), nu> - <chi 1_(x,inf), nu>^2) + <chi 1_(x,inf), nu>^2 alpha^3 a^2.
inline double tail_variance(const ServiceDistribution& nu, double alpha, double a, double x) {
  if (!nu.is_continuity_point(x))
    throw std::invalid_argument("tail_variance: x must be a continuity point of the service law");
  const auto tm = nu.truncated_moments(x);
  const double m = tm.mean_above;
  return alpha * (tm.second_above - m * m) + m * m * alpha * alpha * alpha * a * a;
}

// Same construction for the truncated load over [0, x].
inline double truncated_variance(const ServiceDistribution& nu, double alpha, double a, double x) {
  const auto tm = nu.truncated_moments(x);
  const double m = tm.mean_below;
  return alpha * (tm.second_below - m * m) + m * m * alpha * alpha * alpha * a * a;
}

// alpha (a^2 + b^2), valid when <chi, nu> = 1/alpha.
inline double load_variance(const ServiceDistribution& nu, double alpha, double a) {
  const double b = nu.moments().std_dev;
  return alpha * (a * a + b * b);
}

inline void write_scaled_path_csv_header(std::ostream& os, const std::vector<double>& x_levels, bool with_load) {
  os << "r,replication,t,Zhat,What";
  for (double x : x_levels) os << ",Zhat_below_" << x;
  for (double x : x_levels) os << ",What_below_" << x;
  if (with_load) {
    os << ",Ehat,Vhat";
    for (double x : x_levels) os << ",Vhat_below_" << x;
  }
  os << '\n';
}

inline void write_scaled_path_csv_rows(std::ostream& os, std::size_t replication, const ScaledPath& path,
                                       const ScaledLoadPath* load) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    const auto& p = path.points[i];
    os << path.r << ',' << replication << ',' << p.t << ',' << p.queue << ',' << p.workload;
    for (double v : p.queue_below) os << ',' << v;
    for (double v : p.workload_below) os << ',' << v;
    if (load) {
      const auto& l = load->points.at(i);
      os << ',' << l.arrivals << ',' << l.load;
      for (double v : l.load_below) os << ',' << v;
    }
    os << '\n';
  }
  os.precision(old);
}

}  // namespace srpt
