#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "distributions.hpp"

namespace srpt {

// One-dimensional reflected Brownian motion on [0, inf):
// W = X + L with X(t) = w0 - gamma t + sigma B(t).
struct RbmParams {
  double w0 = 0.0;
  double gamma = 0.0;     // drift is -gamma
  double variance = 1.0;  // sigma^2 per unit time

  RbmParams() = default;
  RbmParams(double w0_, double gamma_, double variance_) : w0(w0_), gamma(gamma_), variance(variance_) {
    if (!(w0 >= 0.0)) throw std::invalid_argument("RBM initial value must be >= 0");
    if (!(variance > 0.0)) throw std::invalid_argument("RBM variance must be > 0");
  }

  double sigma() const { return std::sqrt(variance); }
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Exact Gaussian increments on the grid, then the discrete one-sided
// reflection map W(t_i) = X(t_i) + max(0, max_{k<=i} -X(t_k)).
inline std::vector<double> simulate_rbm(const RbmParams& p, std::span<const double> grid, Rng& rng) {
  if (grid.empty()) return {};
  if (grid.front() != 0.0) throw std::invalid_argument("RBM grid must start at 0");
  boost::random::normal_distribution<double> n01(0.0, 1.0);
  const double sigma = p.sigma();
  std::vector<double> out(grid.size());
  double x = p.w0;
  double push = 0.0;
  out[0] = x;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double dt = grid[i] - grid[i - 1];
    if (!(dt >= 0.0)) throw std::invalid_argument("RBM grid must be increasing");
    x += -p.gamma * dt + sigma * std::sqrt(dt) * n01(rng);
    push = std::max(push, -x);
    out[i] = x + push;
  }
  return out;
}

// Terminal value only, uniform step dt; avoids storing the path.
inline double simulate_rbm_terminal(const RbmParams& p, double t, std::size_t steps, Rng& rng) {
  boost::random::normal_distribution<double> n01(0.0, 1.0);
  const double dt = t / static_cast<double>(steps);
  const double drift = -p.gamma * dt;
  const double scale = p.sigma() * std::sqrt(dt);
  double x = p.w0;
  double push = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    x += drift + scale * n01(rng);
    push = std::max(push, -x);
  }
  return x + push;
}

// Transient law of RBM with drift mu = -gamma started at w0:
// P(W(t) <= x) = Phi((x - w0 - mu t)/(sigma sqrt t))
//              - exp(2 mu x / sigma^2) Phi((-x - w0 - mu t)/(sigma sqrt t)).
inline double rbm_marginal_cdf(const RbmParams& p, double t, double x) {
  if (!(t > 0.0)) throw std::invalid_argument("rbm_marginal_cdf: t must be > 0");
  if (x < 0.0) return 0.0;
  const double mu = -p.gamma;
  const double s = p.sigma() * std::sqrt(t);
  const double first = normal_cdf((x - p.w0 - mu * t) / s);
  const double z = (-x - p.w0 - mu * t) / s;
  const double expo = 2.0 * mu * x / p.variance;
  double second = 0.0;
  const double phi = normal_cdf(z);
  if (phi > 0.0) second = std::exp(expo + std::log(phi));
  return std::clamp(first - second, 0.0, 1.0);
}

inline void write_rbm_path_csv(std::ostream& os, std::size_t replication, std::span<const double> grid,
                               std::span<const double> path) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < grid.size(); ++i) os << replication << ',' << grid[i] << ',' << path[i] << '\n';
  os.precision(old);
}

}  // namespace srpt
