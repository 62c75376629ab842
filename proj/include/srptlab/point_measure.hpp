#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace srpt {

struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

struct TruncatedStats {
  double mass_below = 0.0;
  double work_below = 0.0;
  double mass_above = 0.0;
  double work_above = 0.0;
};

// Finite nonnegative point measure on [0, inf). Atoms are kept in insertion
// order; operations that need order sort a copy.
class PointMeasure {
 public:
  PointMeasure() = default;

  explicit PointMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    for (const auto& a : atoms_) check(a);
  }

  static PointMeasure dirac(double x, double weight = 1.0) {
    return PointMeasure({{x, weight}});
  }

  void add(double location, double weight = 1.0) {
    Atom a{location, weight};
    check(a);
    atoms_.push_back(a);
  }

  std::span<const Atom> atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  std::size_t size() const { return atoms_.size(); }

  template <class G>
  double integrate(G&& g) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * g(a.location);
    return s;
  }

  double mass() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
  }

  double first_moment() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * a.location;
    return s;
  }

  // Split at x: [0, x] versus (x, inf).
  TruncatedStats truncated(double x) const {
    if (!(x >= 0.0)) throw std::invalid_argument("truncation level must be >= 0");
    TruncatedStats s;
    for (const auto& a : atoms_) {
      if (a.location <= x) {
        s.mass_below += a.weight;
        s.work_below += a.weight * a.location;
      } else {
        s.mass_above += a.weight;
        s.work_above += a.weight * a.location;
      }
    }
    return s;
  }

  PointMeasure scaled(double c) const {
    if (!(c > 0.0)) throw std::invalid_argument("scale factor must be > 0");
    PointMeasure out;
    out.atoms_.reserve(atoms_.size());
    for (const auto& a : atoms_) out.atoms_.push_back({a.location, a.weight * c});
    return out;
  }

  PointMeasure operator+(const PointMeasure& other) const {
    PointMeasure out = *this;
    out.atoms_.insert(out.atoms_.end(), other.atoms_.begin(), other.atoms_.end());
    return out;
  }

  // Atoms sorted by location with coincident locations merged.
  std::vector<Atom> canonical() const {
    std::vector<Atom> v = atoms_;
    std::sort(v.begin(), v.end(),
              [](const Atom& l, const Atom& r) { return l.location < r.location; });
    std::vector<Atom> out;
    for (const auto& a : v) {
      if (!out.empty() && out.back().location == a.location)
        out.back().weight += a.weight;
      else
        out.push_back(a);
    }
    return out;
  }

 private:
  static void check(const Atom& a) {
    if (!(a.location >= 0.0) || !std::isfinite(a.location))
      throw std::invalid_argument("atom location must be finite and >= 0");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw std::invalid_argument("atom weight must be finite and > 0");
  }

  std::vector<Atom> atoms_;
};

inline double integrate_chi(const PointMeasure& m) { return m.first_moment(); }

namespace detail {

// Concave piecewise-linear function on [lo, hi] given by its breakpoints.
struct ConcavePL {
  std::vector<std::pair<double, double>> pts;  // (x, y), x increasing

  double eval(double x) const {
    if (x <= pts.front().first) return pts.front().second;
    if (x >= pts.back().first) return pts.back().second;
    auto it = std::lower_bound(pts.begin(), pts.end(), x,
                               [](const auto& p, double v) { return p.first < v; });
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    if (x1 == x0) return std::max(y0, y1);
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
  }

  double max() const {
    double m = pts.front().second;
    for (const auto& p : pts) m = std::max(m, p.second);
    return m;
  }
};

// M(g) = max { f(h) : |h - g| <= d, h in [-1, 1] }, restricted to [-1, 1].
inline ConcavePL window_max(const ConcavePL& f, double d) {
  std::size_t peak = 0;
  for (std::size_t i = 1; i < f.pts.size(); ++i)
    if (f.pts[i].second > f.pts[peak].second) peak = i;
  std::size_t peak_hi = peak;
  while (peak_hi + 1 < f.pts.size() && f.pts[peak_hi + 1].second >= f.pts[peak].second)
    ++peak_hi;

  ConcavePL shifted;
  for (std::size_t i = 0; i <= peak; ++i)
    shifted.pts.emplace_back(f.pts[i].first - d, f.pts[i].second);
  for (std::size_t i = peak_hi; i < f.pts.size(); ++i)
    shifted.pts.emplace_back(f.pts[i].first + d, f.pts[i].second);

  ConcavePL out;
  out.pts.emplace_back(-1.0, shifted.eval(-1.0));
  for (const auto& p : shifted.pts)
    if (p.first > -1.0 && p.first < 1.0) out.pts.push_back(p);
  out.pts.emplace_back(1.0, shifted.eval(1.0));
  return out;
}

}  // namespace detail

// Bounded-Lipschitz distance: sup |<g, xi> - <g, zeta>| over g with
// sup|g| <= 1 and Lip(g) <= 1. On the line it suffices to optimise the values
// of g at the merged atom locations subject to |g_i| <= 1 and
// |g_i - g_{i+1}| <= gap_i; this is solved exactly by dynamic programming over
// concave piecewise-linear value functions.
inline double bl_distance(const PointMeasure& xi, const PointMeasure& zeta) {
  std::vector<Atom> signed_atoms;
  for (const auto& a : xi.atoms()) signed_atoms.push_back(a);
  for (const auto& a : zeta.atoms()) signed_atoms.push_back({a.location, -a.weight});
  if (signed_atoms.empty()) return 0.0;
  std::sort(signed_atoms.begin(), signed_atoms.end(),
            [](const Atom& l, const Atom& r) { return l.location < r.location; });

  std::vector<Atom> net;
  for (const auto& a : signed_atoms) {
    if (!net.empty() && net.back().location == a.location)
      net.back().weight += a.weight;
    else
      net.push_back(a);
  }

  detail::ConcavePL f;
  f.pts = {{-1.0, -net[0].weight}, {1.0, net[0].weight}};
  for (std::size_t i = 1; i < net.size(); ++i) {
    f = detail::window_max(f, net[i].location - net[i - 1].location);
    const double m = net[i].weight;
    for (auto& p : f.pts) p.second += m * p.first;
  }
  return std::max(0.0, f.max());
}

inline nlohmann::json to_json(const PointMeasure& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : m.canonical()) arr.push_back({a.location, a.weight});
  return arr;
}

}  // namespace srpt
