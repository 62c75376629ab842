#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "distributions.hpp"
#include "point_measure.hpp"

namespace srpt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return splitmix64(seed ^ splitmix64(v + 0x632be59bd9b4e019ULL));
}

enum class StreamLabel : std::uint64_t { arrivals = 1, services = 2, initial = 3, rbm = 4 };

// Master seed plus labelled sub-streams. The same (master, label) pair always
// yields the same generator state.
struct SeedPlan {
  std::uint64_t master = 0;
  // Per-label seed overrides, indexed by label value.
  std::array<std::optional<std::uint64_t>, 5> overrides{};

  SeedPlan with_stream(StreamLabel label, std::uint64_t seed) const {
    SeedPlan p = *this;
    p.overrides[static_cast<std::size_t>(label)] = seed;
    return p;
  }

  Rng stream(StreamLabel label) const {
    const auto& o = overrides[static_cast<std::size_t>(label)];
    const std::uint64_t s = o ? splitmix64(*o) : hash_combine(master, static_cast<std::uint64_t>(label));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return Rng(seq);
  }

  SeedPlan derive(std::uint64_t a, std::uint64_t b = 0) const {
    SeedPlan p;
    p.master = hash_combine(hash_combine(master, a), b);
    return p;
  }
};

struct LoadTotals {
  PointMeasure measure;
  double total = 0.0;             // V(t)
  std::vector<double> truncated;  // V_x(t), one per requested level
};

// Realized primitives for one sample path: initial jobs, then arrivals in
// (0, horizon] with their service sizes.
class PrimitiveStreams {
 public:
  PrimitiveStreams() = default;

  PrimitiveStreams(std::vector<double> initial_jobs, std::vector<double> arrival_times,
                   std::vector<double> service_sizes, double horizon)
      : initial_(std::move(initial_jobs)),
        arrivals_(std::move(arrival_times)),
        sizes_(std::move(service_sizes)),
        horizon_(horizon) {
    if (!(horizon_ >= 0.0)) throw std::invalid_argument("horizon must be >= 0");
    if (arrivals_.size() != sizes_.size())
      throw std::invalid_argument("one service size per arrival required");
    for (double v : initial_)
      if (!(v > 0.0)) throw std::invalid_argument("initial job sizes must be > 0");
    for (double v : sizes_)
      if (!(v > 0.0)) throw std::invalid_argument("service sizes must be > 0");
    for (std::size_t i = 0; i < arrivals_.size(); ++i) {
      if (!(arrivals_[i] > 0.0) || arrivals_[i] > horizon_)
        throw std::invalid_argument("arrival times must lie in (0, horizon]");
      if (i > 0 && !(arrivals_[i] > arrivals_[i - 1]))
        throw std::invalid_argument("arrival times must be strictly increasing");
    }
    prefix_.reserve(sizes_.size() + 1);
    for (double v : sizes_) prefix_.push_back(prefix_.back() + v);
  }

  const std::vector<double>& initial_jobs() const { return initial_; }
  const std::vector<double>& arrival_times() const { return arrivals_; }
  const std::vector<double>& service_sizes() const { return sizes_; }
  double horizon() const { return horizon_; }
  std::size_t initial_count() const { return initial_.size(); }
  std::size_t job_count() const { return initial_.size() + arrivals_.size(); }

  // E(t): arrivals in (0, t].
  std::size_t count(double t) const {
    check_time(t);
    return static_cast<std::size_t>(std::upper_bound(arrivals_.begin(), arrivals_.end(), t) -
                                    arrivals_.begin());
  }

  // A(t) = Z(0) + E(t)
  std::size_t cumulative(double t) const { return initial_.size() + count(t); }

  LoadTotals load(double t, const std::vector<double>& x_levels = {}) const {
    const std::size_t n = count(t);
    LoadTotals out;
    out.truncated.assign(x_levels.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = sizes_[k];
      out.measure.add(v);
      out.total += v;
      for (std::size_t i = 0; i < x_levels.size(); ++i)
        if (v <= x_levels[i]) out.truncated[i] += v;
    }
    return out;
  }

  // V(t) without materialising the measure.
  double total_load(double t) const { return prefix_[count(t)]; }

  PrimitiveStreams with_initial(std::vector<double> initial_jobs) const {
    return PrimitiveStreams(std::move(initial_jobs), arrivals_, sizes_, horizon_);
  }

  void write_csv(std::ostream& os) const {
    os << "index,arrival_time,service_size\n";
    os.precision(17);
    std::size_t j = 1;
    for (double v : initial_) os << j++ << ',' << 0.0 << ',' << v << '\n';
    for (std::size_t k = 0; k < arrivals_.size(); ++k)
      os << j++ << ',' << arrivals_[k] << ',' << sizes_[k] << '\n';
  }

 private:
  void check_time(double t) const {
    if (!(t >= 0.0) || t > horizon_) throw std::out_of_range("time outside [0, horizon]");
  }

  std::vector<double> initial_;
  std::vector<double> arrivals_;
  std::vector<double> sizes_;
  double horizon_ = 0.0;
  std::vector<double> prefix_{0.0};
};

// Arrival times are partial sums of i.i.d. interarrival draws (the first gap
// uses the same law), truncated at the horizon. Service sizes use an
// independent stream.
inline PrimitiveStreams generate(const InterarrivalDistribution& arr, const ServiceDistribution& svc,
                                 std::vector<double> initial, double horizon, const SeedPlan& seeds) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
  Rng arr_rng = seeds.stream(StreamLabel::arrivals);
  Rng svc_rng = seeds.stream(StreamLabel::services);
  std::vector<double> times;
  std::vector<double> sizes;
  times.reserve(static_cast<std::size_t>(horizon / arr.mean() * 1.1) + 16);
  double t = 0.0;
  for (;;) {
    t += arr.sample(arr_rng);
    if (t > horizon) break;
    times.push_back(t);
  }
  sizes.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) sizes.push_back(svc.sample(svc_rng));
  return PrimitiveStreams(std::move(initial), std::move(times), std::move(sizes), horizon);
}

}  // namespace srpt
