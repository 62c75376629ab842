#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "distributions.hpp"
#include "point_measure.hpp"
#include "primitives.hpp"

namespace srpt {

enum class Policy { srpt, fifo, lcfs_preemptive };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::srpt: return "SRPT";
    case Policy::fifo: return "FIFO";
    default: return "LCFS";
  }
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "srpt" || s == "SRPT") return Policy::srpt;
  if (s == "fifo" || s == "FIFO") return Policy::fifo;
  if (s == "lcfs" || s == "LCFS" || s == "lcfs_preemptive") return Policy::lcfs_preemptive;
  throw std::invalid_argument("unknown policy '" + s + "'");
}

// Raised when a dynamic invariant of the simulation fails.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Job {
  std::size_t index = 0;  // 1-based, initial jobs first
  double arrival_time = 0.0;
  double initial_size = 0.0;
  double residual = 0.0;
  std::optional<double> departure_time;
};

enum class EventKind { arrival, departure };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::arrival;
  std::size_t job_index = 0;
};

struct Snapshot {
  double t = 0.0;
  PointMeasure state;  // unit atom at every positive residual
  double workload = 0.0;
  std::size_t queue_length = 0;
  double idle_time = 0.0;
  std::size_t arrived = 0;  // A(t)
  std::size_t departed = 0;
};

struct Trajectory {
  Policy policy = Policy::srpt;
  std::vector<Event> events;
  std::vector<Snapshot> snapshots;
  std::vector<Job> jobs;
};

// Job with minimal residual; ties go to the smallest index.
inline std::size_t srpt_select(std::span<const Job> jobs) {
  const Job* best = nullptr;
  for (const auto& j : jobs) {
    if (!(j.residual > 0.0)) continue;
    if (!best || j.residual < best->residual || (j.residual == best->residual && j.index < best->index))
      best = &j;
  }
  if (!best) throw std::invalid_argument("srpt_select: no job with positive residual");
  return best->index;
}

namespace detail {

// Priority key: smaller is served first.
inline std::pair<double, std::int64_t> priority_key(Policy p, const Job& j) {
  const auto idx = static_cast<std::int64_t>(j.index);
  switch (p) {
    case Policy::srpt: return {j.residual, idx};
    case Policy::fifo: return {0.0, idx};
    default: return {0.0, -idx};
  }
}

}  // namespace detail

// Exact event-driven simulation. Between events only the served job's
// residual moves, at rate one. The policy is re-evaluated at every arrival and
// departure. The run continues past the last sample time until the system
// drains, so every job departs.
inline Trajectory simulate(Policy policy, const PrimitiveStreams& streams, std::span<const double> sample_times) {
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (!(sample_times[i] >= 0.0) || sample_times[i] > streams.horizon())
      throw std::invalid_argument("sample time outside [0, horizon]");
    if (i > 0 && sample_times[i] < sample_times[i - 1])
      throw std::invalid_argument("sample times must be nondecreasing");
  }
  const auto& arr = streams.arrival_times();
  for (std::size_t i = 1; i < arr.size(); ++i)
    if (!(arr[i] > arr[i - 1])) throw std::invalid_argument("arrival times must be strictly increasing");

  Trajectory traj;
  traj.policy = policy;
  const std::size_t z0 = streams.initial_count();
  traj.jobs.reserve(streams.job_count());
  traj.events.reserve(2 * streams.job_count());
  traj.snapshots.reserve(sample_times.size());

  using Key = std::pair<double, std::int64_t>;
  std::set<std::pair<Key, std::size_t>> waiting;  // (key, position in jobs)
  std::optional<std::size_t> served;
  double t = 0.0;
  double idle = 0.0;
  std::size_t departed = 0;

  auto enqueue = [&](std::size_t pos) { waiting.insert({detail::priority_key(policy, traj.jobs[pos]), pos}); };

  auto reselect = [&] {
    if (served) {
      enqueue(*served);
      served.reset();
    }
    if (waiting.empty()) return;
    auto it = waiting.begin();
    served = it->second;
    waiting.erase(it);
    if (policy == Policy::srpt && !waiting.empty()) {
      const auto& s = traj.jobs[*served];
      const auto& next = traj.jobs[waiting.begin()->second];
      if (next.residual < s.residual || (next.residual == s.residual && next.index < s.index))
        throw InvariantViolation("SRPT served job does not attain the minimal residual");
    }
  };

  for (std::size_t j = 0; j < z0; ++j) {
    traj.jobs.push_back({j + 1, 0.0, streams.initial_jobs()[j], streams.initial_jobs()[j], std::nullopt});
    traj.events.push_back({0.0, EventKind::arrival, j + 1});
    enqueue(j);
  }
  reselect();

  const auto& sizes = streams.service_sizes();
  std::size_t next_arrival = 0;
  std::size_t next_sample = 0;
  const double inf = std::numeric_limits<double>::infinity();

  auto take_snapshot = [&](double s) {
    Snapshot snap;
    snap.t = s;
    for (const auto& [key, pos] : waiting) {
      snap.state.add(traj.jobs[pos].residual);
      snap.workload += traj.jobs[pos].residual;
    }
    if (served) {
      const double res = traj.jobs[*served].residual - (s - t);
      if (res > 0.0) {
        snap.state.add(res);
        snap.workload += res;
      }
    }
    snap.queue_length = snap.state.size();
    snap.idle_time = idle + (served ? 0.0 : s - t);
    snap.arrived = z0 + next_arrival;
    snap.departed = departed;
    traj.snapshots.push_back(std::move(snap));
  };

  for (;;) {
    const double completion = served ? t + traj.jobs[*served].residual : inf;
    const double arrival = next_arrival < arr.size() ? arr[next_arrival] : inf;
    const double next_event = std::min(completion, arrival);

    while (next_sample < sample_times.size() && sample_times[next_sample] < next_event)
      take_snapshot(sample_times[next_sample++]);
    if (next_event == inf) break;

    if (served) {
      auto& job = traj.jobs[*served];
      job.residual = (completion <= arrival) ? 0.0 : job.residual - (next_event - t);
      if (job.residual <= 0.0) {
        job.residual = 0.0;
        job.departure_time = next_event;
        traj.events.push_back({next_event, EventKind::departure, job.index});
        ++departed;
        served.reset();
      }
    } else {
      idle += next_event - t;
    }
    t = next_event;

    if (arrival == t) {
      const std::size_t pos = traj.jobs.size();
      traj.jobs.push_back({pos + 1, t, sizes[next_arrival], sizes[next_arrival], std::nullopt});
      traj.events.push_back({t, EventKind::arrival, pos + 1});
      ++next_arrival;
      enqueue(pos);
    }
    reselect();
  }

  if (departed != traj.jobs.size()) throw InvariantViolation("simulation ended with jobs still present");
  return traj;
}

inline std::vector<Trajectory> coupled_run(std::span<const Policy> policies, const PrimitiveStreams& streams,
                                           std::span<const double> sample_times) {
  std::vector<Trajectory> out;
  out.reserve(policies.size());
  for (auto p : policies) out.push_back(simulate(p, streams, sample_times));
  return out;
}

struct BoundReport {
  std::size_t checked_points = 0;
  // max over samples of W/x* - Z_SRPT (lower bound; 0 when x* unbounded)
  double lower_bound_violation = 0.0;
  // max over samples and other policies of Z_SRPT - Q_pi
  double dominance_violation = 0.0;
  // max over samples and all policies of W - x* Q_pi
  double static_bound_violation = 0.0;
  std::size_t violations = 0;

  bool ok() const { return violations == 0; }
};

// Checks W/x* <= Z_SRPT <= Q_pi and W <= x* Q_pi at every common sample time.
inline BoundReport check_bounds(std::span<const Trajectory> trajs, const SupportBound& x_star,
                                double slack = 1e-9) {
  BoundReport rep;
  const Trajectory* srpt_traj = nullptr;
  for (const auto& tr : trajs)
    if (tr.policy == Policy::srpt) srpt_traj = &tr;
  if (trajs.empty()) return rep;
  const std::size_t n = trajs.front().snapshots.size();
  for (const auto& tr : trajs)
    if (tr.snapshots.size() != n) throw std::invalid_argument("trajectories do not share sample times");

  for (std::size_t i = 0; i < n; ++i) {
    const double w = trajs.front().snapshots[i].workload;
    for (const auto& tr : trajs) {
      const auto& s = tr.snapshots[i];
      if (s.t != trajs.front().snapshots[i].t) throw std::invalid_argument("trajectories do not share sample times");
      if (x_star.is_finite()) {
        const double v = s.workload - x_star.value() * static_cast<double>(s.queue_length);
        rep.static_bound_violation = std::max(rep.static_bound_violation, v);
        if (v > slack) ++rep.violations;
      }
    }
    if (!srpt_traj) continue;
    const auto& z = srpt_traj->snapshots[i];
    const double lower = x_star.is_finite() ? w / x_star.value() : 0.0;
    const double lv = lower - static_cast<double>(z.queue_length);
    rep.lower_bound_violation = std::max(rep.lower_bound_violation, lv);
    if (lv > slack) ++rep.violations;
    for (const auto& tr : trajs) {
      if (&tr == srpt_traj) continue;
      const double dv = static_cast<double>(z.queue_length) - static_cast<double>(tr.snapshots[i].queue_length);
      rep.dominance_violation = std::max(rep.dominance_violation, dv);
      if (dv > 0.0) ++rep.violations;
    }
    ++rep.checked_points;
  }
  return rep;
}

// max over snapshots of |W(t) - (W(0) + V(t) - (t - idle(t)))|
inline double work_conservation_error(const Trajectory& traj, const PrimitiveStreams& streams) {
  double w0 = 0.0;
  for (double v : streams.initial_jobs()) w0 += v;
  double err = 0.0;
  for (const auto& s : traj.snapshots) {
    const double v = streams.total_load(s.t);
    const double expected = w0 + v - (s.t - s.idle_time);
    err = std::max(err, std::abs(s.workload - expected));
  }
  return err;
}

inline void write_trajectory_csv(std::ostream& os, std::span<const Trajectory> trajs,
                                 const std::vector<double>& x_levels) {
  os << "t,policy,Z,W";
  for (double x : x_levels) os << ",Z_below_" << x;
  for (double x : x_levels) os << ",W_below_" << x;
  os << '\n';
  const auto old = os.precision(17);
  for (const auto& tr : trajs) {
    for (const auto& s : tr.snapshots) {
      os << s.t << ',' << to_string(tr.policy) << ',' << s.queue_length << ',' << s.workload;
      std::vector<TruncatedStats> st;
      for (double x : x_levels) st.push_back(s.state.truncated(x));
      for (const auto& v : st) os << ',' << v.mass_below;
      for (const auto& v : st) os << ',' << v.work_below;
      os << '\n';
    }
  }
  os.precision(old);
}

inline void write_event_log_csv(std::ostream& os, const Trajectory& traj) {
  os << "time,kind,job_index\n";
  const auto old = os.precision(17);
  for (const auto& e : traj.events)
    os << e.time << ',' << (e.kind == EventKind::arrival ? "arrival" : "departure") << ',' << e.job_index << '\n';
  os.precision(old);
}

}  // namespace srpt
