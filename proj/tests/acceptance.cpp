// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "srptlab/srptlab.hpp"

#ifndef SRPTLAB_CONFIG_DIR
#error "SRPTLAB_CONFIG_DIR must point at the configs directory"
#endif

namespace fs = std::filesystem;
using namespace srpt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

ExperimentConfig load(const std::string& name) {
  std::ifstream f(fs::path(SRPTLAB_CONFIG_DIR) / name);
  if (!f) throw std::runtime_error("missing config " + name);
  nlohmann::json j;
  f >> j;
  return config_from_json(j);
}

// Cached experiment results shared by several criteria.
const ExperimentResult& two_point_run() {
  static const ExperimentResult res = run_experiment(load("two_point.json"), 1);
  return res;
}

std::vector<TrendPoint> trend_over(const ExperimentResult& res, std::size_t first_n,
                                   const std::function<double(const ReplicationResult&)>& f) {
  std::vector<TrendPoint> pts;
  for (const auto& lvl : res.levels) {
    std::vector<double> v;
    for (std::size_t i = 0; i < std::min(first_n, lvl.reps.size()); ++i) v.push_back(f(lvl.reps[i]));
    const auto s = summarize(v);
    pts.push_back({lvl.model.r, s.mean, s.std_error});
  }
  return pts;
}

std::string series_text(const std::vector<TrendPoint>& pts) {
  std::string s;
  for (const auto& p : pts) s += (s.empty() ? "" : ", ") + std::string("r=") + fmt(p.r) + ": " + fmt(p.value);
  return s;
}

// ---------------------------------------------------------------------------

Outcome hand_examples() {
  struct Case {
    Policy policy;
    PrimitiveStreams streams;
    std::vector<double> departures;  // by job index
    std::vector<std::pair<double, std::size_t>> steps;  // (time, Z) right-continuous
  };
  const PrimitiveStreams preempt({3.0}, {1.0}, {1.0}, 4.0);
  const PrimitiveStreams tie({2.0}, {1.0}, {1.0}, 3.0);
  const std::vector<Case> cases = {
      {Policy::srpt, preempt, {4.0, 2.0}, {{0.0, 1}, {0.5, 1}, {1.0, 2}, {1.5, 2}, {2.0, 1}, {3.0, 1}, {4.0, 0}}},
      {Policy::srpt, tie, {2.0, 3.0}, {{0.0, 1}, {1.0, 2}, {1.5, 2}, {2.0, 1}, {2.5, 1}, {3.0, 0}}},
      {Policy::fifo, preempt, {3.0, 4.0}, {{0.0, 1}, {1.0, 2}, {2.5, 2}, {3.0, 1}, {3.5, 1}, {4.0, 0}}},
  };
  double worst = 0.0;
  std::size_t mismatched_steps = 0;
  for (const auto& c : cases) {
    std::vector<double> times;
    for (const auto& [t, z] : c.steps) times.push_back(t);
    const auto tr = simulate(c.policy, c.streams, times);
    for (std::size_t j = 0; j < c.departures.size(); ++j)
      worst = std::max(worst, std::abs(*tr.jobs[j].departure_time - c.departures[j]));
    for (std::size_t k = 0; k < c.steps.size(); ++k) mismatched_steps += tr.snapshots[k].queue_length != c.steps[k].second;
  }
  return {worst <= 1e-12 && mismatched_steps == 0,
          "max departure error " + fmt(worst) + ", queue-length mismatches " + std::to_string(mismatched_steps)};
}

struct InstanceStats {
  std::size_t instances = 0, bounded = 0, samples = 0, jobs = 0;
  std::size_t dominance_violations = 0, static_violations = 0, static_checks = 0;
  double workload_gap = 0.0, conservation = 0.0;
};

const InstanceStats& random_instances() {
  static const InstanceStats stats = [] {
    InstanceStats s;
    std::mt19937_64 rng(1995);
    const std::vector<ServiceDistribution> services = {
        ServiceDistribution::two_point(1.0, 0.5, 2.0),
        ServiceDistribution::uniform(0.2, 3.0),
        ServiceDistribution::deterministic(1.0),
        ServiceDistribution::exponential(1.0),
        ServiceDistribution::bounded_pareto(1.5, 0.5, 10.0),
        ServiceDistribution::discrete({{0.5, 0.6}, {2.0, 0.3}, {6.0, 0.1}}),
    };
    const std::vector<Policy> policies = {Policy::srpt, Policy::fifo, Policy::lcfs_preemptive};
    for (std::size_t i = 0; i < 1000; ++i) {
      const auto& svc = services[i % services.size()];
      const double rho = std::uniform_real_distribution<double>(0.8, 1.05)(rng);
      const double mean_gap = svc.mean() / rho;
      InterarrivalDistribution arr = InterarrivalDistribution::exponential(1.0 / mean_gap);
      switch ((i / services.size()) % 3) {
        case 1: arr = InterarrivalDistribution::scaled_gamma(std::uniform_real_distribution<double>(0.5, 4.0)(rng), mean_gap); break;
        case 2: arr = InterarrivalDistribution::scaled_uniform(mean_gap, 0.9 * mean_gap); break;
        default: break;
      }
      std::vector<double> initial;
      const int z0 = std::uniform_int_distribution<int>(0, 5)(rng);
      for (int k = 0; k < z0; ++k) initial.push_back(svc.sample(rng));
      const double horizon = 1000.0 * mean_gap;
      const auto streams = generate(arr, svc, initial, horizon, SeedPlan{rng()});
      const auto times = uniform_grid(horizon, 2000);
      const auto trajs = coupled_run(policies, streams, times);
      const auto x_star = svc.moments().x_star;
      for (std::size_t k = 0; k < times.size(); ++k) {
        const auto& z = trajs[0].snapshots[k].queue_length;
        for (std::size_t p = 1; p < trajs.size(); ++p)
          if (z > trajs[p].snapshots[k].queue_length) ++s.dominance_violations;
      }
      if (x_star.is_finite()) {
        ++s.bounded;
        for (const auto& tr : trajs)
          for (const auto& snap : tr.snapshots) {
            ++s.static_checks;
            if (snap.workload > x_star.value() * static_cast<double>(snap.queue_length) + 1e-9) ++s.static_violations;
          }
      }
      for (const auto& tr : trajs) {
        s.conservation = std::max(s.conservation, work_conservation_error(tr, streams));
        for (std::size_t k = 0; k < times.size(); ++k)
          s.workload_gap = std::max(s.workload_gap, std::abs(tr.snapshots[k].workload - trajs[0].snapshots[k].workload));
      }
      ++s.instances;
      s.samples += times.size();
      s.jobs += streams.job_count();
    }
    return s;
  }();
  return stats;
}

Outcome pathwise_optimality() {
  const auto& s = random_instances();
  return {s.dominance_violations == 0,
          std::to_string(s.instances) + " instances, mean " + std::to_string(s.jobs / s.instances) + " jobs, " +
              std::to_string(s.samples) + " sample times; violations of Z_SRPT <= Z_FIFO, Z_LCFS: " +
              std::to_string(s.dominance_violations)};
}

Outcome static_bound() {
  const auto& s = random_instances();
  return {s.static_violations == 0 && s.static_checks > 0,
          std::to_string(s.bounded) + " bounded-support instances, " + std::to_string(s.static_checks) +
              " checks of W <= x* Z_pi; violations: " + std::to_string(s.static_violations)};
}

Outcome work_conservation() {
  const auto& s = random_instances();
  return {s.workload_gap <= 1e-9 && s.conservation <= 1e-9,
          "max |W_pi - W_SRPT| = " + fmt(s.workload_gap) + ", max |W - (W(0) + V - busy)| = " + fmt(s.conservation)};
}

Outcome queue_tracks_workload() {
  const auto pts = trend_over(two_point_run(), 500, [](const ReplicationResult& r) { return r.deviation; });
  std::string why;
  const bool trend = decreasing_trend(pts, &why);
  const bool level = pts.back().value <= 0.15;
  return {trend && level, "mean max_t |Zhat - What/x*|: " + series_text(pts) + (trend ? "" : "; " + why)};
}

Outcome concentration() {
  const auto& res = two_point_run();
  const auto below = trend_over(res, 500, [](const ReplicationResult& r) { return r.concentration->below_mass_max; });
  const auto above = trend_over(res, 500, [](const ReplicationResult& r) { return r.concentration->above_mass_max; });
  const auto bl = trend_over(res, 500, [](const ReplicationResult& r) { return r.bl_t0; });
  double above_max = 0.0;
  for (const auto& lvl : res.levels)
    for (std::size_t i = 0; i < 500; ++i) above_max = std::max(above_max, lvl.reps[i].concentration->above_mass_max);
  const bool ok = decreasing_trend(below) && below.back().value <= 0.1 && above_max <= 1e-9 && decreasing_trend(bl);
  return {ok, "below x*-eps: " + series_text(below) + "; max above x*+eps: " + fmt(above_max) +
                  "; BL at t=1: " + series_text(bl)};
}

Outcome unbounded_support() {
  const auto res = run_experiment(load("exponential.json"), 1);
  const auto q = trend_over(res, res.config.replications, [](const ReplicationResult& r) { return r.max_queue; });
  const auto w = trend_over(res, res.config.replications, [](const ReplicationResult& r) { return r.workload_t0; });
  const double rel = std::abs(w.back().value - res.rbm_mc_mean_t0) / res.rbm_mc_mean_t0;
  const bool ok = decreasing_trend(q) && q.back().value <= 0.2 && rel <= 0.25;
  return {ok, "mean max_t Zhat: " + series_text(q) + " (threshold 0.2 at r=40); What(1) mean at r=40 " +
                  fmt(w.back().value) + " vs RBM " + fmt(res.rbm_mc_mean_t0) + " (rel " + fmt(rel) + ")"};
}

Outcome workload_rbm() {
  const auto& res = two_point_run();
  std::vector<TrendPoint> pts;
  for (const auto& v : res.ks) pts.push_back({v.r, v.ks, v.std_error});
  const bool full = !res.ks.empty() && res.ks.front().n >= 1000;
  const bool ok = full && pts.size() == res.levels.size() && decreasing_trend(pts) && pts.back().value <= 0.10;
  const auto p = res.config.rbm_params();
  return {ok, "KS vs RBM(w0=" + fmt(p.w0) + ", drift=" + fmt(-p.gamma) + ", var=" + fmt(p.variance) +
                  "), n=" + std::to_string(full ? res.ks.front().n : 0) + ": " + series_text(pts)};
}

Outcome fclt_variances() {
  const auto cfg = load("fclt.json");
  const auto res = run_experiment(cfg, 1);
  // independent constants for TwoPoint(1, 0.5, 2), alpha = 2/3, a = 1, x = 1.5
  const double alpha = 2.0 / 3.0, a = 1.0, b2 = 0.25;
  const double load_target = alpha * (a * a + b2);
  const double m_above = 0.5 * 2.0, s_above = 0.5 * 4.0;
  const double tail_target = alpha * (s_above - m_above * m_above) + m_above * m_above * alpha * alpha * alpha * a * a;
  if (std::abs(tail_target - 26.0 / 27.0) > 1e-15) return {false, "tail constant mismatch"};
  if (res.variances.size() != 1) return {false, "no variance rows"};
  double load_v = NAN, tail_v = NAN;
  for (const auto& row : res.variances.front().second) {
    if (row.process == "load") load_v = row.sample_variance;
    if (row.process == "tail" && row.x == 1.5) tail_v = row.sample_variance;
  }
  const double el = std::abs(load_v / load_target - 1.0), et = std::abs(tail_v / tail_target - 1.0);
  return {el <= 0.10 && et <= 0.10, "r=50, n=" + std::to_string(cfg.replications) + ": Var Vhat(1) " + fmt(load_v) +
                                        " vs " + fmt(load_target) + " (" + fmt(100 * el) + "%), tail " + fmt(tail_v) +
                                        " vs 26/27 (" + fmt(100 * et) + "%)"};
}

Outcome rbm_gate() {
  const RbmParams p = load("two_point.json").rbm_params();
  const double step = 3.125e-5;
  std::string detail;
  bool ok = true;
  Rng rng = SeedPlan{4242}.stream(StreamLabel::rbm);
  for (double t : {0.25, 1.0}) {
    const auto steps = static_cast<std::size_t>(std::llround(t / step));
    std::vector<double> w(100000);
    for (auto& v : w) v = simulate_rbm_terminal(p, t, steps, rng);
    const double ks = ks_statistic(w, [&](double x) { return rbm_marginal_cdf(p, t, x); });
    ok = ok && ks <= 0.01 && t / static_cast<double>(steps) <= 1e-3 * t;
    detail += (detail.empty() ? "" : "; ") + std::string("t=") + fmt(t) + ": " + std::to_string(steps) +
              " steps, max |F_MC - F| = " + fmt(ks);
  }
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Outcome determinism() {
  auto cfg = load("two_point.json");
  const auto base = fs::temp_directory_path() / "srptlab_acceptance_determinism";
  fs::remove_all(base);
  std::vector<std::string> names;
  for (unsigned threads : {1u, 4u}) {
    const auto res = run_experiment(cfg, threads);
    names = write_outputs(res, base / std::to_string(threads));
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& n : names) {
    if (fs::path(n).extension() != ".csv") continue;
    ++compared;
    if (slurp(base / "1" / n) != slurp(base / "4" / n)) ++differing;
  }
  fs::remove_all(base);
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " CSV artifacts compared (threads 1 vs 4), differing: " + std::to_string(differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hand-simulation exactness", hand_examples},
      {"pathwise optimality of SRPT", pathwise_optimality},
      {"static bound W <= x* Z", static_bound},
      {"workload invariance and work conservation", work_conservation},
      {"queue length tracks workload / x*", queue_tracks_workload},
      {"concentration at x*", concentration},
      {"unbounded support: scaled queue vanishes", unbounded_support},
      {"workload marginal vs RBM", workload_rbm},
      {"load FCLT variances", fclt_variances},
      {"RBM closed form vs Monte Carlo", rbm_gate},
      {"determinism across thread counts", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s [%zu] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
