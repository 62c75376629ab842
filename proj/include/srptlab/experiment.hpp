#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "diagnostics.hpp"
#include "distributions.hpp"
#include "engine.hpp"
#include "ht_sequence.hpp"
#include "primitives.hpp"
#include "rbm.hpp"
#include "scaling.hpp"

namespace srpt {

inline constexpr const char* kVersion = "srptlab 1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmitFlags {
  bool csv = true;
  bool json = false;
  bool svg = false;
};

inline EmitFlags parse_emit(const std::string& list) {
  EmitFlags f{false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") f.csv = true;
    else if (item == "json") f.json = true;
    else if (item == "svg") f.svg = true;
    else if (!item.empty()) throw ConfigError("unknown emit flag '" + item + "'");
  }
  return f;
}

struct ExperimentConfig {
  nlohmann::json service_json;
  nlohmann::json interarrival_json;
  ServiceDistribution service = ServiceDistribution::deterministic(1.0);
  InterarrivalDistribution interarrival = InterarrivalDistribution::exponential(1.0);
  double gamma = 0.0;
  double w0 = 0.0;
  std::vector<double> r_values;
  std::size_t replications = 1;
  double horizon = 1.0;  // scaled horizon T
  std::size_t grid_size = 200;
  std::vector<double> truncation_levels;
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
  double t0 = 1.0;
  std::vector<Policy> compare_policies;  // coupled with SRPT for bound checks
  std::size_t path_samples = 3;          // scaled paths dumped per r
  std::size_t rbm_reference_paths = 20000;
  std::size_t rbm_reference_steps = 1000;
  std::string output_dir = "out";
  EmitFlags emit;

  HeavyTrafficSpec heavy_traffic() const {
    return HeavyTrafficSpec{service, interarrival, gamma, r_values, w0};
  }

  RbmParams rbm_params() const {
    const auto ht = heavy_traffic();
    return RbmParams(w0, gamma, load_variance(service, ht.alpha(), ht.a()));
  }

  std::vector<double> grid() const { return uniform_grid(horizon, grid_size); }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json pol = nlohmann::json::array();
  for (auto p : c.compare_policies) pol.push_back(to_string(p));
  nlohmann::json emit = nlohmann::json::array();
  if (c.emit.csv) emit.push_back("csv");
  if (c.emit.json) emit.push_back("json");
  if (c.emit.svg) emit.push_back("svg");
  nlohmann::json j = {{"service", c.service_json},
                      {"interarrival", c.interarrival_json},
                      {"gamma", c.gamma},
                      {"w0", c.w0},
                      {"r_values", c.r_values},
                      {"replications", c.replications},
                      {"horizon", c.horizon},
                      {"grid_size", c.grid_size},
                      {"truncation_levels", c.truncation_levels},
                      {"seed", c.seed},
                      {"t0", c.t0},
                      {"compare_policies", pol},
                      {"path_samples", c.path_samples},
                      {"rbm_reference_paths", c.rbm_reference_paths},
                      {"rbm_reference_steps", c.rbm_reference_steps},
                      {"emit", emit}};
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "service",       "interarrival", "gamma",     "w0",   "r_values",         "replications",
      "horizon",       "grid_size",    "truncation_levels", "epsilon",          "seed",
      "t0",            "compare_policies", "path_samples", "rbm_reference_paths", "rbm_reference_steps",
      "output_dir",    "emit"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  for (const char* req : {"service", "interarrival", "gamma", "r_values", "replications"})
    if (!j.contains(req)) throw ConfigError(std::string("missing config key '") + req + "'");

  ExperimentConfig c;
  try {
    c.service_json = j["service"];
    c.interarrival_json = j["interarrival"];
    c.service = service_from_json(c.service_json);
    c.interarrival = interarrival_from_json(c.interarrival_json);
    c.gamma = j["gamma"].get<double>();
    c.w0 = j.value("w0", 0.0);
    c.r_values = j["r_values"].get<std::vector<double>>();
    c.replications = j["replications"].get<std::size_t>();
    c.horizon = j.value("horizon", 1.0);
    c.grid_size = j.value("grid_size", std::size_t{200});
    c.truncation_levels = j.value("truncation_levels", std::vector<double>{});
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.t0 = j.value("t0", 1.0);
    for (const auto& p : j.value("compare_policies", std::vector<std::string>{}))
      c.compare_policies.push_back(policy_from_string(p));
    c.path_samples = j.value("path_samples", std::size_t{3});
    c.rbm_reference_paths = j.value("rbm_reference_paths", std::size_t{20000});
    c.rbm_reference_steps = j.value("rbm_reference_steps", std::size_t{1000});
    c.output_dir = j.value("output_dir", std::string("out"));
    if (j.contains("emit")) {
      std::string list;
      for (const auto& e : j["emit"]) list += e.get<std::string>() + ",";
      c.emit = parse_emit(list);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  if (c.replications < 1) throw ConfigError("replications must be >= 1");
  if (!(c.horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (c.grid_size < 2) throw ConfigError("grid_size must be >= 2");
  if (!(c.t0 > 0.0) || c.t0 > c.horizon) throw ConfigError("t0 must lie in (0, horizon]");
  if (!(c.w0 >= 0.0)) throw ConfigError("w0 must be >= 0");
  if (c.r_values.empty()) throw ConfigError("r_values must be nonempty");
  for (double x : c.truncation_levels)
    if (!(x >= 0.0) || !c.service.is_continuity_point(x)) {
      std::ostringstream os;
      os << "truncation level " << x << " is not a continuity point of the service law";
      throw ConfigError(os.str());
    }
  const auto xs = c.service.moments().x_star;
  if (c.epsilon) {
    if (!(*c.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (xs.is_finite() && (!c.service.is_continuity_point(xs.value() - *c.epsilon) ||
                           !c.service.is_continuity_point(xs.value() + *c.epsilon)))
      throw ConfigError("x* +/- epsilon must be continuity points of the service law");
  }
  // grid must contain t0
  const auto g = c.grid();
  bool found = false;
  for (double t : g) found = found || std::abs(t - c.t0) <= 1e-12;
  if (!found) throw ConfigError("t0 must be a point of the uniform grid");
  try {
    (void)build(c.heavy_traffic());
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

// Per-replication outcome. Only the first few replications keep full paths.
struct ReplicationResult {
  std::optional<ScaledPath> path;
  std::optional<ScaledLoadPath> load_path;
  double deviation = 0.0;  // max_t |Zhat - What/x*|
  double deviation_relative = 0.0;
  double max_queue = 0.0;
  std::optional<ConcentrationRow> concentration;
  double bl_t0 = 0.0;
  double workload_t0 = 0.0;
  double load_t0 = 0.0;
  std::vector<double> load_below_t0;
  std::vector<double> tail_t0;
  std::optional<BoundReport> bounds;
  double work_conservation_error = 0.0;
  double workload_policy_gap = 0.0;
  std::size_t jobs = 0;
};

inline SeedPlan replication_seeds(std::uint64_t master, double r, std::size_t replication) {
  return SeedPlan{master}.derive(std::bit_cast<std::uint64_t>(r), replication);
}

inline ReplicationResult run_replication(const ExperimentConfig& cfg, const ModelAtR& model, std::size_t rep,
                                         bool keep_path) {
  const auto grid = cfg.grid();
  const double r = model.r;
  const auto seeds = replication_seeds(cfg.seed, r, rep);
  const auto streams = generate(model.interarrival, model.service, model.initial_jobs, r * r * cfg.horizon, seeds);
  const auto times = unscaled_times(r, grid);

  std::vector<Policy> policies{Policy::srpt};
  for (auto p : cfg.compare_policies)
    if (p != Policy::srpt) policies.push_back(p);
  const auto trajs = coupled_run(policies, streams, times);
  const auto& srpt_traj = trajs.front();

  ReplicationResult res;
  res.jobs = streams.job_count();
  const auto path = scale_state(srpt_traj, r, grid, cfg.truncation_levels);
  const auto load = scale_load(streams, model, grid, cfg.truncation_levels);
  const auto xs = model.service.moments().x_star;
  const std::size_t i0 = grid_index(path, cfg.t0);

  res.max_queue = max_queue(path);
  res.workload_t0 = path.points[i0].workload;
  if (xs.is_finite()) {
    res.deviation = max_deviation(path, xs.value());
    double wmax = 0.0;
    for (const auto& p : path.points) wmax = std::max(wmax, p.workload / xs.value());
    res.deviation_relative = res.deviation / (wmax + 0.01);
    if (cfg.epsilon) res.concentration = concentration_row(path, xs.value(), *cfg.epsilon);
    res.bl_t0 = bl_to_concentrated(path.points[i0], xs.value());
  }
  res.load_t0 = load.points[i0].load;
  res.load_below_t0 = load.points[i0].load_below;
  res.tail_t0 = load.points[i0].tail;

  for (const auto& tr : trajs) {
    const double scale = std::max(1.0, streams.total_load(streams.horizon()));
    res.work_conservation_error = std::max(res.work_conservation_error, work_conservation_error(tr, streams) / scale);
    for (std::size_t i = 0; i < tr.snapshots.size(); ++i)
      res.workload_policy_gap = std::max(res.workload_policy_gap,
                                         std::abs(tr.snapshots[i].workload - srpt_traj.snapshots[i].workload) / scale);
  }
  if (trajs.size() > 1) res.bounds = check_bounds(trajs, xs);

  if (keep_path) {
    res.path = path;
    res.load_path = load;
  }
  return res;
}

struct LevelResult {
  ModelAtR model;
  std::vector<ReplicationResult> reps;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<LevelResult> levels;
  ConvergenceReport report;
  std::vector<KsVerdict> ks;
  std::vector<std::pair<double, std::vector<VarianceRow>>> variances;  // per r
  double rbm_mc_mean_t0 = 0.0;
  double rbm_mc_se_t0 = 0.0;
  std::vector<std::vector<double>> rbm_paths;
  std::vector<std::string> violations;

  const LevelResult& level(double r) const {
    for (const auto& l : levels)
      if (l.model.r == r) return l;
    throw std::out_of_range("no such r in experiment");
  }
};

// Runs every (r, replication) pair across `threads` workers. Each pair has its
// own seed, and results land in fixed slots, so output does not depend on the
// thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  ExperimentResult out;
  out.config = cfg;
  const auto models = build(cfg.heavy_traffic());
  for (const auto& m : models) out.levels.push_back({m, std::vector<ReplicationResult>(cfg.replications)});

  const std::size_t total = models.size() * cfg.replications;
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(total);
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      const std::size_t li = k / cfg.replications;
      const std::size_t rep = k % cfg.replications;
      try {
        out.levels[li].reps[rep] = run_replication(cfg, out.levels[li].model, rep, rep < cfg.path_samples);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < total; ++k)
    if (!errors[k].empty())
      throw InvariantViolation("replication " + std::to_string(k % cfg.replications) + " at r=" +
                               std::to_string(models[k / cfg.replications].r) + ": " + errors[k]);

  // RBM reference: Monte Carlo mean at t0 and a few sample paths.
  const auto params = cfg.rbm_params();
  {
    Rng rng = SeedPlan{cfg.seed}.stream(StreamLabel::rbm);
    std::vector<double> w;
    w.reserve(cfg.rbm_reference_paths);
    for (std::size_t i = 0; i < cfg.rbm_reference_paths; ++i)
      w.push_back(simulate_rbm_terminal(params, cfg.t0, cfg.rbm_reference_steps, rng));
    const auto s = summarize(w);
    out.rbm_mc_mean_t0 = s.mean;
    out.rbm_mc_se_t0 = s.std_error;
    const auto grid = cfg.grid();
    for (std::size_t i = 0; i < cfg.path_samples; ++i) out.rbm_paths.push_back(simulate_rbm(params, grid, rng));
  }

  // Aggregate.
  const auto xs = cfg.service.moments().x_star;
  const auto ht = cfg.heavy_traffic();
  auto& rep = out.report;
  for (const auto& lvl : out.levels) {
    const double r = lvl.model.r;
    const std::size_t n = lvl.reps.size();
    auto add = [&](const std::string& name, const std::vector<double>& xs_) {
      const auto s = summarize(xs_);
      rep.add({r, n, name, s.mean, s.std_error});
    };
    auto collect = [&](auto f) {
      std::vector<double> v;
      v.reserve(n);
      for (const auto& x : lvl.reps) v.push_back(f(x));
      return v;
    };
    if (xs.is_finite()) {
      add("queue_workload_deviation", collect([](const auto& x) { return x.deviation; }));
      add("queue_workload_deviation_relative", collect([](const auto& x) { return x.deviation_relative; }));
    }
    add("max_scaled_queue", collect([](const auto& x) { return x.max_queue; }));
    if (xs.is_finite() && cfg.epsilon) {
      add("below_mass_max", collect([](const auto& x) { return x.concentration->below_mass_max; }));
      add("above_mass_max", collect([](const auto& x) { return x.concentration->above_mass_max; }));
      add("band_gap_mean", collect([](const auto& x) { return x.concentration->band_gap_mean; }));
    }
    if (xs.is_finite()) add("bl_to_concentrated_t0", collect([](const auto& x) { return x.bl_t0; }));
    const auto w = collect([](const auto& x) { return x.workload_t0; });
    add("workload_t0", w);
    if (n >= 200) {
      auto v = workload_law_check(w, params, cfg.t0, r);
      out.ks.push_back(v);
      rep.add({r, n, "workload_ks_t0", v.ks, v.std_error});
    }
    if (n >= 1000) {
      std::vector<ScaledLoadPath> loads;
      loads.reserve(n);
      for (const auto& x : lvl.reps) {
        ScaledLoadPath p;
        p.r = r;
        p.x_levels = cfg.truncation_levels;
        ScaledLoadPoint pt;
        pt.t = cfg.t0;
        pt.load = x.load_t0;
        pt.load_below = x.load_below_t0;
        pt.tail = x.tail_t0;
        p.points.push_back(std::move(pt));
        loads.push_back(std::move(p));
      }
      out.variances.emplace_back(r, fclt_variance_check(loads, lvl.model, ht.alpha(), ht.a(),
                                                        cfg.truncation_levels, cfg.t0));
    }

    double wc = 0.0, gap = 0.0;
    std::size_t bound_viol = 0;
    for (const auto& x : lvl.reps) {
      wc = std::max(wc, x.work_conservation_error);
      gap = std::max(gap, x.workload_policy_gap);
      if (x.bounds) bound_viol += x.bounds->violations;
    }
    rep.add({r, n, "work_conservation_error_max", wc, 0.0});
    if (!cfg.compare_policies.empty()) {
      rep.add({r, n, "workload_policy_gap_max", gap, 0.0});
      rep.add({r, n, "bound_violations", static_cast<double>(bound_viol), 0.0});
    }
    if (wc > 1e-9) out.violations.push_back("work conservation error at r=" + std::to_string(r));
    if (gap > 1e-9) out.violations.push_back("workload differs across policies at r=" + std::to_string(r));
    if (bound_viol > 0) out.violations.push_back("pathwise bound violated at r=" + std::to_string(r));
  }

  auto trend = [&](const std::string& stat) {
    const auto s = rep.series(stat);
    if (s.size() < 2) return;
    std::string detail;
    const bool ok = decreasing_trend(s, &detail);
    rep.add_verdict({stat, "decreasing", ok, detail});
  };
  if (xs.is_finite()) {
    trend("queue_workload_deviation");
    if (cfg.epsilon) trend("below_mass_max");
    trend("bl_to_concentrated_t0");
  } else {
    trend("max_scaled_queue");
  }
  trend("workload_ks_t0");
  return out;
}

namespace detail {

class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string& name) {
    const auto p = dir_ / name;
    std::filesystem::create_directories(p.parent_path());
    written_.push_back(p);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
  }

  void rollback() {
    std::error_code ec;
    for (const auto& p : written_) std::filesystem::remove(p, ec);
    written_.clear();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : written_) out.push_back(std::filesystem::relative(p, dir_).generic_string());
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
};

}  // namespace detail

// Writes report, path samples, RBM comparison, variance table, plots and a
// manifest. Returns the relative names of the files written.
inline std::vector<std::string> write_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
  const auto& cfg = res.config;
  detail::OutputSet out(dir);
  try {
    std::filesystem::create_directories(dir);
    if (cfg.emit.csv) {
      {
        auto f = out.open("report.csv");
        res.report.write_csv(f);
      }
      {
        auto f = out.open("scaled_paths.csv");
        write_scaled_path_csv_header(f, cfg.truncation_levels, true);
        for (const auto& lvl : res.levels)
          for (std::size_t i = 0; i < lvl.reps.size(); ++i)
            if (lvl.reps[i].path) write_scaled_path_csv_rows(f, i, *lvl.reps[i].path, &*lvl.reps[i].load_path);
      }
      {
        auto f = out.open("rbm_reference.csv");
        f.precision(17);
        f << "r,t0,replications,ks,ks_std_error,workload_mean,rbm_mc_mean,rbm_mc_std_error\n";
        for (const auto& lvl : res.levels) {
          std::vector<double> w;
          for (const auto& x : lvl.reps) w.push_back(x.workload_t0);
          const auto s = summarize(w);
          double ks = -1.0, se = 0.0;
          for (const auto& v : res.ks)
            if (v.r == lvl.model.r) ks = v.ks, se = v.std_error;
          f << lvl.model.r << ',' << cfg.t0 << ',' << w.size() << ',' << ks << ',' << se << ',' << s.mean << ','
            << res.rbm_mc_mean_t0 << ',' << res.rbm_mc_se_t0 << '\n';
        }
      }
      {
        auto f = out.open("rbm_paths.csv");
        f << "replication,t,W\n";
        const auto grid = cfg.grid();
        for (std::size_t i = 0; i < res.rbm_paths.size(); ++i) write_rbm_path_csv(f, i, grid, res.rbm_paths[i]);
      }
      if (!res.variances.empty()) {
        auto f = out.open("fclt_variances.csv");
        f.precision(17);
        f << "r,process,x,sample_variance,std_error,target,ratio\n";
        for (const auto& [r, rows] : res.variances)
          for (const auto& v : rows)
            f << r << ',' << v.process << ',' << v.x << ',' << v.sample_variance << ',' << v.std_error << ','
              << v.target << ',' << v.ratio << '\n';
      }
    }
    if (cfg.emit.json) {
      auto f = out.open("report.json");
      f << res.report.to_json().dump(2) << '\n';
    }
    if (cfg.emit.svg)
      for (const auto& stat : res.report.statistics()) {
        auto f = out.open("plots/" + stat + ".svg");
        f << res.report.svg(stat);
      }
    {
      nlohmann::json m;
      m["version"] = kVersion;
      m["compiler"] = __VERSION__;
      m["seed"] = cfg.seed;
      m["config"] = to_json(cfg);
      m["outputs"] = out.names();
      m["violations"] = res.violations;
      auto f = out.open("manifest.json");
      f << m.dump(2) << '\n';
    }
  } catch (...) {
    out.rollback();
    throw;
  }
  return out.names();
}

}  // namespace srpt
