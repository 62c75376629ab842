// Command-line driver for SRPT heavy-traffic experiments.
//
//   srptlab run --config exp.json [--seed N] [--threads N] [--out DIR] [--emit csv,json,svg]
//   srptlab validate --config exp.json
//   srptlab demo
//
// Exit codes: 0 success, 2 configuration error, 3 invariant violation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "srptlab/srptlab.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kInvariantError = 3;

srpt::ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw srpt::ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw srpt::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return srpt::config_from_json(j);
}

void print_demo(std::ostream& os, const std::string& title, srpt::Policy policy,
                const srpt::PrimitiveStreams& streams) {
  const std::vector<double> samples;
  const auto traj = srpt::simulate(policy, streams, samples);
  os << "# " << title << " [" << srpt::to_string(policy) << "]\n";
  srpt::write_event_log_csv(os, traj);
  os << '\n';
}

int run_demo() {
  // Job 1 (size 3) present at t=0, job 2 (size 1) arrives at t=1.
  const srpt::PrimitiveStreams preempt({3.0}, {1.0}, {1.0}, 4.0);
  // Job 1 (size 2) at t=0; job 2 (size 1) arrives when job 1 has residual 1.
  const srpt::PrimitiveStreams tie({2.0}, {1.0}, {1.0}, 3.0);
  print_demo(std::cout, "preemption by a shorter arrival", srpt::Policy::srpt, preempt);
  print_demo(std::cout, "equal residuals: earlier job keeps the server", srpt::Policy::srpt, tie);
  print_demo(std::cout, "first example under first-come-first-served", srpt::Policy::fifo, preempt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SRPT heavy-traffic simulation laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out_dir;
  std::string emit;

  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "master seed (overrides config)");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides config)");
  auto* emit_opt = run->add_option("--emit", emit, "comma list of csv,json,svg");

  auto* validate = app.add_subcommand("validate", "print the heavy-traffic assumption report");
  validate->add_option("--config", config_path, "experiment config (JSON)")->required();

  app.add_subcommand("demo", "print event logs of the hand-checkable examples");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("demo")) return run_demo();

    auto cfg = load_config(config_path);

    if (app.got_subcommand("validate")) {
      const auto ht = cfg.heavy_traffic();
      const auto models = srpt::build(ht);
      const auto report = srpt::validate(models, cfg.service, cfg.gamma);
      nlohmann::json j = nlohmann::json::array();
      for (const auto& c : report.checks)
        j.push_back({{"r", c.r},
                     {"assumption", c.name},
                     {"verdict", srpt::to_string(c.verdict)},
                     {"value", c.value},
                     {"quantity", c.detail}});
      std::cout << j.dump(2) << '\n';
      return report.all_pass() ? 0 : kInvariantError;
    }

    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.output_dir = out_dir;
    if (*emit_opt) cfg.emit = srpt::parse_emit(emit);

    const auto result = srpt::run_experiment(cfg, threads);
    if (!result.violations.empty()) {
      for (const auto& v : result.violations) std::cerr << "invariant violation: " << v << '\n';
      return kInvariantError;
    }
    const auto files = srpt::write_outputs(result, cfg.output_dir);
    for (const auto& v : result.report.verdicts())
      std::cout << (v.passed ? "PASS " : "FAIL ") << v.statistic << " " << v.check
                << (v.detail.empty() ? "" : "  " + v.detail) << '\n';
    std::cout << "wrote " << files.size() << " files to " << cfg.output_dir << '\n';
    return 0;
  } catch (const srpt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const srpt::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kInvariantError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
