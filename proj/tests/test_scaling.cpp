#include <gtest/gtest.h>

#include <cmath>

#include "srptlab/diagnostics.hpp"
#include "srptlab/scaling.hpp"

using srpt::InterarrivalDistribution;
using srpt::Policy;
using srpt::PrimitiveStreams;
using srpt::ServiceDistribution;

namespace {

srpt::ModelAtR model_at(double r, const InterarrivalDistribution& shape, double gamma = 1.0) {
  srpt::HeavyTrafficSpec spec{ServiceDistribution::two_point(1.0, 0.5, 2.0), shape, gamma, {r}, 0.0};
  return srpt::build(spec).front();
}

}  // namespace

TEST(Scaling, UnitScaleIsIdentity) {
  const PrimitiveStreams s({3.0}, {1.0}, {1.0}, 4.0);
  const auto grid = srpt::uniform_grid(4.0, 9);
  const auto tr = srpt::simulate(Policy::srpt, s, srpt::unscaled_times(1.0, grid));
  const auto path = srpt::scale_state(tr, 1.0, grid, {1.5});
  ASSERT_EQ(path.points.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(path.points[i].queue, static_cast<double>(tr.snapshots[i].queue_length));
    EXPECT_NEAR(path.points[i].workload, tr.snapshots[i].workload, 1e-12);
    EXPECT_EQ(path.points[i].queue_below[0], tr.snapshots[i].state.truncated(1.5).mass_below);
  }
}

TEST(Scaling, TenJobsOfSizeTwoAtScaleTen) {
  const PrimitiveStreams s(std::vector<double>(10, 2.0), {}, {}, 1.0);
  const std::vector<double> grid = {0.0};
  const auto tr = srpt::simulate(Policy::srpt, s, srpt::unscaled_times(10.0, grid));
  const auto path = srpt::scale_state(tr, 10.0, grid, {1.0, 2.0});
  const auto& p = path.points[0];
  EXPECT_NEAR(p.queue, 1.0, 1e-15);
  EXPECT_NEAR(p.workload, 2.0, 1e-12);
  EXPECT_NEAR(srpt::bl_distance(p.state, srpt::PointMeasure::dirac(2.0)), 0.0, 1e-12);
  EXPECT_EQ(p.queue_below[0], 0.0);
  EXPECT_NEAR(p.queue_below[1], 1.0, 1e-12);
  EXPECT_NEAR(p.workload_below[1], 2.0, 1e-12);
}

TEST(Scaling, EmptySystemScalesToZero) {
  const PrimitiveStreams s({}, {}, {}, 100.0);
  const auto grid = srpt::uniform_grid(1.0, 5);
  const auto path = srpt::scale_state(srpt::simulate(Policy::srpt, s, srpt::unscaled_times(10.0, grid)), 10.0, grid);
  for (const auto& p : path.points) {
    EXPECT_TRUE(p.state.empty());
    EXPECT_EQ(p.queue, 0.0);
    EXPECT_EQ(p.workload, 0.0);
  }
}

TEST(Scaling, RejectsMismatchedGrid) {
  const PrimitiveStreams s({1.0}, {}, {}, 100.0);
  const auto grid = srpt::uniform_grid(1.0, 5);
  const auto tr = srpt::simulate(Policy::srpt, s, srpt::unscaled_times(5.0, grid));
  EXPECT_THROW(srpt::scale_state(tr, 10.0, grid), std::invalid_argument);
  EXPECT_THROW(srpt::uniform_grid(1.0, 1), std::invalid_argument);
}

TEST(Scaling, DeterministicArrivalsHaveVanishingCentredCount) {
  for (double r : {5.0, 20.0, 80.0}) {
    const auto m = model_at(r, InterarrivalDistribution::deterministic(1.0));
    const auto grid = srpt::uniform_grid(1.0, 101);
    const auto s = srpt::generate(m.interarrival, m.service, {}, r * r, srpt::SeedPlan{3});
    const auto load = srpt::scale_load(s, m, grid, {1.5});
    EXPECT_EQ(load.points.front().arrivals, 0.0);
    EXPECT_EQ(load.points.front().load, 0.0);
    for (const auto& p : load.points) EXPECT_LE(std::abs(p.arrivals), 1.0 / r + 1e-9) << "r=" << r << " t=" << p.t;
  }
}

TEST(Scaling, TailVarianceExamples) {
  const auto nu = ServiceDistribution::two_point(1.0, 0.5, 2.0);
  const double alpha = 2.0 / 3.0;
  // mass 1/2 at 2 above 1.5: first partial moment 1, second 2
  const double hand = alpha * (2.0 - 1.0) + 1.0 * alpha * alpha * alpha * 1.0;
  EXPECT_NEAR(hand, 26.0 / 27.0, 1e-15);
  EXPECT_NEAR(srpt::tail_variance(nu, alpha, 1.0, 1.5), hand, 1e-14);
  EXPECT_EQ(srpt::tail_variance(nu, alpha, 1.0, 2.5), 0.0);
  const double b = 0.5;
  EXPECT_NEAR(srpt::tail_variance(nu, alpha, 1.0, 0.0), alpha * (1.0 + b * b), 1e-14);
  EXPECT_NEAR(srpt::load_variance(nu, alpha, 1.0), alpha * (1.0 + b * b), 1e-14);
  EXPECT_THROW(srpt::tail_variance(nu, alpha, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(srpt::tail_variance(nu, alpha, 1.0, 2.0), std::invalid_argument);
}

TEST(Scaling, PoissonLoadVarianceMatchesCompoundPoissonFormula) {
  // Compound Poisson load: Var(Vhat_x(1)) = alpha^r <chi^2 1_[0,x], nu> exactly, at every r.
  const double r = 10.0;
  const auto m = model_at(r, InterarrivalDistribution::exponential(1.0));
  const auto grid = srpt::uniform_grid(1.0, 2);
  const std::vector<double> levels = {1.5};
  std::vector<double> total, below, tail;
  const srpt::SeedPlan base{2024};
  for (std::size_t rep = 0; rep < 4000; ++rep) {
    const auto s = srpt::generate(m.interarrival, m.service, {}, r * r, base.derive(rep));
    const auto load = srpt::scale_load(s, m, grid, levels);
    total.push_back(load.points.back().load);
    below.push_back(load.points.back().load_below[0]);
    tail.push_back(load.points.back().tail[0]);
  }
  const auto tm = m.service.truncated_moments(1.5);
  const double exact_total = m.alpha_r * m.service.moments().second_moment;
  const double exact_below = m.alpha_r * tm.second_below;
  const double exact_tail = m.alpha_r * tm.second_above;
  const auto vt = srpt::sample_variance(total);
  const auto vb = srpt::sample_variance(below);
  const auto va = srpt::sample_variance(tail);
  EXPECT_LE(std::abs(vt.variance - exact_total), 4.0 * vt.std_error);
  EXPECT_LE(std::abs(vb.variance - exact_below), 4.0 * vb.std_error);
  EXPECT_LE(std::abs(va.variance - exact_tail), 4.0 * va.std_error);
}

TEST(Scaling, CentredLoadHasMeanNearZero) {
  const double r = 10.0;
  const auto m = model_at(r, InterarrivalDistribution::exponential(1.0));
  const auto grid = srpt::uniform_grid(1.0, 2);
  std::vector<double> e;
  for (std::size_t rep = 0; rep < 2000; ++rep) {
    const auto s = srpt::generate(m.interarrival, m.service, {}, r * r, srpt::SeedPlan{7}.derive(rep));
    e.push_back(srpt::scale_load(s, m, grid).points.back().arrivals);
  }
  const auto sm = srpt::summarize(e);
  EXPECT_LE(std::abs(sm.mean), 4.0 * sm.std_error);
}
