#include "geobalance/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace geobalance;
using namespace geobalance::experiments;

namespace {

ShearOptions small_shear() {
  ShearOptions o;
  o.n_particles = 256;
  o.grid = 16;
  o.horizon = 2.0;
  o.stride = 9;
  return o;
}

}  // namespace

TEST(ExperimentKind, Names) {
  for (auto k : {ExperimentKind::drift, ExperimentKind::exchange, ExperimentKind::shear}) {
    EXPECT_EQ(kind_from_string(to_string(k)), k);
  }
  EXPECT_FALSE(kind_from_string("vortex").has_value());
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
  std::vector<int> hits(37, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
               std::runtime_error);
}

TEST(Drift, DefaultSweep) {
  const auto eps = default_drift_eps();
  ASSERT_EQ(eps.size(), 12u);
  EXPECT_DOUBLE_EQ(eps.front(), 0.25);
  EXPECT_DOUBLE_EQ(eps.back(), 1.0 / 15.0);
}

TEST(Drift, SweepBoundsAndFit) {
  DriftOptions opts;
  opts.workers = 4;
  const auto r = run_drift_experiment(opts);
  ASSERT_EQ(r.runs.size(), 12u);
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& rep = r.runs[i].report;
    EXPECT_EQ(rep.eps, opts.eps_list[i]);
    EXPECT_LE(rep.delta_K, 8.0 * std::exp(-0.92 / rep.eps));
    if (rep.eps <= 1.0 / 6.0 + 1e-12) {
      EXPECT_LE(rep.delta_E, rep.delta_K / 100.0);
    }
    EXPECT_GT(r.runs[i].record.back().q[1], 10.0);
  }
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_GE(r.fit->c, 0.7);
}

TEST(Drift, ResultsIndependentOfWorkerCount) {
  DriftOptions opts;
  opts.eps_list = {0.25, 0.2, 1.0 / 6.0, 1.0 / 7.0};
  const auto serial = run_drift_experiment(opts);
  opts.workers = 3;
  const auto parallel = run_drift_experiment(opts);
  for (std::size_t i = 0; i < serial.runs.size(); ++i) {
    EXPECT_EQ(serial.runs[i].report.delta_K, parallel.runs[i].report.delta_K);
    EXPECT_EQ(serial.runs[i].report.delta_E, parallel.runs[i].report.delta_E);
    EXPECT_EQ(serial.runs[i].record.size(), parallel.runs[i].record.size());
  }
}

TEST(Drift, UnitEpsilonIsNotExponentiallySmall) {
  const auto run = run_drift_single(1.0, DriftOptions{});
  EXPECT_GT(run.report.delta_K, 1e-6);
}

TEST(Drift, RejectsBadEpsilonAndAbortsOverBudget) {
  EXPECT_THROW(run_drift_single(0.0, DriftOptions{}), std::invalid_argument);
  EXPECT_THROW(run_drift_single(1.5, DriftOptions{}), std::invalid_argument);
  DriftOptions tight;
  tight.max_steps = 100;
  EXPECT_THROW(run_drift_single(0.25, tight), ExperimentAborted);
  EXPECT_THROW(run_drift_experiment(DriftOptions{{}}), std::invalid_argument);
}

TEST(Exchange, DefaultConfigurationExchangesAndReturns) {
  const auto r = run_two_particle_exchange({});
  const double k0 = r.kinetic_total_initial;
  EXPECT_LE(std::abs(r.kinetic_total_final - k0), 1e-3 * k0);
  EXPECT_GE(r.max_individual_change, 0.1 * k0);
}

TEST(Exchange, ControlRunConservesEachKinetic) {
  ExchangeOptions o;
  o.coupling = false;
  o.stride = 1;
  const auto r = run_two_particle_exchange(o);
  for (const Sample& s : r.record.samples) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      EXPECT_NEAR(particle_kinetic(s, i), particle_kinetic(r.record.front(), i), 1e-12);
    }
  }
}

TEST(Exchange, PointSymmetricPairKeepsEqualKinetics) {
  ExchangeOptions o;
  const double c = std::numbers::pi;
  o.positions = std::array<Vec2, 2>{Vec2{c - 0.3, c - 0.1}, Vec2{c + 0.3, c + 0.1}};
  o.momenta = {Vec2{0.2, -0.05}, Vec2{-0.2, 0.05}};
  o.stride = 1;
  o.horizon = 50.0;
  const auto r = run_two_particle_exchange(o);
  double spread = 0.0;
  for (const Sample& s : r.record.samples) spread = std::max(spread, std::abs(particle_kinetic(s, 0) - particle_kinetic(s, 1)));
  EXPECT_LE(spread, 1e-10);
  EXPECT_GT(std::abs(particle_kinetic(r.record.samples[r.record.size() / 2], 0) - particle_kinetic(r.record.front(), 0)), 1e-4);
}

TEST(TrendTest, LevelAndRamp) {
  std::vector<double> tau, wave, ramp;
  for (int i = 0; i < 500; ++i) {
    const double t = 0.03 * i;
    tau.push_back(t);
    wave.push_back(1.0 + 0.1 * std::sin(t));
    ramp.push_back(1.0 + 0.1 * t + 0.01 * std::sin(5 * t));
  }
  EXPECT_TRUE(trend_test(tau, wave).level);
  const auto r = trend_test(tau, ramp);
  EXPECT_FALSE(r.level);
  EXPECT_NEAR(r.slope, 0.1, 1e-3);
  EXPECT_THROW(trend_test({0.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Shear, InitialPositionsLatticeAndDepth) {
  ShearOptions o = small_shear();
  const Vector q = shear_initial_positions(o);
  ASSERT_EQ(q.size(), 512);
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    EXPECT_GT(q[k], -0.01);
    EXPECT_LT(q[k], two_pi + 0.01);
  }
  // Band concentrated near y = pi.
  int central = 0;
  for (Eigen::Index k = 1; k < q.size(); k += 2) central += std::abs(q[k] - std::numbers::pi) < 1.0 ? 1 : 0;
  EXPECT_GT(central, 256 * 2.0 / two_pi * 1.1);
  o.n_particles = 250;
  EXPECT_THROW(shear_initial_positions(o), std::invalid_argument);
}

TEST(Shear, DeterministicPerSeed) {
  ShearOptions o = small_shear();
  const Vector a = shear_initial_positions(o);
  EXPECT_EQ(a, shear_initial_positions(o));
  o.seed = 1;
  EXPECT_NE(a, shear_initial_positions(o));
  const auto r1 = run_shear_instability(small_shear());
  const auto r2 = run_shear_instability(small_shear());
  EXPECT_EQ(r1.series.total, r2.series.total);
}

TEST(Shear, SmallRunEnergyAndBalance) {
  const auto r = run_shear_instability(small_shear());
  EXPECT_LE(r.max_relative_energy_error, 1e-4);
  EXPECT_EQ(r.series.kinetic_ag.front(), 0.0);
  EXPECT_DOUBLE_EQ(r.particle_mass, 1.0);
  EXPECT_EQ(r.series.tau.size(), 73u);
}

TEST(Shear, ZeroEpsilonKeepsKineticConstant) {
  ShearOptions o = small_shear();
  o.eps = 0.0;
  const auto r = run_shear_instability(o);
  for (double k : r.series.kinetic) EXPECT_NEAR(k, r.series.kinetic.front(), 1e-12);
}

TEST(Hierarchy, LsgTracksCloserThanGeostrophic) {
  const auto g = hierarchy_gaps(0.1);
  EXPECT_EQ(g.eps, 0.1);
  EXPECT_GT(g.geostrophic, g.lsg);
}
