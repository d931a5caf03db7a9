#pragma once

// Reproducible experiment drivers: the drift sweep for the single-parcel
// model, the two-particle HPM exchange, and the desk-scale shear band.

#include "geobalance/core.hpp"
#include "geobalance/hpm.hpp"
#include "geobalance/integrators.hpp"
#include "geobalance/normalform.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace geobalance::experiments {

enum class ExperimentKind { drift, exchange, shear };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::drift: return "drift";
    case ExperimentKind::exchange: return "exchange";
    case ExperimentKind::shear: return "shear";
  }
  return "unknown";
}

inline std::optional<ExperimentKind> kind_from_string(std::string_view name) {
  if (name == "drift") return ExperimentKind::drift;
  if (name == "exchange") return ExperimentKind::exchange;
  if (name == "shear") return ExperimentKind::shear;
  return std::nullopt;
}

/// A run that could not finish within its declared budget.
class ExperimentAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs job(i) for i in [0, count) on up to `workers` threads. Each job
/// writes only its own slot, so results do not depend on scheduling.
template <class Job>
void parallel_for(std::size_t count, int workers, Job&& job) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Drift sweep
// ---------------------------------------------------------------------------

/// eps = 1/k for k = 4 .. 15.
inline std::vector<double> default_drift_eps() {
  std::vector<double> out;
  for (int k = 4; k <= 15; ++k) out.push_back(1.0 / k);
  return out;
}

struct DriftOptions {
  std::vector<double> eps_list = default_drift_eps();
  double q_y0 = -12.0;
  double q_y_stop = 10.0;
  long long max_steps = 50'000'000;
  long long stride = 100;
  int workers = 1;
};

struct DriftRun {
  DriftReport report;
  TrajectoryRecord record;
};

struct DriftResult {
  std::vector<DriftRun> runs;
  std::optional<ExponentialFit> fit;  ///< present when at least two runs exist
};

/// One drift run: model potential, q = (0, q_y0), p = (0, eps), dt = eps^2,
/// Strang steps until q_y exceeds q_y_stop.
inline DriftRun run_drift_single(double eps, const DriftOptions& opts) {
  if (!(eps > 0.0) || eps > 1.0) {
    throw std::invalid_argument("drift experiment: eps must lie in (0, 1], got " + std::to_string(eps));
  }
  const ModelPotential field;
  const StepperConfig cfg{eps * eps, Scheme::strang, Epsilon(eps)};
  const PhaseState z0 = single_parcel({0.0, eps}, {0.0, opts.q_y0});
  IntegrateOptions io;
  io.horizon = static_cast<double>(opts.max_steps) * cfg.dt;
  io.stride = opts.stride;
  const double stop_y = opts.q_y_stop;
  io.stop = [stop_y](const PhaseState& s) { return s.q[1] > stop_y; };
  TrajectoryRecord record = integrate(z0, cfg, field, io);
  if (!(record.back().q[1] > stop_y)) {
    throw ExperimentAborted("drift experiment: eps = " + std::to_string(eps) + " did not reach q_y > " +
                            std::to_string(stop_y) + " within " + std::to_string(opts.max_steps) +
                            " steps (q_y = " + std::to_string(record.back().q[1]) + ")");
  }
  DriftReport report = drift_metrics(record);
  return {report, std::move(record)};
}

inline DriftResult run_drift_experiment(const DriftOptions& opts) {
  if (opts.eps_list.empty()) throw std::invalid_argument("drift experiment: empty eps list");
  DriftResult result;
  result.runs.resize(opts.eps_list.size());
  parallel_for(opts.eps_list.size(), opts.workers,
               [&](std::size_t i) { result.runs[i] = run_drift_single(opts.eps_list[i], opts); });
  if (result.runs.size() >= 2) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : result.runs) pts.emplace_back(r.report.eps, r.report.delta_K);
    result.fit = fit_exponential(pts);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Slow-model hierarchy and balance persistence
// ---------------------------------------------------------------------------

struct HierarchyOptions {
  Vec2 q0{0.3, -0.4};
  double horizon = 1.0;
  double dt = 1e-3;
};

/// Sup-norm gaps between the full Strang trajectory and the two slow models.
struct HierarchyGaps {
  double eps = 0.0;
  double geostrophic = 0.0;
  double lsg = 0.0;
};

/// The full run starts on the second-order slow manifold. The geostrophic
/// model is compared in raw positions; the lsg model lives in normal-form
/// coordinates, so it starts at q0 + eps grad V(q0) and is compared against
/// q + eps grad V(q) along the full run.
inline HierarchyGaps hierarchy_gaps(double eps, const HierarchyOptions& opts = {}) {
  const ModelPotential field;
  const Epsilon e(eps);
  Vector q0 = opts.q0;
  const PhaseState z0(slow_manifold_momentum(q0, 0.0, e, field), q0);

  IntegrateOptions io;
  io.horizon = opts.horizon;
  const TrajectoryRecord full = integrate(z0, StepperConfig{opts.dt, Scheme::strang, e}, field, io);
  const SlowTrajectory geo =
      slow_integrate(q0, StepperConfig{opts.dt, Scheme::slow_geostrophic, e}, field, opts.horizon);
  const SlowTrajectory lsg = slow_integrate(normal_form_position(q0, 0.0, e, field),
                                            StepperConfig{opts.dt, Scheme::slow_lsg, e}, field, opts.horizon);
  if (full.size() != geo.q.size() || full.size() != lsg.q.size()) {
    throw std::logic_error("hierarchy_gaps: trajectories sampled on different grids");
  }
  HierarchyGaps out;
  out.eps = eps;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const Vector& q = full.samples[i].q;
    out.geostrophic = std::max(out.geostrophic, (q - geo.q[i]).lpNorm<Eigen::Infinity>());
    out.lsg = std::max(out.lsg, (normal_form_position(q, 0.0, e, field) - lsg.q[i]).lpNorm<Eigen::Infinity>());
  }
  return out;
}

/// sup over [0, horizon] of |p - p_gs| for a run started at p = p_gs.
inline double ageostrophic_sup(double eps, double horizon = 10.0, double dt = 1e-3, Vec2 q0 = {0.3, -0.4}) {
  const ModelPotential field;
  const Epsilon e(eps);
  const Vector q = q0;
  const PhaseState z0(balance_momentum(q, 0.0, e, field), q);
  double sup = 0.0;
  IntegrateOptions io;
  io.horizon = horizon;
  io.stride = std::numeric_limits<long long>::max();
  io.observer = [&](const PhaseState& s) {
    sup = std::max(sup, ageostrophic_momentum(s, e, field).norm());
  };
  integrate(z0, StepperConfig{dt, Scheme::strang, e}, field, io);
  return sup;
}

/// Observed order from gaps at successive halvings of eps.
inline std::vector<double> observed_orders(const std::vector<double>& errors) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) out.push_back(std::log2(errors[i] / errors[i + 1]));
  return out;
}

// ---------------------------------------------------------------------------
// Two-particle exchange
// ---------------------------------------------------------------------------

/// Two unit-mass HPM parcels on the background 0.5 sin(x) sin(y). The
/// coupling is switched on and off by a Gaussian envelope centred at
/// horizon/2 with width horizon/8, so the potential is negligible at both
/// ends and K measures the fast energy there.
struct ExchangeOptions {
  double eps = 0.05;
  double horizon = 200.0;
  double dt = 0.05;
  int grid = 32;
  double background_amplitude = 0.5;
  bool coupling = true;  ///< false runs the g = 0 control
  std::optional<std::array<Vec2, 2>> positions{};  ///< default: 3 cells apart about (pi, pi + 0.3)
  std::array<Vec2, 2> momenta{Vec2{0.3, 0.0}, Vec2{0.0, 0.1}};
  long long stride = 10;
};

struct ExchangeResult {
  TrajectoryRecord record;
  double kinetic_total_initial = 0.0;
  double kinetic_total_final = 0.0;
  double max_individual_change = 0.0;  ///< max_i |K_i(T) - K_i(0)|
};

inline double particle_kinetic(const Sample& s, Eigen::Index i) {
  return 0.5 * s.p.segment<2>(2 * i).squaredNorm();
}

inline hpm::HpmModel exchange_model(const ExchangeOptions& opts) {
  hpm::HpmModel model{hpm::PeriodicGrid(opts.grid)};
  const double a = opts.background_amplitude;
  if (a != 0.0) {
    model.background = [a](double, double x, double y) { return a * std::sin(x) * std::sin(y); };
  }
  model.envelope = opts.coupling ? hpm::ModulationEnvelope::gaussian(0.5 * opts.horizon, opts.horizon / 8.0)
                                 : hpm::ModulationEnvelope::constant(0.0);
  return model;
}

inline std::array<Vec2, 2> default_exchange_positions(int grid) {
  const double h = two_pi / grid;
  const double pi = std::numbers::pi;
  return {Vec2{pi - 1.5 * h, pi + 0.3}, Vec2{pi + 1.5 * h, pi + 0.3}};
}

inline ExchangeResult run_two_particle_exchange(const ExchangeOptions& opts) {
  const hpm::HpmModel model = exchange_model(opts);
  const auto pos = opts.positions.value_or(default_exchange_positions(opts.grid));
  Vector q(4), p(4);
  q << pos[0], pos[1];
  p << opts.momenta[0], opts.momenta[1];
  hpm::ParticleEnsemble ens{PhaseState(p, q, 0.0), 1.0};
  ens.wrap(model.grid);

  const hpm::HpmPotential field(model, ens.mass);
  const StepperConfig cfg{opts.dt, Scheme::strang, Epsilon(opts.eps)};
  IntegrateOptions io;
  io.horizon = opts.horizon;
  io.stride = opts.stride;
  const hpm::PeriodicGrid grid = model.grid;
  ExchangeResult out;
  out.record = integrate(ens.state, cfg, field, io, [&grid](PhaseState& s) {
    for (Eigen::Index i = 0; i < s.q.size(); ++i) s.q[i] = grid.wrap(s.q[i]);
  });
  const Sample& a = out.record.front();
  const Sample& b = out.record.back();
  out.kinetic_total_initial = a.kinetic;
  out.kinetic_total_final = b.kinetic;
  for (Eigen::Index i = 0; i < 2; ++i) {
    out.max_individual_change =
        std::max(out.max_individual_change, std::abs(particle_kinetic(b, i) - particle_kinetic(a, i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shear band
// ---------------------------------------------------------------------------

struct ShearOptions {
  int n_particles = 4096;  ///< must be a perfect square (lattice initialization)
  int grid = 64;
  double eps = 0.1;
  double dt = 1.0 / 36.0;
  double alpha = 0.2015;
  double horizon = 15.0;
  std::uint64_t seed = 0;
  long long stride = 36;

  double band_amplitude = 0.3;
  double band_width = 0.5;
  int perturbation_mode = 3;
  double perturbation_amplitude = 0.05;
  double jitter = 1e-3;  ///< in units of the grid spacing
};

/// Per-step balance diagnostics.
struct BalanceSeries {
  std::vector<double> tau;
  std::vector<double> kinetic;
  std::vector<double> kinetic_ag;
  std::vector<double> total;
};

/// Ordinary least squares of K_ag against tau. The series counts as level
/// when the fitted change over the run is within twice the residual scatter.
struct TrendTest {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_std = 0.0;
  double secular_change = 0.0;  ///< |slope| * (tau_end - tau_start)
  bool level = false;
};

inline TrendTest trend_test(const std::vector<double>& tau, const std::vector<double>& y) {
  if (tau.size() != y.size() || tau.size() < 3) throw std::invalid_argument("trend_test: need >= 3 paired samples");
  const double n = static_cast<double>(tau.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    mt += tau[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    stt += (tau[i] - mt) * (tau[i] - mt);
    sty += (tau[i] - mt) * (y[i] - my);
  }
  TrendTest t;
  t.slope = stt > 0.0 ? sty / stt : 0.0;
  t.intercept = my - t.slope * mt;
  double ss = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double r = y[i] - (t.intercept + t.slope * tau[i]);
    ss += r * r;
  }
  t.residual_std = std::sqrt(ss / (n - 2.0));
  t.secular_change = std::abs(t.slope) * (tau.back() - tau.front());
  t.level = t.secular_change <= 2.0 * t.residual_std;
  return t;
}

struct ShearResult {
  TrajectoryRecord record;  ///< every `stride` steps
  BalanceSeries series;     ///< every step
  double particle_mass = 1.0;
  double max_relative_energy_error = 0.0;
  double kinetic_ag_baseline = 0.0;  ///< max K(p_ag) over the first inertial period
  double kinetic_ag_max = 0.0;
  TrendTest trend;
};

inline hpm::HpmModel shear_model(const ShearOptions& opts) {
  hpm::HpmModel model{hpm::PeriodicGrid(opts.grid)};
  model.alpha = opts.alpha;
  return model;
}

/// Lattice positions displaced column by column so that the deposited depth
/// follows c0 + A sech^2((y - y_c(x)) / w), with y_c(x) = pi + a sin(k x) and
/// c0 chosen so that the mean depth equals the lattice mean.
inline Vector shear_initial_positions(const ShearOptions& opts) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(opts.n_particles))));
  if (side * side != opts.n_particles || side < 1) {
    throw std::invalid_argument("shear experiment: n_particles must be a perfect square, got " +
                                std::to_string(opts.n_particles));
  }
  const double A = opts.band_amplitude;
  const double w = opts.band_width;
  const double pi = std::numbers::pi;
  // The sech^2 band integrates to 2 w A over the domain up to exp(-2 pi / w).
  const double c0 = 1.0 - A * w * (std::tanh(pi / w) - std::tanh(-pi / w)) / two_pi;
  auto cdf = [&](double y, double yc) { return c0 * y + A * w * (std::tanh((y - yc) / w) - std::tanh(-yc / w)); };

  const double h_grid = two_pi / opts.grid;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-opts.jitter * h_grid, opts.jitter * h_grid);

  Vector q(2 * opts.n_particles);
  const double dx = two_pi / side;
  for (int i = 0; i < side; ++i) {
    const double x = (i + 0.5) * dx;
    const double yc = pi + opts.perturbation_amplitude * std::sin(opts.perturbation_mode * x);
    const double total = cdf(two_pi, yc);
    for (int j = 0; j < side; ++j) {
      const double target = (j + 0.5) / side * total;
      double lo = 0.0, hi = two_pi;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid, yc) < target ? lo : hi) = mid;
      }
      const Eigen::Index k = 2 * (static_cast<Eigen::Index>(i) * side + j);
      q[k] = x;
      q[k + 1] = 0.5 * (lo + hi);
    }
  }
  for (Eigen::Index k = 0; k < q.size(); ++k) q[k] += jitter(rng);
  return q;
}

inline ShearResult run_shear_instability(const ShearOptions& opts) {
  const hpm::HpmModel model = shear_model(opts);
  ShearResult out;
  // Mean depth one: total mass equals the number of grid nodes.
  out.particle_mass = static_cast<double>(opts.grid) * opts.grid / opts.n_particles;

  Vector q = shear_initial_positions(opts);
  for (Eigen::Index k = 0; k < q.size(); ++k) q[k] = model.grid.wrap(q[k]);
  const hpm::HpmPotential field(model, out.particle_mass);
  const Epsilon eps(opts.eps);
  const Vector p = balance_momentum(q, 0.0, eps, field);
  const PhaseState z0(p, q, 0.0);

  const StepperConfig cfg{opts.dt, Scheme::strang, eps};
  IntegrateOptions io;
  io.horizon = opts.horizon;
  io.stride = opts.stride;
  io.observer = [&](const PhaseState& s) {
    out.series.tau.push_back(s.tau);
    out.series.kinetic.push_back(kinetic_energy(s.p));
    out.series.kinetic_ag.push_back(kinetic_energy(ageostrophic_momentum(s, eps, field)));
    out.series.total.push_back(total_energy(s, field, eps));
  };
  const hpm::PeriodicGrid grid = model.grid;
  out.record = integrate(z0, cfg, field, io, [&grid](PhaseState& s) {
    for (Eigen::Index i = 0; i < s.q.size(); ++i) s.q[i] = grid.wrap(s.q[i]);
  });

  const double h0 = out.series.total.front();
  const double scale = h0 != 0.0 ? std::abs(h0) : 1.0;
  for (std::size_t i = 0; i < out.series.tau.size(); ++i) {
    out.max_relative_energy_error = std::max(out.max_relative_energy_error, std::abs(out.series.total[i] - h0) / scale);
    out.kinetic_ag_max = std::max(out.kinetic_ag_max, out.series.kinetic_ag[i]);
    if (out.series.tau[i] <= out.series.tau.front() + two_pi) {
      out.kinetic_ag_baseline = std::max(out.kinetic_ag_baseline, out.series.kinetic_ag[i]);
    }
  }
  if (out.series.tau.size() >= 3) out.trend = trend_test(out.series.tau, out.series.kinetic_ag);
  return out;
}

}  // namespace geobalance::experiments
