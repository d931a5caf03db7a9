#pragma once

// Time steppers for the parcel equations
//   p' = J2 p - eps grad V(q, tau),   q' = p,
// and for the reduced slow models.

#include "geobalance/core.hpp"
#include "geobalance/flows.hpp"
#include "geobalance/normalform.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace geobalance {

enum class Scheme { strang, rk4, slow_geostrophic, slow_lsg };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::strang: return "strang";
    case Scheme::rk4: return "rk4";
    case Scheme::slow_geostrophic: return "slow_geostrophic";
    case Scheme::slow_lsg: return "slow_lsg";
  }
  return "unknown";
}

inline Scheme scheme_from_string(std::string_view name) {
  if (name == "strang") return Scheme::strang;
  if (name == "rk4") return Scheme::rk4;
  if (name == "slow_geostrophic") return Scheme::slow_geostrophic;
  if (name == "slow_lsg") return Scheme::slow_lsg;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

struct StepperConfig {
  double dt = 0.01;
  Scheme scheme = Scheme::strang;
  Epsilon eps{0.1};

  /// Negative steps are allowed for single steps (time reversal); the
  /// driver loops require dt > 0.
  void validate_for_driver() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw std::invalid_argument("StepperConfig: dt must be positive, got " + std::to_string(dt));
    }
  }
};

/// Raised when a run produces a non-finite state or a nonlinear solve fails.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, long long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long long step() const { return step_; }

 private:
  long long step_;
};

// ---------------------------------------------------------------------------
// Full dynamics
// ---------------------------------------------------------------------------

/// Phi_{dt/2,K} o Phi_{dt,eps V} o Phi_{dt/2,K}. The kick samples V at the
/// midpoint time tau + dt/2.
template <PotentialField F>
PhaseState strang_step(const PhaseState& state, const StepperConfig& cfg, const F& field) {
  const double dt = cfg.dt;
  PhaseState s = flow_K(state, 0.5 * dt);
  s.tau = state.tau + 0.5 * dt;
  s = kick_V(s, dt, cfg.eps, field);
  s = flow_K(s, 0.5 * dt);
  s.tau = state.tau + dt;
  return s;
}

namespace detail {

template <PotentialField F>
void full_rhs(const Vector& p, const Vector& q, double tau, Epsilon eps, const F& field, Vector& dp,
              Vector& dq) {
  dp = apply_j2(p);
  if (eps.value() != 0.0) dp -= eps.value() * field.gradient(q, tau);
  dq = p;
}

}  // namespace detail

/// Classical fourth-order Runge-Kutta on the full vector field.
template <PotentialField F>
PhaseState rk4_step(const PhaseState& state, const StepperConfig& cfg, const F& field) {
  const double dt = cfg.dt;
  const double t0 = state.tau;
  Vector k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q;
  detail::full_rhs(state.p, state.q, t0, cfg.eps, field, k1p, k1q);
  detail::full_rhs(Vector(state.p + 0.5 * dt * k1p), Vector(state.q + 0.5 * dt * k1q), t0 + 0.5 * dt, cfg.eps,
                   field, k2p, k2q);
  detail::full_rhs(Vector(state.p + 0.5 * dt * k2p), Vector(state.q + 0.5 * dt * k2q), t0 + 0.5 * dt, cfg.eps,
                   field, k3p, k3q);
  detail::full_rhs(Vector(state.p + dt * k3p), Vector(state.q + dt * k3q), t0 + dt, cfg.eps, field, k4p, k4q);
  PhaseState out = state;
  out.p += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  out.q += (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  out.tau = t0 + dt;
  return out;
}

template <PotentialField F>
PhaseState step(const PhaseState& state, const StepperConfig& cfg, const F& field) {
  switch (cfg.scheme) {
    case Scheme::strang: return strang_step(state, cfg, field);
    case Scheme::rk4: return rk4_step(state, cfg, field);
    default: break;
  }
  throw std::invalid_argument("step: scheme '" + std::string(to_string(cfg.scheme)) +
                              "' advances positions only; use slow_integrate");
}

// ---------------------------------------------------------------------------
// Slow models
// ---------------------------------------------------------------------------

/// Geostrophic velocity q' = -eps J2 grad V.
template <PotentialField F>
Vector geostrophic_rhs(const Vector& q, double tau, Epsilon eps, const F& field) {
  return balance_momentum(q, tau, eps, field);
}

/// Large-scale semi-geostrophic velocity
/// q' = J2^T (eps grad V - (eps^2 / 2) grad |grad V|^2).
template <CurvaturePotential F>
Vector lsg_rhs(const Vector& q, double tau, Epsilon eps, const F& field) {
  const double e = eps.value();
  const Vector force = e * field.gradient(q, tau) - 0.5 * e * e * field.grad_norm_sq_gradient(q, tau);
  return -apply_j2(force);
}

struct SlowTrajectory {
  std::vector<double> tau;
  std::vector<Vector> q;
};

inline constexpr double slow_solve_tolerance = 1e-13;
inline constexpr int slow_solve_max_iterations = 50;

namespace detail {

/// Number of steps of size dt covering [0, horizon]; the last one may be short.
inline long long step_count(double horizon, double dt, double& last_dt) {
  if (horizon <= 0.0) {
    last_dt = 0.0;
    return 0;
  }
  const double ratio = horizon / dt;
  long long n = static_cast<long long>(std::floor(ratio + 1e-9));
  const double rem = horizon - static_cast<double>(n) * dt;
  last_dt = dt;
  if (rem > 1e-12 * dt) {
    ++n;
    last_dt = rem;
  }
  return n;
}

template <class Rhs>
Vector midpoint_step(const Vector& q, double tau, double dt, const Rhs& rhs, long long index) {
  Vector next = q + dt * rhs(q, tau + 0.5 * dt);
  for (int it = 0; it < slow_solve_max_iterations; ++it) {
    Vector trial = q + dt * rhs(Vector(0.5 * (q + next)), tau + 0.5 * dt);
    const double residual = (trial - next).lpNorm<Eigen::Infinity>();
    next = std::move(trial);
    if (residual <= slow_solve_tolerance * std::max(1.0, next.lpNorm<Eigen::Infinity>())) return next;
    if (!next.allFinite()) break;
  }
  throw IntegrationError("slow_integrate: implicit midpoint iteration did not converge", index);
}

}  // namespace detail

/// Implicit-midpoint integration of the selected slow model over [0, horizon].
template <PotentialField F>
SlowTrajectory slow_integrate(const Vector& q0, const StepperConfig& cfg, const F& field, double horizon,
                              double tau0 = 0.0) {
  cfg.validate_for_driver();
  if (cfg.scheme != Scheme::slow_geostrophic && cfg.scheme != Scheme::slow_lsg) {
    throw std::invalid_argument("slow_integrate: scheme must be slow_geostrophic or slow_lsg");
  }
  SlowTrajectory out;
  out.tau.push_back(tau0);
  out.q.push_back(q0);
  double last_dt = 0.0;
  const long long n = detail::step_count(horizon, cfg.dt, last_dt);
  Vector q = q0;
  double tau = tau0;
  for (long long k = 0; k < n; ++k) {
    const double dt = (k + 1 == n) ? last_dt : cfg.dt;
    if (cfg.scheme == Scheme::slow_geostrophic) {
      q = detail::midpoint_step(
          q, tau, dt, [&](const Vector& x, double t) { return geostrophic_rhs(x, t, cfg.eps, field); }, k);
    } else {
      if constexpr (CurvaturePotential<F>) {
        q = detail::midpoint_step(
            q, tau, dt, [&](const Vector& x, double t) { return lsg_rhs(x, t, cfg.eps, field); }, k);
      } else {
        throw std::invalid_argument(
            "slow_integrate: slow_lsg needs a potential with a second-derivative path "
            "(wrap it in FiniteDifferenceCurvature)");
      }
    }
    tau = tau0 + ((k + 1 == n) ? horizon : static_cast<double>(k + 1) * cfg.dt);
    out.tau.push_back(tau);
    out.q.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

using StopPredicate = std::function<bool(const PhaseState&)>;

template <PotentialField F>
Sample make_sample(const PhaseState& s, Epsilon eps, const F& field) {
  Sample out;
  out.tau = s.tau;
  out.kinetic = kinetic_energy(s.p);
  out.total = total_energy(s, field, eps);
  out.kinetic_ag = kinetic_energy(ageostrophic_momentum(s, eps, field));
  out.q = s.q;
  out.p = s.p;
  return out;
}

struct IntegrateOptions {
  double horizon = 0.0;
  long long stride = 1;
  StopPredicate stop{};  ///< checked after every full step
  std::function<void(const PhaseState&)> observer{};  ///< sees the initial state and every step
};

/// Advances state0 with the configured full-dynamics stepper, sampling every
/// `stride` steps and at the final step. A post-step hook may modify the
/// state (e.g. periodic wrapping) before it is checked and sampled.
template <PotentialField F, class PostStep>
TrajectoryRecord integrate(const PhaseState& state0, const StepperConfig& cfg, const F& field,
                           const IntegrateOptions& opts, PostStep&& post_step) {
  cfg.validate_for_driver();
  if (opts.horizon < 0.0 || std::isnan(opts.horizon)) {
    throw std::invalid_argument("integrate: horizon must be non-negative");
  }
  if (opts.stride < 1) throw std::invalid_argument("integrate: stride must be >= 1");
  if (cfg.scheme != Scheme::strang && cfg.scheme != Scheme::rk4) {
    throw std::invalid_argument("integrate: scheme must be strang or rk4");
  }

  TrajectoryRecord record;
  record.eps = cfg.eps.value();
  record.samples.push_back(make_sample(state0, cfg.eps, field));
  if (opts.observer) opts.observer(state0);

  double last_dt = 0.0;
  const long long n =
      std::isinf(opts.horizon) ? std::numeric_limits<long long>::max() : detail::step_count(opts.horizon, cfg.dt, last_dt);
  StepperConfig step_cfg = cfg;
  PhaseState s = state0;
  for (long long k = 0; k < n; ++k) {
    step_cfg.dt = (k + 1 == n) ? last_dt : cfg.dt;
    s = step(s, step_cfg, field);
    post_step(s);
    if (!s.finite()) throw IntegrationError("integrate: non-finite state", k + 1);
    record.steps = k + 1;
    if (opts.observer) opts.observer(s);
    const bool stop = opts.stop && opts.stop(s);
    if (stop || k + 1 == n || (k + 1) % opts.stride == 0) {
      record.samples.push_back(make_sample(s, cfg.eps, field));
    }
    if (stop) break;
  }
  return record;
}

template <PotentialField F>
TrajectoryRecord integrate(const PhaseState& state0, const StepperConfig& cfg, const F& field,
                           const IntegrateOptions& opts) {
  return integrate(state0, cfg, field, opts, [](PhaseState&) {});
}

}  // namespace geobalance
