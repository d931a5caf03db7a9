#pragma once

// Convergence harnesses shared by the unit tests and the acceptance binary.

#include "geobalance/geobalance.hpp"

#include <cmath>
#include <vector>

namespace geobalance::harness {

/// Final state of `steps` fixed steps of the chosen full scheme.
template <PotentialField F>
PhaseState run_steps(PhaseState z, const StepperConfig& cfg, const F& field, long long steps) {
  for (long long k = 0; k < steps; ++k) z = step(z, cfg, field);
  return z;
}

inline double state_distance(const PhaseState& a, const PhaseState& b) {
  return std::max((a.p - b.p).lpNorm<Eigen::Infinity>(), (a.q - b.q).lpNorm<Eigen::Infinity>());
}

/// Global errors at time `horizon` for dt = dt0, dt0/2, dt0/4, ... measured
/// against the same scheme at dt_min / 1000.
template <PotentialField F>
std::vector<double> full_scheme_errors(Scheme scheme, const PhaseState& z0, Epsilon eps, const F& field,
                                       double horizon, double dt0, int levels) {
  const double dt_ref = dt0 / std::pow(2.0, levels - 1) / 1000.0;
  const PhaseState ref =
      run_steps(z0, StepperConfig{dt_ref, scheme, eps}, field, std::llround(horizon / dt_ref));
  std::vector<double> errors;
  for (int l = 0; l < levels; ++l) {
    const double dt = dt0 / std::pow(2.0, l);
    errors.push_back(state_distance(run_steps(z0, StepperConfig{dt, scheme, eps}, field, std::llround(horizon / dt)), ref));
  }
  return errors;
}

template <PotentialField F>
std::vector<double> slow_scheme_errors(Scheme scheme, const Vector& q0, Epsilon eps, const F& field, double horizon,
                                       double dt0, int levels) {
  const double dt_ref = dt0 / std::pow(2.0, levels - 1) / 1000.0;
  const Vector ref = slow_integrate(q0, StepperConfig{dt_ref, scheme, eps}, field, horizon).q.back();
  std::vector<double> errors;
  for (int l = 0; l < levels; ++l) {
    const double dt = dt0 / std::pow(2.0, l);
    const Vector q = slow_integrate(q0, StepperConfig{dt, scheme, eps}, field, horizon).q.back();
    errors.push_back((q - ref).lpNorm<Eigen::Infinity>());
  }
  return errors;
}

inline double min_order(const std::vector<double>& errors) {
  double lo = INFINITY;
  for (double o : experiments::observed_orders(errors)) lo = std::min(lo, o);
  return lo;
}

}  // namespace geobalance::harness
