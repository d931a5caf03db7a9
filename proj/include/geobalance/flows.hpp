#pragma once

// Exact sub-flows of the split Hamiltonian H = K + eps V.

#include "geobalance/core.hpp"

namespace geobalance {

/// Time-t flow of K = |p|^2 / 2 under the rotating structure: every parcel
/// rotates p <- exp(J2 t) p and drifts q <- J2 (1 - exp(J2 t)) p + q.
/// tau is left untouched.
inline PhaseState flow_K(const PhaseState& state, double t) {
  PhaseState out = state;
  const Mat2 rot = rotation(t);
  const Mat2 j = j2();
  for (Eigen::Index i = 0; i < state.parcels(); ++i) {
    const Vec2 p = state.p_of(i);
    const Vec2 rp = rot * p;
    out.p.segment<2>(2 * i) = rp;
    out.q.segment<2>(2 * i) = state.q_of(i) + j * (p - rp);
  }
  return out;
}

/// Time-t flow of eps V with the potential frozen at state.tau.
template <PotentialField F>
PhaseState kick_V(const PhaseState& state, double t, Epsilon eps, const F& field) {
  PhaseState out = state;
  if (eps.value() == 0.0 || t == 0.0) return out;
  out.p -= (t * eps.value()) * field.gradient(state.q, state.tau);
  return out;
}

}  // namespace geobalance
