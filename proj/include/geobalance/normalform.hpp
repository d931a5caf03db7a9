#pragma once

// First-order averaging machinery for H = K + eps V: balance projections,
// the fast-phase average of V, the generator F1 of the first near-identity
// transformation, Poisson brackets, and drift diagnostics.

#include "geobalance/core.hpp"
#include "geobalance/flows.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace geobalance {

// ---------------------------------------------------------------------------
// Balance
// ---------------------------------------------------------------------------

/// Geostrophic momentum p_gs = -eps J2 grad V, per parcel.
template <PotentialField F>
Vector balance_momentum(const Vector& q, double tau, Epsilon eps, const F& field) {
  if (eps.value() == 0.0) return Vector::Zero(q.size());
  return -eps.value() * apply_j2(field.gradient(q, tau));
}

/// Momentum on the slow manifold to second order:
/// p = -eps J2 grad V + eps^2 Hess(V) J2 grad V.
/// Hess(V) J2 grad V is taken as a central difference of the gradient along
/// J2 grad V.
template <PotentialField F>
Vector slow_manifold_momentum(const Vector& q, double tau, Epsilon eps, const F& field) {
  const double e = eps.value();
  const Vector j2g = apply_j2(field.gradient(q, tau));
  const double norm = j2g.norm();
  Vector hj2g = Vector::Zero(q.size());
  if (norm > 0.0) {
    const double h = curvature_fd_step;
    const Vector dir = j2g / norm;
    hj2g = norm * (field.gradient(q + h * dir, tau) - field.gradient(q - h * dir, tau)) / (2.0 * h);
  }
  return -e * j2g + e * e * hj2g;
}

/// Same, using the analytic Hessian of the model potential.
inline Vector slow_manifold_momentum(const Vector& q, double /*tau*/, Epsilon eps,
                                     const ModelPotential& field) {
  const double e = eps.value();
  const Vector j2g = apply_j2(field.gradient(q));
  return -e * j2g + e * e * field.hessian_times(q, j2g);
}

/// Position in first-order normal-form coordinates, q_eps = q + eps grad V(q).
/// The generator's flow at p = 0 displaces q by eps grad_p F1 = -eps grad V.
template <PotentialField F>
Vector normal_form_position(const Vector& q, double tau, Epsilon eps, const F& field) {
  if (eps.value() == 0.0) return q;
  return q + eps.value() * field.gradient(q, tau);
}

template <PotentialField F>
Vector ageostrophic_momentum(const PhaseState& state, Epsilon eps, const F& field) {
  return state.p - balance_momentum(state.q, state.tau, eps, field);
}

// ---------------------------------------------------------------------------
// Averaging over the inertial period
// ---------------------------------------------------------------------------

/// Equispaced nodes over one inertial period T = 2 pi.
class QuadratureSpec {
 public:
  static constexpr int default_nodes = 128;

  explicit QuadratureSpec(int n_nodes = default_nodes) : n_(n_nodes) {
    if (n_nodes < 4) throw std::invalid_argument("QuadratureSpec: need at least 4 nodes");
  }
  int nodes() const { return n_; }
  double node(int k) const { return two_pi * k / n_; }

 private:
  int n_;
};

/// V averaged along the fast flow, V̄(z) = (1/T) ∫ V(Φ_{s,K}(z)) ds, by the
/// trapezoidal rule. The potential is frozen at z.tau.
template <PotentialField F>
double averaged_potential(const PhaseState& z, const F& field, const QuadratureSpec& quad = QuadratureSpec{}) {
  double sum = 0.0;
  for (int k = 0; k < quad.nodes(); ++k) {
    sum += field.value(flow_K(z, quad.node(k)).q, z.tau);
  }
  return sum / quad.nodes();
}

/// Weights w_j such that sum_j w_j g(s_j) = (1/T) ∫ s g(s) ds exactly for
/// every zero-mean trigonometric polynomial g of degree below n/2.
/// They sample the truncated Fourier series s - pi = -2 sum_k sin(k s) / k.
inline std::vector<double> sawtooth_weights(const QuadratureSpec& quad) {
  const int n = quad.nodes();
  const int kmax = (n - 1) / 2;
  std::vector<double> w(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double s = quad.node(j);
    double acc = 0.0;
    for (int k = 1; k <= kmax; ++k) acc += std::sin(k * s) / k;
    w[j] = -2.0 * acc / n;
  }
  return w;
}

/// Generator of the first transformation,
/// F1(z) = (1/T) ∫ s (V - V̄)(Φ_{s,K}(z)) ds.
/// V̄ is invariant under the fast flow, so the integrand is s times a periodic
/// zero-mean function; the plain trapezoidal rule would only be second order
/// because s itself is not periodic, hence the sawtooth weights.
template <PotentialField F>
double generator_F1(const PhaseState& z, const F& field, const QuadratureSpec& quad = QuadratureSpec{}) {
  const std::vector<double> w = sawtooth_weights(quad);
  const double vbar = averaged_potential(z, field, quad);
  double sum = 0.0;
  for (int k = 0; k < quad.nodes(); ++k) {
    sum += w[k] * (field.value(flow_K(z, quad.node(k)).q, z.tau) - vbar);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Poisson brackets
// ---------------------------------------------------------------------------

inline constexpr double bracket_fd_step = 1e-5;

using PhaseFunctional = std::function<double(const PhaseState&)>;

/// Central-difference gradient of a phase-space functional, returned as the
/// pair (d/dp, d/dq).
inline std::pair<Vector, Vector> phase_gradient(const PhaseFunctional& f, const PhaseState& z,
                                                double h = bracket_fd_step) {
  const Eigen::Index n = z.p.size();
  Vector gp(n);
  Vector gq(n);
  PhaseState w = z;
  for (Eigen::Index i = 0; i < n; ++i) {
    w.p[i] = z.p[i] + h;
    const double fp = f(w);
    w.p[i] = z.p[i] - h;
    const double fm = f(w);
    w.p[i] = z.p[i];
    gp[i] = (fp - fm) / (2.0 * h);

    w.q[i] = z.q[i] + h;
    const double gpv = f(w);
    w.q[i] = z.q[i] - h;
    const double gmv = f(w);
    w.q[i] = z.q[i];
    gq[i] = (gpv - gmv) / (2.0 * h);
  }
  return {gp, gq};
}

/// {f, g} = grad f^T J grad g with J = [[J2, -I], [I, 0]] acting on (p, q).
inline double poisson_bracket(const PhaseFunctional& f, const PhaseFunctional& g, const PhaseState& z,
                              double h = bracket_fd_step) {
  const auto [fp, fq] = phase_gradient(f, z, h);
  const auto [gp, gq] = phase_gradient(g, z, h);
  return fp.dot(apply_j2(gp)) - fp.dot(gq) + fq.dot(gp);
}

/// |V̄ - V - {K, F1}| at z: how well F1 solves the first homological equation.
template <PotentialField F>
double homological_residual(const PhaseState& z, const F& field, const QuadratureSpec& quad = QuadratureSpec{}) {
  const PhaseFunctional kinetic = [](const PhaseState& s) { return kinetic_energy(s.p); };
  const PhaseFunctional f1 = [&](const PhaseState& s) { return generator_F1(s, field, quad); };
  const double lhs = averaged_potential(z, field, quad) - field.value(z.q, z.tau);
  return std::abs(lhs - poisson_bracket(kinetic, f1, z));
}

// ---------------------------------------------------------------------------
// Slow Hamiltonian
// ---------------------------------------------------------------------------

/// H_lsg = eps V - (eps^2 / 2) |grad V|^2.
template <PotentialField F>
double lsg_hamiltonian(const Vector& q, Epsilon eps, const F& field, double tau = 0.0) {
  const double e = eps.value();
  return e * field.value(q, tau) - 0.5 * e * e * field.gradient(q, tau).squaredNorm();
}

// ---------------------------------------------------------------------------
// Drift diagnostics
// ---------------------------------------------------------------------------

struct DriftReport {
  double eps = 0.0;
  double delta_K = 0.0;
  double delta_E = 0.0;
  double horizon = 0.0;
};

inline DriftReport drift_metrics(const TrajectoryRecord& record) {
  if (record.empty()) throw std::invalid_argument("drift_metrics: empty record");
  const Sample& first = record.front();
  const Sample& last = record.back();
  return {record.eps, std::abs(first.kinetic - last.kinetic), std::abs(first.total - last.total),
          last.tau - first.tau};
}

struct ExponentialFit {
  double C = 0.0;  ///< prefactor
  double c = 0.0;  ///< decay constant in delta = C exp(-c / eps)
};

/// Least-squares line through (1/eps, log delta).
inline ExponentialFit fit_exponential(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("fit_exponential: need at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [e, d] = points[i];
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("fit_exponential: eps must be positive");
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("fit_exponential: delta must be positive");
    for (std::size_t j = 0; j < i; ++j) {
      if (points[j].first == e) throw std::invalid_argument("fit_exponential: duplicate eps value");
    }
  }
  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [e, d] : points) {
    sx += 1.0 / e;
    sy += std::log(d);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [e, d] : points) {
    const double dx = 1.0 / e - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(d) - my);
  }
  const double slope = sxy / sxx;
  return {std::exp(my - slope * mx), -slope};
}

}  // namespace geobalance
