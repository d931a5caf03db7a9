#pragma once

// Finite-difference probes used by the self-test suite and the tests:
// gradient consistency, Jacobians of phase-space maps, and the symplectic
// defect with respect to the structure J = [[J_2N, -I], [I, 0]].

#include "geobalance/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <random>

namespace geobalance::diagnostics {

using Matrix = Eigen::MatrixXd;
using PhaseMap = std::function<PhaseState(const PhaseState&)>;

/// Relative max-norm error between the analytic gradient and central
/// differences of the value at q.
template <PotentialField F>
double gradient_error(const F& field, const Vector& q, double tau = 0.0, double h = 1e-5) {
  const Vector g = field.gradient(q, tau);
  Vector fd(q.size());
  Vector x = q;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    x[i] = q[i] + h;
    const double vp = field.value(x, tau);
    x[i] = q[i] - h;
    const double vm = field.value(x, tau);
    x[i] = q[i];
    fd[i] = (vp - vm) / (2.0 * h);
  }
  const double scale = std::max(g.lpNorm<Eigen::Infinity>(), 1e-12);
  return (g - fd).lpNorm<Eigen::Infinity>() / scale;
}

/// Packs z = (p, q) into one vector.
inline Vector pack(const PhaseState& s) {
  Vector z(s.p.size() + s.q.size());
  z << s.p, s.q;
  return z;
}

inline PhaseState unpack(const Vector& z, double tau) {
  const Eigen::Index n = z.size() / 2;
  return PhaseState(z.head(n), z.tail(n), tau);
}

/// Central-difference Jacobian of a phase-space map at z.
inline Matrix jacobian(const PhaseMap& map, const PhaseState& z, double h = 1e-5) {
  const Vector z0 = pack(z);
  const Eigen::Index n = z0.size();
  Matrix D(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector zp = z0, zm = z0;
    zp[j] += h;
    zm[j] -= h;
    D.col(j) = (pack(map(unpack(zp, z.tau))) - pack(map(unpack(zm, z.tau)))) / (2.0 * h);
  }
  return D;
}

/// J^{-1} = [[0, I], [-I, J_2N]] for z = (p, q) with 2N momenta.
inline Matrix inverse_structure(Eigen::Index half) {
  Matrix w = Matrix::Zero(2 * half, 2 * half);
  w.topRightCorner(half, half).setIdentity();
  w.bottomLeftCorner(half, half) = -Matrix::Identity(half, half);
  for (Eigen::Index i = 0; i + 1 < half; i += 2) {
    w(half + i, half + i + 1) = 1.0;
    w(half + i + 1, half + i) = -1.0;
  }
  return w;
}

/// ||D^T J^{-1} D - J^{-1}||_inf for the finite-difference Jacobian D.
inline double symplectic_defect(const PhaseMap& map, const PhaseState& z, double h = 1e-5) {
  const Matrix D = jacobian(map, z, h);
  const Matrix w = inverse_structure(z.p.size());
  return (D.transpose() * w * D - w).cwiseAbs().rowwise().sum().maxCoeff();
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace geobalance::diagnostics
