#pragma once

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace geobalance {

using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// The inertial rotation generator J2 = [[0, 1], [-1, 0]].
inline Mat2 j2() {
  Mat2 m;
  m << 0.0, 1.0, -1.0, 0.0;
  return m;
}

/// exp(J2 t) = cos(t) I + sin(t) J2.
inline Mat2 rotation(double t) {
  const double c = std::cos(t);
  const double s = std::sin(t);
  Mat2 m;
  m << c, s, -s, c;
  return m;
}

/// Applies J2 to every parcel of an interleaved (x, y, x, y, ...) vector.
inline Vector apply_j2(const Vector& v) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i + 1 < v.size(); i += 2) {
    out[i] = v[i + 1];
    out[i + 1] = -v[i];
  }
  return out;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Joint Rossby/Burger number. Zero is admitted as the decoupled limit.
class Epsilon {
 public:
  constexpr Epsilon() = default;
  explicit Epsilon(double value) : value_(value) {
    if (!std::isfinite(value) || value < 0.0) {
      throw std::invalid_argument("epsilon must be finite and non-negative, got " +
                                  std::to_string(value));
    }
  }
  constexpr double value() const { return value_; }
  constexpr operator double() const { return value_; }

 private:
  double value_ = 0.0;
};

/// Momenta and positions of N parcels, stored interleaved per parcel, plus
/// the slow time tau.
struct PhaseState {
  Vector p;
  Vector q;
  double tau = 0.0;

  PhaseState() = default;
  PhaseState(Vector p_in, Vector q_in, double tau_in = 0.0)
      : p(std::move(p_in)), q(std::move(q_in)), tau(tau_in) {
    validate();
  }

  Eigen::Index parcels() const { return q.size() / 2; }

  Vec2 p_of(Eigen::Index i) const { return p.segment<2>(2 * i); }
  Vec2 q_of(Eigen::Index i) const { return q.segment<2>(2 * i); }

  /// Throws if the shape or finiteness invariants are broken.
  void validate() const {
    if (p.size() != q.size() || q.size() < 2 || q.size() % 2 != 0) {
      throw std::invalid_argument("PhaseState: p and q must both have length 2N with N >= 1");
    }
    if (!all_finite(p) || !all_finite(q) || !std::isfinite(tau)) {
      throw std::domain_error("PhaseState: non-finite entry");
    }
  }

  bool finite() const { return all_finite(p) && all_finite(q) && std::isfinite(tau); }
};

inline PhaseState single_parcel(Vec2 p, Vec2 q, double tau = 0.0) {
  return PhaseState(Vector(p), Vector(q), tau);
}

// ---------------------------------------------------------------------------
// Potential fields
// ---------------------------------------------------------------------------

/// Layer depth / potential V(q, tau) with an analytic gradient.
template <class F>
concept PotentialField = requires(const F& f, const Vector& q, double tau) {
  { f.value(q, tau) } -> std::convertible_to<double>;
  { f.gradient(q, tau) } -> std::convertible_to<Vector>;
  { f.time_dependent() } -> std::convertible_to<bool>;
};

/// A potential that additionally exposes grad ||grad V||^2 = 2 Hess(V) grad V.
template <class F>
concept CurvaturePotential = PotentialField<F> && requires(const F& f, const Vector& q, double tau) {
  { f.grad_norm_sq_gradient(q, tau) } -> std::convertible_to<Vector>;
};

/// Step used by nested central differences for second derivatives.
inline constexpr double curvature_fd_step = 1e-5;

/// Adds a second-derivative path to any potential through a central
/// difference of its gradient along grad V.
template <PotentialField F>
class FiniteDifferenceCurvature {
 public:
  explicit FiniteDifferenceCurvature(F field) : field_(std::move(field)) {}

  double value(const Vector& q, double tau) const { return field_.value(q, tau); }
  Vector gradient(const Vector& q, double tau) const { return field_.gradient(q, tau); }
  bool time_dependent() const { return field_.time_dependent(); }

  Vector grad_norm_sq_gradient(const Vector& q, double tau) const {
    const Vector g = field_.gradient(q, tau);
    const double norm = g.norm();
    if (norm == 0.0) return Vector::Zero(q.size());
    const Vector dir = g / norm;
    const double h = curvature_fd_step;
    const Vector hg = (field_.gradient(q + h * dir, tau) - field_.gradient(q - h * dir, tau)) / (2.0 * h);
    return 2.0 * norm * hg;
  }

  const F& inner() const { return field_; }

 private:
  F field_;
};

/// V(q) = q_x + exp(-|q|^2) / 2, summed over parcels.
class ModelPotential {
 public:
  static double parcel_value(const Vec2& q) {
    return q.x() + 0.5 * std::exp(-q.squaredNorm());
  }
  static Vec2 parcel_gradient(const Vec2& q) {
    const double e = std::exp(-q.squaredNorm());
    return {1.0 - q.x() * e, -q.y() * e};
  }
  static Mat2 parcel_hessian(const Vec2& q) {
    const double e = std::exp(-q.squaredNorm());
    const double x = q.x();
    const double y = q.y();
    Mat2 h;
    h << (2.0 * x * x - 1.0) * e, 2.0 * x * y * e,
         2.0 * x * y * e, (2.0 * y * y - 1.0) * e;
    return h;
  }

  double value(const Vector& q, double /*tau*/ = 0.0) const {
    double v = 0.0;
    for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) v += parcel_value(q.segment<2>(i));
    return v;
  }
  Vector gradient(const Vector& q, double /*tau*/ = 0.0) const {
    Vector g(q.size());
    for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) g.segment<2>(i) = parcel_gradient(q.segment<2>(i));
    return g;
  }
  Vector hessian_times(const Vector& q, const Vector& v) const {
    Vector out(q.size());
    for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) {
      out.segment<2>(i) = parcel_hessian(q.segment<2>(i)) * v.segment<2>(i);
    }
    return out;
  }
  Vector grad_norm_sq_gradient(const Vector& q, double /*tau*/ = 0.0) const {
    return 2.0 * hessian_times(q, gradient(q));
  }
  bool time_dependent() const { return false; }
};

/// V(q) = sum_i a . q_i, a constant-gradient field.
class LinearPotential {
 public:
  explicit LinearPotential(Vec2 slope = {1.0, 0.0}) : slope_(slope) {}

  double value(const Vector& q, double /*tau*/ = 0.0) const {
    double v = 0.0;
    for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) v += slope_.dot(q.segment<2>(i));
    return v;
  }
  Vector gradient(const Vector& q, double /*tau*/ = 0.0) const {
    Vector g(q.size());
    for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) g.segment<2>(i) = slope_;
    return g;
  }
  Vector grad_norm_sq_gradient(const Vector& q, double /*tau*/ = 0.0) const {
    return Vector::Zero(q.size());
  }
  bool time_dependent() const { return false; }
  const Vec2& slope() const { return slope_; }

 private:
  Vec2 slope_;
};

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

inline double kinetic_energy(const Vector& p) { return 0.5 * p.squaredNorm(); }

template <PotentialField F>
double total_energy(const PhaseState& state, const F& field, Epsilon eps) {
  const double k = kinetic_energy(state.p);
  if (eps.value() == 0.0) return k;
  return k + eps.value() * field.value(state.q, state.tau);
}

// ---------------------------------------------------------------------------
// Sampled trajectories
// ---------------------------------------------------------------------------

struct Sample {
  double tau = 0.0;
  double kinetic = 0.0;
  double total = 0.0;
  double kinetic_ag = 0.0;
  Vector q;
  Vector p;
};

struct TrajectoryRecord {
  double eps = 0.0;
  std::vector<Sample> samples;
  long long steps = 0;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  const Sample& front() const { return samples.front(); }
  const Sample& back() const { return samples.back(); }
};

}  // namespace geobalance
