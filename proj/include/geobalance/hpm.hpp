#pragma once

// Hamiltonian particle-mesh (HPM) discretization on the periodic square
// [0, 2 pi)^2. Parcel masses are deposited onto an M x M grid with cardinal
// cubic B-splines; the potential couples the deposited depth to itself and to
// a prescribed background, optionally through the smoothing operator
// (1 - alpha^2 Laplacian)^{-1}.

#include "geobalance/core.hpp"
#include "geobalance/integrators.hpp"

#include <unsupported/Eigen/FFT>

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace geobalance::hpm {

class PeriodicGrid {
 public:
  explicit PeriodicGrid(int nodes) : m_(nodes), h_(two_pi / nodes) {
    if (nodes < 8) throw std::invalid_argument("PeriodicGrid: need at least 8 nodes per dimension");
    length_ = h_ * m_;
  }

  int nodes() const { return m_; }
  double spacing() const { return h_; }
  /// Domain length, h * M.
  double length() const { return length_; }
  double node(int m) const { return m * h_; }
  bool power_of_two() const { return (m_ & (m_ - 1)) == 0; }

  double wrap(double x) const {
    double y = x - length_ * std::floor(x / length_);
    if (y >= length_) y -= length_;
    if (y < 0.0) y = 0.0;
    return y;
  }
  int wrap_index(long long i) const {
    const long long r = i % m_;
    return static_cast<int>(r < 0 ? r + m_ : r);
  }

 private:
  int m_;
  double h_;
  double length_ = 0.0;
};

/// Cardinal cubic B-spline in units of the grid spacing; B(0) = 2/3.
inline double cubic_bspline(double s) {
  const double a = std::abs(s);
  if (a <= 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
  if (a <= 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

/// Weights of the four nodes base-1 .. base+2 around a coordinate, with
/// their derivatives with respect to the physical coordinate.
struct Stencil1d {
  long long base = 0;
  std::array<double, 4> w{};
  std::array<double, 4> dw{};

  int index(int k, const PeriodicGrid& grid) const { return grid.wrap_index(base - 1 + k); }
};

inline Stencil1d bspline_weights_1d(double x, const PeriodicGrid& grid) {
  const double s = grid.wrap(x) / grid.spacing();
  const double fl = std::floor(s);
  const double f = s - fl;
  const double g = 1.0 - f;
  Stencil1d st;
  st.base = static_cast<long long>(fl);
  st.w = {g * g * g / 6.0, 2.0 / 3.0 - f * f + 0.5 * f * f * f, 2.0 / 3.0 - g * g + 0.5 * g * g * g,
          f * f * f / 6.0};
  const double inv_h = 1.0 / grid.spacing();
  st.dw = {-0.5 * g * g * inv_h, (-2.0 * f + 1.5 * f * f) * inv_h, (2.0 * g - 1.5 * g * g) * inv_h,
           0.5 * f * f * inv_h};
  return st;
}

/// Tensor-product stencil of psi_mn(q) over the 4 x 4 nearest nodes.
struct Stencil2d {
  Stencil1d x;
  Stencil1d y;

  double weight(int a, int b) const { return x.w[a] * y.w[b]; }
  Vec2 gradient(int a, int b) const { return {x.dw[a] * y.w[b], x.w[a] * y.dw[b]}; }
  double sum() const {
    double s = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) s += weight(a, b);
    return s;
  }
};

inline Stencil2d shape_2d(const Vec2& q, const PeriodicGrid& grid) {
  return {bspline_weights_1d(q.x(), grid), bspline_weights_1d(q.y(), grid)};
}

/// Layer depth at the grid nodes, mu(m, n) at x_mn = (m h, n h).
class DepthField {
 public:
  explicit DepthField(int nodes, bool includes_background = false)
      : m_(nodes), values_(static_cast<std::size_t>(nodes) * nodes, 0.0), background_(includes_background) {}

  int nodes() const { return m_; }
  double& operator()(int m, int n) { return values_[static_cast<std::size_t>(m) * m_ + n]; }
  double operator()(int m, int n) const { return values_[static_cast<std::size_t>(m) * m_ + n]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  bool includes_background() const { return background_; }
  void set_includes_background(bool b) { background_ = b; }

  double sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }
  double dot(const DepthField& other) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * other.values_[i];
    return s;
  }
  DepthField& operator+=(const DepthField& other) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    background_ = background_ || other.background_;
    return *this;
  }

 private:
  int m_;
  std::vector<double> values_;
  bool background_;
};

/// mu_bar(tau, x, y); an empty function means no background.
using BackgroundField = std::function<double(double, double, double)>;

/// Time envelope g(tau) multiplying the potential energy.
class ModulationEnvelope {
 public:
  static ModulationEnvelope constant(double value = 1.0) {
    ModulationEnvelope e;
    e.constant_ = true;
    e.value_ = value;
    return e;
  }
  /// g(tau) = exp(-((tau - center) / width)^2).
  static ModulationEnvelope gaussian(double center, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("ModulationEnvelope: width must be positive");
    ModulationEnvelope e;
    e.constant_ = false;
    e.center_ = center;
    e.width_ = width;
    return e;
  }

  double operator()(double tau) const {
    if (constant_) return value_;
    const double s = (tau - center_) / width_;
    return std::exp(-s * s);
  }
  bool is_constant() const { return constant_; }
  double center() const { return center_; }
  double width() const { return width_; }

 private:
  bool constant_ = true;
  double value_ = 1.0;
  double center_ = 0.0;
  double width_ = 1.0;
};

inline DepthField sample_background(const BackgroundField& background, const PeriodicGrid& grid, double tau) {
  DepthField out(grid.nodes(), static_cast<bool>(background));
  if (!background) return out;
  for (int m = 0; m < grid.nodes(); ++m)
    for (int n = 0; n < grid.nodes(); ++n) out(m, n) = background(tau, grid.node(m), grid.node(n));
  return out;
}

/// Scatters mass * psi_mn(q_i) for every parcel of an interleaved position vector.
inline DepthField deposit_particles(const Vector& q, double mass, const PeriodicGrid& grid) {
  DepthField out(grid.nodes(), false);
  for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) {
    const Stencil2d st = shape_2d(q.segment<2>(i), grid);
    for (int a = 0; a < 4; ++a) {
      const int m = st.x.index(a, grid);
      for (int b = 0; b < 4; ++b) out(m, st.y.index(b, grid)) += mass * st.weight(a, b);
    }
  }
  return out;
}

/// mu_mn = sum_i m_i psi_mn(q_i) + mu_bar(tau, x_mn).
inline DepthField deposit(const Vector& q, double mass, const PeriodicGrid& grid,
                          const BackgroundField& background, double tau) {
  DepthField out = deposit_particles(q, mass, grid);
  if (background) out += sample_background(background, grid, tau);
  return out;
}

/// Applies (1 - alpha^2 Laplacian)^{-1} spectrally: the Fourier mode with
/// integer wavevector k is scaled by 1 / (1 + alpha^2 |k|^2).
inline DepthField smooth_field(const DepthField& field, double alpha) {
  const int M = field.nodes();
  if (M <= 0 || (M & (M - 1)) != 0) {
    throw std::invalid_argument("smooth_field: grid size " + std::to_string(M) + " is not a power of two");
  }
  if (alpha == 0.0) return field;

  using cplx = std::complex<double>;
  Eigen::FFT<double> fft;
  std::vector<cplx> grid(static_cast<std::size_t>(M) * M);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = field.values()[i];

  std::vector<cplx> line_in(M), line_out(M);
  auto transform = [&](bool forward) {
    for (int m = 0; m < M; ++m) {  // along n
      for (int n = 0; n < M; ++n) line_in[n] = grid[static_cast<std::size_t>(m) * M + n];
      if (forward) fft.fwd(line_out, line_in); else fft.inv(line_out, line_in);
      for (int n = 0; n < M; ++n) grid[static_cast<std::size_t>(m) * M + n] = line_out[n];
    }
    for (int n = 0; n < M; ++n) {  // along m
      for (int m = 0; m < M; ++m) line_in[m] = grid[static_cast<std::size_t>(m) * M + n];
      if (forward) fft.fwd(line_out, line_in); else fft.inv(line_out, line_in);
      for (int m = 0; m < M; ++m) grid[static_cast<std::size_t>(m) * M + n] = line_out[m];
    }
  };

  transform(true);
  const double a2 = alpha * alpha;
  auto wavenumber = [M](int i) { return static_cast<double>(i <= M / 2 ? i : i - M); };
  for (int m = 0; m < M; ++m) {
    const double kx = wavenumber(m);
    for (int n = 0; n < M; ++n) {
      const double ky = wavenumber(n);
      grid[static_cast<std::size_t>(m) * M + n] /= 1.0 + a2 * (kx * kx + ky * ky);
    }
  }
  transform(false);

  DepthField out(M, field.includes_background());
  for (std::size_t i = 0; i < grid.size(); ++i) out.values()[i] = grid[i].real();
  return out;
}

struct HpmModel {
  PeriodicGrid grid{32};
  BackgroundField background{};
  ModulationEnvelope envelope = ModulationEnvelope::constant(1.0);
  double alpha = 0.0;  ///< smoothing length; 0 disables smoothing

  DepthField smooth(const DepthField& f) const { return alpha == 0.0 ? f : smooth_field(f, alpha); }
};

/// PotentialField realization of the HPM coupling
///   V = g(tau) [ mu_p . S mu_p / 2 + mu_p . S mu_bar ],
/// mu_p the deposited particle depth and S the (symmetric) smoothing.
/// At S = I this is (g/2) sum_mn mu_p (mu_p + 2 mu_bar).
class HpmPotential {
 public:
  HpmPotential(HpmModel model, double mass) : model_(std::move(model)), mass_(mass) {
    if (!(mass > 0.0)) throw std::invalid_argument("HpmPotential: particle mass must be positive");
  }

  double value(const Vector& q, double tau) const {
    const double g = model_.envelope(tau);
    if (g == 0.0) return 0.0;
    const DepthField mu = deposit_particles(q, mass_, model_.grid);
    const DepthField smoothed = model_.smooth(mu);
    double v = 0.5 * mu.dot(smoothed);
    if (model_.background) {
      const DepthField mb = model_.smooth(sample_background(model_.background, model_.grid, tau));
      v += mu.dot(mb);
    }
    return g * v;
  }

  Vector gradient(const Vector& q, double tau) const {
    Vector grad = Vector::Zero(q.size());
    const double g = model_.envelope(tau);
    if (g == 0.0) return grad;
    const DepthField phi = model_.smooth(deposit(q, mass_, model_.grid, model_.background, tau));
    for (Eigen::Index i = 0; i + 1 < q.size(); i += 2) {
      const Stencil2d st = shape_2d(q.segment<2>(i), model_.grid);
      Vec2 acc = Vec2::Zero();
      for (int a = 0; a < 4; ++a) {
        const int m = st.x.index(a, model_.grid);
        for (int b = 0; b < 4; ++b) acc += st.gradient(a, b) * phi(m, st.y.index(b, model_.grid));
      }
      grad.segment<2>(i) = (g * mass_) * acc;
    }
    return grad;
  }

  bool time_dependent() const { return !model_.envelope.is_constant() || static_cast<bool>(model_.background); }

  const HpmModel& model() const { return model_; }
  double mass() const { return mass_; }

 private:
  HpmModel model_;
  double mass_;
};

/// Parcels of uniform mass delta; positions live in [0, 2 pi)^2.
struct ParticleEnsemble {
  PhaseState state;
  double mass = 1.0;

  void wrap(const PeriodicGrid& grid) {
    for (Eigen::Index i = 0; i < state.q.size(); ++i) state.q[i] = grid.wrap(state.q[i]);
  }
};

inline DepthField deposit(const ParticleEnsemble& particles, const PeriodicGrid& grid,
                          const BackgroundField& background) {
  return deposit(particles.state.q, particles.mass, grid, background, particles.state.tau);
}

/// sum_i |p_i|^2 / 2 + eps V.
inline double hpm_energy(const ParticleEnsemble& particles, const HpmModel& model, Epsilon eps) {
  return total_energy(particles.state, HpmPotential(model, particles.mass), eps);
}

/// Per-parcel force, the negative q-gradient of eps V.
inline Vector hpm_force(const ParticleEnsemble& particles, const HpmModel& model, Epsilon eps) {
  if (eps.value() == 0.0) return Vector::Zero(particles.state.q.size());
  return -eps.value() * HpmPotential(model, particles.mass).gradient(particles.state.q, particles.state.tau);
}

/// One Strang step of the HPM system, positions re-wrapped afterwards.
inline ParticleEnsemble hpm_step(const ParticleEnsemble& particles, const HpmModel& model,
                                 const StepperConfig& cfg) {
  ParticleEnsemble out{strang_step(particles.state, cfg, HpmPotential(model, particles.mass)), particles.mass};
  out.wrap(model.grid);
  return out;
}

}  // namespace geobalance::hpm
