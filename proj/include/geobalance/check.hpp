#pragma once

// Self-test of the library invariants, run by `geobalance check`.

#include "geobalance/core.hpp"
#include "geobalance/diagnostics.hpp"
#include "geobalance/flows.hpp"
#include "geobalance/hpm.hpp"
#include "geobalance/integrators.hpp"
#include "geobalance/normalform.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace geobalance::check {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
};

namespace detail {

inline CheckResult below(std::string name, double measured, double tolerance) {
  return {std::move(name), measured <= tolerance, measured, tolerance};
}

inline hpm::HpmModel probe_model(bool smoothing) {
  hpm::HpmModel model{hpm::PeriodicGrid(16)};
  model.background = [](double tau, double x, double y) { return 0.4 * std::sin(x + 0.3 * tau) * std::cos(y); };
  model.envelope = hpm::ModulationEnvelope::gaussian(1.0, 2.0);
  if (smoothing) model.alpha = 0.2015;
  return model;
}

}  // namespace detail

inline std::vector<CheckResult> run_invariant_checks(std::uint64_t seed = 0) {
  using namespace diagnostics;
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  const ModelPotential model;

  {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, gradient_error(model, random_vector(rng, 2, -2.0, 2.0)));
    out.push_back(detail::below("model potential gradient vs central differences", worst, 1e-6));
  }
  {
    const hpm::HpmPotential field(detail::probe_model(true), 0.7);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      worst = std::max(worst, gradient_error(field, random_vector(rng, 6, 0.0, two_pi), 0.8));
    }
    out.push_back(detail::below("HPM potential gradient vs central differences", worst, 1e-6));
  }
  {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Vector p = random_vector(rng, 4, -1.0, 1.0);
      const double t = random_vector(rng, 1, 0.0, two_pi)[0];
      worst = std::max(worst, std::abs(kinetic_energy(flow_K(PhaseState(p, Vector::Zero(4)), t).p) - kinetic_energy(p)));
    }
    out.push_back(detail::below("kinetic energy invariant under inertial rotation", worst, 1e-12));
  }
  {
    const PhaseState z(random_vector(rng, 2, -1.0, 1.0), random_vector(rng, 2, -1.0, 1.0));
    const double d = (pack(flow_K(z, two_pi)) - pack(z)).lpNorm<Eigen::Infinity>();
    out.push_back(detail::below("flow_K(2 pi) is the identity", d, 1e-12));
    const double g =
        (pack(flow_K(flow_K(z, 0.7), 1.9)) - pack(flow_K(z, 2.6))).lpNorm<Eigen::Infinity>();
    out.push_back(detail::below("flow_K group property", g, 1e-12));
  }
  {
    const StepperConfig cfg{0.01, Scheme::strang, Epsilon(0.3)};
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      const PhaseState z(random_vector(rng, 4, -0.5, 0.5), random_vector(rng, 4, -1.5, 1.5));
      worst = std::max(worst, symplectic_defect([&](const PhaseState& s) { return strang_step(s, cfg, model); }, z));
    }
    out.push_back(detail::below("Strang step symplecticity", worst, 1e-7));
  }
  {
    const StepperConfig fwd{0.01, Scheme::strang, Epsilon(0.3)};
    const StepperConfig back{-0.01, Scheme::strang, Epsilon(0.3)};
    const PhaseState z(random_vector(rng, 2, -0.5, 0.5), random_vector(rng, 2, -1.5, 1.5), 0.0);
    const PhaseState r = strang_step(strang_step(z, fwd, model), back, model);
    out.push_back(detail::below("Strang step time reversibility",
                                (pack(r) - pack(z)).lpNorm<Eigen::Infinity>(), 1e-12));
  }
  {
    const QuadratureSpec quad(128);
    const PhaseState z(random_vector(rng, 2, -0.6, 0.6), random_vector(rng, 2, -1.0, 1.0));
    const double vbar = averaged_potential(z, model, quad);
    double worst = 0.0;
    for (double t : {0.4, 1.7, 3.3, 5.9}) worst = std::max(worst, std::abs(averaged_potential(flow_K(z, t), model, quad) - vbar));
    out.push_back(detail::below("averaged potential invariant under the fast flow", worst, 1e-8));
    const double dv = std::abs(averaged_potential(z, model, QuadratureSpec(64)) - vbar);
    const double df = std::abs(generator_F1(z, model, QuadratureSpec(64)) - generator_F1(z, model, quad));
    out.push_back(detail::below("quadrature self-convergence 64 -> 128 nodes", std::max(dv, df), 1e-10));
  }
  {
    const PhaseState z(Vector::Zero(2), random_vector(rng, 2, -1.0, 1.0));
    const PhaseFunctional v = [&](const PhaseState& s) { return model.value(s.q); };
    const PhaseFunctional vbar = [&](const PhaseState& s) { return averaged_potential(s, model); };
    const PhaseFunctional f1 = [&](const PhaseState& s) { return generator_F1(s, model); };
    const double gv2 = model.gradient(z.q).squaredNorm();
    out.push_back(detail::below("{V, F1} = -|grad V|^2 at p = 0", std::abs(poisson_bracket(v, f1, z) + gv2), 1e-5));
    out.push_back(detail::below("{Vbar, F1} = 0 at p = 0", std::abs(poisson_bracket(vbar, f1, z)), 1e-5));
    const PhaseState zp(random_vector(rng, 2, -0.5, 0.5), random_vector(rng, 2, -1.0, 1.0));
    out.push_back(detail::below("homological residual", homological_residual(zp, model), 1e-5));
  }
  {
    const hpm::PeriodicGrid grid(32);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      worst = std::max(worst, std::abs(hpm::shape_2d(random_vector(rng, 2, -10.0, 10.0), grid).sum() - 1.0));
    }
    out.push_back(detail::below("B-spline partition of unity", worst, 1e-14));
    const Vector q = random_vector(rng, 200, 0.0, two_pi);
    const double mass = 0.37;
    const double total = mass * 100;
    const double err = std::abs(hpm::deposit_particles(q, mass, grid).sum() - total) / total;
    out.push_back(detail::below("deposition mass conservation", err, 1e-12));
  }
  {
    const hpm::HpmModel m = detail::probe_model(true);
    const StepperConfig cfg{0.05, Scheme::strang, Epsilon(0.2)};
    Vector q(4), p(4);
    q << 2.0, 2.5, 2.6, 2.9;
    p << 0.2, -0.1, 0.05, 0.15;
    const hpm::HpmPotential field(m, 1.0);
    const double d = symplectic_defect([&](const PhaseState& s) { return strang_step(s, cfg, field); },
                                       PhaseState(p, q, 0.3));
    out.push_back(detail::below("HPM step symplecticity", d, 1e-6));
  }
  return out;
}

}  // namespace geobalance::check
