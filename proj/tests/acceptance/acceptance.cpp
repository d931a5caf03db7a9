// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "../support.hpp"
#include "geobalance/check.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace geobalance;
using geobalance::harness::min_order;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) passed = false;
    detail << (ok ? "" : "[violated] ") << what << "; ";
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome drift() {
  Outcome o;
  experiments::DriftOptions opts;
  opts.workers = std::max(1u, std::thread::hardware_concurrency());
  const auto r = experiments::run_drift_experiment(opts);
  double worst_bound = 0.0;
  double worst_energy = 0.0;
  for (const auto& run : r.runs) {
    const double eps = run.report.eps;
    worst_bound = std::max(worst_bound, run.report.delta_K / (8.0 * std::exp(-0.92 / eps)));
    if (eps <= 1.0 / 6.0 + 1e-12) worst_energy = std::max(worst_energy, run.report.delta_E / run.report.delta_K);
  }
  o.require(r.runs.size() == 12, "runs = " + std::to_string(r.runs.size()));
  o.require(worst_bound <= 1.0, "max dK / (8 exp(-0.92/eps)) = " + fmt(worst_bound));
  o.require(r.fit && r.fit->c >= 0.70 && r.fit->c <= 1.15,
            "fit C = " + fmt(r.fit ? r.fit->C : NAN) + ", c = " + fmt(r.fit ? r.fit->c : NAN));
  o.require(worst_energy <= 0.01, "max dE/dK for eps <= 1/6 = " + fmt(worst_energy));
  return o;
}

Outcome normal_form_closed_forms() {
  Outcome o;
  std::mt19937_64 rng(11);
  const ModelPotential model;
  const LinearPotential linear;
  double vbar = 0.0, lin = 0.0, dpf = 0.0, hom = 0.0, vf = 0.0, vbf = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Vector q = diagnostics::random_vector(rng, 2, -1.5, 1.5);
    const Vector p = diagnostics::random_vector(rng, 2, -0.8, 0.8);
    const PhaseState rest(Vector::Zero(2), q);
    vbar = std::max(vbar, std::abs(averaged_potential(rest, model) - model.value(q)));
    lin = std::max(lin, std::abs(averaged_potential(PhaseState(p, q), linear) - (q[0] + p[1])));
    const PhaseFunctional f1 = [&](const PhaseState& s) { return generator_F1(s, model); };
    const PhaseFunctional v = [&](const PhaseState& s) { return model.value(s.q); };
    const PhaseFunctional vb = [&](const PhaseState& s) { return averaged_potential(s, model); };
    dpf = std::max(dpf, (phase_gradient(f1, rest).first + model.gradient(q)).lpNorm<Eigen::Infinity>());
    hom = std::max(hom, homological_residual(PhaseState(p, q), model));
    vf = std::max(vf, std::abs(poisson_bracket(v, f1, rest) + model.gradient(q).squaredNorm()));
    vbf = std::max(vbf, std::abs(poisson_bracket(vb, f1, rest)));
  }
  o.require(vbar <= 1e-12, "|Vbar(0,q) - V(q)| = " + fmt(vbar));
  o.require(lin <= 1e-10, "linear closed form err = " + fmt(lin));
  o.require(dpf <= 1e-6, "|d_p F1 + grad V| = " + fmt(dpf));
  o.require(hom <= 1e-5, "homological residual = " + fmt(hom));
  o.require(vf <= 1e-5, "|{V,F1} + |grad V|^2| = " + fmt(vf));
  o.require(vbf <= 1e-5, "|{Vbar,F1}| = " + fmt(vbf));
  return o;
}

Outcome integrator_suite() {
  Outcome o;
  const ModelPotential model;
  const PhaseState z0(Vec2(0.2, -0.1), Vec2(0.4, -0.7));
  const double id = (diagnostics::pack(flow_K(z0, two_pi)) - diagnostics::pack(z0)).lpNorm<Eigen::Infinity>();
  o.require(id <= 1e-12, "|flow_K(2 pi) - id| = " + fmt(id));
  const StepperConfig cfg{0.05, Scheme::strang, Epsilon(0.5)};
  const double sd =
      diagnostics::symplectic_defect([&](const PhaseState& s) { return strang_step(s, cfg, model); }, z0);
  o.require(sd <= 1e-7, "Strang symplectic defect = " + fmt(sd));
  const Epsilon eps(0.5);
  const double strang = min_order(harness::full_scheme_errors(Scheme::strang, z0, eps, model, 2.0, 0.1, 3));
  const double rk4 = min_order(harness::full_scheme_errors(Scheme::rk4, z0, eps, model, 2.0, 0.1, 3));
  const Vector q0 = Vec2(0.4, -0.7);
  const double geo = min_order(harness::slow_scheme_errors(Scheme::slow_geostrophic, q0, Epsilon(1.0), model, 2.0, 0.1, 3));
  const double lsg = min_order(harness::slow_scheme_errors(Scheme::slow_lsg, q0, Epsilon(0.5), model, 2.0, 0.1, 3));
  o.require(strang >= 1.9, "strang order = " + fmt(strang));
  o.require(geo >= 1.9 && lsg >= 1.9, "slow_integrate orders = " + fmt(geo) + ", " + fmt(lsg));
  o.require(rk4 >= 3.9, "rk4 order = " + fmt(rk4));
  return o;
}

Outcome hierarchy() {
  Outcome o;
  std::vector<double> geo, lsg;
  for (double eps : {0.1, 0.05, 0.025}) {
    const auto g = experiments::hierarchy_gaps(eps);
    geo.push_back(g.geostrophic);
    lsg.push_back(g.lsg);
  }
  const double og = min_order(geo), ol = min_order(lsg);
  o.require(og >= 1.7, "geostrophic gap order = " + fmt(og));
  o.require(ol >= 2.5, "lsg gap order = " + fmt(ol));
  return o;
}

Outcome balance_persistence() {
  Outcome o;
  std::vector<double> sup;
  for (double eps : {0.1, 0.05, 0.025}) sup.push_back(experiments::ageostrophic_sup(eps, 10.0));
  for (std::size_t i = 0; i + 1 < sup.size(); ++i) {
    const double ratio = sup[i] / sup[i + 1];
    o.require(ratio >= 3.0 && ratio <= 5.0, "sup|p_ag| halving ratio = " + fmt(ratio));
  }
  return o;
}

Outcome hpm_suite() {
  Outcome o;
  std::mt19937_64 rng(5);
  const hpm::PeriodicGrid grid(32);
  double pu = 0.0;
  for (int i = 0; i < 10000; ++i) pu = std::max(pu, std::abs(hpm::shape_2d(diagnostics::random_vector(rng, 2, -20.0, 20.0), grid).sum() - 1.0));
  o.require(pu <= 1e-14, "partition of unity err = " + fmt(pu));
  const Vector q = diagnostics::random_vector(rng, 2000, 0.0, two_pi);
  const double mass = 0.013;
  const double mc = std::abs(hpm::deposit_particles(q, mass, grid).sum() - 1000 * mass) / (1000 * mass);
  o.require(mc <= 1e-12, "relative mass error = " + fmt(mc));

  hpm::HpmModel model{hpm::PeriodicGrid(16)};
  model.background = [](double t, double x, double y) { return 0.4 * std::sin(x + 0.3 * t) * std::cos(2.0 * y); };
  model.alpha = 0.3;
  const Epsilon eps(0.2);
  double ferr = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    hpm::ParticleEnsemble ens{PhaseState(diagnostics::random_vector(rng, 6, -0.5, 0.5),
                                         diagnostics::random_vector(rng, 6, 0.0, two_pi), 0.7),
                              0.9};
    const Vector f = hpm::hpm_force(ens, model, eps);
    Vector fd(f.size());
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      hpm::ParticleEnsemble a = ens, b = ens;
      a.state.q[k] += h;
      b.state.q[k] -= h;
      fd[k] = -(hpm::hpm_energy(a, model, eps) - hpm::hpm_energy(b, model, eps)) / (2 * h);
    }
    ferr = std::max(ferr, (f - fd).lpNorm<Eigen::Infinity>() / std::max(f.lpNorm<Eigen::Infinity>(), 1e-12));
  }
  o.require(ferr <= 1e-6, "force vs -FD energy gradient = " + fmt(ferr));
  const StepperConfig cfg{0.05, Scheme::strang, eps};
  const hpm::HpmPotential field(model, 1.0);
  Vector p(4), q2(4);
  p << 0.1, -0.2, 0.15, 0.05;
  q2 << 3.0, 3.1, 3.4, 2.7;
  const double sd = diagnostics::symplectic_defect(
      [&](const PhaseState& s) { return strang_step(s, cfg, field); }, PhaseState(p, q2, 0.2));
  o.require(sd <= 1e-6, "hpm_step symplectic defect = " + fmt(sd));
  return o;
}

Outcome exchange() {
  Outcome o;
  const auto r = experiments::run_two_particle_exchange({});
  const double k0 = r.kinetic_total_initial;
  const double ret = std::abs(r.kinetic_total_final - k0) / k0;
  o.require(ret <= 1e-3, "|K(T) - K(0)| / K(0) = " + fmt(ret));
  o.require(r.max_individual_change >= 0.1 * k0, "max |dK_i| / K(0) = " + fmt(r.max_individual_change / k0));
  experiments::ExchangeOptions control;
  control.coupling = false;
  control.stride = 1;
  const auto c = experiments::run_two_particle_exchange(control);
  double drift = 0.0;
  for (const Sample& s : c.record.samples) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      drift = std::max(drift, std::abs(experiments::particle_kinetic(s, i) -
                                       experiments::particle_kinetic(c.record.front(), i)));
    }
  }
  o.require(drift <= 1e-12, "g = 0 control max |dK_i| = " + fmt(drift));
  return o;
}

Outcome shear() {
  Outcome o;
  const auto r = experiments::run_shear_instability({});
  o.require(r.max_relative_energy_error <= 1e-4, "max relative energy error = " + fmt(r.max_relative_energy_error));
  o.require(r.kinetic_ag_max <= 3.0 * r.kinetic_ag_baseline,
            "K_ag max / first-period max = " + fmt(r.kinetic_ag_max / r.kinetic_ag_baseline));
  o.require(r.trend.level, "K_ag fitted change " + fmt(r.trend.secular_change) + " vs 2 sigma " +
                               fmt(2.0 * r.trend.residual_std));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"drift experiment", drift},
      {"normal-form closed forms", normal_form_closed_forms},
      {"integrator suite", integrator_suite},
      {"slow-model hierarchy", hierarchy},
      {"balance persistence", balance_persistence},
      {"HPM suite", hpm_suite},
      {"two-particle exchange", exchange},
      {"shear experiment (desk scale)", shear},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string line;
    bool ok = false;
    try {
      const Outcome out = fn();
      ok = out.passed;
      line = out.detail.str();
    } catch (const std::exception& e) {
      line = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << line << "(" << fmt(secs) << " s)" << std::endl;
    failures += ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
