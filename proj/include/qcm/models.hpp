// Built-in collision models (dephasing with a coherently or incoherently
// driven ancilla, an Erlang clock chain, depolarizing collisions, and two
// tripartite variants with a buffer qubit) plus closed-form reference
// expressions for their waiting-time densities, memory kernels and coherence
// decay.
#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qcm/analysis.hpp"
#include "qcm/generators.hpp"
#include "qcm/linalg.hpp"

namespace qcm {

inline ComplexMatrix xplus_state() {
  ComplexMatrix m(2, 2);
  m << 0.5, 0.5, 0.5, 0.5;
  return m;
}

// Named single-system initial states; basis index 0 is the upper level.
inline ComplexMatrix named_system_state(const std::string& name, int ds) {
  if (name == "mixed") return ComplexMatrix::Identity(ds, ds) / double(ds);
  if (ds != 2) throw config_error("initial state '" + name + "' requires a qubit system");
  if (name == "xplus") return xplus_state();
  if (name == "yplus") {
    ComplexMatrix m(2, 2);
    m << Complex(0.5, 0), Complex(0, -0.5), Complex(0, 0.5), Complex(0.5, 0);
    return m;
  }
  if (name == "plus") return basis_projector(2, 0);
  if (name == "minus") return basis_projector(2, 1);
  throw config_error("unknown initial state '" + name +
                     "' (expected xplus, yplus, plus, minus or mixed)");
}

struct ModelSpec {
  std::string name;
  KrausSet kraus;
  AncillaSpec ancilla;
  ComplexMatrix l_s;   // free system Liouvillian; empty means zero
  ComplexMatrix l_sb;  // tripartite only: joint Liouvillian on (system, buffer)
  int dim_b = 0;
  int b0 = 0;
  bool tripartite = false;
  GeneratorBundle bundle;
  DensityMatrix initial;         // full composite initial state
  ComplexMatrix initial_system;  // its system factor
  std::map<std::string, double> params;

  int system_dim() const { return kraus.dim(); }

  SuperOp system_free() const {
    const int ds = system_dim();
    if (l_s.size() == 0) return {ComplexMatrix::Zero(ds * ds, ds * ds), Factorization{ds}};
    return {l_s, Factorization{ds}};
  }

  // C_s = collision channel minus identity (generator increment per collision).
  SuperOp collision_superop() const {
    SuperOp ch = build_collision_channel(kraus);
    ch.mat -= ComplexMatrix::Identity(ch.dim(), ch.dim());
    return ch;
  }

  SuperOp joint_sb() const {
    if (!tripartite) throw config_error("joint_sb: model has no buffer");
    return {l_sb, Factorization{system_dim(), dim_b}};
  }
};

namespace detail {

inline void finalize_model(ModelSpec& m, const ComplexMatrix& rho0s) {
  require_valid_state(rho0s, 1e-9, 1e-9, 1e-9, "system initial state");
  m.initial_system = rho0s;
  if (m.tripartite) {
    m.bundle = build_tripartite(m.kraus, m.ancilla, m.l_sb, m.dim_b, m.b0);
    m.initial = {kron(kron(rho0s, m.ancilla.reset_state()), basis_projector(m.dim_b, m.b0)),
                 m.bundle.fact};
  } else {
    m.bundle = build_bipartite(m.kraus, m.ancilla, m.l_s);
    m.initial = {kron(rho0s, m.ancilla.reset_state()), m.bundle.fact};
  }
}

inline void require_positive(const std::string& model, const std::string& key, double v) {
  if (!(v > 0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << model << ": parameter " << key << " must be positive and finite, got " << v;
    throw config_error(os.str());
  }
}

}  // namespace detail

// Dephasing collisions (sigma_z) timed by a two-level ancilla that is driven
// coherently at Rabi rate delta from the reset level back to the monitored one.
inline ModelSpec dephasing_coherent(double gamma, double delta,
                                    const ComplexMatrix& rho0s = xplus_state()) {
  detail::require_positive("dephasing_coherent", "gamma", gamma);
  if (!(std::isfinite(delta) && delta >= 0))
    throw config_error("dephasing_coherent: delta must be finite and nonnegative");
  ModelSpec m;
  m.name = "dephasing_coherent";
  m.params = {{"gamma", gamma}, {"delta", delta}};
  m.kraus.ops = {qubit::pauli_z()};
  m.ancilla.dim = 2;
  m.ancilla.a0 = 0;
  m.ancilla.rates = {0.0, gamma};
  m.ancilla.free_gen = hamiltonian_term(ComplexMatrix((delta / 2.0) * qubit::pauli_x()));
  detail::finalize_model(m, rho0s);
  return m;
}

// Same collisions, but the ancilla is repumped incoherently at rate beta.
inline ModelSpec dephasing_incoherent(double gamma, double beta,
                                      const ComplexMatrix& rho0s = xplus_state()) {
  detail::require_positive("dephasing_incoherent", "gamma", gamma);
  detail::require_positive("dephasing_incoherent", "beta", beta);
  ModelSpec m;
  m.name = "dephasing_incoherent";
  m.params = {{"gamma", gamma}, {"beta", beta}};
  m.kraus.ops = {qubit::pauli_z()};
  m.ancilla.dim = 2;
  m.ancilla.a0 = 0;
  m.ancilla.rates = {0.0, gamma};
  m.ancilla.free_gen = lindblad_term(qubit::raise(), beta / 2.0);
  detail::finalize_model(m, rho0s);
  return m;
}

// Collisions clocked by a cyclic chain: detection dumps the ancilla onto the
// first chain level, m further hops at rate gamma return it to the monitored
// level, making the waiting time Erlang of shape m+1. The collision operators
// default to sigma_z dephasing but any complete Kraus set may be supplied.
inline ModelSpec erlang_chain(double gamma, int m_stages, const KrausSet& kraus = {},
                              const ComplexMatrix& rho0s = xplus_state()) {
  detail::require_positive("erlang_chain", "gamma", gamma);
  if (m_stages < 1)
    throw config_error("erlang_chain: need at least one chain stage (the reset level "
                       "cannot coincide with the monitored level)");
  ModelSpec m;
  m.name = "erlang_chain";
  m.params = {{"gamma", gamma}, {"m", double(m_stages)}};
  m.kraus = kraus.ops.empty() ? KrausSet{{qubit::pauli_z()}} : kraus;
  const int dim = m_stages + 1;
  m.ancilla.dim = dim;
  m.ancilla.a0 = 0;
  m.ancilla.rates.assign(dim, 0.0);
  m.ancilla.rates[1] = gamma;
  ComplexMatrix free_gen = ComplexMatrix::Zero(dim * dim, dim * dim);
  for (int l = 1; l < dim; ++l) {
    const int next = (l + 1) % dim;  // last stage feeds the monitored level
    free_gen += lindblad_term(basis_transfer(dim, next, l), gamma / 2.0);
  }
  m.ancilla.free_gen = free_gen;
  detail::finalize_model(m, rho0s);
  return m;
}

// Random sigma_x / sigma_y collisions with the coherently driven ancilla.
inline ModelSpec depolarizing(double gamma, double delta, double p,
                              const ComplexMatrix& rho0s = xplus_state()) {
  detail::require_positive("depolarizing", "gamma", gamma);
  if (!(std::isfinite(delta) && delta >= 0))
    throw config_error("depolarizing: delta must be finite and nonnegative");
  if (!(p > 0 && p < 1)) throw config_error("depolarizing: p must lie strictly inside (0,1)");
  ModelSpec m;
  m.name = "depolarizing";
  m.params = {{"gamma", gamma}, {"delta", delta}, {"p", p}};
  m.kraus.ops = {ComplexMatrix(std::sqrt(p) * qubit::pauli_x()),
                 ComplexMatrix(std::sqrt(1 - p) * qubit::pauli_y())};
  m.ancilla.dim = 2;
  m.ancilla.a0 = 0;
  m.ancilla.rates = {0.0, gamma};
  m.ancilla.free_gen = hamiltonian_term(ComplexMatrix((delta / 2.0) * qubit::pauli_x()));
  detail::finalize_model(m, rho0s);
  return m;
}

namespace detail {

inline ModelSpec tripartite_base(const std::string& name, double gamma, double lambda) {
  require_positive(name, "gamma", gamma);
  if (!std::isfinite(lambda)) throw config_error(name + ": lambda must be finite");
  ModelSpec m;
  m.name = name;
  m.kraus.ops = {qubit::pauli_x()};
  m.ancilla.dim = 2;
  m.ancilla.a0 = 0;
  m.ancilla.rates = {0.0, gamma};
  m.tripartite = true;
  m.dim_b = 2;
  m.b0 = 0;
  // Joint system-buffer coupling (lambda/2) sigma_z (x) sigma_x on (system, buffer).
  m.l_sb = hamiltonian_term(ComplexMatrix((lambda / 2.0) * kron(qubit::pauli_z(), qubit::pauli_x())));
  return m;
}

}  // namespace detail

// sigma_x collisions whose intercollision drift couples the system to a buffer
// qubit; the ancilla clock is driven coherently.
inline ModelSpec tripartite_dephasing(double gamma, double delta, double lambda,
                                      const ComplexMatrix& rho0s = xplus_state()) {
  ModelSpec m = detail::tripartite_base("tripartite_dephasing", gamma, lambda);
  if (!(std::isfinite(lambda) && lambda >= 0))
    throw config_error("tripartite_dephasing: lambda must be finite and nonnegative");
  if (!(std::isfinite(delta) && delta >= 0))
    throw config_error("tripartite_dephasing: delta must be finite and nonnegative");
  m.params = {{"gamma", gamma}, {"delta", delta}, {"lambda", lambda}};
  m.ancilla.free_gen = hamiltonian_term(ComplexMatrix((delta / 2.0) * qubit::pauli_x()));
  detail::finalize_model(m, rho0s);
  return m;
}

// Same geometry with the incoherently repumped ancilla clock.
inline ModelSpec tripartite_classical(double gamma, double beta, double lambda,
                                      const ComplexMatrix& rho0s = xplus_state()) {
  ModelSpec m = detail::tripartite_base("tripartite_classical", gamma, lambda);
  detail::require_positive("tripartite_classical", "beta", beta);
  m.params = {{"gamma", gamma}, {"beta", beta}, {"lambda", lambda}};
  m.ancilla.free_gen = lindblad_term(qubit::raise(), beta / 2.0);
  detail::finalize_model(m, rho0s);
  return m;
}

inline std::vector<std::string> model_names() {
  return {"dephasing_coherent", "dephasing_incoherent", "erlang_chain",
          "depolarizing",       "tripartite_dephasing", "tripartite_classical"};
}

// Factory from a parameter map (CLI/config path). Unknown names and missing
// parameters are configuration errors that name the offender.
inline ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params,
                            const ComplexMatrix& rho0s) {
  auto need = [&](const char* key) -> double {
    auto it = params.find(key);
    if (it == params.end())
      throw config_error("model " + name + ": missing parameter model." + key);
    return it->second;
  };
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& kv : params) {
      bool ok = false;
      for (const char* k : keys)
        if (kv.first == k) ok = true;
      if (!ok)
        throw config_error("model " + name + ": unknown parameter model." + kv.first);
    }
  };
  if (name == "dephasing_coherent") {
    allow({"gamma", "delta"});
    return dephasing_coherent(need("gamma"), need("delta"), rho0s);
  }
  if (name == "dephasing_incoherent") {
    allow({"gamma", "beta"});
    return dephasing_incoherent(need("gamma"), need("beta"), rho0s);
  }
  if (name == "erlang_chain") {
    allow({"gamma", "m"});
    const double md = need("m");
    const int mi = static_cast<int>(std::llround(md));
    if (std::abs(md - mi) > 1e-9) throw config_error("erlang_chain: m must be an integer");
    return erlang_chain(need("gamma"), mi, {}, rho0s);
  }
  if (name == "depolarizing") {
    allow({"gamma", "delta", "p"});
    return depolarizing(need("gamma"), need("delta"), need("p"), rho0s);
  }
  if (name == "tripartite_dephasing") {
    allow({"gamma", "delta", "lambda"});
    return tripartite_dephasing(need("gamma"), need("delta"), need("lambda"), rho0s);
  }
  if (name == "tripartite_classical") {
    allow({"gamma", "beta", "lambda"});
    return tripartite_classical(need("gamma"), need("beta"), need("lambda"), rho0s);
  }
  std::ostringstream os;
  os << "unknown model '" << name << "' (expected one of:";
  for (const auto& n : model_names()) os << ' ' << n;
  os << ')';
  throw config_error(os.str());
}

// Default observable set: populations and coherences of the system marginal.
inline ObservableSet default_observables(const ModelSpec& m) {
  ObservableSet obs;
  const int ds = m.system_dim();
  for (int i = 0; i < ds; ++i) {
    std::ostringstream label;
    label << "pop" << i;
    obs.push_back(element_observable({0}, i, i, label.str()));
  }
  for (int i = 0; i < ds; ++i)
    for (int j = i + 1; j < ds; ++j) {
      std::ostringstream label;
      label << "coh" << i << j;
      obs.push_back(element_observable({0}, i, j, label.str()));
    }
  return obs;
}

// Closed-form reference expressions. All of them are entire in the branch
// variable: square roots of negative arguments go through complex sinhc/cosh,
// with a series fallback near zero.
namespace closed_form {

namespace detail {

inline Complex sinhc(Complex z) {
  if (std::abs(z) < 1e-4) {
    const Complex z2 = z * z;
    return 1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0));
  }
  return std::sinh(z) / z;
}

}  // namespace detail

// Waiting-time density of the coherently driven ancilla:
// w(t) = (gamma delta^2 / 4) e^{-gamma t/2} (t sinhc(q t))^2,
// q = sqrt(gamma^2 - 4 delta^2)/4.
inline double coherent_wtd(double t, double gamma, double delta) {
  const Complex q = std::sqrt(Complex(gamma * gamma - 4 * delta * delta, 0)) / 4.0;
  const Complex s = t * detail::sinhc(q * t);
  return (gamma * delta * delta / 4.0) * std::exp(-gamma * t / 2.0) * std::norm(s);
}

// Its Laplace transform: w(u) = (gamma delta^2/2) / ((u + gamma/2)(u(u+gamma) + delta^2)).
inline double coherent_wtd_laplace(double u, double gamma, double delta) {
  return (gamma * delta * delta / 2.0) /
         ((u + gamma / 2.0) * (u * (u + gamma) + delta * delta));
}

// Memory kernel of the same clock:
// k(t) = (gamma delta^2 / 2) e^{-3 gamma t/4} t sinhc(p t),
// p = sqrt(gamma^2 - 16 delta^2)/4.
inline double coherent_kernel(double t, double gamma, double delta) {
  const Complex p = std::sqrt(Complex(gamma * gamma - 16 * delta * delta, 0)) / 4.0;
  const Complex v = (gamma * delta * delta / 2.0) * std::exp(-3.0 * gamma * t / 4.0) * t *
                    detail::sinhc(p * t);
  return v.real();
}

// Its Laplace transform: k(u) = (gamma delta^2/2) / (u^2 + (3/2) gamma u + gamma^2/2 + delta^2).
inline double coherent_kernel_laplace(double u, double gamma, double delta) {
  return (gamma * delta * delta / 2.0) /
         (u * u + 1.5 * gamma * u + 0.5 * gamma * gamma + delta * delta);
}

// Coherence decay under coherently clocked dephasing, as a ratio c(t)/c(0):
// e^{-gamma t} 2 delta^2/(gamma^2+2 delta^2)
//  + e^{-gamma t/4} [ gamma^2/(gamma^2+2 delta^2) cosh(phi t)
//                     + gamma(gamma^2+8 delta^2)/(4(gamma^2+2 delta^2)) t sinhc(phi t) ],
// phi = sqrt((gamma/4)^2 - delta^2).
inline double coherent_coherence_ratio(double t, double gamma, double delta) {
  const double g2 = gamma * gamma, d2 = delta * delta;
  const double denom = g2 + 2 * d2;
  const Complex phi = std::sqrt(Complex(gamma * gamma / 16.0 - d2, 0));
  const Complex osc = (g2 / denom) * std::cosh(phi * t) +
                      (gamma * (g2 + 8 * d2) / (4.0 * denom)) * t * detail::sinhc(phi * t);
  const Complex v = std::exp(-gamma * t) * (2 * d2 / denom) +
                    std::exp(-gamma * t / 4.0) * osc;
  return v.real();
}

// Waiting-time density of the incoherently repumped clock: a two-stage
// exponential race, w(t) = gamma beta (e^{-beta t} - e^{-gamma t})/(gamma - beta).
inline double incoherent_wtd(double t, double gamma, double beta) {
  if (std::abs(gamma - beta) < 1e-9 * std::max(gamma, beta)) {
    const double r = 0.5 * (gamma + beta);
    return r * r * t * std::exp(-r * t);
  }
  return gamma * beta * (std::exp(-beta * t) - std::exp(-gamma * t)) / (gamma - beta);
}

inline double incoherent_wtd_laplace(double u, double gamma, double beta) {
  return gamma * beta / ((u + gamma) * (u + beta));
}

inline double incoherent_kernel_laplace(double u, double gamma, double beta) {
  return gamma * beta / (u + gamma + beta);
}

// Coherence decay under incoherently clocked dephasing (ratio c(t)/c(0)),
// inverse transform of c(u)/c0 = (u + gamma + beta)/(u^2 + (gamma+beta) u + 2 gamma beta):
// e^{-(gamma+beta)t/2} [ cosh(psi t) + ((gamma+beta)/2) t sinhc(psi t) ],
// psi = sqrt((gamma+beta)^2 - 8 gamma beta)/2.
inline double incoherent_coherence_ratio(double t, double gamma, double beta) {
  const double a = 0.5 * (gamma + beta);
  const Complex psi =
      std::sqrt(Complex((gamma + beta) * (gamma + beta) - 8 * gamma * beta, 0)) / 2.0;
  const Complex v = std::exp(-a * t) * (std::cosh(psi * t) + a * t * detail::sinhc(psi * t));
  return v.real();
}

// Erlang clock of shape m+1: w(u) = (gamma/(u+gamma))^{m+1}.
inline double erlang_wtd_laplace(double u, double gamma, int m_stages) {
  return std::pow(gamma / (u + gamma), m_stages + 1);
}

// Time-domain Erlang density: w(t) = gamma (gamma t)^m exp(-gamma t) / m!.
inline double erlang_wtd(double t, double gamma, int m_stages) {
  double fact = 1;
  for (int i = 2; i <= m_stages; ++i) fact *= i;
  return gamma * std::pow(gamma * t, m_stages) * std::exp(-gamma * t) / fact;
}

// Dephasing factor applied by the buffer between collisions.
inline double cosine_decoherence(double t, double lambda) { return std::cos(lambda * t); }

}  // namespace closed_form

}  // namespace qcm
