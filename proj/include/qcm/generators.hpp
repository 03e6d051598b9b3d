// Builders for the Lindblad generators of collision models driven by a
// monitored ancilla: collision channels, bipartite and tripartite Liouvillians,
// their no-jump/jump splits, and the measurement (reset) map.
#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "qcm/linalg.hpp"

namespace qcm {

// System-side collision operators; sum_a V_a^dagger V_a must be the identity.
struct KrausSet {
  std::vector<ComplexMatrix> ops;

  int dim() const { return ops.empty() ? 0 : static_cast<int>(ops[0].rows()); }

  void validate(double tol = 1e-10) const {
    if (ops.empty()) throw config_error("kraus set: empty");
    const int d = dim();
    ComplexMatrix sum = ComplexMatrix::Zero(d, d);
    for (const auto& v : ops) {
      if (v.rows() != d || v.cols() != d)
        throw config_error("kraus set: operators must be square and equal-sized");
      sum += v.adjoint() * v;
    }
    const double dev = (sum - ComplexMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (dev > tol) {
      std::ostringstream os;
      os << "kraus set: completeness violated by " << dev;
      throw config_error(os.str());
    }
  }
};

// Monitored ancilla: waiting happens in level a0; the detector channel moves
// a0 -> l at rate rates[l] while applying the Kraus set to the system. The
// free generator may move population between the other levels and back into
// a0, and may drive a0 coherently, but must not drain a0 dissipatively
// (that transition is reserved for the detector).
struct AncillaSpec {
  int dim = 0;
  int a0 = 0;
  std::vector<double> rates;   // size dim; rates[a0] == 0
  ComplexMatrix free_gen;      // Liouville matrix, dim^2 x dim^2; empty means zero

  double gamma() const {
    double g = 0;
    for (double r : rates) g += r;
    return g;
  }

  ComplexMatrix reset_state() const {
    ComplexMatrix r = ComplexMatrix::Zero(dim, dim);
    const double g = gamma();
    for (int l = 0; l < dim; ++l) r(l, l) = rates[l] / g;
    return r;
  }

  ComplexMatrix free_or_zero() const {
    if (free_gen.size() == 0) return ComplexMatrix::Zero(dim * dim, dim * dim);
    return free_gen;
  }

  void validate() const {
    if (dim < 2) throw config_error("ancilla: need at least two levels");
    if (a0 < 0 || a0 >= dim) throw config_error("ancilla: reset level out of range");
    if (static_cast<int>(rates.size()) != dim)
      throw config_error("ancilla: need one rate per level");
    for (double r : rates)
      if (r < 0 || !std::isfinite(r)) throw config_error("ancilla: rates must be finite and nonnegative");
    if (rates[a0] != 0) throw config_error("ancilla: the wait level cannot be its own target");
    if (!(gamma() > 0)) throw config_error("ancilla: total detection rate must be positive");
    if (free_gen.size() != 0) {
      if (free_gen.rows() != dim * dim || free_gen.cols() != dim * dim)
        throw config_error("ancilla: free generator has wrong Liouville dimension");
      // A generator must annihilate the trace: summing the diagonal rows of
      // each Liouville column has to give zero.
      for (int j = 0; j < dim * dim; ++j) {
        Complex col_sum = 0;
        for (int k = 0; k < dim; ++k) col_sum += free_gen(k + k * dim, j);
        if (std::abs(col_sum) > 1e-10)
          throw config_error("ancilla: free generator does not annihilate the trace");
      }
      // Dissipative population transfer out of a0 would bypass the detector:
      // the Liouville entry feeding population l <- a0 must vanish for l != a0.
      for (int l = 0; l < dim; ++l) {
        if (l == a0) continue;
        const Complex v = free_gen(l + l * dim, a0 + a0 * dim);
        if (std::abs(v) > 1e-12)
          throw config_error("ancilla: free generator drains the wait level dissipatively");
      }
    }
  }
};

inline ComplexMatrix hamiltonian_term(const ComplexMatrix& h, double tol_herm = 1e-10) {
  if (h.rows() != h.cols()) throw config_error("hamiltonian_term: matrix not square");
  const double dev = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (dev > tol_herm) {
    std::ostringstream os;
    os << "hamiltonian_term: matrix not hermitian (deviation " << dev << ")";
    throw config_error(os.str());
  }
  return Complex(0, -1) * (left_mul_superop(h) - right_mul_superop(h));
}

// Doubled-commutator dissipator rate*(2 V rho V^dag - V^dag V rho - rho V^dag V).
// Note the factor 2 on the sandwich: a standard-normalized channel of physical
// rate g is lindblad_term(V, g/2).
inline ComplexMatrix lindblad_term(const ComplexMatrix& v, double rate) {
  if (v.rows() != v.cols()) throw config_error("lindblad_term: matrix not square");
  if (rate < 0) throw config_error("lindblad_term: rate must be nonnegative");
  const ComplexMatrix vv = v.adjoint() * v;
  return rate * (2.0 * sandwich_superop(v, v) - left_mul_superop(vv) - right_mul_superop(vv));
}

// Collision channel rho -> sum_a V_a rho V_a^dagger.
inline SuperOp build_collision_channel(const KrausSet& kraus) {
  kraus.validate();
  const int d = kraus.dim();
  ComplexMatrix m = ComplexMatrix::Zero(d * d, d * d);
  for (const auto& v : kraus.ops) m += sandwich_superop(v, v);
  return {m, Factorization{d}};
}

// Full ancilla generator: free part plus the detector decay into the reset state.
inline SuperOp ancilla_generator(const AncillaSpec& spec) {
  spec.validate();
  ComplexMatrix m = spec.free_or_zero();
  for (int l = 0; l < spec.dim; ++l) {
    if (spec.rates[l] == 0) continue;
    m += lindblad_term(basis_transfer(spec.dim, l, spec.a0), spec.rates[l] / 2.0);
  }
  return {m, Factorization{spec.dim}};
}

// Ancilla generator conditioned on no detection: free part minus the
// anticommutator half of the detector channel.
inline SuperOp ancilla_nojump(const AncillaSpec& spec) {
  spec.validate();
  const ComplexMatrix p0 = basis_projector(spec.dim, spec.a0);
  ComplexMatrix m = spec.free_or_zero();
  m -= 0.5 * spec.gamma() * (left_mul_superop(p0) + right_mul_superop(p0));
  return {m, Factorization{spec.dim}};
}

// Detection part alone: rho -> gamma <a0|rho|a0> reset_state.
inline SuperOp ancilla_jump(const AncillaSpec& spec) {
  spec.validate();
  ComplexMatrix m = ComplexMatrix::Zero(spec.dim * spec.dim, spec.dim * spec.dim);
  for (int l = 0; l < spec.dim; ++l) {
    if (spec.rates[l] == 0) continue;
    const ComplexMatrix a = basis_transfer(spec.dim, l, spec.a0);
    m += spec.rates[l] * sandwich_superop(a, a);
  }
  return {m, Factorization{spec.dim}};
}

// Composite generator split into conditioned evolution and detection events.
struct GeneratorBundle {
  SuperOp total;
  SuperOp no_jump;
  SuperOp jump;
  Factorization fact;
  int ancilla_factor = 1;
  int a0 = 0;
  double gamma = 0;
  ComplexMatrix reset_ancilla;

  // Post-detection state: jump applied and renormalized.
  DensityMatrix measurement(const DensityMatrix& rho) const {
    ComplexMatrix m = devectorize(ComplexVector(jump.mat * vectorize(rho.mat)));
    const Complex tr = m.trace();
    if (!(std::abs(tr) > 1e-300))
      throw numeric_error("measurement: detection probability vanishes (dark state)");
    m /= tr;
    return {m, fact};
  }
};

// Bipartite system (x) ancilla generator. The detector channel applies the
// Kraus set to the system while dropping the ancilla from a0 into the reset
// mixture; l_s is an optional free system Liouvillian (empty means zero).
inline GeneratorBundle build_bipartite(const KrausSet& kraus, const AncillaSpec& ancilla,
                                       const ComplexMatrix& l_s = {}) {
  kraus.validate();
  ancilla.validate();
  const int ds = kraus.dim();
  const int da = ancilla.dim;
  const Factorization fact{ds, da};
  if (l_s.size() != 0 && (l_s.rows() != ds * ds || l_s.cols() != ds * ds))
    throw config_error("build_bipartite: system Liouvillian has wrong dimension");

  ComplexMatrix drift = ComplexMatrix::Zero(ds * ds * da * da, ds * ds * da * da);
  if (l_s.size() != 0) drift += embed_superop(l_s, fact, 0);
  drift += embed_superop(ancilla.free_or_zero(), fact, 1);

  GeneratorBundle b;
  b.fact = fact;
  b.ancilla_factor = 1;
  b.a0 = ancilla.a0;
  b.gamma = ancilla.gamma();
  b.reset_ancilla = ancilla.reset_state();

  // Detector dissipators at half rate: the doubled commutator form then
  // drains the wait level at exactly gamma.
  ComplexMatrix total = drift;
  for (const auto& v : kraus.ops)
    for (int l = 0; l < da; ++l) {
      if (ancilla.rates[l] == 0) continue;
      total += lindblad_term(kron(v, basis_transfer(da, l, ancilla.a0)), ancilla.rates[l] / 2.0);
    }

  const ComplexMatrix p0_full = kron(ComplexMatrix::Identity(ds, ds), basis_projector(da, ancilla.a0));
  ComplexMatrix no_jump = drift;
  no_jump -= 0.5 * b.gamma * (left_mul_superop(p0_full) + right_mul_superop(p0_full));

  b.total = {total, fact};
  b.no_jump = {no_jump, fact};
  b.jump = {ComplexMatrix(total - no_jump), fact};
  return b;
}

// Tripartite system (x) ancilla (x) buffer generator. Detection additionally
// resets the buffer to |b0><b0| (transfer operators from every buffer level),
// and l_sb is a joint Liouvillian on system and buffer given on the ordering
// (system, buffer).
inline GeneratorBundle build_tripartite(const KrausSet& kraus, const AncillaSpec& ancilla,
                                        const ComplexMatrix& l_sb, int dim_b, int b0) {
  kraus.validate();
  ancilla.validate();
  if (dim_b < 1) throw config_error("build_tripartite: buffer dimension < 1");
  if (b0 < 0 || b0 >= dim_b) throw config_error("build_tripartite: buffer reset level out of range");
  const int ds = kraus.dim();
  const int da = ancilla.dim;
  const Factorization fact{ds, da, dim_b};
  const int dsb = ds * dim_b;
  if (l_sb.size() != 0 && (l_sb.rows() != dsb * dsb || l_sb.cols() != dsb * dsb))
    throw config_error("build_tripartite: joint system+buffer Liouvillian has wrong dimension");

  const int d = fact.total();
  ComplexMatrix drift = ComplexMatrix::Zero(d * d, d * d);
  if (l_sb.size() != 0) drift += embed_superop(l_sb, fact, std::vector<int>{0, 2});
  drift += embed_superop(ancilla.free_or_zero(), fact, 1);

  GeneratorBundle b;
  b.fact = fact;
  b.ancilla_factor = 1;
  b.a0 = ancilla.a0;
  b.gamma = ancilla.gamma();
  b.reset_ancilla = ancilla.reset_state();

  ComplexMatrix total = drift;
  for (const auto& v : kraus.ops)
    for (int l = 0; l < da; ++l) {
      if (ancilla.rates[l] == 0) continue;
      for (int m = 0; m < dim_b; ++m)
        total += lindblad_term(
            kron(kron(v, basis_transfer(da, l, ancilla.a0)), basis_transfer(dim_b, b0, m)),
            ancilla.rates[l] / 2.0);
    }

  const ComplexMatrix p0_full =
      kron(kron(ComplexMatrix::Identity(ds, ds), basis_projector(da, ancilla.a0)),
           ComplexMatrix::Identity(dim_b, dim_b));
  ComplexMatrix no_jump = drift;
  no_jump -= 0.5 * b.gamma * (left_mul_superop(p0_full) + right_mul_superop(p0_full));

  b.total = {total, fact};
  b.no_jump = {no_jump, fact};
  b.jump = {ComplexMatrix(total - no_jump), fact};
  return b;
}

}  // namespace qcm
