// Time evolution and memory analysis: master-equation propagation, the
// ancilla-side memory kernel and waiting-time density (time domain and
// Laplace domain), the renewal consistency check, the non-Markovian
// convolution solver, and the intercollision propagator with its kernel.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "qcm/generators.hpp"
#include "qcm/linalg.hpp"
#include "qcm/timeseries.hpp"

namespace qcm {

// Cached Liouville matrices for a monitored ancilla.
struct AncillaOps {
  int dim = 0;
  int a0 = 0;
  double gamma = 0;
  ComplexMatrix generator;  // free + detector decay
  ComplexMatrix no_jump;    // free - (gamma/2){P_a0, .}
  ComplexMatrix jump;       // detector sandwich alone
  ComplexVector reset;      // vectorized reset state
};

inline AncillaOps make_ancilla_ops(const AncillaSpec& spec) {
  AncillaOps ops;
  ops.dim = spec.dim;
  ops.a0 = spec.a0;
  ops.gamma = spec.gamma();
  ops.generator = ancilla_generator(spec).mat;
  ops.no_jump = ancilla_nojump(spec).mat;
  ops.jump = ancilla_jump(spec).mat;
  ops.reset = vectorize(spec.reset_state());
  return ops;
}

// Propagate rho0 under exp(t L) on a uniform grid; one exponential, then
// repeated application. Optionally validates every state.
inline std::vector<DensityMatrix> propagate_master(const SuperOp& l, const DensityMatrix& rho0,
                                                   const TimeGrid& grid, bool validate = true) {
  if (rho0.dim() != l.hilbert_dim())
    throw config_error("propagate_master: state and generator dimensions differ");
  if (validate) require_valid_state(rho0.mat, 1e-9, 1e-9, 1e-9, "initial state");
  std::vector<DensityMatrix> out;
  out.reserve(grid.size());
  out.push_back({rho0.mat, l.fact});
  if (grid.n_steps == 0) return out;
  const ComplexMatrix step = matrix_exp(grid.h * l.mat);
  ComplexVector v = vectorize(rho0.mat);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    v = step * v;
    ComplexMatrix m = devectorize(v);
    if (validate) {
      std::ostringstream ctx;
      ctx << "master propagation, t=" << grid.t(i);
      require_valid_state(m, 1e-9, 1e-9, 1e-9, ctx.str());
    }
    out.push_back({std::move(m), l.fact});
  }
  return out;
}

namespace detail {

// Stepwise gamma <a0| exp(t G) x0 |a0> on the grid, real part (the imaginary
// part of a population is roundoff and is asserted small).
inline std::vector<double> ancilla_population_series(const ComplexMatrix& g,
                                                     const ComplexVector& x0, int dim, int a0,
                                                     double scale, const TimeGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  ComplexMatrix step;
  if (grid.n_steps > 0) step = matrix_exp(grid.h * g);
  ComplexVector v = x0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) v = step * v;
    const Complex e = v(a0 + a0 * dim);
    if (std::abs(e.imag()) > 1e-9 * (1.0 + std::abs(e.real())))
      throw numeric_error("ancilla population acquired an imaginary part");
    out.push_back(scale * e.real());
  }
  return out;
}

}  // namespace detail

// Memory kernel k(t) = gamma <a0| exp(t G_a) G_a[reset] |a0> on the grid
// (channel "k"), where G_a is the full ancilla generator.
inline TimeSeries memory_kernel(const AncillaSpec& spec, const TimeGrid& grid) {
  const AncillaOps ops = make_ancilla_ops(spec);
  TimeSeries ts(grid);
  ts.add_channel("k", detail::ancilla_population_series(
                          ops.generator, ComplexVector(ops.generator * ops.reset), ops.dim,
                          ops.a0, ops.gamma, grid));
  return ts;
}

// Primitive of the kernel: p(t) = gamma <a0| exp(t G_a) reset |a0>, so that
// k(t) = p'(t). Used as an independent cross-route for the kernel.
inline TimeSeries memory_kernel_primitive(const AncillaSpec& spec, const TimeGrid& grid) {
  const AncillaOps ops = make_ancilla_ops(spec);
  TimeSeries ts(grid);
  ts.add_channel("p", detail::ancilla_population_series(ops.generator, ops.reset, ops.dim,
                                                        ops.a0, ops.gamma, grid));
  return ts;
}

// Waiting-time density w(t) = gamma <a0| exp(t D_a) reset |a0> (channel "w")
// together with the no-detection survival probability (channel "P0").
inline TimeSeries waiting_time_density(const AncillaSpec& spec, const TimeGrid& grid) {
  const AncillaOps ops = make_ancilla_ops(spec);
  TimeSeries ts(grid);
  ts.add_channel("w", detail::ancilla_population_series(ops.no_jump, ops.reset, ops.dim, ops.a0,
                                                        ops.gamma, grid));

  std::vector<double> surv;
  surv.reserve(grid.size());
  ComplexMatrix step;
  if (grid.n_steps > 0) step = matrix_exp(grid.h * ops.no_jump);
  ComplexVector v = ops.reset;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) v = step * v;
    surv.push_back(devectorize(v).trace().real());
  }
  ts.add_channel("P0", std::move(surv));
  return ts;
}

// Laplace transform of the waiting-time density via one resolvent solve:
// w(u) = gamma <a0| (u - D_a)^{-1} reset |a0>.
inline double laplace_wtd(const AncillaSpec& spec, double u) {
  const AncillaOps ops = make_ancilla_ops(spec);
  const ComplexMatrix x = resolvent_apply(ops.no_jump, Complex(u, 0), ops.reset);
  return ops.gamma * x(ops.a0 + ops.a0 * ops.dim, 0).real();
}

// Laplace transform of the memory kernel: k(u) = u gamma <a0| (u - G_a)^{-1} reset |a0>.
inline double laplace_kernel(const AncillaSpec& spec, double u) {
  const AncillaOps ops = make_ancilla_ops(spec);
  const ComplexMatrix x = resolvent_apply(ops.generator, Complex(u, 0), ops.reset);
  return u * ops.gamma * x(ops.a0 + ops.a0 * ops.dim, 0).real();
}

struct RenewalReport {
  std::vector<double> u_values;
  std::vector<double> residuals;  // |k(u)/u - w(u)/(1 - w(u))|
  double max_residual = 0;
};

// The kernel and the waiting-time density describe the same renewal process:
// k(u)/u must equal w(u)/(1 - w(u)).
inline RenewalReport verify_renewal_relation(const AncillaSpec& spec,
                                             const std::vector<double>& u_values) {
  RenewalReport rep;
  rep.u_values = u_values;
  for (double u : u_values) {
    if (!(u > 0)) throw config_error("verify_renewal_relation: need u > 0");
    const double w = laplace_wtd(spec, u);
    const double k = laplace_kernel(spec, u);
    const double resid = std::abs(k / u - w / (1.0 - w));
    rep.residuals.push_back(resid);
    rep.max_residual = std::max(rep.max_residual, resid);
  }
  return rep;
}

// Implicit-trapezoid solver for the convolution equation
//   rho'(t) = L_s rho(t) + int_0^t k(t-s) C_s exp((t-s) L_s) rho(s) ds
// on the kernel's grid. The memory integrand is discretized by the composite
// trapezoid rule and the implicit step is solved exactly (one LU up front).
// Works column-wise, so `x0` may carry several initial vectors at once.
inline std::vector<ComplexMatrix> solve_nonmarkovian_columns(const ComplexMatrix& l_s,
                                                             const ComplexMatrix& c_s,
                                                             const TimeSeries& kernel,
                                                             const std::string& channel,
                                                             const ComplexMatrix& x0) {
  const int n = static_cast<int>(x0.rows());
  if (c_s.rows() != n || c_s.cols() != n)
    throw config_error("solve_nonmarkovian: collision superoperator dimension mismatch");
  const bool has_ls = l_s.size() != 0;
  if (has_ls && (l_s.rows() != n || l_s.cols() != n))
    throw config_error("solve_nonmarkovian: free superoperator dimension mismatch");
  const TimeGrid& grid = kernel.grid;
  const std::vector<double>& k = kernel.channel(channel);
  const double h = grid.h;

  std::vector<ComplexMatrix> states;
  states.reserve(grid.size());
  states.push_back(x0);
  if (grid.n_steps == 0) return states;

  // W_j = k_j C_s exp(j h L_s); with L_s = 0 only the scalars k_j matter.
  std::vector<ComplexMatrix> w_mats;
  ComplexMatrix e_ls;
  if (has_ls) {
    e_ls = matrix_exp(h * l_s);
    w_mats.resize(grid.size());
    ComplexMatrix prop = ComplexMatrix::Identity(n, n);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      w_mats[j] = k[j] * (c_s * prop);
      if (j + 1 < grid.size()) prop = e_ls * prop;
    }
  }
  auto apply_w = [&](std::size_t j, const ComplexMatrix& x) -> ComplexMatrix {
    if (has_ls) return w_mats[j] * x;
    return k[j] * (c_s * x);
  };

  // A = I - (h/2) L_s - (h^2/4) W_0; factor once.
  ComplexMatrix a = ComplexMatrix::Identity(n, n);
  if (has_ls) a -= (h / 2.0) * l_s;
  a -= (h * h / 4.0) * (has_ls ? w_mats[0] : ComplexMatrix(k[0] * c_s));
  Eigen::PartialPivLU<ComplexMatrix> lu(a);

  const int cols = static_cast<int>(x0.cols());
  ComplexMatrix mem = ComplexMatrix::Zero(n, cols);  // I_n, trapezoid memory integral
  for (std::size_t step = 1; step < grid.size(); ++step) {
    const ComplexMatrix& prev = states[step - 1];
    // Known part of I_{step}: h [ sum_{j=1}^{step-1} W_j rho_{step-j} + (1/2) W_step rho_0 ].
    ComplexMatrix known = 0.5 * apply_w(step, states[0]);
    for (std::size_t j = 1; j < step; ++j) known += apply_w(j, states[step - j]);
    known *= h;

    ComplexMatrix rhs = prev + (h / 2.0) * (mem + known);
    if (has_ls) rhs += (h / 2.0) * (l_s * prev);
    ComplexMatrix next = lu.solve(rhs);
    mem = known + (h / 2.0) * apply_w(0, next);
    states.push_back(std::move(next));
  }
  return states;
}

// Reduced non-Markovian evolution of a density matrix from the memory kernel.
inline std::vector<DensityMatrix> solve_nonmarkovian(const SuperOp& l_s, const SuperOp& c_s,
                                                     const TimeSeries& kernel,
                                                     const DensityMatrix& rho0,
                                                     const std::string& channel = "k") {
  if (rho0.dim() != c_s.hilbert_dim())
    throw config_error("solve_nonmarkovian: state dimension mismatch");
  const auto cols =
      solve_nonmarkovian_columns(l_s.mat, c_s.mat, kernel, channel, vectorize(rho0.mat));
  std::vector<DensityMatrix> out;
  out.reserve(cols.size());
  for (const auto& v : cols) out.push_back({devectorize(ComplexVector(v)), c_s.fact});
  return out;
}

// The full solution map on the grid (propagators of the convolution equation),
// obtained by evolving the identity column by column.
inline std::vector<SuperOp> nonmarkovian_solution_map(const SuperOp& l_s, const SuperOp& c_s,
                                                      const TimeSeries& kernel,
                                                      const std::string& channel = "k") {
  const int n = c_s.dim();
  const auto cols = solve_nonmarkovian_columns(l_s.mat, c_s.mat, kernel, channel,
                                               ComplexMatrix::Identity(n, n));
  std::vector<SuperOp> out;
  out.reserve(cols.size());
  for (const auto& m : cols) out.push_back({m, c_s.fact});
  return out;
}

namespace detail {

// Rectangular maps between the system and the system+buffer pair for a joint
// Liouvillian with factor ordering (system, buffer).
struct BufferMaps {
  ComplexMatrix embed;  // rho_s -> rho_s (x) |b0><b0|
  ComplexMatrix proj;   // partial trace over the buffer
  int ds = 0;
};

inline BufferMaps buffer_maps(const SuperOp& l_sb, int b0) {
  if (l_sb.fact.factors() != 2)
    throw config_error("intercollision propagator: expected a (system, buffer) factorization");
  const int ds = l_sb.fact.dims[0];
  const int db = l_sb.fact.dims[1];
  if (b0 < 0 || b0 >= db) throw config_error("intercollision propagator: buffer level out of range");
  BufferMaps maps;
  maps.ds = ds;
  std::vector<ComplexMatrix> fixed(2);
  fixed[1] = basis_projector(db, b0);
  maps.embed = product_embed_matrix(l_sb.fact, 0, fixed);
  maps.proj = ptrace_superop_matrix(l_sb.fact, {0});
  return maps;
}

}  // namespace detail

// Intercollision propagator G(t): embed the system beside the buffer reset
// state, evolve jointly, trace the buffer back out.
inline SuperOp intercollision_propagator(const SuperOp& l_sb, int b0, double t) {
  const auto maps = detail::buffer_maps(l_sb, b0);
  ComplexMatrix g = maps.proj * matrix_exp(t * l_sb.mat) * maps.embed;
  return {std::move(g), Factorization{maps.ds}};
}

// G(t) on every grid point, sharing one matrix exponential.
inline std::vector<SuperOp> intercollision_series(const SuperOp& l_sb, int b0,
                                                  const TimeGrid& grid) {
  const auto maps = detail::buffer_maps(l_sb, b0);
  std::vector<SuperOp> out;
  out.reserve(grid.size());
  ComplexMatrix step;
  if (grid.n_steps > 0) step = matrix_exp(grid.h * l_sb.mat);
  ComplexMatrix cols = maps.embed;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) cols = step * cols;
    out.push_back({ComplexMatrix(maps.proj * cols), Factorization{maps.ds}});
  }
  return out;
}

// Laplace-domain generator K(u) of the intercollision propagator, defined by
// Ghat(u) (u + K(u)) = 1:
//   K(u) = -Ghat(u)^{-1} Proj (u - L_sb)^{-1} L_sb Embed.
inline SuperOp gkernel_laplace(const SuperOp& l_sb, int b0, double u) {
  const auto maps = detail::buffer_maps(l_sb, b0);
  const ComplexMatrix ghat =
      maps.proj * resolvent_apply(l_sb.mat, Complex(u, 0), maps.embed);
  const ComplexMatrix hhat =
      maps.proj * resolvent_apply(l_sb.mat, Complex(u, 0), ComplexMatrix(l_sb.mat * maps.embed));
  Eigen::PartialPivLU<ComplexMatrix> lu(ghat);
  if (!(lu.rcond() > 1e-14))
    throw numeric_error("gkernel_laplace: Ghat(u) is numerically singular");
  ComplexMatrix k = -lu.solve(hhat);
  return {std::move(k), Factorization{maps.ds}};
}

// Defining identity of the pair (Ghat, K): residual of Ghat(u)(u + K(u)) - 1.
inline double verify_gkernel(const SuperOp& l_sb, int b0, const std::vector<double>& u_values) {
  const auto maps = detail::buffer_maps(l_sb, b0);
  double worst = 0;
  for (double u : u_values) {
    const ComplexMatrix ghat =
        maps.proj * resolvent_apply(l_sb.mat, Complex(u, 0), maps.embed);
    const ComplexMatrix k = gkernel_laplace(l_sb, b0, u).mat;
    const int n = static_cast<int>(k.rows());
    const ComplexMatrix resid =
        ghat * (u * ComplexMatrix::Identity(n, n) + k) - ComplexMatrix::Identity(n, n);
    worst = std::max(worst, resid.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace qcm
