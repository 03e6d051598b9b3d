// Dense complex linear algebra for small multipartite open systems: Kronecker
// products, column-stacking vectorization, partial traces, matrix exponentials,
// resolvents, Choi matrices and density-matrix validation.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <complex>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qcm/errors.hpp"

namespace qcm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;

// Tensor-factor dimensions, slowest factor first; composite index
// (x_0,...,x_{n-1}) -> sum_j x_j * prod(dims[j+1..]).
struct Factorization {
  std::vector<int> dims;

  Factorization() = default;
  Factorization(std::initializer_list<int> d) : dims(d) { check(); }
  explicit Factorization(std::vector<int> d) : dims(std::move(d)) { check(); }

  void check() const {
    if (dims.empty()) throw config_error("factorization: no factors");
    for (int d : dims)
      if (d < 1) throw config_error("factorization: factor dimension < 1");
  }
  int factors() const { return static_cast<int>(dims.size()); }
  int total() const {
    return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
  }
  // stride of factor j in the composite index
  int stride(int j) const {
    int s = 1;
    for (int k = j + 1; k < factors(); ++k) s *= dims[k];
    return s;
  }
};

struct DensityMatrix {
  ComplexMatrix mat;
  Factorization fact;

  int dim() const { return static_cast<int>(mat.rows()); }
};

// Liouville-space matrix of a linear map on operators over `fact`,
// acting on column-stacked vectorizations.
struct SuperOp {
  ComplexMatrix mat;
  Factorization fact;

  int hilbert_dim() const { return fact.total(); }
  int dim() const { return static_cast<int>(mat.rows()); }
};

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Column stacking: vec(rho)[r + c*d] = rho(r, c). Eigen stores column-major,
// so this is a straight copy of the underlying buffer.
inline ComplexVector vectorize(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix devectorize(const ComplexVector& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(v.size()))));
  if (d * d != v.size()) throw config_error("devectorize: length is not a square");
  return Eigen::Map<const ComplexMatrix>(v.data(), d, d);
}

// Liouville matrix of rho -> A rho B; with column stacking this is B^T (x) A.
inline ComplexMatrix sandwich_matrix(const ComplexMatrix& a, const ComplexMatrix& b) {
  return kron(b.transpose(), a);
}

// Liouville matrix of rho -> A rho B^dagger; with column stacking this is
// conj(B) (x) A.
inline ComplexMatrix sandwich_superop(const ComplexMatrix& a, const ComplexMatrix& b) {
  return kron(b.conjugate(), a);
}

inline ComplexMatrix left_mul_superop(const ComplexMatrix& a) {
  return kron(ComplexMatrix::Identity(a.cols(), a.cols()), a);
}

inline ComplexMatrix right_mul_superop(const ComplexMatrix& b) {
  return kron(b.transpose(), ComplexMatrix::Identity(b.rows(), b.rows()));
}

namespace detail {

inline void split_index(int idx, const Factorization& f, std::vector<int>& out) {
  out.resize(f.dims.size());
  for (int j = f.factors() - 1; j >= 0; --j) {
    out[j] = idx % f.dims[j];
    idx /= f.dims[j];
  }
}

inline int join_index(const std::vector<int>& parts, const Factorization& f) {
  int idx = 0;
  for (int j = 0; j < f.factors(); ++j) idx = idx * f.dims[j] + parts[j];
  return idx;
}

}  // namespace detail

inline Factorization sub_factorization(const Factorization& f, const std::vector<int>& keep) {
  std::vector<int> d;
  for (int j : keep) d.push_back(f.dims.at(j));
  return Factorization(d);
}

// Trace out every factor not listed in `keep` (keep is strictly increasing).
inline DensityMatrix partial_trace(const ComplexMatrix& rho, const Factorization& fact,
                                   const std::vector<int>& keep) {
  const int n = fact.factors();
  for (size_t i = 0; i + 1 < keep.size(); ++i)
    if (keep[i] >= keep[i + 1]) throw config_error("partial_trace: keep list not increasing");
  for (int j : keep)
    if (j < 0 || j >= n) throw config_error("partial_trace: factor index out of range");
  if (rho.rows() != fact.total() || rho.cols() != fact.total())
    throw config_error("partial_trace: dimension mismatch with factorization");

  const Factorization kept = sub_factorization(fact, keep);
  ComplexMatrix out = ComplexMatrix::Zero(kept.total(), kept.total());
  std::vector<int> ri, ci, rk(keep.size()), ck(keep.size());
  const int d = fact.total();
  for (int r = 0; r < d; ++r) {
    detail::split_index(r, fact, ri);
    for (int c = 0; c < d; ++c) {
      detail::split_index(c, fact, ci);
      bool diag = true;
      size_t pos = 0;
      for (int j = 0; j < n; ++j) {
        const bool is_kept = pos < keep.size() && keep[pos] == j;
        if (is_kept) {
          rk[pos] = ri[j];
          ck[pos] = ci[j];
          ++pos;
        } else if (ri[j] != ci[j]) {
          diag = false;
          break;
        }
      }
      if (diag) out(detail::join_index(rk, kept), detail::join_index(ck, kept)) += rho(r, c);
    }
  }
  return {out, kept};
}

// Lift a superoperator acting on one factor to the full space (identity on the rest).
inline ComplexMatrix embed_superop(const ComplexMatrix& local, const Factorization& fact,
                                   int factor) {
  const int n = fact.factors();
  if (factor < 0 || factor >= n) throw config_error("embed_superop: factor out of range");
  const int df = fact.dims[factor];
  if (local.rows() != df * df || local.cols() != df * df)
    throw config_error("embed_superop: local superoperator size mismatch");
  const int d = fact.total();
  ComplexMatrix out = ComplexMatrix::Zero(d * d, d * d);
  std::vector<int> ri, ci;
  for (int r = 0; r < d; ++r) {
    detail::split_index(r, fact, ri);
    for (int c = 0; c < d; ++c) {
      detail::split_index(c, fact, ci);
      const int col = r + c * d;
      const int lr = ri[factor], lc = ci[factor];
      for (int tr = 0; tr < df; ++tr) {
        for (int tc = 0; tc < df; ++tc) {
          const Complex v = local(tr + tc * df, lr + lc * df);
          if (v == Complex(0, 0)) continue;
          const int row = r + (tr - lr) * fact.stride(factor) +
                          (c + (tc - lc) * fact.stride(factor)) * d;
          out(row, col) += v;
        }
      }
    }
  }
  return out;
}

// Lift a superoperator acting jointly on the listed factors (in listed order,
// duplicates forbidden, factors need not be adjacent) to the full space.
inline ComplexMatrix embed_superop(const ComplexMatrix& local, const Factorization& fact,
                                   const std::vector<int>& factors) {
  const int n = fact.factors();
  if (factors.empty()) throw config_error("embed_superop: empty factor list");
  std::vector<char> seen(n, 0);
  for (int f : factors) {
    if (f < 0 || f >= n || seen[f]) throw config_error("embed_superop: bad factor list");
    seen[f] = 1;
  }
  const Factorization lf = sub_factorization(fact, factors);
  const int dl = lf.total();
  if (local.rows() != dl * dl || local.cols() != dl * dl)
    throw config_error("embed_superop: local superoperator size mismatch");
  const int d = fact.total();
  ComplexMatrix out = ComplexMatrix::Zero(d * d, d * d);
  std::vector<int> ri, ci, tri, tci;
  std::vector<int> lri(factors.size()), lci(factors.size());
  for (int r = 0; r < d; ++r) {
    detail::split_index(r, fact, ri);
    for (int c = 0; c < d; ++c) {
      detail::split_index(c, fact, ci);
      const int col = r + c * d;
      for (size_t k = 0; k < factors.size(); ++k) {
        lri[k] = ri[factors[k]];
        lci[k] = ci[factors[k]];
      }
      const int lr = detail::join_index(lri, lf);
      const int lc = detail::join_index(lci, lf);
      for (int tr = 0; tr < dl; ++tr) {
        for (int tc = 0; tc < dl; ++tc) {
          const Complex v = local(tr + tc * dl, lr + lc * dl);
          if (v == Complex(0, 0)) continue;
          detail::split_index(tr, lf, tri);
          detail::split_index(tc, lf, tci);
          int rnew = r, cnew = c;
          for (size_t k = 0; k < factors.size(); ++k) {
            rnew += (tri[k] - lri[k]) * fact.stride(factors[k]);
            cnew += (tci[k] - lci[k]) * fact.stride(factors[k]);
          }
          out(rnew + cnew * d, col) += v;
        }
      }
    }
  }
  return out;
}

// Rectangular Liouville matrix of the partial trace onto the kept factors.
inline ComplexMatrix ptrace_superop_matrix(const Factorization& fact, const std::vector<int>& keep) {
  const Factorization kept = sub_factorization(fact, keep);
  const int d = fact.total(), dk = kept.total();
  ComplexMatrix out = ComplexMatrix::Zero(dk * dk, d * d);
  std::vector<int> ri, ci, rk(keep.size()), ck(keep.size());
  for (int r = 0; r < d; ++r) {
    detail::split_index(r, fact, ri);
    for (int c = 0; c < d; ++c) {
      detail::split_index(c, fact, ci);
      bool diag = true;
      size_t pos = 0;
      for (int j = 0; j < fact.factors(); ++j) {
        const bool is_kept = pos < keep.size() && keep[pos] == j;
        if (is_kept) {
          rk[pos] = ri[j];
          ck[pos] = ci[j];
          ++pos;
        } else if (ri[j] != ci[j]) {
          diag = false;
          break;
        }
      }
      if (!diag) continue;
      out(detail::join_index(rk, kept) + detail::join_index(ck, kept) * dk, r + c * d) += 1.0;
    }
  }
  return out;
}

// Rectangular Liouville matrix of rho_f -> (fixed_0 (x) ... rho_f ... (x) fixed_{n-1}).
inline ComplexMatrix product_embed_matrix(const Factorization& fact, int factor,
                                          const std::vector<ComplexMatrix>& fixed) {
  const int n = fact.factors();
  if (static_cast<int>(fixed.size()) != n)
    throw config_error("product_embed_matrix: need one fixed slot per factor");
  const int df = fact.dims[factor];
  const int d = fact.total();
  ComplexMatrix out = ComplexMatrix::Zero(d * d, df * df);
  std::vector<int> ri, ci;
  for (int r = 0; r < d; ++r) {
    detail::split_index(r, fact, ri);
    for (int c = 0; c < d; ++c) {
      detail::split_index(c, fact, ci);
      Complex w(1, 0);
      for (int j = 0; j < n; ++j) {
        if (j == factor) continue;
        w *= fixed[j](ri[j], ci[j]);
        if (w == Complex(0, 0)) break;
      }
      if (w == Complex(0, 0)) continue;
      out(r + c * d, ri[factor] + ci[factor] * df) += w;
    }
  }
  return out;
}

// Tensor product of the marginals over a partition of the factors; the result
// lives on the original factor ordering. Used for separability checks.
inline ComplexMatrix product_of_marginals(const ComplexMatrix& rho, const Factorization& fact,
                                          const std::vector<std::vector<int>>& groups) {
  std::vector<char> seen(fact.factors(), 0);
  for (const auto& g : groups)
    for (int j : g) {
      if (j < 0 || j >= fact.factors() || seen[j])
        throw config_error("product_of_marginals: groups must partition the factors");
      seen[j] = 1;
    }
  for (char s : seen)
    if (!s) throw config_error("product_of_marginals: groups must cover all factors");

  std::vector<DensityMatrix> margs;
  std::vector<Factorization> gfacts;
  for (const auto& g : groups) {
    margs.push_back(partial_trace(rho, fact, g));
    gfacts.push_back(sub_factorization(fact, g));
  }
  const int d = fact.total();
  ComplexMatrix out(d, d);
  std::vector<int> ri, ci;
  std::vector<int> gr, gc;
  for (int r = 0; r < d; ++r) {
    detail::split_index(r, fact, ri);
    for (int c = 0; c < d; ++c) {
      detail::split_index(c, fact, ci);
      Complex v(1, 0);
      for (size_t gi = 0; gi < groups.size(); ++gi) {
        gr.clear();
        gc.clear();
        for (int j : groups[gi]) {
          gr.push_back(ri[j]);
          gc.push_back(ci[j]);
        }
        v *= margs[gi].mat(detail::join_index(gr, gfacts[gi]),
                           detail::join_index(gc, gfacts[gi]));
      }
      out(r, c) = v;
    }
  }
  return out;
}

// Scaling-and-squaring Pade exponential (Eigen's MatrixFunctions implementation).
inline ComplexMatrix matrix_exp(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) throw config_error("matrix_exp: matrix not square");
  return m.exp();
}

// Solve (u*I - M) X = B directly; refuses ill-conditioned systems.
inline ComplexMatrix resolvent_apply(const ComplexMatrix& m, Complex u, const ComplexMatrix& b,
                                     double rcond_floor = 1e-14) {
  if (m.rows() != m.cols() || m.rows() != b.rows())
    throw config_error("resolvent_apply: dimension mismatch");
  ComplexMatrix a = -m;
  a.diagonal().array() += u;
  Eigen::PartialPivLU<ComplexMatrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc > rcond_floor)) {
    std::ostringstream os;
    os << "resolvent_apply: system at u=(" << u.real() << "," << u.imag()
       << ") is ill-conditioned, rcond estimate " << rc;
    throw numeric_error(os.str());
  }
  ComplexMatrix x = lu.solve(b);
  const double resid = (a * x - b).norm();
  if (!(resid <= 1e-10 * (b.norm() + 1.0))) {
    std::ostringstream os;
    os << "resolvent_apply: residual " << resid << " exceeds tolerance";
    throw numeric_error(os.str());
  }
  return x;
}

inline ComplexMatrix hermitize(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

// Choi matrix sum_ij E_ij (x) Phi(E_ij), built by applying the map to the
// matrix units (one half of the unnormalized maximally entangled state).
inline ComplexMatrix choi_matrix(const SuperOp& op) {
  const int d = op.hilbert_dim();
  ComplexMatrix choi = ComplexMatrix::Zero(d * d, d * d);
  ComplexVector unit = ComplexVector::Zero(d * d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      unit.setZero();
      unit(i + j * d) = 1.0;
      const ComplexMatrix block = devectorize(ComplexVector(op.mat * unit));
      choi.block(i * d, j * d, d, d) = block;
    }
  }
  return choi;
}

struct CpReport {
  double min_eigenvalue = 0.0;
  double herm_deviation = 0.0;
};

inline bool is_completely_positive(const SuperOp& op, double tol, CpReport* report = nullptr) {
  const ComplexMatrix choi = choi_matrix(op);
  const ComplexMatrix h = hermitize(choi);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  CpReport rep;
  rep.min_eigenvalue = es.eigenvalues().minCoeff();
  rep.herm_deviation = (choi - h).cwiseAbs().maxCoeff();
  if (report) *report = rep;
  return rep.min_eigenvalue > -tol && rep.herm_deviation < tol;
}

struct StateReport {
  double herm_deviation = 0.0;
  double trace_deviation = 0.0;
  double min_eigenvalue = 0.0;
};

inline StateReport validate_state(const ComplexMatrix& rho) {
  StateReport rep;
  rep.herm_deviation = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  rep.trace_deviation = std::abs(rho.trace() - Complex(1, 0));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(rho), Eigen::EigenvaluesOnly);
  rep.min_eigenvalue = es.eigenvalues().minCoeff();
  return rep;
}

inline void require_valid_state(const ComplexMatrix& rho, double tol_herm = 1e-9,
                                double tol_trace = 1e-9, double tol_psd = 1e-9,
                                const std::string& context = "") {
  const StateReport rep = validate_state(rho);
  std::ostringstream os;
  if (rep.herm_deviation > tol_herm)
    os << "state not hermitian (deviation " << rep.herm_deviation << ")";
  else if (rep.trace_deviation > tol_trace)
    os << "state trace deviates by " << rep.trace_deviation;
  else if (rep.min_eigenvalue < -tol_psd)
    os << "state not positive semidefinite (min eigenvalue " << rep.min_eigenvalue << ")";
  else
    return;
  if (!context.empty()) os << " [" << context << "]";
  throw numeric_error(os.str());
}

// Common single-qubit constants. Basis convention: |+> = index 0, |-> = index 1;
// `lower` maps |+> to |->.
namespace qubit {
inline ComplexMatrix identity() { return ComplexMatrix::Identity(2, 2); }
inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}
inline ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
inline ComplexMatrix lower() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(1, 0) = 1;
  return m;
}
inline ComplexMatrix raise() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 1) = 1;
  return m;
}
}  // namespace qubit

inline ComplexMatrix basis_projector(int dim, int idx) {
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(idx, idx) = 1;
  return m;
}

inline ComplexMatrix basis_transfer(int dim, int to, int from) {
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(to, from) = 1;
  return m;
}

}  // namespace qcm
