// Observable extraction from state trajectories, relative entropy, stationary
// states of a Liouvillian, and detection of information backflow (rises of an
// otherwise contracting distinguishability measure).
#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qcm/linalg.hpp"
#include "qcm/timeseries.hpp"

namespace qcm {

// One scalar channel (or re/im pair) computed from a state or one of its
// marginals. `keep` lists the tensor factors of the marginal; empty keeps the
// full state.
struct Observable {
  enum class Kind { element, purity, entropy_vs };
  Kind kind = Kind::element;
  std::vector<int> keep;
  int row = 0, col = 0;        // element
  ComplexMatrix reference;     // entropy_vs target
  std::string label;
};

using ObservableSet = std::vector<Observable>;

inline Observable element_observable(std::vector<int> keep, int row, int col, std::string label) {
  Observable o;
  o.kind = Observable::Kind::element;
  o.keep = std::move(keep);
  o.row = row;
  o.col = col;
  o.label = std::move(label);
  return o;
}

inline Observable purity_observable(std::vector<int> keep, std::string label) {
  Observable o;
  o.kind = Observable::Kind::purity;
  o.keep = std::move(keep);
  o.label = std::move(label);
  return o;
}

inline Observable entropy_observable(std::vector<int> keep, ComplexMatrix reference,
                                     std::string label) {
  Observable o;
  o.kind = Observable::Kind::entropy_vs;
  o.keep = std::move(keep);
  o.reference = std::move(reference);
  o.label = std::move(label);
  return o;
}

// Quantum relative entropy S(rho || sigma) in bits. Eigenvalues below eps are
// clamped for the logarithms; population on a sigma-null direction beyond
// sqrt(eps) is a genuine support violation and throws.
inline double relative_entropy_bits(const ComplexMatrix& rho, const ComplexMatrix& sigma,
                                    double eps = 1e-12) {
  if (rho.rows() != rho.cols() || sigma.rows() != sigma.cols() || rho.rows() != sigma.rows())
    throw config_error("relative_entropy_bits: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> er(hermitize(rho));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(sigma));
  const double log2e = 1.4426950408889634;

  double h_rho = 0;  // Tr rho log2 rho
  for (int i = 0; i < er.eigenvalues().size(); ++i) {
    const double p = er.eigenvalues()(i);
    if (p > eps) h_rho += p * std::log(p) * log2e;
  }
  double cross = 0;  // Tr rho log2 sigma
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double s = es.eigenvalues()(i);
    const ComplexVector v = es.eigenvectors().col(i);
    const double weight = std::real(Complex(v.adjoint() * rho * v));
    if (s <= eps && weight > std::sqrt(eps)) {
      std::ostringstream os;
      os << "relative_entropy_bits: support violation (weight " << weight
         << " on a null direction of the reference)";
      throw numeric_error(os.str());
    }
    cross += weight * std::log(std::max(s, eps)) * log2e;
  }
  return h_rho - cross;
}

inline TimeSeries extract(const std::vector<DensityMatrix>& states, const TimeGrid& grid,
                          const ObservableSet& obs) {
  if (states.size() != grid.size())
    throw config_error("extract: state count does not match the grid");
  TimeSeries ts(grid);
  for (const auto& o : obs) {
    std::vector<double> a, b;
    a.reserve(states.size());
    if (o.kind == Observable::Kind::element && o.row != o.col) b.reserve(states.size());
    for (const auto& st : states) {
      ComplexMatrix m =
          o.keep.empty() ? st.mat : partial_trace(st.mat, st.fact, o.keep).mat;
      switch (o.kind) {
        case Observable::Kind::element: {
          const Complex v = m(o.row, o.col);
          a.push_back(v.real());
          if (o.row != o.col) b.push_back(v.imag());
          break;
        }
        case Observable::Kind::purity:
          a.push_back(std::real((m * m).trace()));
          break;
        case Observable::Kind::entropy_vs:
          a.push_back(relative_entropy_bits(m, o.reference));
          break;
      }
    }
    if (o.kind == Observable::Kind::element && o.row != o.col) {
      ts.add_channel("re_" + o.label, std::move(a));
      ts.add_channel("im_" + o.label, std::move(b));
    } else {
      ts.add_channel(o.label, std::move(a));
    }
  }
  return ts;
}

struct StationaryReport {
  bool unique = false;
  int nullity = 0;
  DensityMatrix state;            // meaningful only when unique
  double crosscheck_deviation = 0;  // || exp(T L) rho - rho ||_max, unique case
};

// Stationary state from the nullspace of the Liouvillian; cross-checked by a
// long-time propagation. A degenerate nullspace is reported, not resolved:
// the limit then depends on the initial state.
inline StationaryReport stationary_state(const SuperOp& l, double tol = 1e-9,
                                         double t_check = 50.0) {
  Eigen::ComplexEigenSolver<ComplexMatrix> es(l.mat);
  if (es.info() != Eigen::Success)
    throw numeric_error("stationary_state: eigensolver failed to converge");
  const double scale = std::max(1.0, l.mat.cwiseAbs().maxCoeff());
  StationaryReport rep;
  int pick = -1;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()(i)) <= tol * scale) {
      ++rep.nullity;
      pick = i;
    }
  }
  if (rep.nullity == 0)
    throw numeric_error("stationary_state: no eigenvalue near zero");
  if (rep.nullity > 1) return rep;

  ComplexMatrix m = hermitize(devectorize(ComplexVector(es.eigenvectors().col(pick))));
  const Complex tr = m.trace();
  if (std::abs(tr) < 1e-12)
    throw numeric_error("stationary_state: null vector is traceless");
  m /= tr;
  rep.unique = true;
  rep.state = {m, l.fact};
  const ComplexMatrix again = devectorize(
      ComplexVector(matrix_exp(t_check * l.mat) * vectorize(m)));
  rep.crosscheck_deviation = (again - m).cwiseAbs().maxCoeff();
  return rep;
}

// Reference state for distinguishability: the unique stationary state when the
// nullspace is one-dimensional, otherwise the long-time limit from rho0.
inline DensityMatrix reference_state(const SuperOp& l, const DensityMatrix& rho0,
                                     double t_long = 100.0) {
  const StationaryReport rep = stationary_state(l);
  if (rep.unique) return rep.state;
  ComplexMatrix m = hermitize(
      devectorize(ComplexVector(matrix_exp(t_long * l.mat) * vectorize(rho0.mat))));
  m /= m.trace();
  return {m, l.fact};
}

struct BackflowEpisode {
  double t_min = 0;   // where the running minimum was attained
  double t_rise = 0;  // first grid point of the episode
  double rise = 0;    // largest value - running minimum within the episode
};

struct BackflowReport {
  std::vector<BackflowEpisode> episodes;
  double max_rise = 0;

  bool detected(double tol) const { return max_rise > tol; }
};

// Scan a channel for rises above its running minimum. Contiguous violating
// samples are grouped into one episode.
inline BackflowReport backflow_detect(const TimeSeries& ts, const std::string& channel,
                                      double tol) {
  const std::vector<double>& v = ts.channel(channel);
  BackflowReport rep;
  if (v.empty()) return rep;
  double run_min = v[0];
  double t_min = ts.grid.t(0);
  bool open = false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double rise = v[i] - run_min;
    if (rise > tol) {
      if (!open) {
        rep.episodes.push_back({t_min, ts.grid.t(i), rise});
        open = true;
      } else {
        rep.episodes.back().rise = std::max(rep.episodes.back().rise, rise);
      }
      rep.max_rise = std::max(rep.max_rise, rise);
    } else {
      open = false;
    }
    if (v[i] < run_min) {
      run_min = v[i];
      t_min = ts.grid.t(i);
    }
  }
  return rep;
}

}  // namespace qcm
