// Quantum-jump unravelling of the embedded dynamics: waiting times are sampled
// by inverting the no-detection survival probability (the no-jump generator
// acts trace-preservingly on everything but the ancilla, so survival depends
// only on the ancilla marginal), states evolve on the full composite space,
// and ensembles reduce deterministically regardless of thread count.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "qcm/analysis.hpp"
#include "qcm/dynamics.hpp"
#include "qcm/generators.hpp"
#include "qcm/models.hpp"
#include "qcm/rng.hpp"
#include "qcm/timeseries.hpp"

namespace qcm {

namespace detail {

inline Complex vec_trace(const ComplexVector& v, int d) {
  Complex tr(0, 0);
  for (int i = 0; i < d; ++i) tr += v(i + i * d);
  return tr;
}

// Invert a monotone non-increasing survival function p0 for p0(t*) = r.
// Exponential bracketing from `start` (doubling), then bisection to root_tol.
// `window <= 0` means unbounded. Throws if p0 is detected to increase.
template <class Survival>
std::optional<double> invert_survival(Survival&& p0, double r, double window, double root_tol,
                                      double start) {
  if (!(r > 0 && r < 1)) throw config_error("sample_jump_time: r must lie strictly in (0,1)");
  if (!(root_tol > 0)) throw config_error("sample_jump_time: root_tol must be positive");

  const bool bounded = window > 0;
  if (bounded && p0(window) > r) return std::nullopt;

  double lo = 0, hi = bounded ? std::min(start, window) : start;
  double prev = 1.0;
  int guard = 0;
  double p = p0(hi);
  while (p > r) {
    if (p > prev + 1e-9)
      throw numeric_error("sample_jump_time: survival probability is not monotone");
    prev = p;
    lo = hi;
    hi = bounded ? std::min(2 * hi, window) : 2 * hi;
    if (++guard > 200)
      throw numeric_error("sample_jump_time: survival never crossed the draw (no detection)");
    p = p0(hi);
  }
  while (hi - lo > root_tol) {
    const double mid = 0.5 * (lo + hi);
    if (p0(mid) > r)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// No-detection survival probability of the full composite state.
inline double survival(const GeneratorBundle& bundle, const DensityMatrix& rho, double t) {
  const int d = bundle.fact.total();
  const ComplexVector v = matrix_exp(t * bundle.no_jump.mat) * vectorize(rho.mat);
  return detail::vec_trace(v, d).real();
}

// No-detection survival computed on the ancilla alone.
inline double survival_ancilla(const AncillaOps& ops, const ComplexVector& ancilla_state,
                               double t) {
  const ComplexVector v = matrix_exp(t * ops.no_jump) * ancilla_state;
  return detail::vec_trace(v, ops.dim).real();
}

// Invert survival(t) = r for the waiting time using the ancilla marginal.
// Returns nothing when the draw survives the whole window; `window <= 0`
// means unbounded.
inline std::optional<double> sample_jump_time(const AncillaOps& ops,
                                              const ComplexVector& ancilla_state, double r,
                                              double window, double root_tol) {
  auto p0 = [&](double t) { return survival_ancilla(ops, ancilla_state, t); };
  return detail::invert_survival(p0, r, window, root_tol, 1.0 / ops.gamma);
}

// Same inversion on the full composite state, for callers that hold one.
inline std::optional<double> sample_jump_time(const GeneratorBundle& bundle,
                                              const DensityMatrix& rho, double r, double t_window,
                                              double root_tol = 1e-9) {
  auto p0 = [&](double t) { return survival(bundle, rho, t); };
  return detail::invert_survival(p0, r, t_window, root_tol, 1.0 / bundle.gamma);
}

// Detection applied to a conditional state: jump map plus renormalization.
inline DensityMatrix apply_jump(const GeneratorBundle& bundle, const DensityMatrix& rho) {
  return bundle.measurement(rho);
}

// No-detection evolution for a time dt, renormalized.
inline DensityMatrix conditional_evolve(const GeneratorBundle& bundle, const DensityMatrix& rho,
                                        double dt) {
  ComplexVector v = matrix_exp(dt * bundle.no_jump.mat) * vectorize(rho.mat);
  const Complex tr = detail::vec_trace(v, bundle.fact.total());
  if (!(std::abs(tr) > 1e-300)) throw numeric_error("conditional_evolve: state trace vanished");
  v /= tr;
  return {devectorize(v), bundle.fact};
}

struct TrajectoryConfig {
  std::uint64_t seed = 1;
  std::uint64_t trajectory_index = 0;
  double root_tol = 1e-9;
  bool validate = true;            // check every stored conditional state at tol 1e-9
  bool record_jump_states = false; // keep the states bracketing each detection
};

struct TrajectoryRecord {
  std::vector<DensityMatrix> states;  // one per grid point, normalized conditional states
  std::vector<double> jump_times;     // strictly increasing, in (0, t_max]
  int jump_count = 0;
  // Populated only when cfg.record_jump_states is set: the normalized
  // conditional state immediately before and after each detection.
  std::vector<DensityMatrix> pre_jump_states;
  std::vector<DensityMatrix> post_jump_states;
};

// One conditional trajectory sampled on `grid`. Waiting times come from the
// ancilla marginal (exact for any initial state); between samples the full
// composite state moves under the no-jump generator with a cached
// one-step exponential, with partial steps only around detection events.
inline TrajectoryRecord run_trajectory(const GeneratorBundle& bundle, const AncillaOps& anc,
                                       const DensityMatrix& rho0, const TimeGrid& grid,
                                       const TrajectoryConfig& cfg) {
  if (rho0.dim() != bundle.fact.total())
    throw config_error("run_trajectory: state dimension mismatch");
  const int d = bundle.fact.total();
  const int ancilla = bundle.ancilla_factor;
  require_valid_state(rho0.mat, 1e-9, 1e-9, 1e-9, "trajectory initial state");

  TrajectoryRecord rec;
  rec.states.reserve(grid.size());
  rec.states.push_back({rho0.mat, bundle.fact});
  if (grid.n_steps == 0) return rec;

  const ComplexMatrix e_h = matrix_exp(grid.h * bundle.no_jump.mat);
  const double t_max = grid.t_max();

  ComplexVector v = vectorize(rho0.mat);
  double t_state = 0;
  std::uint64_t event = 0;

  // First waiting time from the actual initial ancilla marginal; after a
  // detection the marginal is the reset state by construction.
  ComplexVector anc_state = vectorize(partial_trace(rho0.mat, bundle.fact, {ancilla}).mat);
  auto draw = [&](double from) -> std::optional<double> {
    const double r = counter_uniform(cfg.seed, cfg.trajectory_index, event);
    ++event;
    const auto w = sample_jump_time(anc, anc_state, r, t_max - from, cfg.root_tol);
    if (!w) return std::nullopt;
    return from + *w;
  };
  std::optional<double> t_next = draw(0.0);

  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double t_target = grid.t(i);
    bool aligned = true;  // v still sits exactly on the previous grid point
    while (t_next && *t_next <= t_target) {
      const double t_jump = *t_next;
      if (t_jump > t_state) v = matrix_exp((t_jump - t_state) * bundle.no_jump.mat) * v;
      {
        const Complex tr = detail::vec_trace(v, d);
        if (!(tr.real() > 1e-300))
          throw numeric_error("run_trajectory: conditional state trace vanished");
        v /= tr;
      }
      if (cfg.record_jump_states) rec.pre_jump_states.push_back({devectorize(v), bundle.fact});
      v = bundle.jump.mat * v;
      const Complex tr = detail::vec_trace(v, d);
      if (!(std::abs(tr) > 1e-300))
        throw numeric_error("run_trajectory: detection on a dark state");
      v /= tr;
      if (cfg.record_jump_states) rec.post_jump_states.push_back({devectorize(v), bundle.fact});
      t_state = t_jump;
      rec.jump_times.push_back(t_jump);
      anc_state = anc.reset;
      aligned = false;
      t_next = draw(t_jump);
    }
    if (aligned && t_state == grid.t(i - 1)) {
      v = e_h * v;
    } else if (t_target > t_state) {
      v = matrix_exp((t_target - t_state) * bundle.no_jump.mat) * v;
    }
    const Complex tr = detail::vec_trace(v, d);
    if (!(tr.real() > 1e-300))
      throw numeric_error("run_trajectory: conditional state trace vanished");
    v /= tr;
    t_state = t_target;
    ComplexMatrix m = devectorize(v);
    if (cfg.validate) {
      std::ostringstream ctx;
      ctx << "trajectory " << cfg.trajectory_index << ", t=" << t_target;
      require_valid_state(m, 1e-9, 1e-9, 1e-9, ctx.str());
    }
    rec.states.push_back({std::move(m), bundle.fact});
  }
  rec.jump_count = static_cast<int>(rec.jump_times.size());
  return rec;
}

// Model-level convenience: run one trajectory from the model's separable
// initial state.
inline TrajectoryRecord run_trajectory(const ModelSpec& model, const TimeGrid& grid,
                                       const TrajectoryConfig& cfg) {
  const AncillaOps anc = make_ancilla_ops(model.ancilla);
  return run_trajectory(model.bundle, anc, model.initial, grid, cfg);
}

// Direct renewal draws of the waiting time from the reset state (stream i,
// first event), for distribution tests on large samples.
inline std::vector<double> sample_waiting_times(const AncillaSpec& spec, std::size_t count,
                                                std::uint64_t seed, double root_tol = 1e-9) {
  const AncillaOps ops = make_ancilla_ops(spec);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = counter_uniform(seed, i, 0);
    const auto w = sample_jump_time(ops, ops.reset, r, 0.0, root_tol);
    if (!w) throw numeric_error("sample_waiting_times: unbounded draw returned nothing");
    out.push_back(*w);
  }
  return out;
}

struct EnsembleConfig {
  int n_traj = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  double root_tol = 1e-9;
  bool validate = true;
  int block_size = 32;
};

struct EnsembleResult {
  std::vector<DensityMatrix> mean_states;
  TimeSeries mean;
  TimeSeries stderr_of_mean;                    // channel names prefixed "se_"
  std::vector<std::vector<double>> jump_times;  // per trajectory, in index order
};

// Ensemble mean over trajectories i = 0..n-1 with randomness keyed on
// (seed, i, event). Trajectories are computed in parallel blocks but reduced
// strictly in index order, so the result is bit-identical for any thread count.
inline EnsembleResult ensemble_average(const GeneratorBundle& bundle, const AncillaOps& anc,
                                       const DensityMatrix& rho0, const TimeGrid& grid,
                                       const ObservableSet& obs, const EnsembleConfig& cfg) {
  if (cfg.n_traj < 1) throw config_error("ensemble_average: need at least one trajectory");
  const int threads = std::clamp(cfg.threads, 1, 64);
  const std::size_t n_samples = grid.size();

  std::vector<ComplexMatrix> sum_states(
      n_samples, ComplexMatrix::Zero(bundle.fact.total(), bundle.fact.total()));
  // Per-channel Welford accumulators (running mean and sum of squared
  // residuals). The naive sum-of-squares formula has a cancellation floor of
  // sqrt(eps)*|mean| on the standard error, which would mask channels whose
  // trajectory-to-trajectory variance is genuinely zero. Channel layout is
  // discovered from the first record.
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> mean_ch, m2_ch;
  EnsembleResult result;
  result.jump_times.resize(static_cast<std::size_t>(cfg.n_traj));

  const int block = std::max(1, cfg.block_size);
  for (int base = 0; base < cfg.n_traj; base += block) {
    const int count = std::min(block, cfg.n_traj - base);
    std::vector<TrajectoryRecord> records(static_cast<std::size_t>(count));
    auto worker = [&](int offset) {
      for (int j = offset; j < count; j += threads) {
        TrajectoryConfig tc;
        tc.seed = cfg.seed;
        tc.trajectory_index = static_cast<std::uint64_t>(base + j);
        tc.root_tol = cfg.root_tol;
        tc.validate = cfg.validate;
        records[static_cast<std::size_t>(j)] = run_trajectory(bundle, anc, rho0, grid, tc);
      }
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int k = 0; k < threads; ++k) pool.emplace_back(worker, k);
      for (auto& th : pool) th.join();
    }
    // Strict index-order reduction.
    for (int j = 0; j < count; ++j) {
      const TrajectoryRecord& rec = records[static_cast<std::size_t>(j)];
      const TimeSeries ts = extract(rec.states, grid, obs);
      if (channel_names.empty()) {
        channel_names = ts.names;
        mean_ch.assign(channel_names.size(), std::vector<double>(n_samples, 0.0));
        m2_ch.assign(channel_names.size(), std::vector<double>(n_samples, 0.0));
      }
      for (std::size_t s = 0; s < n_samples; ++s) sum_states[s] += rec.states[s].mat;
      const double n_seen = static_cast<double>(base + j + 1);
      for (std::size_t c = 0; c < channel_names.size(); ++c)
        for (std::size_t s = 0; s < n_samples; ++s) {
          const double x = ts.cols[c][s];
          const double delta = x - mean_ch[c][s];
          mean_ch[c][s] += delta / n_seen;
          m2_ch[c][s] += delta * (x - mean_ch[c][s]);
        }
      result.jump_times[static_cast<std::size_t>(base + j)] = rec.jump_times;
    }
  }

  const double n = static_cast<double>(cfg.n_traj);
  result.mean_states.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s)
    result.mean_states.push_back({ComplexMatrix(sum_states[s] / n), bundle.fact});
  result.mean = TimeSeries(grid);
  result.stderr_of_mean = TimeSeries(grid);
  for (std::size_t c = 0; c < channel_names.size(); ++c) {
    std::vector<double> se(n_samples, 0.0);
    if (cfg.n_traj > 1)
      for (std::size_t s = 0; s < n_samples; ++s) {
        const double var = std::max(0.0, m2_ch[c][s] / (n - 1.0));
        se[s] = std::sqrt(var / n);
      }
    result.mean.add_channel(channel_names[c], std::move(mean_ch[c]));
    result.stderr_of_mean.add_channel("se_" + channel_names[c], std::move(se));
  }
  return result;
}

// Model-level convenience: average from the model's separable initial state
// with its default observables.
inline EnsembleResult ensemble_average(const ModelSpec& model, const TimeGrid& grid,
                                       const EnsembleConfig& cfg) {
  const AncillaOps anc = make_ancilla_ops(model.ancilla);
  return ensemble_average(model.bundle, anc, model.initial, grid, default_observables(model),
                          cfg);
}

// Frobenius distance between a state and the product of its marginals over
// the given partition.
inline double separability_deviation(const DensityMatrix& rho,
                                     const std::vector<std::vector<int>>& groups) {
  const ComplexMatrix prod = product_of_marginals(rho.mat, rho.fact, groups);
  return (rho.mat - prod).norm();
}

struct SeparabilityReport {
  double max_deviation = 0;
  std::size_t argmax_sample = 0;
  std::vector<double> deviations;  // one per stored sample
};

// Reconstructs the product of marginals at every stored sample and reports
// the largest Frobenius deviation from the stored conditional state.
inline SeparabilityReport check_separability(const TrajectoryRecord& rec,
                                             const std::vector<std::vector<int>>& groups) {
  SeparabilityReport rep;
  rep.deviations.reserve(rec.states.size());
  for (std::size_t s = 0; s < rec.states.size(); ++s) {
    const double dev = separability_deviation(rec.states[s], groups);
    rep.deviations.push_back(dev);
    if (dev > rep.max_deviation) {
      rep.max_deviation = dev;
      rep.argmax_sample = s;
    }
  }
  return rep;
}

}  // namespace qcm
