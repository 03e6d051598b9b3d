// Jump unravelling: survival inversion, detection application, conditional
// evolution, single trajectories, deterministic ensembles, and separability
// of the conditional states.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "qcm/trajectories.hpp"

using qcm::Complex;
using qcm::ComplexMatrix;
using qcm::ComplexVector;
using qcm::Factorization;

namespace {

double maxabs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

// Two-level clock with bare exponential decay (no free dynamics).
qcm::AncillaSpec pure_decay(double gamma) {
  qcm::AncillaSpec spec;
  spec.dim = 2;
  spec.a0 = 0;
  spec.rates = {0.0, gamma};
  return spec;
}

}  // namespace

TEST_CASE("survival probabilities follow the exponential clock", "[trajectories]") {
  const double gamma = 0.8;
  const qcm::AncillaOps ops = qcm::make_ancilla_ops(pure_decay(gamma));
  const ComplexVector wait = qcm::vectorize(qcm::basis_projector(2, 0));

  for (double t : {0.0, 0.3, 0.7, 2.0})
    REQUIRE(std::abs(qcm::survival_ancilla(ops, wait, t) - std::exp(-gamma * t)) < 1e-12);

  // The composite-state route gives the same survival for a product state.
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const qcm::DensityMatrix armed{
      qcm::kron(qcm::xplus_state(), qcm::basis_projector(2, 0)), m.bundle.fact};
  const qcm::AncillaOps mops = qcm::make_ancilla_ops(m.ancilla);
  const ComplexVector wait_m = qcm::vectorize(qcm::basis_projector(2, 0));
  for (double t : {0.2, 1.0})
    REQUIRE(std::abs(qcm::survival(m.bundle, armed, t) -
                     qcm::survival_ancilla(mops, wait_m, t)) < 1e-12);

  // From the reset (dark) ancilla of the incoherent-free coherent model at
  // Delta=0 nothing ever fires.
  const qcm::ModelSpec dark = qcm::dephasing_coherent(1.0, 0.0);
  REQUIRE(std::abs(qcm::survival(dark.bundle, dark.initial, 5.0) - 1.0) < 1e-12);
}

TEST_CASE("waiting-time inversion matches the analytic exponential", "[trajectories]") {
  const double gamma = 0.8;
  const qcm::AncillaOps ops = qcm::make_ancilla_ops(pure_decay(gamma));
  const ComplexVector wait = qcm::vectorize(qcm::basis_projector(2, 0));

  const double r = 0.37;
  const auto t = qcm::sample_jump_time(ops, wait, r, 0.0, 1e-10);
  REQUIRE(t.has_value());
  REQUIRE(std::abs(*t - (-std::log(r) / gamma)) < 1e-9);

  // r near one: the waiting time collapses to zero from above.
  const auto tiny = qcm::sample_jump_time(ops, wait, 1.0 - 1e-12, 0.0, 1e-12);
  REQUIRE(tiny.has_value());
  REQUIRE(*tiny >= 0.0);
  REQUIRE(*tiny < 1e-8);

  // Bounded windows: survive when the draw lies above the window survival.
  REQUIRE_FALSE(qcm::sample_jump_time(ops, wait, 0.5, 0.5, 1e-10).has_value());
  const auto inside = qcm::sample_jump_time(ops, wait, 0.9, 0.5, 1e-10);
  REQUIRE(inside.has_value());
  REQUIRE(std::abs(*inside - (-std::log(0.9) / gamma)) < 1e-9);

  // Draw validation.
  REQUIRE_THROWS_AS(qcm::sample_jump_time(ops, wait, 0.0, 0.0, 1e-10), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::sample_jump_time(ops, wait, 1.0, 0.0, 1e-10), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::sample_jump_time(ops, wait, -0.2, 0.0, 1e-10), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::sample_jump_time(ops, wait, 0.5, 0.0, 0.0), qcm::config_error);

  // The composite-state overload inverts the same function.
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const qcm::DensityMatrix armed{
      qcm::kron(qcm::xplus_state(), qcm::basis_projector(2, 0)), m.bundle.fact};
  const qcm::AncillaOps mops = qcm::make_ancilla_ops(m.ancilla);
  const auto via_bundle = qcm::sample_jump_time(m.bundle, armed, 0.61, 0.0, 1e-10);
  const auto via_ancilla = qcm::sample_jump_time(mops, wait, 0.61, 0.0, 1e-10);
  REQUIRE(via_bundle.has_value());
  REQUIRE(via_ancilla.has_value());
  REQUIRE(std::abs(*via_bundle - *via_ancilla) < 1e-7);
}

TEST_CASE("the survival inverter rejects pathological inputs", "[trajectories]") {
  // Increasing "survival" is flagged as non-monotone.
  auto rising = [](double t) { return 1.0 + t; };
  REQUIRE_THROWS_AS(qcm::detail::invert_survival(rising, 0.5, 0.0, 1e-9, 1.0),
                    qcm::numeric_error);

  // A plateau above the draw exhausts the bracketing guard.
  auto plateau = [](double) { return 0.9; };
  REQUIRE_THROWS_AS(qcm::detail::invert_survival(plateau, 0.5, 0.0, 1e-9, 1.0),
                    qcm::numeric_error);

  // Exact analytic inversion sanity.
  auto expo = [](double t) { return std::exp(-t); };
  const auto t = qcm::detail::invert_survival(expo, 0.25, 0.0, 1e-11, 1.0);
  REQUIRE(t.has_value());
  REQUIRE(std::abs(*t - (-std::log(0.25))) < 1e-10);
}

TEST_CASE("conditional evolution freezes the dephasing system marginal", "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const qcm::DensityMatrix armed{
      qcm::kron(qcm::xplus_state(), qcm::basis_projector(2, 0)), m.bundle.fact};

  // Zero time is the identity.
  REQUIRE(maxabs(qcm::conditional_evolve(m.bundle, armed, 0.0).mat - armed.mat) < 1e-14);

  // Between detections the system marginal never moves.
  for (double dt : {0.1, 0.7, 2.0}) {
    const qcm::DensityMatrix evolved = qcm::conditional_evolve(m.bundle, armed, dt);
    const ComplexMatrix marg = qcm::partial_trace(evolved.mat, m.bundle.fact, {0}).mat;
    REQUIRE(maxabs(marg - qcm::xplus_state()) < 1e-12);
  }

  // Tripartite: after tracing the buffer, the system dephases at cos(lambda t).
  const double lambda = 2.0;
  const qcm::ModelSpec tri = qcm::tripartite_dephasing(1.0, 6.0, lambda);
  const double dt = 0.45;
  const qcm::DensityMatrix evolved3 = qcm::conditional_evolve(tri.bundle, tri.initial, dt);
  const ComplexMatrix marg3 = qcm::partial_trace(evolved3.mat, tri.bundle.fact, {0}).mat;
  REQUIRE(std::abs(marg3(0, 1) - Complex(0.5 * std::cos(lambda * dt), 0)) < 1e-12);
  REQUIRE(std::abs(marg3(0, 0) - Complex(0.5, 0)) < 1e-12);
}

TEST_CASE("detections conjugate the system and reset the clock", "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const qcm::DensityMatrix armed{
      qcm::kron(qcm::xplus_state(), qcm::basis_projector(2, 0)), m.bundle.fact};
  const qcm::DensityMatrix post = qcm::apply_jump(m.bundle, armed);

  const ComplexMatrix sys = qcm::partial_trace(post.mat, m.bundle.fact, {0}).mat;
  const ComplexMatrix expect =
      qcm::qubit::pauli_z() * qcm::xplus_state() * qcm::qubit::pauli_z();
  REQUIRE(maxabs(sys - expect) < 1e-13);
  REQUIRE(maxabs(qcm::partial_trace(post.mat, m.bundle.fact, {1}).mat -
                 m.ancilla.reset_state()) < 1e-14);
}

TEST_CASE("a dark clock yields a jump-free frozen trajectory", "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 0.0);
  const auto grid = qcm::make_grid(3.0, 0.05);
  qcm::TrajectoryConfig cfg;
  cfg.seed = 12;
  const auto rec = qcm::run_trajectory(m, grid, cfg);

  REQUIRE(rec.states.size() == grid.size());
  REQUIRE(rec.jump_count == 0);
  REQUIRE(rec.jump_times.empty());
  for (const auto& st : rec.states) {
    const ComplexMatrix marg = qcm::partial_trace(st.mat, m.bundle.fact, {0}).mat;
    REQUIRE(maxabs(marg - qcm::xplus_state()) < 1e-12);
  }
}

TEST_CASE("trajectories are deterministic and flip signs exactly at detections",
          "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const auto grid = qcm::make_grid(3.0, 0.05);
  qcm::TrajectoryConfig cfg;
  cfg.seed = 1;
  cfg.record_jump_states = true;

  const auto rec = qcm::run_trajectory(m, grid, cfg);
  const auto rec2 = qcm::run_trajectory(m, grid, cfg);

  REQUIRE(rec.jump_times == rec2.jump_times);  // bitwise determinism
  REQUIRE(rec.states.size() == rec2.states.size());
  for (std::size_t i = 0; i < rec.states.size(); ++i)
    REQUIRE(maxabs(rec.states[i].mat - rec2.states[i].mat) == 0.0);

  // Jumps are strictly increasing within the window.
  for (std::size_t j = 1; j < rec.jump_times.size(); ++j)
    REQUIRE(rec.jump_times[j] > rec.jump_times[j - 1]);
  if (!rec.jump_times.empty()) {
    REQUIRE(rec.jump_times.front() > 0.0);
    REQUIRE(rec.jump_times.back() <= grid.t_max());
  }
  REQUIRE(rec.jump_count == static_cast<int>(rec.jump_times.size()));

  // The conditional coherence keeps magnitude 1/2 and its sign carries the
  // parity of the detections seen so far.
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ComplexMatrix marg = qcm::partial_trace(rec.states[i].mat, m.bundle.fact, {0}).mat;
    const double c = marg(0, 1).real();
    REQUIRE(std::abs(std::abs(c) - 0.5) < 1e-9);
    int jumps_before = 0;
    for (double tj : rec.jump_times)
      if (tj <= grid.t(i)) ++jumps_before;
    const double expected_sign = (jumps_before % 2 == 0) ? 1.0 : -1.0;
    REQUIRE(c * expected_sign > 0.0);
  }

  // Recorded jump brackets: ancilla reset and sigma_z conjugation.
  REQUIRE(rec.pre_jump_states.size() == static_cast<std::size_t>(rec.jump_count));
  REQUIRE(rec.post_jump_states.size() == static_cast<std::size_t>(rec.jump_count));
  for (int j = 0; j < rec.jump_count; ++j) {
    const auto& pre = rec.pre_jump_states[j];
    const auto& post = rec.post_jump_states[j];
    REQUIRE(maxabs(qcm::partial_trace(post.mat, m.bundle.fact, {1}).mat -
                   m.ancilla.reset_state()) < 1e-12);
    const ComplexMatrix pre_sys = qcm::partial_trace(pre.mat, m.bundle.fact, {0}).mat;
    const ComplexMatrix post_sys = qcm::partial_trace(post.mat, m.bundle.fact, {0}).mat;
    REQUIRE(maxabs(post_sys - ComplexMatrix(qcm::qubit::pauli_z() * pre_sys *
                                            qcm::qubit::pauli_z())) < 1e-10);
  }

  // Dimension mismatches are rejected.
  const qcm::AncillaOps anc = qcm::make_ancilla_ops(m.ancilla);
  const qcm::DensityMatrix wrong{ComplexMatrix::Identity(3, 3) / 3.0, Factorization{3}};
  REQUIRE_THROWS_AS(qcm::run_trajectory(m.bundle, anc, wrong, grid, cfg), qcm::config_error);
}

TEST_CASE("direct waiting-time draws are deterministic and positive", "[trajectories]") {
  const qcm::ModelSpec erl = qcm::erlang_chain(1.0, 2);
  const auto draws = qcm::sample_waiting_times(erl.ancilla, 500, 3);
  const auto again = qcm::sample_waiting_times(erl.ancilla, 500, 3);
  REQUIRE(draws == again);

  double sum = 0;
  for (double t : draws) {
    REQUIRE(t > 0.0);
    sum += t;
  }
  // Erlang with shape 3 and unit rate: mean 3, sd sqrt(3).
  const double mean = sum / draws.size();
  REQUIRE(std::abs(mean - 3.0) < 4.0 * std::sqrt(3.0 / 500.0));
}

TEST_CASE("ensembles reduce deterministically for any thread count", "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const auto grid = qcm::make_grid(1.5, 0.05);

  qcm::EnsembleConfig cfg;
  cfg.n_traj = 40;
  cfg.seed = 9;
  cfg.threads = 1;
  const auto serial = qcm::ensemble_average(m, grid, cfg);

  cfg.threads = 3;
  const auto parallel = qcm::ensemble_average(m, grid, cfg);

  REQUIRE(serial.jump_times == parallel.jump_times);
  for (int c = 0; c < serial.mean.channels(); ++c)
    for (int i = 0; i < serial.mean.samples(); ++i) {
      REQUIRE(serial.mean.at(c, i) == parallel.mean.at(c, i));
      REQUIRE(serial.stderr_of_mean.at(c, i) == parallel.stderr_of_mean.at(c, i));
    }

  // Channel layout: means plus se_-prefixed uncertainties.
  REQUIRE((serial.mean.names == std::vector<std::string>{"pop0", "pop1", "re_coh01",
                                                         "im_coh01"}));
  REQUIRE(serial.stderr_of_mean.names[0] == "se_pop0");

  // Populations are conserved trajectory by trajectory under dephasing.
  for (int i = 0; i < serial.mean.samples(); ++i) {
    REQUIRE(std::abs(serial.mean.channel("pop0")[i] - 0.5) < 1e-12);
    REQUIRE(std::abs(serial.stderr_of_mean.channel("se_pop0")[i]) < 1e-12);
  }

  qcm::EnsembleConfig bad;
  bad.n_traj = 0;
  REQUIRE_THROWS_AS(qcm::ensemble_average(m, grid, bad), qcm::config_error);
}

TEST_CASE("a single-trajectory ensemble degenerates exactly", "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const auto grid = qcm::make_grid(1.0, 0.05);

  qcm::TrajectoryConfig tc;
  tc.seed = 21;
  tc.trajectory_index = 0;
  const auto rec = qcm::run_trajectory(m, grid, tc);

  qcm::EnsembleConfig ec;
  ec.n_traj = 1;
  ec.seed = 21;
  const auto ens = qcm::ensemble_average(m, grid, ec);

  REQUIRE(ens.jump_times.size() == 1);
  REQUIRE(ens.jump_times[0] == rec.jump_times);
  for (std::size_t i = 0; i < grid.size(); ++i)
    REQUIRE(maxabs(ens.mean_states[i].mat - rec.states[i].mat) == 0.0);
  for (int i = 0; i < ens.stderr_of_mean.samples(); ++i)
    REQUIRE(ens.stderr_of_mean.at(0, i) == 0.0);
}

TEST_CASE("ensemble means track the master equation", "[trajectories]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const auto grid = qcm::make_grid(2.0, 0.05);

  qcm::EnsembleConfig cfg;
  cfg.n_traj = 300;
  cfg.seed = 5;
  const auto ens = qcm::ensemble_average(m, grid, cfg);

  const auto joint = qcm::propagate_master(m.bundle.total, m.initial, grid);
  const auto& mean_c = ens.mean.channel("re_coh01");
  const auto& se_c = ens.stderr_of_mean.channel("se_re_coh01");

  int within = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ComplexMatrix marg = qcm::partial_trace(joint[i].mat, m.bundle.fact, {0}).mat;
    if (std::abs(mean_c[i] - marg(0, 1).real()) <= 3.5 * se_c[i] + 1e-12) ++within;
  }
  REQUIRE(within >= static_cast<int>(0.9 * grid.size()));
}

TEST_CASE("conditional states stay separable across the monitored cut", "[trajectories]") {
  // Bipartite dephasing: exactly product at every sample.
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  const auto grid = qcm::make_grid(2.0, 0.05);
  qcm::TrajectoryConfig cfg;
  cfg.seed = 4;
  const auto rec = qcm::run_trajectory(m, grid, cfg);
  const auto rep = qcm::check_separability(rec, {{0}, {1}});
  REQUIRE(rep.deviations.size() == rec.states.size());
  REQUIRE(rep.max_deviation < 1e-10);

  // Tripartite: the (system+buffer) | ancilla cut stays product, while the
  // full three-way product fails between collisions.
  const qcm::ModelSpec tri = qcm::tripartite_dephasing(1.0, 6.0, 2.0);
  const auto rec3 = qcm::run_trajectory(tri, grid, cfg);
  REQUIRE(qcm::check_separability(rec3, {{0, 2}, {1}}).max_deviation < 1e-10);

  const qcm::DensityMatrix driven = qcm::conditional_evolve(tri.bundle, tri.initial, 0.5);
  REQUIRE(qcm::separability_deviation(driven, {{0}, {1}, {2}}) > 0.1);

  // Negative control: a maximally entangled state is far from any product.
  ComplexMatrix bell = ComplexMatrix::Zero(4, 4);
  bell(0, 0) = bell(0, 3) = bell(3, 0) = bell(3, 3) = 0.5;
  qcm::TrajectoryRecord fake;
  fake.states.push_back({bell, Factorization{2, 2}});
  REQUIRE(qcm::check_separability(fake, {{0}, {1}}).max_deviation > 0.5);

  // Partitions must cover the factors.
  REQUIRE_THROWS_AS(qcm::separability_deviation(rec.states[0], {{0}}), qcm::config_error);
}
