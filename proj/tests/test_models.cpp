// Built-in models: constructor validation, the factory, initial-state
// assembly, and the closed-form reference expressions (checked against
// independently computed high-precision values and against the embedded
// master equation).
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include "qcm/dynamics.hpp"
#include "qcm/models.hpp"

using qcm::Complex;
using qcm::ComplexMatrix;
using qcm::ComplexVector;
using qcm::Factorization;

namespace {

double maxabs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("closed forms reproduce independently computed reference values", "[models]") {
  // Waiting-time density of the coherent clock, gamma=1, Delta=6.
  REQUIRE(std::abs(qcm::closed_form::coherent_wtd(0.3, 1.0, 6.0) - 0.52918034663718205) < 1e-13);
  REQUIRE(std::abs(qcm::closed_form::coherent_wtd(0.7, 1.0, 6.0) - 0.53325536009949692) < 1e-13);
  REQUIRE(std::abs(qcm::closed_form::coherent_wtd(2.0, 1.0, 6.0) - 0.033205588310159358) < 1e-13);
  REQUIRE(std::abs(qcm::closed_form::coherent_wtd(5.0, 1.0, 6.0) - 0.039242362973398982) < 1e-13);
  REQUIRE(qcm::closed_form::coherent_wtd(0.0, 1.0, 6.0) == 0.0);

  // Memory kernel of the coherent clock.
  REQUIRE(std::abs(qcm::closed_form::coherent_kernel(0.3, 1.0, 6.0) - 2.3357757939618149) < 1e-12);
  REQUIRE(std::abs(qcm::closed_form::coherent_kernel(0.7, 1.0, 6.0) + 1.5449139103005478) < 1e-12);
  REQUIRE(std::abs(qcm::closed_form::coherent_kernel(2.0, 1.0, 6.0) + 0.36536108067994588) < 1e-12);
  REQUIRE(qcm::closed_form::coherent_kernel(0.0, 1.0, 6.0) == 0.0);

  // Coherence decay ratio of the coherent model.
  REQUIRE(std::abs(qcm::closed_form::coherent_coherence_ratio(0.5, 1.0, 6.0) -
                   0.60719514033824196) < 1e-13);
  REQUIRE(std::abs(qcm::closed_form::coherent_coherence_ratio(1.3, 1.0, 6.0) -
                   0.38846696959390292) < 1e-13);
  REQUIRE(std::abs(qcm::closed_form::coherent_coherence_ratio(3.0, 1.0, 6.0) +
                   0.006063421888682502) < 1e-13);
  REQUIRE(qcm::closed_form::coherent_coherence_ratio(0.0, 1.0, 6.0) == 1.0);

  // Laplace-domain values are simple rationals at u=1, gamma=1, Delta=6.
  REQUIRE(std::abs(qcm::closed_form::coherent_wtd_laplace(1.0, 1.0, 6.0) - 6.0 / 19.0) < 1e-15);
  REQUIRE(std::abs(qcm::closed_form::coherent_kernel_laplace(1.0, 1.0, 6.0) - 6.0 / 13.0) < 1e-15);

  // Incoherent clock.
  REQUIRE(std::abs(qcm::closed_form::incoherent_wtd(0.4, 1.0, 0.5) - 0.14841070704234249) < 1e-14);
  REQUIRE(std::abs(qcm::closed_form::incoherent_wtd(1.5, 1.0, 0.5) - 0.24923639259258487) < 1e-14);
  REQUIRE(std::abs(qcm::closed_form::incoherent_wtd_laplace(1.0, 1.0, 2.0) - 1.0 / 3.0) < 1e-15);
  REQUIRE(std::abs(qcm::closed_form::incoherent_kernel_laplace(1.0, 1.0, 2.0) - 0.5) < 1e-15);

  // Coinciding repump and detection rates: w(t) = r^2 t exp(-r t), r = gamma.
  REQUIRE(std::abs(qcm::closed_form::incoherent_wtd(0.8, 1.0, 1.0) - 0.8 * std::exp(-0.8)) <
          1e-13);
  // ... and the general branch is continuous into that limit.
  REQUIRE(std::abs(qcm::closed_form::incoherent_wtd(0.8, 1.0, 1.0 + 1e-13) -
                   qcm::closed_form::incoherent_wtd(0.8, 1.0, 1.0)) < 1e-10);

  // Erlang clock: geometric Laplace factor and the m=2 density.
  REQUIRE(std::abs(qcm::closed_form::erlang_wtd_laplace(1.0, 1.0, 2) - 0.125) < 1e-15);
  for (double t : {0.5, 1.0, 3.0}) {
    const double expect = 0.5 * t * t * std::exp(-t);
    REQUIRE(std::abs(qcm::closed_form::erlang_wtd(t, 1.0, 2) - expect) < 1e-14);
  }

  REQUIRE(qcm::closed_form::cosine_decoherence(0.7, 2.0) == std::cos(1.4));
}

TEST_CASE("closed-form coherence ratios match the embedded master equation", "[models]") {
  // Both clock variants, propagated exactly on the bipartite space; the
  // system coherence must follow c0 times the closed-form ratio.
  struct Case {
    qcm::ModelSpec model;
    double (*ratio)(double, double, double);
    double p1, p2;
  };
  const Case cases[] = {
      {qcm::dephasing_coherent(1.0, 6.0), &qcm::closed_form::coherent_coherence_ratio, 1.0, 6.0},
      {qcm::dephasing_incoherent(1.0, 0.5), &qcm::closed_form::incoherent_coherence_ratio, 1.0,
       0.5},
  };
  for (const auto& c : cases) {
    const auto grid = qcm::make_grid(5.0, 0.01);
    const auto joint = qcm::propagate_master(c.model.bundle.total, c.model.initial, grid);
    const Complex c0 = c.model.initial_system(0, 1);
    double worst = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const ComplexMatrix marg = qcm::partial_trace(joint[i].mat, c.model.bundle.fact, {0}).mat;
      const Complex expect = c0 * c.ratio(grid.t(i), c.p1, c.p2);
      worst = std::max(worst, std::abs(marg(0, 1) - expect));
    }
    INFO("model " << c.model.name);
    REQUIRE(worst < 1e-9);
  }
}

TEST_CASE("model constructors validate their parameters", "[models]") {
  REQUIRE_THROWS_AS(qcm::dephasing_coherent(0.0, 6.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::dephasing_coherent(-1.0, 6.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::dephasing_coherent(std::nan(""), 6.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::dephasing_coherent(1.0, -0.5), qcm::config_error);
  REQUIRE_NOTHROW(qcm::dephasing_coherent(1.0, 0.0));  // dark clock is allowed

  REQUIRE_THROWS_AS(qcm::dephasing_incoherent(1.0, 0.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::dephasing_incoherent(1.0, -0.3), qcm::config_error);

  REQUIRE_THROWS_AS(qcm::erlang_chain(1.0, 0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::erlang_chain(1.0, -2), qcm::config_error);
  REQUIRE_NOTHROW(qcm::erlang_chain(1.0, 1));

  REQUIRE_THROWS_AS(qcm::depolarizing(1.0, 6.0, 0.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::depolarizing(1.0, 6.0, 1.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::depolarizing(1.0, 6.0, -0.2), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::depolarizing(1.0, 6.0, 1.7), qcm::config_error);
  REQUIRE_NOTHROW(qcm::depolarizing(1.0, 6.0, 0.3));

  REQUIRE_THROWS_AS(qcm::tripartite_dephasing(1.0, 6.0, -2.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::tripartite_dephasing(1.0, -6.0, 2.0), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::tripartite_classical(1.0, 0.0, 2.0), qcm::config_error);
  // The classical variant allows any finite coupling sign.
  REQUIRE_NOTHROW(qcm::tripartite_classical(1.0, 0.5, -2.0));
  REQUIRE_THROWS_AS(qcm::tripartite_classical(1.0, 0.5, std::nan("")), qcm::config_error);

  // Invalid initial system states are rejected at construction.
  ComplexMatrix bad = ComplexMatrix::Zero(2, 2);
  bad(0, 0) = 2.0;
  REQUIRE_THROWS_AS(qcm::dephasing_coherent(1.0, 6.0, bad), qcm::numeric_error);
}

TEST_CASE("the model factory names offending keys and lists valid models", "[models]") {
  const ComplexMatrix x = qcm::xplus_state();

  try {
    qcm::make_model("no_such_model", {}, x);
    FAIL("expected a throw");
  } catch (const qcm::config_error& e) {
    const std::string msg = e.what();
    for (const auto& name : qcm::model_names())
      REQUIRE(msg.find(name) != std::string::npos);
  }

  try {
    qcm::make_model("dephasing_coherent", {{"gamma", 1.0}}, x);
    FAIL("expected a throw");
  } catch (const qcm::config_error& e) {
    REQUIRE(std::string(e.what()).find("model.delta") != std::string::npos);
  }

  try {
    qcm::make_model("dephasing_coherent", {{"gamma", 1.0}, {"delta", 6.0}, {"foo", 1.0}}, x);
    FAIL("expected a throw");
  } catch (const qcm::config_error& e) {
    REQUIRE(std::string(e.what()).find("model.foo") != std::string::npos);
  }

  REQUIRE_THROWS_AS(qcm::make_model("erlang_chain", {{"gamma", 1.0}, {"m", 2.5}}, x),
                    qcm::config_error);

  // Happy path: the factory matches the direct constructor.
  const qcm::ModelSpec via_factory =
      qcm::make_model("dephasing_coherent", {{"gamma", 1.0}, {"delta", 6.0}}, x);
  const qcm::ModelSpec direct = qcm::dephasing_coherent(1.0, 6.0);
  REQUIRE(maxabs(via_factory.bundle.total.mat - direct.bundle.total.mat) == 0.0);
  REQUIRE(maxabs(via_factory.initial.mat - direct.initial.mat) == 0.0);

  const qcm::ModelSpec tri = qcm::make_model(
      "tripartite_dephasing", {{"gamma", 1.0}, {"delta", 6.0}, {"lambda", 2.0}}, x);
  REQUIRE(tri.initial.mat.rows() == 8);
  REQUIRE(tri.tripartite);
  REQUIRE(qcm::model_names().size() == 6);
}

TEST_CASE("initial states are assembled as system (x) reset (x) buffer", "[models]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 6.0);
  REQUIRE(maxabs(m.initial.mat -
                 qcm::kron(qcm::xplus_state(), m.ancilla.reset_state())) == 0.0);
  REQUIRE(maxabs(m.initial_system - qcm::xplus_state()) == 0.0);

  const qcm::ModelSpec tri = qcm::tripartite_dephasing(1.0, 6.0, 2.0);
  REQUIRE(maxabs(tri.initial.mat -
                 qcm::kron(qcm::kron(qcm::xplus_state(), tri.ancilla.reset_state()),
                           qcm::basis_projector(2, 0))) == 0.0);

  // Named initial states.
  REQUIRE(maxabs(qcm::named_system_state("xplus", 2) - qcm::xplus_state()) == 0.0);
  REQUIRE(qcm::named_system_state("plus", 2)(0, 0) == Complex(1, 0));
  REQUIRE(qcm::named_system_state("minus", 2)(1, 1) == Complex(1, 0));
  REQUIRE(qcm::named_system_state("yplus", 2)(0, 1) == Complex(0, -0.5));
  REQUIRE(maxabs(qcm::named_system_state("mixed", 3) -
                 ComplexMatrix(ComplexMatrix::Identity(3, 3) / 3.0)) == 0.0);
  REQUIRE_THROWS_AS(qcm::named_system_state("sideways", 2), qcm::config_error);
  REQUIRE_THROWS_AS(qcm::named_system_state("xplus", 3), qcm::config_error);

  // Helper observables cover populations and the upper coherence.
  const auto obs = qcm::default_observables(m);
  REQUIRE(obs.size() == 3);
  REQUIRE(obs[0].label == "pop0");
  REQUIRE(obs[1].label == "pop1");
  REQUIRE(obs[2].label == "coh01");

  // Structure helpers.
  REQUIRE(maxabs(m.system_free().mat) == 0.0);
  ComplexMatrix cs_expect = ComplexMatrix::Zero(4, 4);
  cs_expect(1, 1) = -2.0;
  cs_expect(2, 2) = -2.0;
  REQUIRE(maxabs(m.collision_superop().mat - cs_expect) < 1e-15);
  REQUIRE_THROWS_AS(m.joint_sb(), qcm::config_error);
}

TEST_CASE("a dark clock never fires", "[models]") {
  const qcm::ModelSpec m = qcm::dephasing_coherent(1.0, 0.0);
  const auto grid = qcm::make_grid(5.0, 0.01);
  const auto ts = qcm::waiting_time_density(m.ancilla, grid);
  for (double v : ts.channel("w")) REQUIRE(std::abs(v) < 1e-14);
  for (double v : ts.channel("P0")) REQUIRE(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("depolarizing collisions share the coherent clock and mix fully", "[models]") {
  const qcm::ModelSpec dep = qcm::depolarizing(1.0, 6.0, 0.3);
  const qcm::ModelSpec coh = qcm::dephasing_coherent(1.0, 6.0);

  // Identical ancilla: identical waiting-time statistics.
  const auto grid = qcm::make_grid(2.0, 0.01);
  const auto wd = qcm::waiting_time_density(dep.ancilla, grid).channel("w");
  const auto wc = qcm::waiting_time_density(coh.ancilla, grid).channel("w");
  for (std::size_t i = 0; i < wd.size(); ++i) REQUIRE(std::abs(wd[i] - wc[i]) < 1e-15);

  // The system marginal relaxes to the maximally mixed state.
  const auto relax_grid = qcm::make_grid(35.0, 0.02);
  const auto joint = qcm::propagate_master(dep.bundle.total, dep.initial, relax_grid);
  const ComplexMatrix marg = qcm::partial_trace(joint.back().mat, dep.bundle.fact, {0}).mat;
  REQUIRE(maxabs(marg - ComplexMatrix(0.5 * ComplexMatrix::Identity(2, 2))) < 1e-6);
}

TEST_CASE("erlang chains accept custom collision operators", "[models]") {
  const qcm::ModelSpec custom = qcm::erlang_chain(1.0, 2, qcm::KrausSet{{qcm::qubit::pauli_x()}});
  const qcm::ModelSpec plain = qcm::erlang_chain(1.0, 2);

  // The clock is unchanged...
  const auto grid = qcm::make_grid(2.0, 0.01);
  const auto w1 = qcm::waiting_time_density(custom.ancilla, grid).channel("w");
  const auto w2 = qcm::waiting_time_density(plain.ancilla, grid).channel("w");
  for (std::size_t i = 0; i < w1.size(); ++i) REQUIRE(w1[i] == w2[i]);

  // ...but detections now conjugate the system with sigma_x.
  ComplexMatrix rho_s(2, 2);
  rho_s << Complex(0.6, 0), Complex(0.1, 0.2), Complex(0.1, -0.2), Complex(0.4, 0);
  ComplexMatrix rho_a = ComplexMatrix::Zero(3, 3);
  rho_a(0, 0) = 1.0;
  const auto post = custom.bundle.measurement({qcm::kron(rho_s, rho_a), custom.bundle.fact});
  const ComplexMatrix sys = qcm::partial_trace(post.mat, custom.bundle.fact, {0}).mat;
  REQUIRE(maxabs(sys - ComplexMatrix(qcm::qubit::pauli_x() * rho_s * qcm::qubit::pauli_x())) <
          1e-13);

  // The numeric density matches the m=2 closed form.
  const auto fine = qcm::make_grid(5.0, 1e-3);
  const auto w = qcm::waiting_time_density(plain.ancilla, fine).channel("w");
  for (int i : {500, 1000, 3000}) {
    REQUIRE(std::abs(w[i] - qcm::closed_form::erlang_wtd(fine.t(i), 1.0, 2)) < 1e-10);
  }
}

TEST_CASE("tripartite variants share geometry and inherit their clocks", "[models]") {
  const qcm::ModelSpec td = qcm::tripartite_dephasing(1.0, 6.0, 2.0);
  const qcm::ModelSpec tc = qcm::tripartite_classical(1.0, 0.5, 2.0);

  // Same joint coupling: identical intercollision propagators.
  const auto g1 = qcm::intercollision_propagator(td.joint_sb(), td.b0, 0.4);
  const auto g2 = qcm::intercollision_propagator(tc.joint_sb(), tc.b0, 0.4);
  REQUIRE(maxabs(g1.mat - g2.mat) < 1e-13);

  // The classical clock equals the bipartite incoherent one in Laplace domain.
  for (double u : {0.5, 1.0, 2.0}) {
    REQUIRE(std::abs(qcm::laplace_wtd(tc.ancilla, u) -
                     qcm::closed_form::incoherent_wtd_laplace(u, 1.0, 0.5)) < 1e-12);
    REQUIRE(std::abs(qcm::laplace_wtd(td.ancilla, u) -
                     qcm::closed_form::coherent_wtd_laplace(u, 1.0, 6.0)) < 1e-12);
  }
}
