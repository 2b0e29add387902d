#include "fixtures.hpp"
#include "oracles.hpp"

#include "lmp/lmp_engine.hpp"
#include "lmp/validation.hpp"

#include <doctest.h>

namespace {

lmp::ModelOptions plain_update() {
  lmp::ModelOptions o;
  o.mixing_depth = 0;
  o.mixing_weight = 1.0;
  return o;
}

}  // namespace

TEST_SUITE("lmp_engine") {

TEST_CASE("model structure") {
  const lmp::Network net = fixture::two_bus();
  const auto bundle = lmp::build_sensitivity(net);
  const auto m = lmp::assemble_model(net, bundle, lmp::zero_loss_state(net, 0.2), {});
  CHECK(m.problem.num_vars() == 2);
  CHECK(m.problem.num_equalities() == 2);
  CHECK(m.problem.num_ranges() == 3);
  CHECK(m.flow_row[0] == 0);

  const lmp::Network big = fixture::case118();
  const auto bb = lmp::build_sensitivity(big);
  const auto mb = lmp::assemble_model(big, bb, lmp::zero_loss_state(big, 0.0), {});
  CHECK(mb.problem.num_vars() == 2 * 54);
  CHECK(mb.problem.num_ranges() == 186 + 118);
}

TEST_CASE("lossless two-bus price is the marginal cost") {
  lmp::ModelOptions o;
  o.loss_enabled = false;
  const auto r = lmp::iterate(fixture::two_bus(), o);
  REQUIRE(r.trace.size() == 1);
  const auto& g = r.network.generators[0];
  CHECK(r.p_gen(0) == doctest::Approx(1.0));
  CHECK(r.duals.lambda_p == doctest::Approx(g.cost_a + 2.0 * g.cost_b * r.p_gen(0)).epsilon(1e-9));
  CHECK(r.almp.total(1) == doctest::Approx(r.duals.lambda_p).epsilon(1e-9));
  CHECK(r.almp.loss.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.rlmp.loss.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.duals.mu.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-bus loss iteration follows the scalar fixed point") {
  // Active flow on the line is the load plus the half of the loss charged at bus 2:
  // f(k+1) = 1 + 0.005 f(k)^2, and each solve uses P_loss = 0.01 f^2.
  std::vector<double> expected{0.0};
  double f = 1.0;
  for (int k = 0; k < 4; ++k) {
    expected.push_back(0.01 * f * f);
    f = 1.0 + 0.005 * f * f;
  }
  lmp::ModelOptions o = plain_update();
  o.loss_tolerance = 1e-6;
  const auto r = lmp::iterate(fixture::two_bus(), o);
  // lossless solve 0, then iterations 1..4
  REQUIRE(r.trace.size() == 5);
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    INFO("solve " << k);
    CHECK(r.trace[k].p_loss == doctest::Approx(expected[k]).epsilon(1e-9));
  }
  // Converged state: P_G = DF_2 D - P_loss with DF_2 = 1 + 0.02 f.
  const double fl = r.loss.flows.p_flow(0);
  CHECK(r.p_gen(0) == doctest::Approx(1.0 + 0.02 * fl - 0.01 * fl * fl).epsilon(1e-9));
  CHECK(r.almp.total(1) == doctest::Approx(r.duals.lambda_p * (1.0 + 0.02 * fl)).epsilon(1e-9));
  CHECK(r.almp.loss(0) == 0.0);
  CHECK(r.almp.total(1) / 100.0 == doctest::Approx(22.4626).epsilon(1e-5));
}

TEST_CASE("mixed update reaches the same fixed point") {
  const double fstar = (1.0 - std::sqrt(1.0 - 0.02)) / 0.01;
  lmp::ModelOptions o;
  o.loss_tolerance = 1e-9;
  const auto r = lmp::iterate(fixture::two_bus(), o);
  CHECK(r.loss.p_loss_total == doctest::Approx(0.01 * fstar * fstar).epsilon(1e-7));
}

TEST_CASE("three-bus congestion: upper flow limit binds with a negative multiplier") {
  lmp::ModelOptions o;
  o.loss_enabled = false;
  const auto r = lmp::iterate(fixture::three_bus(), o);
  CHECK(r.flows.p_flow(1) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(r.duals.mu(1) < 0.0);
  CHECK(r.duals.mu(0) == 0.0);
  CHECK(r.almp.total(2) > r.almp.total(1));
  CHECK(r.almp.total(1) > r.almp.total(0));
  CHECK(r.almp.congestion(0) == 0.0);
  CHECK(lmp::check_complementarity(r).passed);
  CHECK(lmp::check_decomposition_closure(r).passed);

  // Same QP against the enumeration oracle.
  const auto bundle = lmp::build_sensitivity(r.network);
  const auto fs = lmp::solve_frozen(r.network, bundle, r.loss, o);
  const auto ref = oracle::enumerate_qp(fs.model.problem);
  REQUIRE(ref);
  CHECK((fs.solution.primal - ref->x).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((fs.solution.range_duals - ref->range_duals).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((fs.solution.eq_duals - ref->eq_duals).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero resistance leaves active prices at their lossless values") {
  lmp::Network net = fixture::three_bus();
  for (auto& b : net.branches) b.r = 0.0;
  lmp::ModelOptions lossy, lossless;
  lossless.loss_enabled = false;
  const auto a = lmp::iterate(net, lossy);
  const auto b = lmp::iterate(net, lossless);
  CHECK(a.trace.size() == 2);
  CHECK(a.loss.p_loss_total == 0.0);
  CHECK(a.loss.lf_p.cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.almp.total - b.almp.total).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("decomposition closes and prices match finite differences on IEEE 118") {
  lmp::ModelOptions o;
  o.v_min_override = 0.95;
  o.v_max_override = 1.05;
  const auto r = lmp::iterate(fixture::case118(), o);
  CHECK(r.trace.size() <= 10);
  CHECK(lmp::check_decomposition_closure(r).passed);
  CHECK(lmp::check_complementarity(r).passed);
  const auto probes = lmp::probe_prices(r, o, 1, 3, 1e-3);
  CHECK(lmp::check_shadow_prices(probes, 3, 5e-3).passed);
}

TEST_CASE("iteration limit raises with the trace") {
  lmp::ModelOptions o = plain_update();
  o.max_iterations = 2;
  o.loss_tolerance = 1e-12;
  try {
    lmp::iterate(fixture::two_bus(), o);
    FAIL("expected ConvergenceError");
  } catch (const lmp::ConvergenceError& e) {
    CHECK(e.trace().size() == 2);
    CHECK(e.error_class() == lmp::ErrorClass::numerical);
  }
}

TEST_CASE("infeasible demand is reported") {
  lmp::ModelOptions o;
  o.load_scale = 5.0;
  CHECK_THROWS_AS(lmp::iterate(fixture::two_bus(), o), lmp::NumericalError);
}

TEST_CASE("option checks") {
  lmp::ModelOptions o;
  o.loss_tolerance = 0.0;
  CHECK_THROWS_AS(o.check(), lmp::ArgumentError);
  o = {};
  o.mixing_weight = 1.5;
  CHECK_THROWS_AS(o.check(), lmp::ArgumentError);
  o = {};
  o.v_min_override = 1.1;
  o.v_max_override = 1.0;
  CHECK_THROWS_AS(o.check(), lmp::ArgumentError);
  lmp::Network net = fixture::two_bus();
  net.generators.clear();
  CHECK_THROWS_AS(lmp::iterate(net, {}), lmp::ValidationError);
}

TEST_CASE("average error of ALMP") {
  CHECK(lmp::aea(Eigen::Vector2d(101, 103), Eigen::Vector2d(100, 100)) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(lmp::aea(Eigen::Vector2d(5, 7), Eigen::Vector2d(5, 7)) == 0.0);
  CHECK_THROWS_WITH_AS(lmp::aea(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0), {4, 9}), "benchmark ALMP is zero at bus 9",
                       lmp::ValidationError);
  CHECK_THROWS_AS(lmp::aea(Eigen::Vector2d(1, 1), Eigen::Vector3d(1, 1, 1)), lmp::ArgumentError);
}

}
