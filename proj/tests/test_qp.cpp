#include "oracles.hpp"

#include "lmp/qp_solver.hpp"

#include <doctest.h>
#include <sstream>

using lmp::kInf;
using lmp::QpProblem;

TEST_SUITE("qp_solver") {

TEST_CASE("single bound: min x^2 with x >= 1") {
  QpProblem qp = QpProblem::with_vars(1);
  qp.quadratic_diag << 1.0;
  qp.var_lower << 1.0;
  const auto s = lmp::solve_qp(qp);
  CHECK(s.primal(0) == doctest::Approx(1.0).epsilon(1e-12));
  // gradient 2x = 2 balanced by the lower-bound multiplier
  CHECK(s.bound_duals(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.objective == doctest::Approx(1.0));
}

TEST_CASE("upper bound multiplier is negative") {
  QpProblem qp = QpProblem::with_vars(1);
  qp.quadratic_diag << 1.0;
  qp.linear_cost << -6.0;
  qp.var_upper << 2.0;
  const auto s = lmp::solve_qp(qp);
  CHECK(s.primal(0) == doctest::Approx(2.0));
  CHECK(s.bound_duals(0) == doctest::Approx(-2.0));
}

TEST_CASE("equality dual: half sum of squares on x + y = 1") {
  QpProblem qp = QpProblem::with_vars(2);
  qp.quadratic_diag << 0.5, 0.5;
  Eigen::RowVectorXd row(2);
  row << 1.0, 1.0;
  qp.add_equality(row, 1.0);
  const auto s = lmp::solve_qp(qp);
  CHECK(s.primal(0) == doctest::Approx(0.5));
  CHECK(s.primal(1) == doctest::Approx(0.5));
  CHECK(s.eq_duals(0) == doctest::Approx(0.5));
  CHECK(s.active_set.empty());
}

TEST_CASE("unconstrained minimum") {
  QpProblem qp = QpProblem::with_vars(3);
  qp.quadratic_diag << 1.0, 2.0, 4.0;
  qp.linear_cost << -2.0, 4.0, 8.0;
  const auto s = lmp::solve_qp(qp);
  CHECK(s.primal(0) == doctest::Approx(1.0));
  CHECK(s.primal(1) == doctest::Approx(-1.0));
  CHECK(s.primal(2) == doctest::Approx(-1.0));
  CHECK(s.iterations >= 0);
}

TEST_CASE("infeasible problem carries a Farkas certificate") {
  QpProblem qp = QpProblem::with_vars(2);
  qp.quadratic_diag << 1.0, 1.0;
  Eigen::RowVectorXd row(2);
  row << 1.0, 1.0;
  qp.add_equality(row, 5.0);
  qp.var_upper << 1.0, 1.0;
  try {
    lmp::solve_qp(qp);
    FAIL("expected QpInfeasible");
  } catch (const lmp::QpInfeasible& e) {
    const auto& c = e.certificate();
    Eigen::VectorXd combo = qp.eq_matrix.transpose() * c.eq + (c.bound_lower - c.bound_upper);
    if (c.range_lower.size()) combo += qp.range_matrix.transpose() * (c.range_lower - c.range_upper);
    CHECK(combo.cwiseAbs().maxCoeff() < 1e-9);
    CHECK((c.bound_upper.array() >= 0).all());
    CHECK((c.bound_lower.array() >= 0).all());
  }
}

TEST_CASE("malformed problems are rejected") {
  QpProblem qp = QpProblem::with_vars(2);
  qp.quadratic_diag << -1.0, 1.0;
  CHECK_THROWS_AS(lmp::solve_qp(qp), lmp::ArgumentError);
  qp.quadratic_diag << 1.0, 1.0;
  qp.var_lower << 2.0, 0.0;
  qp.var_upper << 1.0, 1.0;
  CHECK_THROWS_AS(lmp::solve_qp(qp), lmp::ArgumentError);
}

TEST_CASE("random problems agree with active-set enumeration") {
  int compared = 0;
  for (unsigned seed = 1; seed <= 200; ++seed) {
    std::mt19937 rng(seed);
    const QpProblem qp = oracle::random_qp(rng);
    const auto ref = oracle::enumerate_qp(qp);
    REQUIRE(ref);  // generator keeps a feasible point
    const auto s = lmp::solve_qp(qp);
    INFO("seed " << seed);
    CHECK((s.primal - ref->x).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(lmp::kkt_residual(qp, s) < 1e-8);
    if (ref->degenerate) continue;
    ++compared;
    if (qp.num_equalities()) CHECK((s.eq_duals - ref->eq_duals).cwiseAbs().maxCoeff() < 1e-6);
    if (qp.num_ranges()) CHECK((s.range_duals - ref->range_duals).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((s.bound_duals - ref->bound_duals).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(compared > 150);
}

TEST_CASE("objective scaling scales duals and keeps the primal") {
  std::mt19937 rng(77);
  const QpProblem qp = oracle::random_qp(rng);
  QpProblem scaled = qp;
  scaled.quadratic_diag *= 1000.0;
  scaled.linear_cost *= 1000.0;
  const auto a = lmp::solve_qp(qp);
  const auto b = lmp::solve_qp(scaled);
  CHECK((a.primal - b.primal).cwiseAbs().maxCoeff() < 1e-9);
  if (qp.num_equalities()) CHECK((1000.0 * a.eq_duals - b.eq_duals).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("equality dual equals the objective sensitivity") {
  for (unsigned seed = 300; seed < 320; ++seed) {
    std::mt19937 rng(seed);
    QpProblem qp = oracle::random_qp(rng);
    if (!qp.num_equalities()) continue;
    const auto base = lmp::solve_qp(qp);
    const double h = 1e-6;
    QpProblem up = qp, dn = qp;
    up.eq_rhs(0) += h;
    dn.eq_rhs(0) -= h;
    const auto su = lmp::solve_qp(up), sd = lmp::solve_qp(dn);
    if (su.active_set != base.active_set || sd.active_set != base.active_set) continue;
    INFO("seed " << seed);
    CHECK((su.objective - sd.objective) / (2 * h) == doctest::Approx(base.eq_duals(0)).epsilon(1e-5));
  }
}

TEST_CASE("kkt residual detects a perturbed solution") {
  std::mt19937 rng(5);
  const QpProblem qp = oracle::random_qp(rng);
  auto s = lmp::solve_qp(qp);
  CHECK(lmp::kkt_residual(qp, s) < 1e-8);
  s.primal(0) += 1e-3;
  CHECK(lmp::kkt_residual(qp, s) > 1e-4);
}

TEST_CASE("warm start reproduces the cold solution") {
  std::mt19937 rng(11);
  const QpProblem qp = oracle::random_qp(rng);
  const auto cold = lmp::solve_qp(qp);
  lmp::QpOptions o;
  o.warm_start = cold.active_set;
  const auto warm = lmp::solve_qp(qp, o);
  CHECK((cold.primal - warm.primal).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(warm.active_set == cold.active_set);
}

TEST_CASE("problem dump lists dimensions first") {
  QpProblem qp = QpProblem::with_vars(2);
  std::ostringstream out;
  lmp::write_problem(out, qp);
  CHECK(out.str().rfind("qp 2 0 0\n", 0) == 0);
}

}
