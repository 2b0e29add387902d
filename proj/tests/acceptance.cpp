// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance [--allow-fail 7,9]
// Exit status is 0 when every failing criterion is on the allow list.

#include "fixtures.hpp"
#include "linear_oracle.hpp"
#include "oracles.hpp"

#include "lmp/ac_oracle.hpp"
#include "lmp/report.hpp"
#include "lmp/validation.hpp"

#include <chrono>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <string>

namespace {

constexpr double kParseSeconds = 1.0;
constexpr int kFlowSamples = 100;
constexpr double kFlowTol = 1e-10;
constexpr double kFlowSeconds = 5.0;
constexpr double kLfEps = 1e-4;
constexpr int kPriceBuses = 10;
constexpr double kPriceEps = 1e-3;
constexpr double kPriceRelTol = 5e-3;
constexpr unsigned kPriceSeed = 20190101;
constexpr double kClosureTol = 1e-12;
constexpr int kMaxSolves = 10;
constexpr double kLossTol = 1e-4;
constexpr double kSolveSeconds = 30.0;
constexpr double kLosslessTol = 1e-8;
constexpr int kQpSeeds = 200;
constexpr double kQpPrimalTol = 1e-7;
constexpr double kQpDualTol = 1e-6;
constexpr double kAnalyticTol = 4 * std::numeric_limits<double>::epsilon();  // "exact" up to rounding
constexpr double kAuditVoltageTol = 0.02;
constexpr double kAuditFlowTol = 0.05;
constexpr double kAeaTol = 1e-15;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

struct Line {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

lmp::ModelOptions scenario(double lo, double hi) {
  lmp::ModelOptions o;
  o.v_min_override = lo;
  o.v_max_override = hi;
  o.loss_tolerance = kLossTol;
  return o;
}

double closure_error(const lmp::LmpResult& r) {
  double err = 0.0;
  for (const lmp::PriceComponents* c : {&r.almp, &r.rlmp})
    err = std::max(err, (c->energy + c->congestion + c->voltage + c->loss - c->total).cwiseAbs().maxCoeff());
  return err;
}

// Every LmpResult produced by this run is recorded here for criterion 5.
std::vector<std::pair<std::string, double>> g_closure;

lmp::LmpResult run(const std::string& tag, const lmp::Network& net, const lmp::ModelOptions& o) {
  lmp::LmpResult r = lmp::iterate(net, o);
  g_closure.emplace_back(tag, closure_error(r));
  return r;
}

Line fixture_integrity() {
  const auto t0 = Clock::now();
  const lmp::Network net = fixture::case118();
  const double secs = seconds_since(t0);
  const bool ok = net.num_buses() == 118 && net.num_branches() == 186 && secs < kParseSeconds;
  return {1, "fixture_integrity", ok,
          "N=" + std::to_string(net.num_buses()) + " M=" + std::to_string(net.num_branches()) + " parse " +
              sci(secs) + " s"};
}

Line flow_identity(const lmp::Network& net) {
  const auto t0 = Clock::now();
  const auto bundle = lmp::build_sensitivity(net);
  const auto lin = oracle::linearize(net);
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double err_state = 0.0, err_oracle = 0.0;
  for (int t = 0; t < kFlowSamples; ++t) {
    lmp::InjectionVector inj{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) inj.p(i) = u(rng), inj.q(i) = u(rng);
    const lmp::FlowVector gsdf = lmp::eval_branch_flows(bundle, inj);
    // X [P; Q] -> state -> branch flows
    const lmp::FlowVector direct = lmp::flows_from_state(bundle, lmp::linear_state(bundle.x_matrix, inj));
    err_state = std::max({err_state, (gsdf.p_flow - direct.p_flow).cwiseAbs().maxCoeff(),
                          (gsdf.q_flow - direct.q_flow).cwiseAbs().maxCoeff()});
    // Same path rebuilt from raw branch data with a fresh factorization.
    Eigen::VectorXd pq(2 * n);
    pq << inj.p, inj.q;
    const auto [p, q] =
        oracle::direct_flows(lin, oracle::solve_state(lin, static_cast<Eigen::Index>(bundle.ref_bus), pq));
    err_oracle = std::max({err_oracle, (gsdf.p_flow - p).cwiseAbs().maxCoeff(), (gsdf.q_flow - q).cwiseAbs().maxCoeff()});
  }
  const double secs = seconds_since(t0);
  const bool ok = err_state <= kFlowTol && err_oracle <= kFlowTol && secs < kFlowSeconds;
  return {2, "flow_identity", ok,
          std::to_string(kFlowSamples) + " samples, max abs " + sci(err_state) + " (independent rebuild " +
              sci(err_oracle) + "), " + sci(secs) + " s"};
}

Line loss_factor_oracle(const lmp::LmpResult& r) {
  const auto bundle = lmp::build_sensitivity(r.network);
  const auto inj = lmp::net_injections(r.network, lmp::bus_dispatch(r.network, r.p_gen, r.q_gen), r.loss);
  const auto c = lmp::check_loss_factor_finite_difference(bundle, r.network, inj, kLfEps);
  return {3, "loss_factor_oracle", c.passed, "all 2N factors at the priced normal-scenario point, " + c.detail};
}

Line shadow_prices(const lmp::LmpResult& r, const lmp::ModelOptions& o) {
  const auto probes = lmp::probe_prices(r, o, kPriceSeed, kPriceBuses, kPriceEps);
  int used = 0, skipped = 0;
  for (const auto& p : probes) (p.degenerate ? skipped : used)++;
  const auto c = lmp::check_shadow_prices(probes, kPriceBuses, kPriceRelTol);
  return {4, "shadow_price_oracle", c.passed && used == kPriceBuses,
          c.detail + ", " + std::to_string(skipped) + " degenerate skipped"};
}

Line closure() {
  double worst = 0.0;
  std::string where;
  for (const auto& [tag, err] : g_closure)
    if (err >= worst) worst = err, where = tag;
  return {5, "decomposition_closure", worst <= kClosureTol,
          std::to_string(g_closure.size()) + " runs, max residual " + sci(worst) + " (" + where + ")"};
}

Line convergence(const lmp::Network& net, lmp::LmpResult* out) {
  const auto t0 = Clock::now();
  const lmp::ModelOptions o = scenario(0.95, 1.05);
  *out = run("normal", net, o);
  const double secs = seconds_since(t0);
  const auto& t = out->trace;
  const double last = std::abs(t.back().p_loss - t[t.size() - 2].p_loss);
  const bool ok = static_cast<int>(t.size()) <= kMaxSolves && last < kLossTol && secs < kSolveSeconds;
  return {6, "iteration_convergence", ok,
          std::to_string(t.size()) + " solves, final |dP_loss| " + sci(last) + " pu, " + sci(secs) + " s"};
}

Line lossless(const lmp::Network& net) {
  lmp::Network z = net;
  for (auto& b : z.branches) b.r = 0.0;
  lmp::ModelOptions with = scenario(0.95, 1.05), without = with;
  without.loss_enabled = false;
  const auto a = run("zero-r", z, with);
  const auto b = run("zero-r no-loss", z, without);
  const double lf = std::max(a.loss.lf_p.cwiseAbs().maxCoeff(), a.loss.lf_q.cwiseAbs().maxCoeff());
  const double df = std::max((a.loss.df_p.array() - 1.0).abs().maxCoeff(), (a.loss.df_q.array() - 1.0).abs().maxCoeff());
  const double comp = std::max(a.almp.loss.cwiseAbs().maxCoeff(), a.rlmp.loss.cwiseAbs().maxCoeff());
  const double base = a.network.base_mva;
  const double dal = (a.almp.total - b.almp.total).cwiseAbs().maxCoeff() / base;
  const double drl = (a.rlmp.total - b.rlmp.total).cwiseAbs().maxCoeff() / base;
  const bool ok = lf == 0.0 && df == 0.0 && comp == 0.0 && dal <= kLosslessTol && drl <= kLosslessTol;
  std::ostringstream s;
  s << "max|LF| " << sci(lf) << ", max|DF-1| " << sci(df) << ", loss components " << sci(comp) << ", ALMP diff "
    << sci(dal) << " $/MWh, RLMP diff " << sci(drl) << " $/MVArh (reactive loss " << sci(a.loss.q_loss_total * base)
    << " MVAr remains with R=0)";
  return {7, "lossless_degeneration", ok, s.str()};
}

bool near(double a, double b) { return std::abs(a - b) <= kAnalyticTol * std::abs(b); }

Line qp_battery() {
  bool analytic = true;
  {
    lmp::QpProblem qp = lmp::QpProblem::with_vars(1);
    qp.quadratic_diag << 1.0;
    qp.var_lower << 1.0;
    const auto s = lmp::solve_qp(qp);
    analytic = analytic && near(s.primal(0), 1.0) && near(s.bound_duals(0), 2.0);
  }
  {
    lmp::QpProblem qp = lmp::QpProblem::with_vars(2);
    qp.quadratic_diag << 0.5, 0.5;
    qp.add_equality(Eigen::RowVector2d(1.0, 1.0), 1.0);
    const auto s = lmp::solve_qp(qp);
    analytic = analytic && near(s.primal(0), 0.5) && near(s.primal(1), 0.5) && near(s.eq_duals(0), 0.5);
  }
  int compared = 0, degenerate = 0, bad = 0;
  double perr = 0.0, derr = 0.0;
  for (unsigned seed = 1; seed <= kQpSeeds; ++seed) {
    std::mt19937 rng(seed);
    const lmp::QpProblem qp = oracle::random_qp(rng);
    const auto ref = oracle::enumerate_qp(qp);
    if (!ref) {
      ++bad;
      continue;
    }
    const auto s = lmp::solve_qp(qp);
    if (ref->degenerate) {
      ++degenerate;
      continue;
    }
    ++compared;
    perr = std::max(perr, (s.primal - ref->x).cwiseAbs().maxCoeff());
    double d = (s.bound_duals - ref->bound_duals).cwiseAbs().maxCoeff();
    if (qp.num_equalities()) d = std::max(d, (s.eq_duals - ref->eq_duals).cwiseAbs().maxCoeff());
    if (qp.num_ranges()) d = std::max(d, (s.range_duals - ref->range_duals).cwiseAbs().maxCoeff());
    derr = std::max(derr, d);
  }
  const bool ok = analytic && bad == 0 && compared > 0 && perr <= kQpPrimalTol && derr <= kQpDualTol;
  return {8, "qp_oracle_battery", ok,
          std::string("analytic ") + (analytic ? "exact" : "MISMATCH") + ", " + std::to_string(compared) +
              " compared, " + std::to_string(degenerate) + " degenerate, primal " + sci(perr) + ", dual " + sci(derr)};
}

Line linearization_audit(const lmp::Network& net) {
  const auto pf = lmp::newton_pf(net, lmp::base_case_spec(net));
  if (!pf.converged) return {9, "linearization_audit", false, "Newton did not converge"};
  const auto bundle = lmp::build_sensitivity(net);
  const auto ac = lmp::branch_flows_ac(pf, net);
  // Linear model fed the AC net injections, with nodal loss demand made
  // consistent with the linear flows by fixed-point iteration.
  const lmp::InjectionVector gross{pf.injection.real(), pf.injection.imag()};
  lmp::InjectionVector inj = gross;
  lmp::FlowVector flows = lmp::eval_branch_flows(bundle, inj);
  for (int k = 0; k < 50; ++k) {
    const auto fnd = lmp::compute_fnd(flows, net);
    inj.p = gross.p - fnd.fnd_p;
    inj.q = gross.q - fnd.fnd_q;
    flows = lmp::eval_branch_flows(bundle, inj);
  }
  const Eigen::VectorXd v = lmp::eval_voltages(bundle.x_matrix, inj);
  Eigen::Index iv = 0, ip = 0;
  const double dv = (v - pf.v_mag).cwiseAbs().maxCoeff(&iv);
  const double dp = (flows.p_flow - ac.s_from.real()).cwiseAbs().maxCoeff(&ip);
  const double dp_mid = (flows.p_flow - 0.5 * (ac.s_from.real() - ac.s_to.real())).cwiseAbs().maxCoeff();
  const auto& br = net.branches[static_cast<std::size_t>(ip)];
  std::ostringstream s;
  s << "max |dV| " << sci(dv) << " pu at bus " << net.buses[static_cast<std::size_t>(iv)].id << " (tol "
    << kAuditVoltageTol << "), max |dP| " << sci(dp) << " pu on " << br.from_bus << "-" << br.to_bus << " (tol "
    << kAuditFlowTol << "; mid-line " << sci(dp_mid) << ")";
  return {9, "linearization_audit", dv <= kAuditVoltageTol && dp <= kAuditFlowTol, s.str()};
}

Line tight_property(const lmp::Network& net) {
  const auto r = run("tight", net, scenario(0.97, 1.03));
  const double mean = r.rlmp.total.mean();
  double up_sum = 0.0, lo_sum = 0.0;
  int up = 0, lo = 0, up_above = 0, lo_below = 0;
  for (Eigen::Index i = 0; i < r.voltages.size(); ++i) {
    const double rl = r.rlmp.total(i);
    if (r.voltages(i) >= 1.03 - lmp::kBindingTolerance) {
      ++up, up_sum += rl;
      if (rl > mean) ++up_above;
    } else if (r.voltages(i) <= 0.97 + lmp::kBindingTolerance) {
      ++lo, lo_sum += rl;
      if (rl < mean) ++lo_below;
    }
  }
  const double base = r.network.base_mva;
  const bool any = up + lo > 0;
  const bool up_ok = up == 0 || up_sum / up <= mean;
  const bool lo_ok = lo == 0 || lo_sum / lo >= mean;
  std::ostringstream s;
  s << up << " buses at upper bound (mean RLMP " << (up ? up_sum / up / base : 0.0) << "), " << lo
    << " at lower (mean " << (lo ? lo_sum / lo / base : 0.0) << "), network mean " << mean / base
    << " $/MVArh; per-bus exceptions: " << up_above << " upper, " << lo_below << " lower";
  return {10, "tight_scenario_property", any && up_ok && lo_ok, s.str()};
}

Line aea_arithmetic() {
  const double direct = lmp::aea(Eigen::Vector2d(101.0, 103.0), Eigen::Vector2d(100.0, 100.0));
  const double tables = lmp::aea_tables(lmp::parse_price_table("bus_id,almp\n1,101\n2,103\n"),
                                        lmp::parse_price_table("bus_id,almp\n2,100\n1,100\n"));
  const bool ok = std::abs(direct - 0.02) <= kAeaTol && std::abs(tables - 0.02) <= kAeaTol;
  char buf[160];
  std::snprintf(buf, sizeof buf, "synthetic (101,103) vs (100,100): %.6f / %.6f; IEEE-118 figure needs a user-supplied benchmark CSV",
                direct, tables);
  return {11, "aea_metric", ok, buf};
}

std::set<int> parse_allow(int argc, char** argv) {
  std::set<int> out;
  for (int a = 1; a + 1 < argc; ++a) {
    if (std::string(argv[a]) != "--allow-fail") continue;
    std::stringstream ss(argv[a + 1]);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.insert(std::stoi(tok));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::set<int> allow = parse_allow(argc, argv);
  std::vector<Line> lines;
  try {
    lines.push_back(fixture_integrity());
    const lmp::Network net = fixture::case118();
    lines.push_back(flow_identity(net));
    lmp::LmpResult normal;
    Line conv = convergence(net, &normal);
    lines.push_back(loss_factor_oracle(normal));
    lines.push_back(shadow_prices(normal, scenario(0.95, 1.05)));
    Line lossless_line = lossless(net);
    Line tight_line = tight_property(net);
    run("loose", net, scenario(0.90, 1.10));
    lmp::ModelOptions light = scenario(0.95, 1.05);
    light.load_scale = 0.95;
    run("normal 0.95 load", net, light);
    lines.push_back(closure());
    lines.push_back(conv);
    lines.push_back(lossless_line);
    lines.push_back(qp_battery());
    lines.push_back(linearization_audit(net));
    lines.push_back(tight_line);
    lines.push_back(aea_arithmetic());
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 3;
  }

  int failed = 0, unexpected = 0;
  for (const Line& l : lines) {
    const char* tag = l.passed ? "PASS" : (allow.count(l.id) ? "FAIL (known)" : "FAIL");
    std::printf("[%s] criterion %d %s: %s\n", tag, l.id, l.name.c_str(), l.detail.c_str());
    if (!l.passed) ++failed, unexpected += allow.count(l.id) ? 0 : 1;
  }
  std::printf("%zu criteria, %d failed, %d not on the known-failure list\n", lines.size(), failed, unexpected);
  return unexpected ? 1 : 0;
}
