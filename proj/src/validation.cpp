#include "lmp/validation.hpp"

#include "lmp/ac_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace lmp {

namespace {

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << x;
  return s.str();
}

CheckResult bound_check(std::string name, double err, double tol) {
  return {std::move(name), err <= tol, "max error " + fmt(err) + " (tol " + fmt(tol) + ")"};
}

Eigen::MatrixXd reduced(const Eigen::MatrixXd& a, Eigen::Index drop) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd out(n - 1, n - 1);
  for (Eigen::Index i = 0, ii = 0; i < n; ++i) {
    if (i == drop) continue;
    for (Eigen::Index j = 0, jj = 0; j < n; ++j) {
      if (j == drop) continue;
      out(ii, jj++) = a(i, j);
    }
    ++ii;
  }
  return out;
}

InjectionVector random_injection(std::mt19937& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  InjectionVector inj{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) inj.p(i) = u(rng);
  for (Eigen::Index i = 0; i < n; ++i) inj.q(i) = u(rng);
  return inj;
}

}  // namespace

CheckResult check_reduced_inverse(const SensitivityBundle& bundle) {
  const auto ref = static_cast<Eigen::Index>(bundle.ref_bus);
  const Eigen::MatrixXd c = reduced(bundle.c_matrix, ref);
  const Eigen::MatrixXd x = reduced(bundle.x_matrix, ref);
  // X carries the minus sign of [P; Q] = -C [theta; V].
  const Eigen::MatrixXd prod = -c * x;
  const double err = (prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff();
  return bound_check("reduced_inverse", err, 1e-8);
}

CheckResult check_reference_zeros(const SensitivityBundle& bundle) {
  const auto ref = static_cast<Eigen::Index>(bundle.ref_bus);
  const double err = std::max({bundle.x_matrix.row(ref).cwiseAbs().maxCoeff(),
                               bundle.x_matrix.col(ref).cwiseAbs().maxCoeff(),
                               bundle.gsdf_pp.col(ref).cwiseAbs().maxCoeff(),
                               bundle.gsdf_qp.col(ref).cwiseAbs().maxCoeff()});
  return {"reference_zeros", err == 0.0, "max entry " + fmt(err)};
}

CheckResult check_flow_identity(const SensitivityBundle& bundle, unsigned seed, int count) {
  std::mt19937 rng(seed);
  double err = 0.0;
  for (int t = 0; t < count; ++t) {
    const InjectionVector inj = random_injection(rng, bundle.num_buses());
    const FlowVector a = eval_branch_flows(bundle, inj);
    const FlowVector b = flows_from_state(bundle, linear_state(bundle.x_matrix, inj));
    err = std::max({err, (a.p_flow - b.p_flow).cwiseAbs().maxCoeff(), (a.q_flow - b.q_flow).cwiseAbs().maxCoeff()});
  }
  return bound_check("flow_identity", err, 1e-10);
}

CheckResult check_gsdf_finite_difference(const SensitivityBundle& bundle, double eps) {
  const Eigen::Index n = bundle.num_buses();
  InjectionVector zero{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  double err = 0.0;
  for (int kind = 0; kind < 2; ++kind) {
    for (Eigen::Index i = 0; i < n; ++i) {
      InjectionVector plus = zero, minus = zero;
      (kind == 0 ? plus.p : plus.q)(i) = eps;
      (kind == 0 ? minus.p : minus.q)(i) = -eps;
      const FlowVector fp = flows_from_state(bundle, linear_state(bundle.x_matrix, plus));
      const FlowVector fm = flows_from_state(bundle, linear_state(bundle.x_matrix, minus));
      const Eigen::VectorXd dp = (fp.p_flow - fm.p_flow) / (2.0 * eps);
      const Eigen::VectorXd dq = (fp.q_flow - fm.q_flow) / (2.0 * eps);
      const auto& gp = kind == 0 ? bundle.gsdf_pp : bundle.gsdf_pq;
      const auto& gq = kind == 0 ? bundle.gsdf_qp : bundle.gsdf_qq;
      err = std::max({err, (dp - gp.col(i)).cwiseAbs().maxCoeff(), (dq - gq.col(i)).cwiseAbs().maxCoeff()});
    }
  }
  return bound_check("gsdf_finite_difference", err, 1e-6);
}

CheckResult check_loss_factor_finite_difference(const SensitivityBundle& bundle, const Network& net,
                                                const InjectionVector& inj, double eps) {
  const LossFactors lf = compute_loss_factors(eval_branch_flows(bundle, inj), bundle, net);
  double err = 0.0;
  for (Eigen::Index i = 0; i < bundle.num_buses(); ++i) {
    for (int kind = 0; kind < 2; ++kind) {
      InjectionVector plus = inj, minus = inj;
      (kind == 0 ? plus.p : plus.q)(i) += eps;
      (kind == 0 ? minus.p : minus.q)(i) -= eps;
      const LossTotals lp = compute_losses(eval_branch_flows(bundle, plus), net);
      const LossTotals lm = compute_losses(eval_branch_flows(bundle, minus), net);
      const double fd = kind == 0 ? (lp.p_loss - lm.p_loss) / (2.0 * eps) : (lp.q_loss - lm.q_loss) / (2.0 * eps);
      err = std::max(err, std::abs(fd - (kind == 0 ? lf.lf_p(i) : lf.lf_q(i))));
    }
  }
  return bound_check("loss_factor_finite_difference", err, 1e-6);
}

CheckResult check_fnd_conservation(const LossState& loss) {
  const double err = std::max(std::abs(loss.fnd_p.sum() - loss.p_loss_total),
                              std::abs(loss.fnd_q.sum() - loss.q_loss_total));
  return bound_check("fnd_conservation", err, 1e-12 * (1.0 + loss.q_loss_total));
}

CheckResult check_branch_loss_sign(const LossState& loss, const Network& net) {
  std::size_t bad = 0;
  for (std::size_t m = 0; m < net.num_branches(); ++m) {
    const double p = loss.flows.p_flow(static_cast<Eigen::Index>(m));
    if (p * p * net.branches[m].r < 0.0 || p * p * net.branches[m].x < 0.0) ++bad;
  }
  return {"branch_loss_sign", bad == 0, std::to_string(bad) + " branches with negative loss"};
}

CheckResult check_decomposition_closure(const LmpResult& r) {
  double err = 0.0;
  for (const PriceComponents* c : {&r.almp, &r.rlmp}) {
    const Eigen::VectorXd sum = c->energy + c->congestion + c->voltage + c->loss;
    err = std::max(err, (sum - c->total).cwiseAbs().maxCoeff());
  }
  return bound_check("decomposition_closure", err, 1e-12);
}

CheckResult check_complementarity(const LmpResult& r) {
  const Network& net = r.network;
  const double tol = 1e-6;
  const double dual_tol = 1e-6 * (1.0 + std::abs(r.duals.lambda_p));
  std::size_t bad = 0;
  for (std::size_t m = 0; m < net.num_branches(); ++m) {
    const auto k = static_cast<Eigen::Index>(m);
    const double mu = r.duals.mu(k);
    const auto& lim = net.branches[m].flow_limit;
    if (!lim) {
      if (mu != 0.0) ++bad;
      continue;
    }
    const double f = r.flows.p_flow(k);
    if (mu > dual_tol && f > -*lim + tol) ++bad;  // positive only at the lower limit
    if (mu < -dual_tol && f < *lim - tol) ++bad;  // negative only at the upper limit
  }
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double v = r.duals.v(k);
    const double vm = r.voltages(k);
    if (v > dual_tol && vm > net.buses[i].v_min + tol) ++bad;
    if (v < -dual_tol && vm < net.buses[i].v_max - tol) ++bad;
  }
  return {"complementarity", bad == 0, std::to_string(bad) + " violations"};
}

std::vector<PriceProbe> probe_prices(const LmpResult& r, const ModelOptions& opts, unsigned seed, int count,
                                     double eps) {
  const Network& net = r.network;
  const SensitivityBundle bundle = build_sensitivity(net);
  std::vector<std::size_t> order(net.num_buses());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<PriceProbe> out;
  int found = 0;
  for (std::size_t bus : order) {
    if (found >= count) break;
    PriceProbe p;
    p.bus = bus;
    const auto k = static_cast<Eigen::Index>(bus);
    p.almp = r.almp.total(k);
    p.rlmp = r.rlmp.total(k);
    const FdPrice a = finite_diff_price(net, bundle, r.loss, opts, bus, PriceKind::active, eps);
    const FdPrice q = finite_diff_price(net, bundle, r.loss, opts, bus, PriceKind::reactive, eps);
    p.almp_fd = a.value;
    p.rlmp_fd = q.value;
    p.degenerate = a.degenerate || q.degenerate;
    if (!p.degenerate) ++found;
    out.push_back(p);
  }
  return out;
}

CheckResult check_shadow_prices(const std::vector<PriceProbe>& probes, int wanted, double rel_tol) {
  int used = 0;
  double worst = 0.0;
  for (const PriceProbe& p : probes) {
    if (p.degenerate) continue;
    ++used;
    worst = std::max(worst, std::abs(p.almp_fd - p.almp) / std::max(std::abs(p.almp), 1e-9));
    worst = std::max(worst, std::abs(p.rlmp_fd - p.rlmp) / std::max(std::abs(p.rlmp), 1e-9));
  }
  CheckResult c{"shadow_prices", used > 0 && worst <= rel_tol, {}};
  c.detail = std::to_string(used) + "/" + std::to_string(wanted) + " non-degenerate buses, max relative error " +
             fmt(worst) + " (tol " + fmt(rel_tol) + ")";
  return c;
}

std::vector<CheckResult> run_validation(const Network& input, const ValidationOptions& opts) {
  std::vector<CheckResult> out;
  const Network net = apply_options(input, opts.model);
  SensitivityBundle bundle;
  try {
    bundle = build_sensitivity(net);
  } catch (const Error& e) {
    out.push_back({"sensitivity", false, e.what()});
    return out;
  }
  out.push_back(check_reduced_inverse(bundle));
  out.push_back(check_reference_zeros(bundle));
  out.push_back(check_flow_identity(bundle, opts.seed, opts.random_injections));
  out.push_back(check_gsdf_finite_difference(bundle));

  LmpResult r;
  try {
    r = iterate(net, opts.model);
  } catch (const Error& e) {
    out.push_back({"solve", false, e.what()});
    return out;
  }
  out.push_back({"solve", true, std::to_string(r.trace.size()) + " solves"});

  const InjectionVector inj = net_injections(net, bus_dispatch(net, r.p_gen, r.q_gen), r.loss);
  out.push_back(check_loss_factor_finite_difference(bundle, net, inj, opts.lf_eps));
  out.push_back(check_fnd_conservation(r.loss));
  out.push_back(check_branch_loss_sign(r.loss, net));
  out.push_back(check_decomposition_closure(r));
  out.push_back(check_complementarity(r));
  try {
    const auto probes = probe_prices(r, opts.model, opts.seed, opts.price_probes, opts.price_eps);
    out.push_back(check_shadow_prices(probes, opts.price_probes, opts.price_rel_tol));
  } catch (const Error& e) {
    out.push_back({"shadow_prices", false, e.what()});
  }
  return out;
}

}  // namespace lmp
