#include "lmp/loss_model.hpp"

#include "lmp/errors.hpp"

namespace lmp {

namespace {

void check_flows(const FlowVector& flows, const Network& net) {
  const auto m = static_cast<Eigen::Index>(net.num_branches());
  if (flows.p_flow.size() != m || flows.q_flow.size() != m)
    throw ArgumentError("flow vector length does not match branch count");
}

}  // namespace

LossTotals compute_losses(const FlowVector& flows, const Network& net) {
  check_flows(flows, net);
  LossTotals t;
  for (std::size_t m = 0; m < net.branches.size(); ++m) {
    const double p2 = flows.p_flow(static_cast<Eigen::Index>(m)) * flows.p_flow(static_cast<Eigen::Index>(m));
    t.p_loss += p2 * net.branches[m].r;
    t.q_loss += p2 * net.branches[m].x;
  }
  return t;
}

LossTotals diagnostic_losses(const FlowVector& flows, const Network& net) {
  check_flows(flows, net);
  LossTotals t;
  for (std::size_t m = 0; m < net.branches.size(); ++m) {
    const auto k = static_cast<Eigen::Index>(m);
    const double s2 = flows.p_flow(k) * flows.p_flow(k) + flows.q_flow(k) * flows.q_flow(k);
    t.p_loss += s2 * net.branches[m].r;
    t.q_loss += s2 * net.branches[m].x;
  }
  return t;
}

LossFactors compute_loss_factors(const FlowVector& flows, const SensitivityBundle& bundle, const Network& net) {
  check_flows(flows, net);
  const auto m = static_cast<Eigen::Index>(net.num_branches());
  Eigen::VectorXd weight_r(m), weight_x(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Branch& br = net.branches[static_cast<std::size_t>(k)];
    weight_r(k) = 2.0 * flows.p_flow(k) * br.r;
    weight_x(k) = 2.0 * flows.p_flow(k) * br.x;
  }
  LossFactors f;
  f.lf_p = bundle.gsdf_pp.transpose() * weight_r;
  f.lf_q = bundle.gsdf_pq.transpose() * weight_x;
  f.df_p = Eigen::VectorXd::Ones(f.lf_p.size()) - f.lf_p;
  f.df_q = Eigen::VectorXd::Ones(f.lf_q.size()) - f.lf_q;
  return f;
}

NodalDemand compute_fnd(const FlowVector& flows, const Network& net) {
  check_flows(flows, net);
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  NodalDemand d{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  const BusIndex index(net);
  for (std::size_t m = 0; m < net.branches.size(); ++m) {
    const Branch& br = net.branches[m];
    const double p2 = flows.p_flow(static_cast<Eigen::Index>(m)) * flows.p_flow(static_cast<Eigen::Index>(m));
    const double half_p = 0.5 * p2 * br.r;
    const double half_q = 0.5 * p2 * br.x;
    const auto i = static_cast<Eigen::Index>(index(br.from_bus));
    const auto j = static_cast<Eigen::Index>(index(br.to_bus));
    d.fnd_p(i) += half_p;
    d.fnd_p(j) += half_p;
    d.fnd_q(i) += half_q;
    d.fnd_q(j) += half_q;
  }
  return d;
}

double q_balance_constant(const AdmittancePair& adm) {
  return -adm.y_full.imag().colwise().sum().sum();
}

LossState zero_loss_state(const Network& net, double q_balance) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  const auto m = static_cast<Eigen::Index>(net.num_branches());
  LossState s;
  s.flows = {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  s.lf_p = s.lf_q = Eigen::VectorXd::Zero(n);
  s.df_p = s.df_q = Eigen::VectorXd::Ones(n);
  s.fnd_p = s.fnd_q = Eigen::VectorXd::Zero(n);
  s.q_balance_constant = q_balance;
  return s;
}

LossState build_loss_state(const FlowVector& flows, const SensitivityBundle& bundle, const Network& net,
                           double q_balance) {
  LossState s;
  s.flows = flows;
  const LossTotals totals = compute_losses(flows, net);
  s.p_loss_total = totals.p_loss;
  s.q_loss_total = totals.q_loss;
  LossFactors f = compute_loss_factors(flows, bundle, net);
  s.lf_p = std::move(f.lf_p);
  s.lf_q = std::move(f.lf_q);
  s.df_p = std::move(f.df_p);
  s.df_q = std::move(f.df_q);
  NodalDemand d = compute_fnd(flows, net);
  s.fnd_p = std::move(d.fnd_p);
  s.fnd_q = std::move(d.fnd_q);
  s.q_balance_constant = q_balance;
  return s;
}

InjectionVector net_injections(const Network& net, const BusDispatch& dispatch, const LossState& loss) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  if (dispatch.p_gen.size() != n || dispatch.q_gen.size() != n) throw ArgumentError("dispatch length mismatch");
  if (loss.fnd_p.size() != n || loss.fnd_q.size() != n) throw ArgumentError("loss state length mismatch");
  InjectionVector inj{dispatch.p_gen - loss.fnd_p, dispatch.q_gen - loss.fnd_q};
  for (Eigen::Index i = 0; i < n; ++i) {
    inj.p(i) -= net.buses[static_cast<std::size_t>(i)].p_demand;
    inj.q(i) -= net.buses[static_cast<std::size_t>(i)].q_demand;
  }
  return inj;
}

}  // namespace lmp
