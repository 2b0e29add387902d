#pragma once

#include "lmp/network.hpp"
#include "lmp/sensitivity.hpp"

#include <Eigen/Dense>

namespace lmp {

// Loss quantities linearized at one operating point; held constant for one
// pricing solve.
struct LossState {
  FlowVector flows;
  double p_loss_total = 0.0;
  double q_loss_total = 0.0;
  Eigen::VectorXd lf_p, lf_q;    // marginal loss factors
  Eigen::VectorXd df_p, df_q;    // delivery factors, 1 - lf
  Eigen::VectorXd fnd_p, fnd_q;  // fictional nodal demand
  double q_balance_constant = 0.0;  // -sum_j b_jj
};

struct LossTotals {
  double p_loss = 0.0;
  double q_loss = 0.0;
};

struct LossFactors {
  Eigen::VectorXd lf_p, lf_q, df_p, df_q;
};

struct NodalDemand {
  Eigen::VectorXd fnd_p, fnd_q;
};

// P_loss = sum p_flow^2 R, Q_loss = sum p_flow^2 X (current approximated by active flow).
LossTotals compute_losses(const FlowVector& flows, const Network& net);

// The (P^2 + Q^2) R / X alternative. Reported for comparison only.
LossTotals diagnostic_losses(const FlowVector& flows, const Network& net);

LossFactors compute_loss_factors(const FlowVector& flows, const SensitivityBundle& bundle, const Network& net);

// Half of each branch's loss is charged to each endpoint.
NodalDemand compute_fnd(const FlowVector& flows, const Network& net);

// -sum_j (column sum of B at j); equals -sum_j b_jj.
double q_balance_constant(const AdmittancePair& adm);

LossState zero_loss_state(const Network& net, double q_balance);
LossState build_loss_state(const FlowVector& flows, const SensitivityBundle& bundle, const Network& net,
                           double q_balance);

// Per-bus generation totals.
struct BusDispatch {
  Eigen::VectorXd p_gen;
  Eigen::VectorXd q_gen;
};

// p_i = P^G_i - P^D_i - F^P_i, q_i = Q^G_i - Q^D_i - F^Q_i.
InjectionVector net_injections(const Network& net, const BusDispatch& dispatch, const LossState& loss);

}  // namespace lmp
