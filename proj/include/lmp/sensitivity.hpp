#pragma once

#include "lmp/network.hpp"

#include <Eigen/Dense>

namespace lmp {

// Bus injections, per-unit. Index order follows Network::buses.
struct InjectionVector {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

// Branch flows, per-unit, oriented from -> to in Network::branches order.
struct FlowVector {
  Eigen::VectorXd p_flow;
  Eigen::VectorXd q_flow;
};

/// Linearized power-flow operator of a network.
///
/// Row/column layout of the 2N x 2N matrices: positions [0, N) are the angle
/// (active-injection) slots, [N, 2N) the magnitude (reactive-injection) slots.
/// The reference bus angle slot is the only one removed before inversion, so
/// x_matrix row and column `ref_bus` are exactly zero.
struct SensitivityBundle {
  Eigen::MatrixXd c_matrix;
  Eigen::MatrixXd x_matrix;
  Eigen::MatrixXd gsdf_pp;  // M x N: active flow per active injection
  Eigen::MatrixXd gsdf_pq;  // active flow per reactive injection
  Eigen::MatrixXd gsdf_qp;  // reactive flow per active injection
  Eigen::MatrixXd gsdf_qq;  // reactive flow per reactive injection
  std::size_t ref_bus = 0;

  // Per-branch endpoint indices and tap-adjusted series admittance y/t = g + jb.
  std::vector<std::size_t> from_index;
  std::vector<std::size_t> to_index;
  Eigen::VectorXd series_g;
  Eigen::VectorXd series_b;

  Eigen::Index num_buses() const { return x_matrix.rows() / 2; }
  Eigen::Index num_branches() const { return gsdf_pp.rows(); }
};

inline constexpr double kDefaultConditionLimit = 1e12;

// [P; Q] = -C [theta; V] with C = [[B', -G], [G', B]].
Eigen::MatrixXd build_c_matrix(const AdmittancePair& adm);

// X with [theta; V] = X [P; Q]: the negated inverse of C with the reference
// angle row/column deleted, re-embedded with zeros. Throws NumericalError when
// the reduced matrix's estimated condition number exceeds `condition_limit`.
Eigen::MatrixXd build_x_matrix(const Eigen::MatrixXd& c, std::size_t ref_bus,
                               double condition_limit = kDefaultConditionLimit);

struct GsdfSet {
  Eigen::MatrixXd pp, pq, qp, qq;
};

GsdfSet build_gsdf(const Eigen::MatrixXd& x, const Network& net);

SensitivityBundle build_sensitivity(const Network& net, double condition_limit = kDefaultConditionLimit);
SensitivityBundle build_sensitivity(const Network& net, const AdmittancePair& adm,
                                    double condition_limit = kDefaultConditionLimit);

FlowVector eval_branch_flows(const SensitivityBundle& bundle, const InjectionVector& inj);

// Voltage magnitudes from the linear map, V_i = X[N+i, :] [P; Q].
Eigen::VectorXd eval_voltages(const Eigen::MatrixXd& x, const InjectionVector& inj);

// Linear state [theta; V] = X [P; Q].
Eigen::VectorXd linear_state(const Eigen::MatrixXd& x, const InjectionVector& inj);

// Branch flows evaluated directly from a linear state:
//   P_ij = g (V_i - V_j) - b (theta_i - theta_j),  Q_ij = -b (V_i - V_j) - g (theta_i - theta_j).
FlowVector flows_from_state(const SensitivityBundle& bundle, const Eigen::VectorXd& state);

}  // namespace lmp
