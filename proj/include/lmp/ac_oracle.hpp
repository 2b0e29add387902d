#pragma once

#include "lmp/lmp_engine.hpp"
#include "lmp/network.hpp"

#include <Eigen/Dense>
#include <complex>

namespace lmp {

enum class BusMode { slack, pv, pq };

// Power-flow setpoints per bus (generation totals, not net injection).
struct PfSpec {
  Eigen::VectorXd p_gen;
  Eigen::VectorXd q_gen;  // used at PQ buses
  Eigen::VectorXd v_set;  // used at PV and slack buses
  std::vector<BusMode> mode;
};

struct PfSolution {
  Eigen::VectorXd v_mag;
  Eigen::VectorXd v_ang;  // radians, reference bus at 0
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
  // Net complex injection S = V conj(Y V) at the solution.
  Eigen::VectorXcd injection;
};

struct AcBranchFlow {
  Eigen::VectorXcd s_from;  // into the branch at the from end
  Eigen::VectorXcd s_to;    // into the branch at the to end
  Eigen::VectorXd current;  // series current magnitude
};

// Case-file setpoints: generator buses PV at their setpoint voltage, reference bus slack.
PfSpec base_case_spec(const Network& net);

// Replay a priced dispatch: P^G from the result, generator buses PV at the
// model's linear voltages, reactive limits not enforced.
PfSpec replay_spec(const Network& net, const LmpResult& result);

PfSolution newton_pf(const Network& net, const PfSpec& spec, double tol = 1e-8, int max_iter = 30);

AcBranchFlow branch_flows_ac(const PfSolution& pf, const Network& net);

enum class PriceKind { active, reactive };

struct FdPrice {
  double value = 0.0;
  bool degenerate = false;  // active set changed between the +/- solves
};

// Central difference of the optimal cost of the frozen-loss pricing QP with
// the demand at `bus` perturbed by +/- eps.
FdPrice finite_diff_price(const Network& net, const SensitivityBundle& bundle, const LossState& loss,
                          const ModelOptions& opts, std::size_t bus, PriceKind kind, double eps);

}  // namespace lmp
