#pragma once

#include "lmp/loss_model.hpp"
#include "lmp/network.hpp"
#include "lmp/qp_solver.hpp"
#include "lmp/sensitivity.hpp"

#include <optional>
#include <vector>

namespace lmp {

struct ModelOptions {
  std::optional<double> v_min_override;
  std::optional<double> v_max_override;
  double load_scale = 1.0;
  bool loss_enabled = true;
  double loss_tolerance = 1e-4;  // |delta P_loss| between iterations, per-unit
  int max_iterations = 20;
  double qp_tolerance = 1e-8;
  // Update of the loss linearization point between solves. depth 0 and
  // weight 1 reproduce plain substitution; the defaults mix the last few
  // iterates (same fixed point, fewer solves on meshed cases).
  int mixing_depth = 5;
  double mixing_weight = 0.5;

  void check() const;
};

/// The pricing model in QP form. Variables are [P_g for every generator, Q_g for every
/// generator]; objective coefficients are divided by `cost_scale` before the
/// solve and duals multiplied back afterwards.
struct AssembledModel {
  QpProblem problem;
  double cost_scale = 1.0;
  std::size_t num_generators = 0;
  std::vector<std::size_t> gen_bus;  // bus index per generator

  // Range rows: flow ranges for limited branches first, then one voltage range per bus.
  std::vector<std::ptrdiff_t> flow_row;     // per branch, -1 when unconstrained
  std::vector<std::ptrdiff_t> voltage_row;  // per bus
  // Affine parts: branch flow = gsdf_pp row . inj, etc. with the demand/FND part precomputed.
  Eigen::VectorXd flow_offset;     // length M
  Eigen::VectorXd voltage_offset;  // length N
  Eigen::VectorXd v_min, v_max;    // effective voltage bounds per bus
};

struct DualSet {
  double lambda_p = 0.0;
  double lambda_q = 0.0;
  Eigen::VectorXd mu;  // per branch
  Eigen::VectorXd v;   // per bus
};

struct PriceComponents {
  Eigen::VectorXd total, energy, congestion, voltage, loss;
};

struct IterationRecord {
  double p_loss = 0.0;  // loss constant used by this solve
  double q_loss = 0.0;
  double objective = 0.0;
  int qp_iterations = 0;
};

struct LmpResult {
  PriceComponents almp;  // currency per per-unit-hour
  PriceComponents rlmp;
  Eigen::VectorXd p_gen, q_gen;  // per generator
  FlowVector flows;
  Eigen::VectorXd voltages;
  DualSet duals;
  std::vector<IterationRecord> trace;
  LossState loss;  // state frozen into the final solve
  double objective = 0.0;
  std::vector<ActiveConstraint> active_set;
  Network network;  // the network actually priced (after load scaling / overrides)
  std::vector<std::size_t> gen_bus;
};

// Copy of `net` with load scaling and uniform voltage overrides applied.
Network apply_options(const Network& net, const ModelOptions& opts);

AssembledModel assemble_model(const Network& net, const SensitivityBundle& bundle, const LossState& loss,
                              const ModelOptions& opts);

// Duals in network units. Checks the active-power stationarity identity at every
// generator strictly inside its limits and throws NumericalError on mismatch.
DualSet extract_duals(const AssembledModel& model, const QpSolution& solution, const SensitivityBundle& bundle,
                      const LossState& loss, const Network& net);

PriceComponents decompose_almp(const DualSet& duals, const SensitivityBundle& bundle, const LossState& loss);
PriceComponents decompose_rlmp(const DualSet& duals, const SensitivityBundle& bundle, const LossState& loss);

struct FrozenSolve {
  AssembledModel model;
  QpSolution solution;
};

// One pricing QP at a fixed loss state, objective returned in network units.
FrozenSolve solve_frozen(const Network& net, const SensitivityBundle& bundle, const LossState& loss,
                         const ModelOptions& opts, const std::vector<ActiveConstraint>& warm = {});

BusDispatch bus_dispatch(const Network& net, const Eigen::VectorXd& p_gen, const Eigen::VectorXd& q_gen);

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<IterationRecord> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<IterationRecord>& trace() const { return trace_; }

 private:
  std::vector<IterationRecord> trace_;
};

// The solve / loss-update loop. `net` is priced after apply_options.
// Throws ConvergenceError after opts.max_iterations solves without convergence.
LmpResult iterate(const Network& net, const ModelOptions& opts);

// Mean |(model_i - bench_i) / bench_i|. `bus_ids` (optional) names buses in errors.
double aea(const Eigen::VectorXd& almp, const Eigen::VectorXd& benchmark, const std::vector<int>& bus_ids = {});

}  // namespace lmp
