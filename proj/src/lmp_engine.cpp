#include "lmp/lmp_engine.hpp"

#include <cmath>
#include <sstream>

namespace lmp {

void ModelOptions::check() const {
  if (!(loss_tolerance > 0.0)) throw ArgumentError("loss tolerance must be positive");
  if (max_iterations < 1) throw ArgumentError("max iterations must be at least 1");
  if (!(qp_tolerance > 0.0)) throw ArgumentError("QP tolerance must be positive");
  if (mixing_depth < 0) throw ArgumentError("mixing depth must be non-negative");
  if (!(mixing_weight > 0.0 && mixing_weight <= 1.0)) throw ArgumentError("mixing weight must be in (0, 1]");
  if (!(load_scale > 0.0)) throw ArgumentError("load scale must be positive");
  if (v_min_override && !(*v_min_override > 0.0)) throw ArgumentError("vmin must be positive");
  if (v_min_override && v_max_override && !(*v_min_override < *v_max_override))
    throw ArgumentError("vmin must be below vmax");
}

Network apply_options(const Network& net, const ModelOptions& opts) {
  opts.check();
  Network out = opts.load_scale == 1.0 ? net : scale_load(net, opts.load_scale);
  for (Bus& b : out.buses) {
    if (opts.v_min_override) b.v_min = *opts.v_min_override;
    if (opts.v_max_override) b.v_max = *opts.v_max_override;
  }
  validate(out);
  return out;
}

AssembledModel assemble_model(const Network& net, const SensitivityBundle& bundle, const LossState& loss,
                              const ModelOptions& opts) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  const auto m = static_cast<Eigen::Index>(net.num_branches());
  const std::size_t ng = net.generators.size();
  if (ng == 0) throw ValidationError("network has no generators to dispatch");
  if (bundle.num_buses() != n || bundle.num_branches() != m) throw ArgumentError("sensitivity bundle mismatch");

  AssembledModel model;
  model.num_generators = ng;
  const BusIndex index(net);
  for (const Generator& g : net.generators) model.gen_bus.push_back(index(g.bus));

  double scale = 1.0;
  for (const Generator& g : net.generators)
    scale = std::max({scale, std::abs(g.cost_a), std::abs(g.cost_b), std::abs(g.cost_c)});
  model.cost_scale = scale;

  const auto nv = static_cast<Eigen::Index>(2 * ng);
  QpProblem qp = QpProblem::with_vars(nv);
  for (std::size_t k = 0; k < ng; ++k) {
    const Generator& g = net.generators[k];
    const auto p = static_cast<Eigen::Index>(k);
    const auto q = static_cast<Eigen::Index>(ng + k);
    qp.linear_cost(p) = g.cost_a / scale;
    qp.quadratic_diag(p) = g.cost_b / scale;
    qp.quadratic_diag(q) = g.cost_c / scale;
    qp.var_lower(p) = g.p_min;
    qp.var_upper(p) = g.p_max;
    qp.var_lower(q) = g.q_min;
    qp.var_upper(q) = g.q_max;
  }

  Eigen::VectorXd pd(n), qd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pd(i) = net.buses[static_cast<std::size_t>(i)].p_demand;
    qd(i) = net.buses[static_cast<std::size_t>(i)].q_demand;
  }

  // Active and reactive balance with delivery factors.
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nv);
  for (std::size_t k = 0; k < ng; ++k) row(static_cast<Eigen::Index>(k)) = loss.df_p(static_cast<Eigen::Index>(model.gen_bus[k]));
  qp.add_equality(row, loss.df_p.dot(pd) - loss.p_loss_total);
  row.setZero();
  for (std::size_t k = 0; k < ng; ++k)
    row(static_cast<Eigen::Index>(ng + k)) = loss.df_q(static_cast<Eigen::Index>(model.gen_bus[k]));
  // Reactive loss enters with the sign that makes generation supply it.
  qp.add_equality(row, loss.df_q.dot(qd) + loss.q_loss_total + loss.q_balance_constant);

  // Injection with zero generation: demand plus fictional nodal demand.
  const Eigen::VectorXd base_p = -pd - loss.fnd_p;
  const Eigen::VectorXd base_q = -qd - loss.fnd_q;
  model.flow_offset = bundle.gsdf_pp * base_p + bundle.gsdf_pq * base_q;
  const auto& x = bundle.x_matrix;
  model.voltage_offset = x.bottomLeftCorner(n, n) * base_p + x.bottomRightCorner(n, n) * base_q;

  Eigen::Index limited = 0;
  for (const Branch& br : net.branches)
    if (br.flow_limit) ++limited;
  const Eigen::Index nr = limited + n;
  qp.range_matrix = Eigen::MatrixXd::Zero(nr, nv);
  qp.range_lower.resize(nr);
  qp.range_upper.resize(nr);

  model.flow_row.assign(static_cast<std::size_t>(m), -1);
  Eigen::Index r = 0;
  for (Eigen::Index b = 0; b < m; ++b) {
    const Branch& br = net.branches[static_cast<std::size_t>(b)];
    if (!br.flow_limit) continue;
    for (std::size_t k = 0; k < ng; ++k) {
      const auto bus = static_cast<Eigen::Index>(model.gen_bus[k]);
      qp.range_matrix(r, static_cast<Eigen::Index>(k)) = bundle.gsdf_pp(b, bus);
      qp.range_matrix(r, static_cast<Eigen::Index>(ng + k)) = bundle.gsdf_pq(b, bus);
    }
    qp.range_lower(r) = -*br.flow_limit - model.flow_offset(b);
    qp.range_upper(r) = *br.flow_limit - model.flow_offset(b);
    model.flow_row[static_cast<std::size_t>(b)] = r++;
  }

  model.v_min.resize(n);
  model.v_max.resize(n);
  model.voltage_row.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& bus = net.buses[static_cast<std::size_t>(i)];
    model.v_min(i) = opts.v_min_override.value_or(bus.v_min);
    model.v_max(i) = opts.v_max_override.value_or(bus.v_max);
    for (std::size_t k = 0; k < ng; ++k) {
      const auto gb = static_cast<Eigen::Index>(model.gen_bus[k]);
      qp.range_matrix(r, static_cast<Eigen::Index>(k)) = x(n + i, gb);
      qp.range_matrix(r, static_cast<Eigen::Index>(ng + k)) = x(n + i, n + gb);
    }
    qp.range_lower(r) = model.v_min(i) - model.voltage_offset(i);
    qp.range_upper(r) = model.v_max(i) - model.voltage_offset(i);
    model.voltage_row[static_cast<std::size_t>(i)] = r++;
  }

  model.problem = std::move(qp);
  return model;
}

DualSet extract_duals(const AssembledModel& model, const QpSolution& solution, const SensitivityBundle& bundle,
                      const LossState& loss, const Network& net) {
  const double s = model.cost_scale;
  const auto n = bundle.num_buses();
  const auto m = bundle.num_branches();
  DualSet d;
  d.lambda_p = s * solution.eq_duals(0);
  d.lambda_q = s * solution.eq_duals(1);
  d.mu = Eigen::VectorXd::Zero(m);
  for (Eigen::Index b = 0; b < m; ++b) {
    const auto row = model.flow_row[static_cast<std::size_t>(b)];
    if (row >= 0) d.mu(b) = s * solution.range_duals(row);
  }
  d.v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.v(i) = s * solution.range_duals(model.voltage_row[static_cast<std::size_t>(i)]);

  // a + 2b P - lambda_P DF - sum mu GSF - sum v X = 0 at every generator inside its limits.
  const Eigen::VectorXd congestion = bundle.gsdf_pp.transpose() * d.mu;
  const Eigen::VectorXd voltage = bundle.x_matrix.bottomLeftCorner(n, n).transpose() * d.v;
  for (std::size_t k = 0; k < model.num_generators; ++k) {
    const Generator& g = net.generators[k];
    const double p = solution.primal(static_cast<Eigen::Index>(k));
    const double margin = 1e-7 * (1.0 + std::abs(g.p_max - g.p_min));
    if (!(p > g.p_min + margin && p < g.p_max - margin)) continue;
    const auto bus = static_cast<Eigen::Index>(model.gen_bus[k]);
    const double marginal = g.cost_a + 2.0 * g.cost_b * p;
    const double res = marginal - d.lambda_p * loss.df_p(bus) - congestion(bus) - voltage(bus);
    const double scale = 1.0 + std::abs(marginal) + std::abs(d.lambda_p * loss.df_p(bus)) + std::abs(congestion(bus)) +
                         std::abs(voltage(bus));
    if (std::abs(res) > 1e-6 * scale) {
      std::ostringstream msg;
      msg << "stationarity check failed at generator " << k + 1 << " (bus " << g.bus << "): residual " << res;
      throw NumericalError(msg.str());
    }
  }
  return d;
}

namespace {

PriceComponents assemble_components(double lambda, const Eigen::VectorXd& lf, Eigen::VectorXd congestion,
                                    Eigen::VectorXd voltage) {
  PriceComponents c;
  c.energy = Eigen::VectorXd::Constant(lf.size(), lambda);
  c.congestion = std::move(congestion);
  c.voltage = std::move(voltage);
  c.loss = -lambda * lf;
  c.total = c.energy + c.congestion + c.voltage + c.loss;
  return c;
}

}  // namespace

PriceComponents decompose_almp(const DualSet& duals, const SensitivityBundle& bundle, const LossState& loss) {
  const auto n = bundle.num_buses();
  return assemble_components(duals.lambda_p, loss.lf_p, bundle.gsdf_pp.transpose() * duals.mu,
                             bundle.x_matrix.bottomLeftCorner(n, n).transpose() * duals.v);
}

PriceComponents decompose_rlmp(const DualSet& duals, const SensitivityBundle& bundle, const LossState& loss) {
  const auto n = bundle.num_buses();
  return assemble_components(duals.lambda_q, loss.lf_q, bundle.gsdf_pq.transpose() * duals.mu,
                             bundle.x_matrix.bottomRightCorner(n, n).transpose() * duals.v);
}

FrozenSolve solve_frozen(const Network& net, const SensitivityBundle& bundle, const LossState& loss,
                         const ModelOptions& opts, const std::vector<ActiveConstraint>& warm) {
  FrozenSolve fs{assemble_model(net, bundle, loss, opts), {}};
  QpOptions qo;
  qo.tol = opts.qp_tolerance;
  qo.warm_start = warm;
  try {
    fs.solution = solve_qp(fs.model.problem, qo);
  } catch (const QpInfeasible&) {
    throw;
  } catch (const NumericalError&) {
    if (warm.empty()) throw;
    qo.warm_start.clear();
    fs.solution = solve_qp(fs.model.problem, qo);
  }
  fs.solution.objective *= fs.model.cost_scale;
  return fs;
}

BusDispatch bus_dispatch(const Network& net, const Eigen::VectorXd& p_gen, const Eigen::VectorXd& q_gen) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  BusDispatch d{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  const BusIndex index(net);
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const auto bus = static_cast<Eigen::Index>(index(net.generators[k].bus));
    d.p_gen(bus) += p_gen(static_cast<Eigen::Index>(k));
    d.q_gen(bus) += q_gen(static_cast<Eigen::Index>(k));
  }
  return d;
}

namespace {

// Anderson mixing of the flow linearization point. Depth 0 with weight 1 is
// the plain substitution x <- G(x).
class FlowMixer {
 public:
  FlowMixer(int depth, double weight) : depth_(depth), weight_(weight) {}

  Eigen::VectorXd next(const Eigen::VectorXd& x, const Eigen::VectorXd& gx) {
    const Eigen::VectorXd f = gx - x;
    xs_.push_back(x);
    fs_.push_back(f);
    if (xs_.size() > static_cast<std::size_t>(depth_) + 1) {
      xs_.erase(xs_.begin());
      fs_.erase(fs_.begin());
    }
    Eigen::VectorXd out = x + weight_ * f;
    const auto hist = static_cast<Eigen::Index>(xs_.size()) - 1;
    if (hist == 0) return out;
    Eigen::MatrixXd df(x.size(), hist), dx(x.size(), hist);
    for (Eigen::Index j = 0; j < hist; ++j) {
      const auto u = static_cast<std::size_t>(j);
      df.col(j) = fs_[u + 1] - fs_[u];
      dx.col(j) = xs_[u + 1] - xs_[u];
    }
    const Eigen::VectorXd gamma = df.colPivHouseholderQr().solve(f);
    if (!gamma.allFinite()) return out;
    out -= (dx + weight_ * df) * gamma;
    return out;
  }

 private:
  int depth_;
  double weight_;
  std::vector<Eigen::VectorXd> xs_, fs_;
};

}  // namespace

LmpResult iterate(const Network& input, const ModelOptions& opts) {
  Network net = apply_options(input, opts);
  const AdmittancePair adm = build_admittance(net);
  const SensitivityBundle bundle = build_sensitivity(net, adm);
  const double q_balance = q_balance_constant(adm);
  const auto ng = static_cast<Eigen::Index>(net.generators.size());

  LossState loss = zero_loss_state(net, q_balance);
  FlowMixer mixer(opts.mixing_depth, opts.mixing_weight);
  std::vector<IterationRecord> trace;
  std::vector<ActiveConstraint> warm;
  for (int k = 0; k < opts.max_iterations; ++k) {
    FrozenSolve fs;
    try {
      fs = solve_frozen(net, bundle, loss, opts, warm);
    } catch (const QpInfeasible& e) {
      throw QpInfeasible("iteration " + std::to_string(k) + ": " + e.what(), e.certificate());
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(k) + ": " + e.what());
    }
    trace.push_back({loss.p_loss_total, loss.q_loss_total, fs.solution.objective, fs.solution.iterations});

    const Eigen::VectorXd p_gen = fs.solution.primal.head(ng);
    const Eigen::VectorXd q_gen = fs.solution.primal.tail(ng);
    const InjectionVector inj = net_injections(net, bus_dispatch(net, p_gen, q_gen), loss);
    const FlowVector flows = eval_branch_flows(bundle, inj);

    const bool converged =
        !opts.loss_enabled ||
        (k >= 1 && std::abs(trace[static_cast<std::size_t>(k)].p_loss - trace[static_cast<std::size_t>(k - 1)].p_loss) <
                       opts.loss_tolerance);
    if (converged) {
      LmpResult res;
      res.duals = extract_duals(fs.model, fs.solution, bundle, loss, net);
      res.almp = decompose_almp(res.duals, bundle, loss);
      res.rlmp = decompose_rlmp(res.duals, bundle, loss);
      res.p_gen = p_gen;
      res.q_gen = q_gen;
      res.flows = flows;
      res.voltages = eval_voltages(bundle.x_matrix, inj);
      res.trace = std::move(trace);
      res.loss = std::move(loss);
      res.objective = fs.solution.objective;
      res.active_set = fs.solution.active_set;
      res.gen_bus = fs.model.gen_bus;
      res.network = std::move(net);
      return res;
    }
    FlowVector point = flows;
    if (k >= 1) point.p_flow = mixer.next(loss.flows.p_flow, flows.p_flow);
    loss = build_loss_state(point, bundle, net, q_balance);
    warm = fs.solution.active_set;
  }
  throw ConvergenceError("loss iteration did not converge in " + std::to_string(opts.max_iterations) + " solves",
                         std::move(trace));
}

double aea(const Eigen::VectorXd& almp, const Eigen::VectorXd& benchmark, const std::vector<int>& bus_ids) {
  if (almp.size() != benchmark.size()) throw ArgumentError("AEA inputs differ in length");
  if (almp.size() == 0) throw ArgumentError("AEA of an empty vector");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < almp.size(); ++i) {
    if (benchmark(i) == 0.0) {
      const std::string name = static_cast<std::size_t>(i) < bus_ids.size()
                                   ? "bus " + std::to_string(bus_ids[static_cast<std::size_t>(i)])
                                   : "position " + std::to_string(i);
      throw ValidationError("benchmark ALMP is zero at " + name);
    }
    sum += std::abs((almp(i) - benchmark(i)) / benchmark(i));
  }
  return sum / static_cast<double>(almp.size());
}

}  // namespace lmp
