#include "lmp/ac_oracle.hpp"

#include <cmath>

namespace lmp {

namespace {

using cplx = std::complex<double>;
using Eigen::Index;

std::vector<Index> gen_count_per_bus(const Network& net) {
  std::vector<Index> count(net.num_buses(), 0);
  const BusIndex index(net);
  for (const Generator& g : net.generators) ++count[index(g.bus)];
  return count;
}

}  // namespace

PfSpec base_case_spec(const Network& net) {
  const auto n = static_cast<Index>(net.num_buses());
  PfSpec spec{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n),
              std::vector<BusMode>(static_cast<std::size_t>(n), BusMode::pq)};
  const BusIndex index(net);
  std::vector<bool> has_v(static_cast<std::size_t>(n), false);
  for (const Generator& g : net.generators) {
    const auto i = static_cast<Index>(index(g.bus));
    spec.p_gen(i) += g.p_set;
    spec.q_gen(i) += g.q_set;
    if (!has_v[static_cast<std::size_t>(i)]) spec.v_set(i) = g.v_set;
    has_v[static_cast<std::size_t>(i)] = true;
  }
  const auto count = gen_count_per_bus(net);
  for (Index i = 0; i < n; ++i) {
    const Bus& b = net.buses[static_cast<std::size_t>(i)];
    if (b.kind == BusKind::reference) spec.mode[static_cast<std::size_t>(i)] = BusMode::slack;
    else if (b.kind == BusKind::generator && count[static_cast<std::size_t>(i)] > 0)
      spec.mode[static_cast<std::size_t>(i)] = BusMode::pv;
  }
  return spec;
}

PfSpec replay_spec(const Network& net, const LmpResult& result) {
  PfSpec spec = base_case_spec(net);
  const BusDispatch d = bus_dispatch(net, result.p_gen, result.q_gen);
  spec.p_gen = d.p_gen;
  spec.q_gen = d.q_gen;
  const auto count = gen_count_per_bus(net);
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    if (spec.mode[i] == BusMode::slack || count[i] > 0) {
      if (spec.mode[i] != BusMode::slack) spec.mode[i] = BusMode::pv;
      spec.v_set(static_cast<Index>(i)) = result.voltages(static_cast<Index>(i));
    }
  }
  return spec;
}

PfSolution newton_pf(const Network& net, const PfSpec& spec, double tol, int max_iter) {
  const auto n = static_cast<Index>(net.num_buses());
  const Eigen::MatrixXcd y = build_admittance(net).y_full;

  Eigen::VectorXcd s_spec(n);
  for (Index i = 0; i < n; ++i) {
    const Bus& b = net.buses[static_cast<std::size_t>(i)];
    s_spec(i) = cplx(spec.p_gen(i) - b.p_demand, spec.q_gen(i) - b.q_demand);
  }

  std::vector<Index> pv, pq;
  for (Index i = 0; i < n; ++i) {
    switch (spec.mode[static_cast<std::size_t>(i)]) {
      case BusMode::pv: pv.push_back(i); break;
      case BusMode::pq: pq.push_back(i); break;
      case BusMode::slack: break;
    }
  }
  std::vector<Index> pvpq = pv;
  pvpq.insert(pvpq.end(), pq.begin(), pq.end());
  const auto na = static_cast<Index>(pvpq.size());
  const auto nm = static_cast<Index>(pq.size());

  PfSolution sol;
  sol.v_mag = Eigen::VectorXd::Ones(n);
  sol.v_ang = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (spec.mode[static_cast<std::size_t>(i)] != BusMode::pq) sol.v_mag(i) = spec.v_set(i);

  Eigen::VectorXcd v(n), current(n), mis(n);
  Eigen::VectorXd f(na + nm);
  auto evaluate = [&] {
    for (Index i = 0; i < n; ++i) v(i) = std::polar(sol.v_mag(i), sol.v_ang(i));
    current = y * v;
    sol.injection = v.cwiseProduct(current.conjugate());
    mis = sol.injection - s_spec;
    for (Index k = 0; k < na; ++k) f(k) = mis(pvpq[static_cast<std::size_t>(k)]).real();
    for (Index k = 0; k < nm; ++k) f(na + k) = mis(pq[static_cast<std::size_t>(k)]).imag();
    return f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
  };

  for (int it = 0;; ++it) {
    sol.max_mismatch = evaluate();
    if (sol.max_mismatch <= tol) {
      sol.converged = true;
      sol.iterations = it;
      break;
    }
    if (it >= max_iter || !std::isfinite(sol.max_mismatch)) {
      sol.iterations = it;
      break;
    }

    const Eigen::VectorXcd vnorm = v.cwiseQuotient(v.cwiseAbs().cast<cplx>());
    // dS/dVm = diag(V) conj(Y diag(Vnorm)) + conj(diag(I)) diag(Vnorm)
    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
    Eigen::MatrixXcd ds_dvm = (y * vnorm.asDiagonal()).conjugate();
    ds_dvm = v.asDiagonal() * ds_dvm;
    ds_dvm.diagonal() += current.conjugate().cwiseProduct(vnorm);
    Eigen::MatrixXcd ds_dva = -(y * v.asDiagonal()).conjugate();
    ds_dva.diagonal() += current.conjugate();
    ds_dva = cplx(0.0, 1.0) * (v.asDiagonal() * ds_dva);

    Eigen::MatrixXd jac(na + nm, na + nm);
    for (Index a = 0; a < na; ++a) {
      const Index r = pvpq[static_cast<std::size_t>(a)];
      for (Index b = 0; b < na; ++b) jac(a, b) = ds_dva(r, pvpq[static_cast<std::size_t>(b)]).real();
      for (Index b = 0; b < nm; ++b) jac(a, na + b) = ds_dvm(r, pq[static_cast<std::size_t>(b)]).real();
    }
    for (Index a = 0; a < nm; ++a) {
      const Index r = pq[static_cast<std::size_t>(a)];
      for (Index b = 0; b < na; ++b) jac(na + a, b) = ds_dva(r, pvpq[static_cast<std::size_t>(b)]).imag();
      for (Index b = 0; b < nm; ++b) jac(na + a, na + b) = ds_dvm(r, pq[static_cast<std::size_t>(b)]).imag();
    }
    const Eigen::VectorXd dx = -jac.partialPivLu().solve(f);
    for (Index k = 0; k < na; ++k) sol.v_ang(pvpq[static_cast<std::size_t>(k)]) += dx(k);
    for (Index k = 0; k < nm; ++k) sol.v_mag(pq[static_cast<std::size_t>(k)]) += dx(na + k);
  }
  return sol;
}

AcBranchFlow branch_flows_ac(const PfSolution& pf, const Network& net) {
  const auto m = static_cast<Index>(net.num_branches());
  AcBranchFlow out{Eigen::VectorXcd(m), Eigen::VectorXcd(m), Eigen::VectorXd(m)};
  const BusIndex index(net);
  for (Index k = 0; k < m; ++k) {
    const Branch& br = net.branches[static_cast<std::size_t>(k)];
    const auto i = static_cast<Index>(index(br.from_bus));
    const auto j = static_cast<Index>(index(br.to_bus));
    const cplx vf = std::polar(pf.v_mag(i), pf.v_ang(i));
    const cplx vt = std::polar(pf.v_mag(j), pf.v_ang(j));
    const cplx ys = 1.0 / cplx(br.r, br.x);
    const cplx charge(0.0, br.b_charge / 2.0);
    const double t = br.tap;
    const cplx i_from = (ys + charge) / (t * t) * vf - ys / t * vt;
    const cplx i_to = -ys / t * vf + (ys + charge) * vt;
    out.s_from(k) = vf * std::conj(i_from);
    out.s_to(k) = vt * std::conj(i_to);
    out.current(k) = std::abs((vf / t - vt) * ys);
  }
  return out;
}

FdPrice finite_diff_price(const Network& net, const SensitivityBundle& bundle, const LossState& loss,
                          const ModelOptions& opts, std::size_t bus, PriceKind kind, double eps) {
  if (bus >= net.num_buses()) throw ArgumentError("bus index out of range");
  if (!(eps > 0.0)) throw ArgumentError("perturbation must be positive");
  auto perturbed = [&](double delta) {
    Network copy = net;
    Bus& b = copy.buses[bus];
    (kind == PriceKind::active ? b.p_demand : b.q_demand) += delta;
    return solve_frozen(copy, bundle, loss, opts);
  };
  const FrozenSolve base = solve_frozen(net, bundle, loss, opts);
  const FrozenSolve plus = perturbed(eps);
  const FrozenSolve minus = perturbed(-eps);
  FdPrice out;
  out.value = (plus.solution.objective - minus.solution.objective) / (2.0 * eps);
  out.degenerate = plus.solution.active_set != minus.solution.active_set ||
                   base.solution.active_set != plus.solution.active_set;
  return out;
}

}  // namespace lmp
