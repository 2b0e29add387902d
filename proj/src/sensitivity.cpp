#include "lmp/sensitivity.hpp"

#include "lmp/errors.hpp"

#include <algorithm>
#include <complex>
#include <sstream>

namespace lmp {

Eigen::MatrixXd build_c_matrix(const AdmittancePair& adm) {
  const Eigen::Index n = adm.y_full.rows();
  if (adm.y_full.cols() != n || adm.y_series.rows() != n || adm.y_series.cols() != n)
    throw ArgumentError("admittance matrices must be square and of equal size");
  Eigen::MatrixXd c(2 * n, 2 * n);
  c.topLeftCorner(n, n) = adm.y_series.imag();
  c.topRightCorner(n, n) = -adm.y_full.real();
  c.bottomLeftCorner(n, n) = adm.y_series.real();
  c.bottomRightCorner(n, n) = adm.y_full.imag();
  return c;
}

Eigen::MatrixXd build_x_matrix(const Eigen::MatrixXd& c, std::size_t ref_bus, double condition_limit) {
  const Eigen::Index dim = c.rows();
  if (c.cols() != dim || dim % 2 != 0) throw ArgumentError("C must be square with even dimension");
  const auto ref = static_cast<Eigen::Index>(ref_bus);
  if (ref >= dim / 2) throw ArgumentError("reference bus index out of range");

  // keep[k] maps reduced position k to full position.
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(dim - 1));
  for (Eigen::Index k = 0; k < dim; ++k)
    if (k != ref) keep.push_back(k);
  const auto r = static_cast<Eigen::Index>(keep.size());

  Eigen::MatrixXd reduced(r, r);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b) reduced(a, b) = c(keep[a], keep[b]);

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(reduced);
  const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
  // rcond() can come back finite for an exactly singular factor; the pivot ratio cannot.
  const double rcond = std::min(lu.rcond(), pivots.minCoeff() / pivots.maxCoeff());
  if (!(rcond > 0.0) || 1.0 / rcond > condition_limit) {
    std::ostringstream msg;
    msg << "reduced sensitivity matrix is singular (condition estimate "
        << (rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity())
        << "); the network may lack shunt elements";
    throw NumericalError(msg.str());
  }
  const Eigen::MatrixXd inv = -lu.inverse();
  if (!inv.allFinite()) throw NumericalError("reduced sensitivity matrix inverse is not finite");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < r; ++b) x(keep[a], keep[b]) = inv(a, b);
  return x;
}

namespace {

struct BranchTerms {
  std::vector<std::size_t> from, to;
  Eigen::VectorXd g, b;
};

BranchTerms branch_terms(const Network& net) {
  const BusIndex index(net);
  BranchTerms t;
  const auto m = static_cast<Eigen::Index>(net.num_branches());
  t.g.resize(m);
  t.b.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Branch& br = net.branches[static_cast<std::size_t>(k)];
    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x) / br.tap;
    t.from.push_back(index(br.from_bus));
    t.to.push_back(index(br.to_bus));
    t.g(k) = y.real();
    t.b(k) = y.imag();
  }
  return t;
}

}  // namespace

GsdfSet build_gsdf(const Eigen::MatrixXd& x, const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  if (x.rows() != 2 * n || x.cols() != 2 * n) throw ArgumentError("X dimension does not match network");
  const BranchTerms t = branch_terms(net);
  const auto m = static_cast<Eigen::Index>(net.num_branches());

  GsdfSet s;
  s.pp.resize(m, n);
  s.pq.resize(m, n);
  s.qp.resize(m, n);
  s.qq.resize(m, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(t.from[static_cast<std::size_t>(k)]);
    const auto j = static_cast<Eigen::Index>(t.to[static_cast<std::size_t>(k)]);
    const double g = t.g(k);
    const double b = t.b(k);
    // Angle and magnitude differences across the branch per unit injection.
    const Eigen::RowVectorXd dtheta_p = x.row(i).head(n) - x.row(j).head(n);
    const Eigen::RowVectorXd dtheta_q = x.row(i).tail(n) - x.row(j).tail(n);
    const Eigen::RowVectorXd dv_p = x.row(n + i).head(n) - x.row(n + j).head(n);
    const Eigen::RowVectorXd dv_q = x.row(n + i).tail(n) - x.row(n + j).tail(n);
    s.pp.row(k) = g * dv_p - b * dtheta_p;
    s.pq.row(k) = g * dv_q - b * dtheta_q;
    s.qp.row(k) = -g * dtheta_p - b * dv_p;
    s.qq.row(k) = -g * dtheta_q - b * dv_q;
  }
  return s;
}

SensitivityBundle build_sensitivity(const Network& net, double condition_limit) {
  return build_sensitivity(net, build_admittance(net), condition_limit);
}

SensitivityBundle build_sensitivity(const Network& net, const AdmittancePair& adm, double condition_limit) {
  SensitivityBundle s;
  s.ref_bus = net.reference_index();
  s.c_matrix = build_c_matrix(adm);
  s.x_matrix = build_x_matrix(s.c_matrix, s.ref_bus, condition_limit);
  GsdfSet g = build_gsdf(s.x_matrix, net);
  s.gsdf_pp = std::move(g.pp);
  s.gsdf_pq = std::move(g.pq);
  s.gsdf_qp = std::move(g.qp);
  s.gsdf_qq = std::move(g.qq);
  BranchTerms t = branch_terms(net);
  s.from_index = std::move(t.from);
  s.to_index = std::move(t.to);
  s.series_g = std::move(t.g);
  s.series_b = std::move(t.b);
  return s;
}

FlowVector eval_branch_flows(const SensitivityBundle& bundle, const InjectionVector& inj) {
  if (inj.p.size() != bundle.num_buses() || inj.q.size() != bundle.num_buses())
    throw ArgumentError("injection vector length does not match network");
  return {bundle.gsdf_pp * inj.p + bundle.gsdf_pq * inj.q, bundle.gsdf_qp * inj.p + bundle.gsdf_qq * inj.q};
}

Eigen::VectorXd linear_state(const Eigen::MatrixXd& x, const InjectionVector& inj) {
  const Eigen::Index n = x.rows() / 2;
  if (inj.p.size() != n || inj.q.size() != n) throw ArgumentError("injection vector length does not match network");
  Eigen::VectorXd pq(2 * n);
  pq << inj.p, inj.q;
  return x * pq;
}

Eigen::VectorXd eval_voltages(const Eigen::MatrixXd& x, const InjectionVector& inj) {
  const Eigen::Index n = x.rows() / 2;
  if (inj.p.size() != n || inj.q.size() != n) throw ArgumentError("injection vector length does not match network");
  return x.bottomLeftCorner(n, n) * inj.p + x.bottomRightCorner(n, n) * inj.q;
}

FlowVector flows_from_state(const SensitivityBundle& bundle, const Eigen::VectorXd& state) {
  const Eigen::Index n = bundle.num_buses();
  const Eigen::Index m = bundle.num_branches();
  FlowVector f{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(bundle.from_index[static_cast<std::size_t>(k)]);
    const auto j = static_cast<Eigen::Index>(bundle.to_index[static_cast<std::size_t>(k)]);
    const double dtheta = state(i) - state(j);
    const double dv = state(n + i) - state(n + j);
    f.p_flow(k) = bundle.series_g(k) * dv - bundle.series_b(k) * dtheta;
    f.q_flow(k) = -bundle.series_b(k) * dv - bundle.series_g(k) * dtheta;
  }
  return f;
}

}  // namespace lmp
