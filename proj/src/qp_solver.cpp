// Dual active-set QP (Goldfarb & Idnani, Math. Programming 27, 1983).
//
// The solver keeps J = L^-T Q and the upper-triangular R of the active
// normals, updated by Givens rotations on every add/drop, so the primal
// iterate always satisfies stationarity for the current active set and the
// multipliers come out exact at termination. Variables with zero curvature
// are handled by an outer proximal-point loop.

#include "lmp/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

namespace lmp {

QpProblem QpProblem::with_vars(Eigen::Index n) {
  QpProblem p;
  p.quadratic_diag = Eigen::VectorXd::Zero(n);
  p.linear_cost = Eigen::VectorXd::Zero(n);
  p.eq_matrix.resize(0, n);
  p.eq_rhs.resize(0);
  p.range_matrix.resize(0, n);
  p.range_lower.resize(0);
  p.range_upper.resize(0);
  p.var_lower = Eigen::VectorXd::Constant(n, -kInf);
  p.var_upper = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

void QpProblem::add_equality(const Eigen::RowVectorXd& row, double rhs) {
  if (row.size() != num_vars()) throw ArgumentError("equality row has wrong length");
  eq_matrix.conservativeResize(eq_matrix.rows() + 1, num_vars());
  eq_matrix.row(eq_matrix.rows() - 1) = row;
  eq_rhs.conservativeResize(eq_rhs.size() + 1);
  eq_rhs(eq_rhs.size() - 1) = rhs;
}

void QpProblem::add_range(const Eigen::RowVectorXd& row, double lower, double upper) {
  if (row.size() != num_vars()) throw ArgumentError("range row has wrong length");
  range_matrix.conservativeResize(range_matrix.rows() + 1, num_vars());
  range_matrix.row(range_matrix.rows() - 1) = row;
  range_lower.conservativeResize(range_lower.size() + 1);
  range_lower(range_lower.size() - 1) = lower;
  range_upper.conservativeResize(range_upper.size() + 1);
  range_upper(range_upper.size() - 1) = upper;
}

double QpProblem::objective(const Eigen::VectorXd& x) const {
  return quadratic_diag.dot(x.cwiseProduct(x)) + linear_cost.dot(x);
}

void QpProblem::check() const {
  const Eigen::Index n = num_vars();
  if (linear_cost.size() != n || var_lower.size() != n || var_upper.size() != n)
    throw ArgumentError("QP vector dimensions disagree");
  if (eq_matrix.cols() != n || eq_rhs.size() != eq_matrix.rows()) throw ArgumentError("QP equality dimensions");
  if (range_matrix.cols() != n || range_lower.size() != range_matrix.rows() ||
      range_upper.size() != range_matrix.rows())
    throw ArgumentError("QP range dimensions");
  if ((quadratic_diag.array() < 0.0).any()) throw ArgumentError("QP objective is not convex");
  if ((var_lower.array() > var_upper.array()).any()) throw ArgumentError("QP variable bounds are inverted");
  if ((range_lower.array() > range_upper.array()).any()) throw ArgumentError("QP range bounds are inverted");
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One finite side of a range or bound, written as normal . x >= rhs.
struct Side {
  ActiveConstraint::Kind kind;
  Index index;
  bool upper;
  double rhs;
};

class SideSet {
 public:
  explicit SideSet(const QpProblem& p) : p_(p) {
    for (Index i = 0; i < p.num_ranges(); ++i) {
      if (std::isfinite(p.range_lower(i))) sides_.push_back({ActiveConstraint::Kind::range, i, false, p.range_lower(i)});
      if (std::isfinite(p.range_upper(i))) sides_.push_back({ActiveConstraint::Kind::range, i, true, -p.range_upper(i)});
    }
    for (Index i = 0; i < p.num_vars(); ++i) {
      if (std::isfinite(p.var_lower(i))) sides_.push_back({ActiveConstraint::Kind::bound, i, false, p.var_lower(i)});
      if (std::isfinite(p.var_upper(i))) sides_.push_back({ActiveConstraint::Kind::bound, i, true, -p.var_upper(i)});
    }
  }

  Index size() const { return static_cast<Index>(sides_.size()); }
  const Side& operator[](Index s) const { return sides_[static_cast<std::size_t>(s)]; }

  void normal(Index s, VectorXd& out) const {
    const Side& sd = (*this)[s];
    if (sd.kind == ActiveConstraint::Kind::range) {
      out = p_.range_matrix.row(sd.index).transpose();
    } else {
      out.setZero(p_.num_vars());
      out(sd.index) = 1.0;
    }
    if (sd.upper) out = -out;
  }

  // normal . x - rhs for every side; `rx` = range_matrix * x.
  void slacks(const VectorXd& x, VectorXd& out) const {
    const VectorXd rx = p_.range_matrix * x;
    out.resize(size());
    for (Index s = 0; s < size(); ++s) {
      const Side& sd = (*this)[s];
      const double v = sd.kind == ActiveConstraint::Kind::range ? rx(sd.index) : x(sd.index);
      out(s) = (sd.upper ? -v : v) - sd.rhs;
    }
  }

  Index find(const ActiveConstraint& a) const {
    for (Index s = 0; s < size(); ++s) {
      const Side& sd = (*this)[s];
      if (sd.kind == a.kind && sd.index == a.index && sd.upper == a.upper) return s;
    }
    return -1;
  }

 private:
  const QpProblem& p_;
  std::vector<Side> sides_;
};

struct GiResult {
  VectorXd x;
  VectorXd eq_mult;
  std::vector<Index> active;  // side ids
  std::vector<double> active_mult;
  int iterations = 0;
};

// Relative size below which a vector counts as lying in the span of the active normals.
constexpr double kDependenceTol = 1e-12;

class GoldfarbIdnani {
 public:
  GoldfarbIdnani(const QpProblem& p, const SideSet& sides, const VectorXd& hess, const VectorXd& c, double feas_eps,
                 int max_iter)
      : p_(p), sides_(sides), hess_(hess), c_(c), feas_eps_(feas_eps), max_iter_(max_iter) {
    n_ = hess.size();
    J_ = MatrixXd::Zero(n_, n_);
    for (Index i = 0; i < n_; ++i) J_(i, i) = 1.0 / std::sqrt(hess(i));
    R_ = MatrixXd::Zero(n_, n_);
    u_ = VectorXd::Zero(n_ + 1);
    A_.assign(static_cast<std::size_t>(n_ + 1), 0);
    d_.resize(n_);
    z_.resize(n_);
    r_ = VectorXd::Zero(n_ + 1);
  }

  GiResult run(const std::vector<Index>& priority) {
    x_ = -c_.cwiseQuotient(hess_);
    add_equalities();

    const Index m = sides_.size();
    std::vector<char> inactive(static_cast<std::size_t>(m), 1);
    VectorXd slack;
    VectorXd np(n_);
    int iter = 0;
    for (;;) {
      if (++iter > max_iter_) throw QpIterationLimit("QP iteration limit reached", kInf);
      sides_.slacks(x_, slack);

      Index ip = -1;
      double worst = 0.0;
      auto consider = [&](Index s) {
        if (!inactive[static_cast<std::size_t>(s)]) return;
        const double tol = feas_eps_ * (1.0 + std::abs(sides_[s].rhs));
        if (slack(s) < -tol && slack(s) < worst) {
          worst = slack(s);
          ip = s;
        }
      };
      for (Index s : priority) consider(s);
      if (ip < 0)
        for (Index s = 0; s < m; ++s) consider(s);
      if (ip < 0) break;

      sides_.normal(ip, np);
      u_(iq_) = 0.0;
      A_[static_cast<std::size_t>(iq_)] = ip;
      double s_ip = slack(ip);

      for (;;) {
        if (++iter > max_iter_) throw QpIterationLimit("QP iteration limit reached", kInf);
        compute_direction(np);

        Index drop = -1;
        double t1 = kInf;
        for (Index k = num_eq_; k < iq_; ++k) {
          if (r_(k) <= 0.0) continue;
          const double ratio = u_(k) / r_(k);
          const Index id = A_[static_cast<std::size_t>(k)];
          if (ratio < t1 || (ratio == t1 && id < drop)) {
            t1 = ratio;
            drop = id;
          }
        }
        double t2 = kInf;
        if (!in_span()) t2 = -s_ip / z_.dot(np);
        const double t = std::min(t1, t2);

        if (!std::isfinite(t)) throw QpInfeasible("QP is infeasible", certificate(ip));

        if (!std::isfinite(t2)) {
          u_.head(iq_) -= t * r_.head(iq_);
          u_(iq_) += t;
          inactive[static_cast<std::size_t>(drop)] = 1;
          delete_constraint(drop);
          continue;
        }

        x_ += t * z_;
        u_.head(iq_) -= t * r_.head(iq_);
        u_(iq_) += t;
        if (t2 <= t1) {
          if (!add_constraint())
            throw NumericalError("QP active constraint normals became numerically dependent");
          inactive[static_cast<std::size_t>(ip)] = 0;
          break;
        }
        inactive[static_cast<std::size_t>(drop)] = 1;
        delete_constraint(drop);
        s_ip = np.dot(x_) - sides_[ip].rhs;
      }
    }

    GiResult res;
    res.x = x_;
    res.eq_mult = VectorXd::Zero(num_eq_);
    for (Index k = 0; k < num_eq_; ++k) res.eq_mult(-A_[static_cast<std::size_t>(k)] - 1) = u_(k);
    for (Index k = num_eq_; k < iq_; ++k) {
      res.active.push_back(A_[static_cast<std::size_t>(k)]);
      res.active_mult.push_back(u_(k));
    }
    res.iterations = iter;
    return res;
  }

 private:
  void add_equalities() {
    VectorXd np(n_);
    for (Index i = 0; i < p_.num_equalities(); ++i) {
      np = p_.eq_matrix.row(i).transpose();
      compute_direction(np);
      if (in_span()) throw ArgumentError("QP equality constraints are linearly dependent");
      const double t2 = (p_.eq_rhs(i) - np.dot(x_)) / z_.dot(np);
      x_ += t2 * z_;
      u_.head(iq_) -= t2 * r_.head(iq_);
      u_(iq_) = t2;
      A_[static_cast<std::size_t>(iq_)] = -i - 1;
      if (!add_constraint()) throw ArgumentError("QP equality constraints are linearly dependent");
    }
    num_eq_ = iq_;
  }

  void compute_direction(const VectorXd& np) {
    d_.noalias() = J_.transpose() * np;
    z_.noalias() = J_.rightCols(n_ - iq_) * d_.tail(n_ - iq_);
    if (iq_ > 0)
      r_.head(iq_) = R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d_.head(iq_));
  }

  bool in_span() const { return d_.tail(n_ - iq_).norm() <= kDependenceTol * d_.norm(); }

  bool add_constraint() {
    for (Index j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d_(j - 1);
      double ss = d_(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d_(j - 1) = -h;
      } else {
        d_(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    R_.col(iq_ - 1).head(iq_) = d_.head(iq_);
    if (std::abs(d_(iq_ - 1)) <= std::numeric_limits<double>::epsilon() * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d_(iq_ - 1)));
    return true;
  }

  void delete_constraint(Index id) {
    Index qq = -1;
    for (Index i = num_eq_; i < iq_; ++i)
      if (A_[static_cast<std::size_t>(i)] == id) {
        qq = i;
        break;
      }
    if (qq < 0) throw NumericalError("QP internal error: dropping a constraint that is not active");

    for (Index i = qq; i < iq_ - 1; ++i) {
      A_[static_cast<std::size_t>(i)] = A_[static_cast<std::size_t>(i + 1)];
      u_(i) = u_(i + 1);
      R_.col(i) = R_.col(i + 1);
    }
    A_[static_cast<std::size_t>(iq_ - 1)] = A_[static_cast<std::size_t>(iq_)];
    u_(iq_ - 1) = u_(iq_);
    A_[static_cast<std::size_t>(iq_)] = 0;
    u_(iq_) = 0.0;
    R_.col(iq_ - 1).head(iq_).setZero();
    --iq_;
    if (iq_ == 0) return;

    for (Index j = qq; j < iq_; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Index k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (Index k = 0; k < n_; ++k) {
        const double t1 = J_(k, j);
        const double t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  // The violated side is a combination of active normals with nonpositive
  // inequality weights: np = sum r_k n_k. Weights (1, -r) form a Farkas vector.
  InfeasibilityCertificate certificate(Index ip) const {
    InfeasibilityCertificate c;
    c.eq = VectorXd::Zero(p_.num_equalities());
    c.range_lower = c.range_upper = VectorXd::Zero(p_.num_ranges());
    c.bound_lower = c.bound_upper = VectorXd::Zero(p_.num_vars());
    auto put = [&](Index side, double w) {
      const Side& sd = sides_[side];
      if (sd.kind == ActiveConstraint::Kind::range) (sd.upper ? c.range_upper : c.range_lower)(sd.index) += w;
      else (sd.upper ? c.bound_upper : c.bound_lower)(sd.index) += w;
    };
    put(ip, 1.0);
    for (Index k = 0; k < iq_; ++k) {
      const Index id = A_[static_cast<std::size_t>(k)];
      if (id < 0) c.eq(-id - 1) -= r_(k);
      else put(id, std::max(0.0, -r_(k)));
    }
    return c;
  }

  const QpProblem& p_;
  const SideSet& sides_;
  const VectorXd& hess_;
  const VectorXd& c_;
  double feas_eps_;
  int max_iter_;

  Index n_ = 0;
  Index iq_ = 0;
  Index num_eq_ = 0;
  double r_norm_ = 1.0;
  MatrixXd J_, R_;
  VectorXd u_, d_, z_, r_, x_;
  std::vector<Index> A_;
};

QpSolution assemble_solution(const QpProblem& p, const SideSet& sides, const GiResult& gi) {
  QpSolution sol;
  sol.primal = gi.x;
  sol.eq_duals = gi.eq_mult;
  sol.range_duals = VectorXd::Zero(p.num_ranges());
  sol.bound_duals = VectorXd::Zero(p.num_vars());
  for (std::size_t k = 0; k < gi.active.size(); ++k) {
    const Side& sd = sides[gi.active[k]];
    const double w = sd.upper ? -gi.active_mult[k] : gi.active_mult[k];
    if (sd.kind == ActiveConstraint::Kind::range) sol.range_duals(sd.index) += w;
    else sol.bound_duals(sd.index) += w;
    sol.active_set.push_back({sd.kind, sd.index, sd.upper});
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.objective = p.objective(sol.primal);
  sol.iterations = gi.iterations;
  return sol;
}

std::vector<Index> priority_sides(const SideSet& sides, const std::vector<ActiveConstraint>& warm) {
  std::vector<Index> out;
  for (const auto& a : warm) {
    const Index s = sides.find(a);
    if (s >= 0) out.push_back(s);
  }
  return out;
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options) {
  problem.check();
  const SideSet sides(problem);
  const Index n = problem.num_vars();
  const int max_iter = options.max_iterations > 0
                           ? options.max_iterations
                           : static_cast<int>(20 * (n + sides.size() + problem.num_equalities()) + 100);
  const double feas_eps = std::min(1e-10, 1e-2 * options.tol);
  const VectorXd hess = 2.0 * problem.quadratic_diag;
  std::vector<Index> priority = priority_sides(sides, options.warm_start);

  const bool strictly_convex = (hess.array() > 0.0).all();
  if (strictly_convex) {
    GoldfarbIdnani gi(problem, sides, hess, problem.linear_cost, feas_eps, max_iter);
    QpSolution sol = assemble_solution(problem, sides, gi.run(priority));
    sol.kkt_residual = kkt_residual(problem, sol);
    if (!(sol.kkt_residual <= options.tol))
      throw QpIterationLimit("QP solve stopped above tolerance", sol.kkt_residual);
    return sol;
  }

  // Proximal point: add rho (x_i - center_i)^2 on zero-curvature variables.
  const VectorXd flat = (hess.array() > 0.0).select(VectorXd::Zero(n), VectorXd::Ones(n));
  const double rho = std::max(1.0, hess.maxCoeff());
  VectorXd center = VectorXd::Zero(n).cwiseMax(problem.var_lower).cwiseMin(problem.var_upper);
  const VectorXd prox_hess = hess + 2.0 * rho * flat;
  VectorXd prev_step = VectorXd::Zero(n);
  int ray_count = 0;
  int total_iter = 0;
  double best = kInf;
  constexpr int kMaxOuter = 2000;
  for (int outer = 0; outer < kMaxOuter; ++outer) {
    const VectorXd c = problem.linear_cost - 2.0 * rho * flat.cwiseProduct(center);
    GoldfarbIdnani gi(problem, sides, prox_hess, c, feas_eps, max_iter);
    QpSolution sol = assemble_solution(problem, sides, gi.run(priority));
    total_iter += sol.iterations;
    sol.iterations = total_iter;
    sol.kkt_residual = kkt_residual(problem, sol);
    best = std::min(best, sol.kkt_residual);
    if (sol.kkt_residual <= options.tol) return sol;

    const VectorXd step = sol.primal - center;
    const double step_norm = step.lpNorm<Eigen::Infinity>();
    const bool same_ray = step_norm > 1e-6 && (step - prev_step).lpNorm<Eigen::Infinity>() <= 1e-9 * step_norm;
    ray_count = same_ray ? ray_count + 1 : 0;
    if (ray_count >= 20) throw QpUnbounded("QP objective is unbounded below");
    prev_step = step;
    center = sol.primal;
    priority.clear();
    for (const auto& a : sol.active_set) priority.push_back(sides.find(a));
  }
  throw QpIterationLimit("QP proximal iterations exhausted", best);
}

double kkt_residual(const QpProblem& p, const QpSolution& s) {
  const VectorXd& x = s.primal;
  if (x.size() != p.num_vars() || s.eq_duals.size() != p.num_equalities() ||
      s.range_duals.size() != p.num_ranges() || s.bound_duals.size() != p.num_vars())
    throw ArgumentError("QP solution dimensions do not match problem");

  const VectorXd grad = 2.0 * p.quadratic_diag.cwiseProduct(x) + p.linear_cost;
  const VectorXd stat =
      grad - p.eq_matrix.transpose() * s.eq_duals - p.range_matrix.transpose() * s.range_duals - s.bound_duals;
  double res = stat.size() ? stat.lpNorm<Eigen::Infinity>() : 0.0;

  if (p.num_equalities() > 0) res = std::max(res, (p.eq_matrix * x - p.eq_rhs).lpNorm<Eigen::Infinity>());

  auto side_terms = [&res](double value, double lower, double upper, double dual) {
    if (std::isfinite(lower)) res = std::max(res, lower - value);
    if (std::isfinite(upper)) res = std::max(res, value - upper);
    if (dual > 0.0) res = std::max(res, std::isfinite(lower) ? dual * std::abs(value - lower) : kInf);
    if (dual < 0.0) res = std::max(res, std::isfinite(upper) ? -dual * std::abs(upper - value) : kInf);
  };
  const VectorXd rx = p.range_matrix * x;
  for (Index i = 0; i < p.num_ranges(); ++i) side_terms(rx(i), p.range_lower(i), p.range_upper(i), s.range_duals(i));
  for (Index i = 0; i < p.num_vars(); ++i) side_terms(x(i), p.var_lower(i), p.var_upper(i), s.bound_duals(i));
  return res;
}

void write_problem(std::ostream& out, const QpProblem& p) {
  out.precision(17);
  out << "qp " << p.num_vars() << ' ' << p.num_equalities() << ' ' << p.num_ranges() << '\n';
  auto vec = [&out](const char* name, const VectorXd& v) {
    out << name;
    for (Index i = 0; i < v.size(); ++i) out << ' ' << v(i);
    out << '\n';
  };
  auto mat = [&out](const char* name, const MatrixXd& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
      out << '\n';
    }
  };
  vec("quadratic_diag", p.quadratic_diag);
  vec("linear_cost", p.linear_cost);
  mat("eq_matrix", p.eq_matrix);
  vec("eq_rhs", p.eq_rhs);
  mat("range_matrix", p.range_matrix);
  vec("range_lower", p.range_lower);
  vec("range_upper", p.range_upper);
  vec("var_lower", p.var_lower);
  vec("var_upper", p.var_upper);
}

}  // namespace lmp
