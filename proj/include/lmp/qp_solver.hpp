#pragma once

#include "lmp/errors.hpp"

#include <Eigen/Dense>
#include <iosfwd>
#include <limits>
#include <vector>

namespace lmp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex QP with a diagonal objective:
///
///   minimize    sum_i quadratic_diag_i * x_i^2 + linear_cost_i * x_i
///   subject to  eq_matrix x = eq_rhs
///               range_lower <= range_matrix x <= range_upper
///               var_lower <= x <= var_upper
///
/// Infinite bounds (+/-kInf) mark absent sides.
struct QpProblem {
  Eigen::VectorXd quadratic_diag;
  Eigen::VectorXd linear_cost;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd range_matrix;
  Eigen::VectorXd range_lower;
  Eigen::VectorXd range_upper;
  Eigen::VectorXd var_lower;
  Eigen::VectorXd var_upper;

  // Empty problem in n variables: zero objective, no constraints, free bounds.
  static QpProblem with_vars(Eigen::Index n);

  Eigen::Index num_vars() const { return quadratic_diag.size(); }
  Eigen::Index num_equalities() const { return eq_matrix.rows(); }
  Eigen::Index num_ranges() const { return range_matrix.rows(); }

  void add_equality(const Eigen::RowVectorXd& row, double rhs);
  void add_range(const Eigen::RowVectorXd& row, double lower, double upper);

  double objective(const Eigen::VectorXd& x) const;

  // Throws ArgumentError on dimension mismatch, negative curvature, or inverted bounds.
  void check() const;
};

struct ActiveConstraint {
  enum class Kind { range, bound };
  Kind kind = Kind::range;
  Eigen::Index index = 0;
  bool upper = false;

  auto operator<=>(const ActiveConstraint&) const = default;
};

/// Multiplier conventions:
///   stationarity  grad f(x) - eq_matrix^T eq_duals - range_matrix^T range_duals - bound_duals = 0
///   range_duals / bound_duals are (lower-side multiplier) - (upper-side multiplier):
///   positive at an active lower side, negative at an active upper side.
/// eq_duals is therefore d(objective)/d(eq_rhs).
struct QpSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd range_duals;
  Eigen::VectorXd bound_duals;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::vector<ActiveConstraint> active_set;  // sorted
};

struct QpOptions {
  double tol = 1e-8;
  int max_iterations = 0;  // 0 = automatic, proportional to problem size
  // Constraints from a previous solve; when violated they are added before any other.
  std::vector<ActiveConstraint> warm_start;
};

// Farkas multipliers proving infeasibility: all entries nonnegative except `eq`, with
//   eq_matrix^T eq + range_matrix^T (range_lower - range_upper) + (bound_lower - bound_upper) = 0
//   eq_rhs . eq + range_lower_bounds . range_lower - range_upper_bounds . range_upper + ... > 0
struct InfeasibilityCertificate {
  Eigen::VectorXd eq;
  Eigen::VectorXd range_lower, range_upper;
  Eigen::VectorXd bound_lower, bound_upper;
};

class QpInfeasible : public NumericalError {
 public:
  QpInfeasible(const std::string& what, InfeasibilityCertificate cert)
      : NumericalError(what), certificate_(std::move(cert)) {}
  const InfeasibilityCertificate& certificate() const { return certificate_; }

 private:
  InfeasibilityCertificate certificate_;
};

class QpUnbounded : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QpIterationLimit : public NumericalError {
 public:
  QpIterationLimit(const std::string& what, double best_residual)
      : NumericalError(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options = {});
inline QpSolution solve_qp(const QpProblem& problem, double tol) {
  QpOptions o;
  o.tol = tol;
  return solve_qp(problem, o);
}

// Max-abs over stationarity, primal infeasibility, and complementarity (|dual| x slack).
double kkt_residual(const QpProblem& problem, const QpSolution& solution);

// Plain-text dump: dimensions, then each array row-major.
void write_problem(std::ostream& out, const QpProblem& problem);

}  // namespace lmp
