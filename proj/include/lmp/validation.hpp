#pragma once

#include "lmp/lmp_engine.hpp"

#include <string>
#include <vector>

namespace lmp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationOptions {
  ModelOptions model;
  unsigned seed = 20190101;
  int random_injections = 20;
  int price_probes = 10;
  double price_eps = 1e-3;           // per-unit demand perturbation for shadow-price probes
  double price_rel_tol = 5e-3;
  double lf_eps = 1e-4;
};

// The invariant battery behind `lmpctl validate`. Runs the priced solve
// itself; a solve failure is reported as a failed "solve" check.
std::vector<CheckResult> run_validation(const Network& net, const ValidationOptions& opts);

// Individual checks, usable from tests.
CheckResult check_reduced_inverse(const SensitivityBundle& bundle);
CheckResult check_reference_zeros(const SensitivityBundle& bundle);
CheckResult check_flow_identity(const SensitivityBundle& bundle, unsigned seed, int count);
CheckResult check_gsdf_finite_difference(const SensitivityBundle& bundle, double eps = 1e-6);
CheckResult check_loss_factor_finite_difference(const SensitivityBundle& bundle, const Network& net,
                                                const InjectionVector& inj, double eps = 1e-4);
CheckResult check_fnd_conservation(const LossState& loss);
CheckResult check_branch_loss_sign(const LossState& loss, const Network& net);
CheckResult check_decomposition_closure(const LmpResult& r);
CheckResult check_complementarity(const LmpResult& r);

struct PriceProbe {
  std::size_t bus = 0;
  double almp = 0.0, almp_fd = 0.0;
  double rlmp = 0.0, rlmp_fd = 0.0;
  bool degenerate = false;
};

// Deterministic pseudo-random bus sample; probes until `count` non-degenerate
// buses are found or every bus has been tried.
std::vector<PriceProbe> probe_prices(const LmpResult& r, const ModelOptions& opts, unsigned seed, int count,
                                     double eps);
CheckResult check_shadow_prices(const std::vector<PriceProbe>& probes, int wanted, double rel_tol);

}  // namespace lmp
