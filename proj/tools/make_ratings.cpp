// Writes a synthetic "from to rating" file for a case: each branch gets
// max(floor, factor * base-case apparent flow), rounded up to 10 MVA.
#include "lmp/ac_oracle.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"synthetic branch ratings from the AC base case"};
  std::string case_path;
  double factor = 1.5;
  double floor_mva = 100.0;
  app.add_option("--case", case_path, "MATPOWER case file")->required();
  app.add_option("--factor", factor, "multiple of base-case |S|")->check(CLI::PositiveNumber);
  app.add_option("--floor", floor_mva, "minimum rating, MVA")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    const lmp::Network net = lmp::load_case(case_path);
    const lmp::PfSolution pf = lmp::newton_pf(net, lmp::base_case_spec(net));
    if (!pf.converged) {
      std::cerr << "base-case power flow did not converge\n";
      return 3;
    }
    const lmp::AcBranchFlow flows = lmp::branch_flows_ac(pf, net);
    std::printf("%% synthetic ratings: max(%g MVA, %g x base-case |S|, rounded up to 10 MVA)\n", floor_mva, factor);
    std::printf("%% from to rating_mva\n");
    for (std::size_t m = 0; m < net.branches.size(); ++m) {
      const auto k = static_cast<Eigen::Index>(m);
      const double s = std::max(std::abs(flows.s_from(k)), std::abs(flows.s_to(k))) * net.base_mva;
      const double rating = std::max(floor_mva, 10.0 * std::ceil(factor * s / 10.0));
      std::printf("%d %d %g\n", net.branches[m].from_bus, net.branches[m].to_bus, rating);
    }
  } catch (const lmp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  }
  return 0;
}
