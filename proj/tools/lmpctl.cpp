#include "lmp/report.hpp"
#include "lmp/validation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace {

struct CaseArgs {
  std::string case_path;
  std::string ratings_path;
  std::string scenario;
  std::optional<double> vmin, vmax;
  double load_scale = 1.0;
  bool no_loss = false;
  double loss_tol = 1e-4;
  int max_iter = 20;
  double qp_tol = 1e-8;
  int mixing_depth = 5;
  double mixing_weight = 0.5;
};

void add_case_options(CLI::App& cmd, CaseArgs& a) {
  cmd.add_option("--case", a.case_path, "MATPOWER case file")->required()->check(CLI::ExistingFile);
  cmd.add_option("--ratings", a.ratings_path, "branch rating file (from to MVA per line)")->check(CLI::ExistingFile);
}

void add_model_options(CLI::App& cmd, CaseArgs& a) {
  auto* sc = cmd.add_option("--scenario", a.scenario, "uniform voltage bounds preset")
                 ->check(CLI::IsMember({"loose", "normal", "tight"}));
  auto* lo = cmd.add_option("--vmin", a.vmin, "uniform lower voltage bound (custom scenario)");
  auto* hi = cmd.add_option("--vmax", a.vmax, "uniform upper voltage bound (custom scenario)");
  sc->excludes(lo)->excludes(hi);
  cmd.add_option("--load-scale", a.load_scale, "multiply every load")->check(CLI::PositiveNumber);
  cmd.add_flag("--no-loss", a.no_loss, "price the lossless model");
  cmd.add_option("--loss-tol", a.loss_tol, "loss iteration tolerance, per-unit")->check(CLI::PositiveNumber);
  cmd.add_option("--max-iter", a.max_iter, "maximum pricing solves")->check(CLI::PositiveNumber);
  cmd.add_option("--qp-tol", a.qp_tol, "QP KKT tolerance")->check(CLI::PositiveNumber);
  cmd.add_option("--mixing-depth", a.mixing_depth, "loss-point mixing history (0 = plain update)")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--mixing-weight", a.mixing_weight, "loss-point mixing weight in (0, 1]")
      ->check(CLI::Range(1e-6, 1.0));
}

lmp::Network load_network(const CaseArgs& a) {
  lmp::Network net = lmp::load_case(a.case_path);
  if (!a.ratings_path.empty()) lmp::merge_ratings(net, lmp::load_ratings(a.ratings_path));
  return net;
}

lmp::ModelOptions model_options(const CaseArgs& a) {
  lmp::ModelOptions o;
  if (a.scenario == "loose") o.v_min_override = 0.90, o.v_max_override = 1.10;
  if (a.scenario == "normal") o.v_min_override = 0.95, o.v_max_override = 1.05;
  if (a.scenario == "tight") o.v_min_override = 0.97, o.v_max_override = 1.03;
  if (a.vmin) o.v_min_override = *a.vmin;
  if (a.vmax) o.v_max_override = *a.vmax;
  o.load_scale = a.load_scale;
  o.loss_enabled = !a.no_loss;
  o.loss_tolerance = a.loss_tol;
  o.max_iterations = a.max_iter;
  o.qp_tolerance = a.qp_tol;
  o.mixing_depth = a.mixing_depth;
  o.mixing_weight = a.mixing_weight;
  o.check();
  return o;
}

void print_written(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
}

int run_solve(const CaseArgs& a, const std::string& out_dir, const std::string& format) {
  const auto t0 = std::chrono::steady_clock::now();
  const lmp::Network net = load_network(a);
  const lmp::LmpResult r = lmp::iterate(net, model_options(a));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  print_written(lmp::write_solve_report(r, out_dir, lmp::parse_format(format)));
  const double base = r.network.base_mva;
  std::printf("solves %zu  p_loss %.6g MW  q_loss %.6g MVAr\n", r.trace.size(), r.loss.p_loss_total * base,
              r.loss.q_loss_total * base);
  std::printf("lambda_p %.6g  lambda_q %.6g  objective %.9g\n", r.duals.lambda_p / base, r.duals.lambda_q / base,
              r.objective);
  std::printf("wall time %.3f s\n", secs);
  return 0;
}

int run_pf(const CaseArgs& a, const std::string& out_dir, const std::string& format) {
  lmp::Network net = load_network(a);
  if (a.load_scale != 1.0) net = lmp::scale_load(net, a.load_scale);
  const lmp::PfSolution pf = lmp::newton_pf(net, lmp::base_case_spec(net));
  print_written(lmp::write_pf_report(net, pf, out_dir, lmp::parse_format(format)));
  std::printf("converged %s  iterations %d  max mismatch %.3e\n", pf.converged ? "yes" : "no", pf.iterations,
              pf.max_mismatch);
  return pf.converged ? 0 : 3;
}

int run_sensitivity(const CaseArgs& a, const std::string& out_dir, const std::string& format) {
  const lmp::Network net = load_network(a);
  const lmp::SensitivityBundle bundle = lmp::build_sensitivity(net);
  print_written(lmp::write_sensitivity_report(net, bundle, out_dir, lmp::parse_format(format)));
  return 0;
}

int run_validate(const CaseArgs& a, unsigned seed) {
  const auto t0 = std::chrono::steady_clock::now();
  lmp::ValidationOptions vo;
  vo.model = model_options(a);
  vo.seed = seed;
  const auto checks = lmp::run_validation(load_network(a), vo);
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("%s %-30s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    if (!c.passed) ++failed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of %zu checks failed  (%.2f s)\n", failed, checks.size(), secs);
  return failed ? 3 : 0;
}

int run_aea(const std::string& result, const std::string& benchmark) {
  const double v = lmp::aea_tables(lmp::load_price_table(result), lmp::load_price_table(benchmark));
  std::printf("%.6f\n", v);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-aware active/reactive LMP engine"};
  app.require_subcommand(1);

  CaseArgs args;
  std::string out_dir = "out";
  std::string format = "csv";
  unsigned seed = 20190101;
  std::string result_csv, bench_csv;

  auto* solve = app.add_subcommand("solve", "price a case and write reports");
  add_case_options(*solve, args);
  add_model_options(*solve, args);
  solve->add_option("--out-dir", out_dir, "report directory");
  solve->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* pf = app.add_subcommand("pf", "AC power flow at the case setpoints");
  add_case_options(*pf, args);
  pf->add_option("--load-scale", args.load_scale, "multiply every load")->check(CLI::PositiveNumber);
  pf->add_option("--out-dir", out_dir, "report directory");
  pf->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* sens = app.add_subcommand("sensitivity", "write the four GSDF matrices");
  add_case_options(*sens, args);
  sens->add_option("--out-dir", out_dir, "report directory");
  sens->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* val = app.add_subcommand("validate", "run the invariant battery");
  add_case_options(*val, args);
  add_model_options(*val, args);
  val->add_option("--seed", seed, "seed for sampled checks");

  auto* aea = app.add_subcommand("aea", "average ALMP error of a result against a benchmark");
  aea->add_option("result", result_csv, "bus report CSV with bus_id and almp columns")
      ->required()
      ->check(CLI::ExistingFile);
  aea->add_option("benchmark", bench_csv, "benchmark CSV with bus_id and almp columns")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve) return run_solve(args, out_dir, format);
    if (*pf) return run_pf(args, out_dir, format);
    if (*sens) return run_sensitivity(args, out_dir, format);
    if (*val) return run_validate(args, seed);
    if (*aea) return run_aea(result_csv, bench_csv);
  } catch (const lmp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
