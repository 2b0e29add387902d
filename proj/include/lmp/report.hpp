#pragma once

#include "lmp/ac_oracle.hpp"
#include "lmp/lmp_engine.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lmp {

// Tables are CSV with a leading "# lmp-report v1 <table>" comment row.
// Prices are written in currency per MWh (per MVArh), powers in MW / MVAr.
inline constexpr int kReportVersion = 1;
inline constexpr double kBindingTolerance = 1e-6;  // per-unit distance to a bound

enum class ReportFormat { csv, json };

ReportFormat parse_format(std::string_view name);

// 9 significant digits; negative zero printed as 0.
std::string format_number(double x);

std::string bus_table(const LmpResult& r);
std::string branch_table(const LmpResult& r);
std::string generator_table(const LmpResult& r);
std::string summary_table(const LmpResult& r);
std::string trace_table(const LmpResult& r);
std::string loss_bus_table(const LmpResult& r);
std::string loss_branch_table(const LmpResult& r);
std::string solve_json(const LmpResult& r);

// Returns the files written, in a fixed order.
std::vector<std::filesystem::path> write_solve_report(const LmpResult& r, const std::filesystem::path& dir,
                                                      ReportFormat format);

std::string pf_bus_table(const Network& net, const PfSolution& pf);
std::string pf_branch_table(const Network& net, const PfSolution& pf);
std::string pf_summary_table(const PfSolution& pf);
std::string pf_json(const Network& net, const PfSolution& pf);
std::vector<std::filesystem::path> write_pf_report(const Network& net, const PfSolution& pf,
                                                   const std::filesystem::path& dir, ReportFormat format);

// One row per branch, header row of bus ids.
std::string gsdf_table(const Network& net, const Eigen::MatrixXd& gsdf, std::string_view name);
std::vector<std::filesystem::path> write_sensitivity_report(const Network& net, const SensitivityBundle& bundle,
                                                            const std::filesystem::path& dir, ReportFormat format);

// A bus-id / ALMP column pair read from a CSV with "bus_id" and "almp" headers.
struct PriceColumn {
  std::vector<int> bus_ids;
  std::vector<double> almp;
};

PriceColumn parse_price_table(std::string_view text, std::string_view source = "input");
PriceColumn load_price_table(const std::filesystem::path& path);

// AEA over buses matched by id. Mismatched bus sets raise ValidationError
// listing the ids missing on each side.
double aea_tables(const PriceColumn& model, const PriceColumn& benchmark);

}  // namespace lmp
