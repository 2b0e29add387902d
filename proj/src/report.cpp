#include "lmp/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

namespace lmp {

namespace {

using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return {};
}

std::string render_csv(const Table& t) {
  std::string out = "# lmp-report v" + std::to_string(kReportVersion) + " " + t.name + "\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + cell_text(row[c]);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json to_json(const Table& t) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      const Cell& cell = row[c];
      if (const auto* d = std::get_if<double>(&cell)) obj[t.columns[c]] = std::stod(format_number(*d));
      else if (const auto* i = std::get_if<long long>(&cell)) obj[t.columns[c]] = *i;
      else if (const auto* s = std::get_if<std::string>(&cell)) obj[t.columns[c]] = *s;
      else obj[t.columns[c]] = nullptr;
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

std::string render_json(const std::vector<Table>& tables) {
  nlohmann::ordered_json doc;
  doc["format"] = "lmp-report";
  doc["version"] = kReportVersion;
  for (const Table& t : tables) doc[t.name] = to_json(t);
  return doc.dump(1) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::vector<std::filesystem::path> emit(const std::vector<Table>& tables, const std::filesystem::path& dir,
                                        ReportFormat format, const std::string& json_name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::json) {
    written.push_back(dir / json_name);
    write_file(written.back(), render_json(tables));
  } else {
    for (const Table& t : tables) {
      written.push_back(dir / (t.name + ".csv"));
      write_file(written.back(), render_csv(t));
    }
  }
  return written;
}

// Per-unit price to currency per MWh.
double price(double per_unit, const Network& net) { return per_unit / net.base_mva; }

std::string bound_flag(double value, double lo, double hi) {
  if (value <= lo + kBindingTolerance) return "min";
  if (value >= hi - kBindingTolerance) return "max";
  return {};
}

Table make_bus_table(const LmpResult& r) {
  const Network& net = r.network;
  Table t{"bus",
          {"bus_id", "kind", "v", "v_min", "v_max", "v_bound", "almp", "almp_energy", "almp_congestion",
           "almp_voltage", "almp_loss", "rlmp", "rlmp_energy", "rlmp_congestion", "rlmp_voltage", "rlmp_loss",
           "voltage_dual"},
          {}};
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const Bus& b = net.buses[i];
    t.rows.push_back({static_cast<long long>(b.id), std::string(to_string(b.kind)), r.voltages(k), b.v_min, b.v_max,
                      bound_flag(r.voltages(k), b.v_min, b.v_max), price(r.almp.total(k), net),
                      price(r.almp.energy(k), net), price(r.almp.congestion(k), net), price(r.almp.voltage(k), net),
                      price(r.almp.loss(k), net), price(r.rlmp.total(k), net), price(r.rlmp.energy(k), net),
                      price(r.rlmp.congestion(k), net), price(r.rlmp.voltage(k), net), price(r.rlmp.loss(k), net),
                      price(r.duals.v(k), net)});
  }
  return t;
}

Table make_branch_table(const LmpResult& r) {
  const Network& net = r.network;
  Table t{"branch", {"index", "from_bus", "to_bus", "p_flow_mw", "q_flow_mvar", "limit_mw", "binding", "flow_dual"}, {}};
  for (std::size_t m = 0; m < net.num_branches(); ++m) {
    const auto k = static_cast<Eigen::Index>(m);
    const Branch& br = net.branches[m];
    Cell limit;
    long long binding = 0;
    if (br.flow_limit) {
      limit = *br.flow_limit * net.base_mva;
      binding = std::abs(r.flows.p_flow(k)) >= *br.flow_limit - kBindingTolerance ? 1 : 0;
    }
    t.rows.push_back({static_cast<long long>(m + 1), static_cast<long long>(br.from_bus),
                      static_cast<long long>(br.to_bus), r.flows.p_flow(k) * net.base_mva,
                      r.flows.q_flow(k) * net.base_mva, limit, binding, price(r.duals.mu(k), net)});
  }
  return t;
}

Table make_generator_table(const LmpResult& r) {
  const Network& net = r.network;
  Table t{"generator",
          {"index", "bus_id", "p_mw", "q_mvar", "p_min_mw", "p_max_mw", "q_min_mvar", "q_max_mvar", "p_bound",
           "q_bound"},
          {}};
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto k = static_cast<Eigen::Index>(g);
    const Generator& gen = net.generators[g];
    const double s = net.base_mva;
    t.rows.push_back({static_cast<long long>(g + 1), static_cast<long long>(gen.bus), r.p_gen(k) * s,
                      r.q_gen(k) * s, gen.p_min * s, gen.p_max * s, gen.q_min * s, gen.q_max * s,
                      bound_flag(r.p_gen(k), gen.p_min, gen.p_max), bound_flag(r.q_gen(k), gen.q_min, gen.q_max)});
  }
  return t;
}

Table make_summary_table(const LmpResult& r) {
  const Network& net = r.network;
  long long flows_binding = 0, volts_binding = 0;
  for (std::size_t m = 0; m < net.num_branches(); ++m) {
    const auto& lim = net.branches[m].flow_limit;
    if (lim && std::abs(r.flows.p_flow(static_cast<Eigen::Index>(m))) >= *lim - kBindingTolerance) ++flows_binding;
  }
  for (std::size_t i = 0; i < net.num_buses(); ++i)
    if (!bound_flag(r.voltages(static_cast<Eigen::Index>(i)), net.buses[i].v_min, net.buses[i].v_max).empty())
      ++volts_binding;
  Table t{"summary", {"key", "value"}, {}};
  auto add = [&t](const std::string& key, Cell value) { t.rows.push_back({key, std::move(value)}); };
  add("buses", static_cast<long long>(net.num_buses()));
  add("branches", static_cast<long long>(net.num_branches()));
  add("generators", static_cast<long long>(net.generators.size()));
  add("base_mva", net.base_mva);
  add("lambda_p", price(r.duals.lambda_p, net));
  add("lambda_q", price(r.duals.lambda_q, net));
  add("p_loss_mw", r.loss.p_loss_total * net.base_mva);
  add("q_loss_mvar", r.loss.q_loss_total * net.base_mva);
  add("objective", r.objective);
  add("iterations", static_cast<long long>(r.trace.size()));
  add("binding_flows", flows_binding);
  add("binding_voltages", volts_binding);
  return t;
}

Table make_trace_table(const LmpResult& r) {
  const double s = r.network.base_mva;
  Table t{"trace", {"iteration", "p_loss_mw", "q_loss_mvar", "objective", "qp_iterations"}, {}};
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    const IterationRecord& it = r.trace[k];
    t.rows.push_back({static_cast<long long>(k), it.p_loss * s, it.q_loss * s, it.objective,
                      static_cast<long long>(it.qp_iterations)});
  }
  return t;
}

Table make_loss_bus_table(const LmpResult& r) {
  const Network& net = r.network;
  const LossState& l = r.loss;
  Table t{"loss_bus", {"bus_id", "lf_p", "lf_q", "df_p", "df_q", "fnd_p_mw", "fnd_q_mvar"}, {}};
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.rows.push_back({static_cast<long long>(net.buses[i].id), l.lf_p(k), l.lf_q(k), l.df_p(k), l.df_q(k),
                      l.fnd_p(k) * net.base_mva, l.fnd_q(k) * net.base_mva});
  }
  return t;
}

Table make_loss_branch_table(const LmpResult& r) {
  const Network& net = r.network;
  const double s = net.base_mva;
  Table t{"loss_branch",
          {"index", "from_bus", "to_bus", "p_flow_mw", "p_loss_mw", "q_loss_mvar", "alt_p_loss_mw",
           "alt_q_loss_mvar"},
          {}};
  for (std::size_t m = 0; m < net.num_branches(); ++m) {
    const auto k = static_cast<Eigen::Index>(m);
    const Branch& br = net.branches[m];
    const double p = r.loss.flows.p_flow(k);
    // (P^2 + Q^2) alternative on the final flows, for comparison only.
    const double s2 = r.flows.p_flow(k) * r.flows.p_flow(k) + r.flows.q_flow(k) * r.flows.q_flow(k);
    t.rows.push_back({static_cast<long long>(m + 1), static_cast<long long>(br.from_bus),
                      static_cast<long long>(br.to_bus), p * s, p * p * br.r * s, p * p * br.x * s, s2 * br.r * s,
                      s2 * br.x * s});
  }
  return t;
}

std::vector<Table> solve_tables(const LmpResult& r) {
  return {make_bus_table(r),         make_branch_table(r),   make_generator_table(r),   make_summary_table(r),
          make_trace_table(r),       make_loss_bus_table(r), make_loss_branch_table(r)};
}

Table make_pf_bus_table(const Network& net, const PfSolution& pf) {
  Table t{"pf_bus", {"bus_id", "v", "angle_deg", "p_inj_mw", "q_inj_mvar"}, {}};
  for (std::size_t i = 0; i < net.num_buses(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.rows.push_back({static_cast<long long>(net.buses[i].id), pf.v_mag(k), pf.v_ang(k) * 180.0 / M_PI,
                      pf.injection(k).real() * net.base_mva, pf.injection(k).imag() * net.base_mva});
  }
  return t;
}

Table make_pf_branch_table(const Network& net, const PfSolution& pf) {
  const AcBranchFlow f = branch_flows_ac(pf, net);
  const double s = net.base_mva;
  Table t{"pf_branch",
          {"index", "from_bus", "to_bus", "p_from_mw", "q_from_mvar", "p_to_mw", "q_to_mvar", "p_loss_mw",
           "q_loss_mvar", "current"},
          {}};
  for (std::size_t m = 0; m < net.num_branches(); ++m) {
    const auto k = static_cast<Eigen::Index>(m);
    const auto loss = f.s_from(k) + f.s_to(k);
    t.rows.push_back({static_cast<long long>(m + 1), static_cast<long long>(net.branches[m].from_bus),
                      static_cast<long long>(net.branches[m].to_bus), f.s_from(k).real() * s, f.s_from(k).imag() * s,
                      f.s_to(k).real() * s, f.s_to(k).imag() * s, loss.real() * s, loss.imag() * s, f.current(k)});
  }
  return t;
}

Table make_pf_summary_table(const PfSolution& pf) {
  Table t{"pf_summary", {"key", "value"}, {}};
  t.rows.push_back({std::string("converged"), static_cast<long long>(pf.converged ? 1 : 0)});
  t.rows.push_back({std::string("iterations"), static_cast<long long>(pf.iterations)});
  t.rows.push_back({std::string("max_mismatch"), pf.max_mismatch});
  return t;
}

Table make_gsdf_table(const Network& net, const Eigen::MatrixXd& gsdf, std::string_view name) {
  Table t{std::string(name), {"branch"}, {}};
  for (const Bus& b : net.buses) t.columns.push_back(std::to_string(b.id));
  for (Eigen::Index m = 0; m < gsdf.rows(); ++m) {
    std::vector<Cell> row{static_cast<long long>(m + 1)};
    for (Eigen::Index i = 0; i < gsdf.cols(); ++i) row.emplace_back(gsdf(m, i));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t k = 0; k < ids.size(); ++k) out += (k ? " " : "") + std::to_string(ids[k]);
  return out;
}

}  // namespace

ReportFormat parse_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ArgumentError("unknown report format '" + std::string(name) + "' (expected csv or json)");
}

std::string format_number(double x) {
  if (x == 0.0) return "0";
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string bus_table(const LmpResult& r) { return render_csv(make_bus_table(r)); }
std::string branch_table(const LmpResult& r) { return render_csv(make_branch_table(r)); }
std::string generator_table(const LmpResult& r) { return render_csv(make_generator_table(r)); }
std::string summary_table(const LmpResult& r) { return render_csv(make_summary_table(r)); }
std::string trace_table(const LmpResult& r) { return render_csv(make_trace_table(r)); }
std::string loss_bus_table(const LmpResult& r) { return render_csv(make_loss_bus_table(r)); }
std::string loss_branch_table(const LmpResult& r) { return render_csv(make_loss_branch_table(r)); }
std::string solve_json(const LmpResult& r) { return render_json(solve_tables(r)); }

std::vector<std::filesystem::path> write_solve_report(const LmpResult& r, const std::filesystem::path& dir,
                                                      ReportFormat format) {
  return emit(solve_tables(r), dir, format, "report.json");
}

std::string pf_bus_table(const Network& net, const PfSolution& pf) { return render_csv(make_pf_bus_table(net, pf)); }
std::string pf_branch_table(const Network& net, const PfSolution& pf) {
  return render_csv(make_pf_branch_table(net, pf));
}
std::string pf_summary_table(const PfSolution& pf) { return render_csv(make_pf_summary_table(pf)); }
std::string pf_json(const Network& net, const PfSolution& pf) {
  return render_json({make_pf_bus_table(net, pf), make_pf_branch_table(net, pf), make_pf_summary_table(pf)});
}

std::vector<std::filesystem::path> write_pf_report(const Network& net, const PfSolution& pf,
                                                   const std::filesystem::path& dir, ReportFormat format) {
  return emit({make_pf_bus_table(net, pf), make_pf_branch_table(net, pf), make_pf_summary_table(pf)}, dir, format,
              "pf.json");
}

std::string gsdf_table(const Network& net, const Eigen::MatrixXd& gsdf, std::string_view name) {
  return render_csv(make_gsdf_table(net, gsdf, name));
}

std::vector<std::filesystem::path> write_sensitivity_report(const Network& net, const SensitivityBundle& bundle,
                                                            const std::filesystem::path& dir, ReportFormat format) {
  return emit({make_gsdf_table(net, bundle.gsdf_pp, "gsdf_pp"), make_gsdf_table(net, bundle.gsdf_pq, "gsdf_pq"),
               make_gsdf_table(net, bundle.gsdf_qp, "gsdf_qp"), make_gsdf_table(net, bundle.gsdf_qq, "gsdf_qq")},
              dir, format, "sensitivity.json");
}

PriceColumn parse_price_table(std::string_view text, std::string_view source) {
  const std::string where(source);
  PriceColumn out;
  std::ptrdiff_t id_col = -1, almp_col = -1;
  std::size_t pos = 0, line_no = 0;
  std::set<int> seen;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto fields = split_csv_line(line);
    if (id_col < 0) {
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c] == "bus_id") id_col = static_cast<std::ptrdiff_t>(c);
        if (fields[c] == "almp") almp_col = static_cast<std::ptrdiff_t>(c);
      }
      if (id_col < 0 || almp_col < 0)
        throw ParseError(line_no, where + ": header must name 'bus_id' and 'almp' columns");
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max(id_col, almp_col));
    if (fields.size() <= need) throw ParseError(line_no, where + ": too few columns");
    try {
      std::size_t used = 0;
      const std::string& id_text = fields[static_cast<std::size_t>(id_col)];
      const int id = std::stoi(id_text, &used);
      if (used != id_text.size()) throw std::invalid_argument("id");
      const std::string& p_text = fields[static_cast<std::size_t>(almp_col)];
      const double p = std::stod(p_text, &used);
      if (used != p_text.size()) throw std::invalid_argument("almp");
      if (!seen.insert(id).second) throw ParseError(line_no, where + ": duplicate bus " + id_text);
      out.bus_ids.push_back(id);
      out.almp.push_back(p);
    } catch (const std::logic_error&) {
      throw ParseError(line_no, where + ": malformed number");
    }
  }
  if (id_col < 0) throw ValidationError(where + ": no header row");
  if (out.bus_ids.empty()) throw ValidationError(where + ": no price rows");
  return out;
}

PriceColumn load_price_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open price file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_price_table(ss.str(), path.string());
}

double aea_tables(const PriceColumn& model, const PriceColumn& benchmark) {
  std::map<int, double> bench;
  for (std::size_t k = 0; k < benchmark.bus_ids.size(); ++k) bench[benchmark.bus_ids[k]] = benchmark.almp[k];
  std::vector<int> only_model, only_bench;
  std::set<int> model_ids(model.bus_ids.begin(), model.bus_ids.end());
  for (int id : model.bus_ids)
    if (!bench.count(id)) only_model.push_back(id);
  for (int id : benchmark.bus_ids)
    if (!model_ids.count(id)) only_bench.push_back(id);
  if (!only_model.empty() || !only_bench.empty()) {
    std::string msg = "bus sets differ;";
    if (!only_model.empty()) msg += " only in result: " + join_ids(only_model) + ";";
    if (!only_bench.empty()) msg += " only in benchmark: " + join_ids(only_bench) + ";";
    msg.pop_back();
    throw ValidationError(msg);
  }
  Eigen::VectorXd a(static_cast<Eigen::Index>(model.bus_ids.size()));
  Eigen::VectorXd b(a.size());
  for (std::size_t k = 0; k < model.bus_ids.size(); ++k) {
    a(static_cast<Eigen::Index>(k)) = model.almp[k];
    b(static_cast<Eigen::Index>(k)) = bench[model.bus_ids[k]];
  }
  return aea(a, b, model.bus_ids);
}

}  // namespace lmp
