#include "lmp/errors.hpp"
#include "lmp/network.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

namespace lmp {

namespace {

using cplx = std::complex<double>;

struct Table {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> lines;
};

struct RawCase {
  std::optional<double> base_mva;
  std::map<std::string, Table> tables;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') quoted = !quoted;
    if ((line[i] == '%' || line[i] == '#') && !quoted) return line.substr(0, i);
  }
  return line;
}

double parse_number(std::string_view tok, std::size_t line) {
  std::string s(tok);
  if (s == "Inf" || s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-Inf" || s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError(line, "malformed number '" + s + "'");
  return v;
}

void parse_row_segment(std::string_view seg, std::size_t line, Table& table) {
  std::vector<double> row;
  std::size_t i = 0;
  while (i < seg.size()) {
    while (i < seg.size() && (std::isspace(static_cast<unsigned char>(seg[i])) || seg[i] == ',')) ++i;
    std::size_t j = i;
    while (j < seg.size() && !std::isspace(static_cast<unsigned char>(seg[j])) && seg[j] != ',') ++j;
    if (j > i) row.push_back(parse_number(seg.substr(i, j - i), line));
    i = j;
  }
  if (!row.empty()) {
    table.rows.push_back(std::move(row));
    table.lines.push_back(line);
  }
}

RawCase scan_matpower(std::string_view text) {
  RawCase raw;
  enum class State { top, table, skip } state = State::top;
  Table* current = nullptr;
  char closer = ']';

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    line = strip_comment(line);

    while (!line.empty()) {
      if (state == State::skip) {
        const auto c = line.find(closer);
        if (c == std::string_view::npos) break;
        line = line.substr(c + 1);
        state = State::top;
        continue;
      }
      if (state == State::table) {
        const auto c = line.find(']');
        std::string_view body = line.substr(0, c);
        std::size_t start = 0;
        while (start <= body.size()) {
          const auto semi = body.find(';', start);
          parse_row_segment(body.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start),
                            line_no, *current);
          if (semi == std::string_view::npos) break;
          start = semi + 1;
        }
        if (c == std::string_view::npos) break;
        line = line.substr(c + 1);
        state = State::top;
        continue;
      }

      const auto key = line.find("mpc.");
      if (key == std::string_view::npos) break;
      const auto eq = line.find('=', key);
      if (eq == std::string_view::npos) throw ParseError(line_no, "expected '=' after field name");
      const std::string name(trim(line.substr(key + 4, eq - key - 4)));
      std::string_view rhs = trim(line.substr(eq + 1));
      if (!rhs.empty() && rhs.front() == '[') {
        current = &raw.tables[name];
        current->rows.clear();
        current->lines.clear();
        state = State::table;
        line = rhs.substr(1);
      } else if (!rhs.empty() && rhs.front() == '{') {
        closer = '}';
        state = State::skip;
        line = rhs.substr(1);
      } else {
        if (name == "baseMVA") {
          const auto semi = rhs.find(';');
          raw.base_mva = parse_number(trim(rhs.substr(0, semi)), line_no);
        }
        break;
      }
    }
  }
  if (state == State::table) throw ParseError(line_no, "unterminated table");
  return raw;
}

const Table& require_table(const RawCase& raw, const std::string& name) {
  const auto it = raw.tables.find(name);
  if (it == raw.tables.end()) throw ValidationError("case has no mpc." + name + " table");
  return it->second;
}

void require_columns(const Table& t, std::size_t r, std::size_t n, const char* what) {
  if (t.rows[r].size() < n)
    throw ParseError(t.lines[r], std::string(what) + " row has " + std::to_string(t.rows[r].size()) +
                                     " columns, expected at least " + std::to_string(n));
}

int as_int(double v, std::size_t line) {
  if (v != std::floor(v)) throw ParseError(line, "expected an integer, got " + std::to_string(v));
  return static_cast<int>(v);
}

struct PolyCost {
  double linear = 0.0;
  double quadratic = 0.0;
};

PolyCost read_cost(const Table& t, std::size_t r) {
  require_columns(t, r, 4, "gencost");
  const auto& row = t.rows[r];
  const std::size_t line = t.lines[r];
  const int model = as_int(row[0], line);
  if (model != 2) throw ParseError(line, "only polynomial cost model 2 is supported");
  const int n = as_int(row[3], line);
  if (n < 0 || n > 3) throw ParseError(line, "polynomial costs above degree 2 are not supported");
  require_columns(t, r, 4 + static_cast<std::size_t>(n), "gencost");
  PolyCost c;
  if (n == 3) c.quadratic = row[4];
  if (n >= 2) c.linear = row[4 + n - 2];
  return c;
}

}  // namespace

std::size_t Network::index_of(int bus_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return i;
  throw ValidationError("unknown bus id " + std::to_string(bus_id));
}

std::size_t Network::reference_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].kind == BusKind::reference) return i;
  throw ValidationError("network has no reference bus");
}

BusIndex::BusIndex(const Network& net) {
  for (std::size_t i = 0; i < net.buses.size(); ++i) map_.emplace(net.buses[i].id, i);
}

std::size_t BusIndex::operator()(int bus_id) const {
  const auto it = map_.find(bus_id);
  if (it == map_.end()) throw ValidationError("unknown bus id " + std::to_string(bus_id));
  return it->second;
}

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::reference: return "reference";
    case BusKind::generator: return "generator";
    case BusKind::load: return "load";
  }
  return "load";
}

Network parse_case(std::string_view text) {
  const RawCase raw = scan_matpower(text);
  if (!raw.base_mva) throw ValidationError("case has no mpc.baseMVA");
  const double base = *raw.base_mva;
  if (!(base > 0.0)) throw ValidationError("baseMVA must be positive");

  Network net;
  net.base_mva = base;

  const Table& bus_t = require_table(raw, "bus");
  for (std::size_t r = 0; r < bus_t.rows.size(); ++r) {
    require_columns(bus_t, r, 13, "bus");
    const auto& row = bus_t.rows[r];
    Bus b;
    b.id = as_int(row[0], bus_t.lines[r]);
    switch (as_int(row[1], bus_t.lines[r])) {
      case 1: b.kind = BusKind::load; break;
      case 2: b.kind = BusKind::generator; break;
      case 3: b.kind = BusKind::reference; break;
      default: throw ParseError(bus_t.lines[r], "unsupported bus type (isolated buses are not modeled)");
    }
    b.p_demand = row[2] / base;
    b.q_demand = row[3] / base;
    b.g_shunt = row[4] / base;
    b.b_shunt = row[5] / base;
    b.v_max = row[11];
    b.v_min = row[12];
    net.buses.push_back(b);
  }

  const Table& gen_t = require_table(raw, "gen");
  const Table& cost_t = require_table(raw, "gencost");
  const std::size_t ng_all = gen_t.rows.size();
  if (cost_t.rows.size() != ng_all && cost_t.rows.size() != 2 * ng_all)
    throw ValidationError("gencost has " + std::to_string(cost_t.rows.size()) + " rows for " +
                          std::to_string(ng_all) + " generators");
  const bool has_reactive_cost = cost_t.rows.size() == 2 * ng_all;
  for (std::size_t r = 0; r < ng_all; ++r) {
    require_columns(gen_t, r, 10, "gen");
    const auto& row = gen_t.rows[r];
    if (row[7] <= 0.0) continue;
    Generator g;
    g.bus = as_int(row[0], gen_t.lines[r]);
    g.p_set = row[1] / base;
    g.q_set = row[2] / base;
    g.q_max = row[3] / base;
    g.q_min = row[4] / base;
    g.v_set = row[5];
    g.p_max = row[8] / base;
    g.p_min = row[9] / base;
    const PolyCost pc = read_cost(cost_t, r);
    g.cost_a = pc.linear * base;
    g.cost_b = pc.quadratic * base * base;
    // Only the quadratic term of a reactive cost row is used; absent rows reuse the active one.
    g.cost_c = has_reactive_cost ? read_cost(cost_t, ng_all + r).quadratic * base * base : g.cost_b;
    net.generators.push_back(g);
  }

  const Table& br_t = require_table(raw, "branch");
  for (std::size_t r = 0; r < br_t.rows.size(); ++r) {
    require_columns(br_t, r, 11, "branch");
    const auto& row = br_t.rows[r];
    if (row[10] <= 0.0) continue;
    Branch br;
    br.from_bus = as_int(row[0], br_t.lines[r]);
    br.to_bus = as_int(row[1], br_t.lines[r]);
    br.r = row[2];
    br.x = row[3];
    br.b_charge = row[4];
    if (row[5] > 0.0) br.flow_limit = row[5] / base;
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    if (row[9] != 0.0) throw ParseError(br_t.lines[r], "phase-shifting transformers are not supported");
    net.branches.push_back(br);
  }

  validate(net);
  return net;
}

Network load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open case file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::vector<RatingEntry> parse_ratings(std::string_view text) {
  std::vector<RatingEntry> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() : nl + 1;
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    Table t;
    parse_row_segment(line, line_no, t);
    if (t.rows.size() != 1 || t.rows[0].size() != 3) throw ParseError(line_no, "expected 'from to rating'");
    const auto& row = t.rows[0];
    if (row[2] < 0.0) throw ParseError(line_no, "negative rating");
    out.push_back({as_int(row[0], line_no), as_int(row[1], line_no), row[2]});
  }
  return out;
}

std::vector<RatingEntry> load_ratings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ratings file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ratings(ss.str());
}

void merge_ratings(Network& net, const std::vector<RatingEntry>& ratings) {
  auto same_ends = [](const Branch& br, const RatingEntry& e) {
    return (br.from_bus == e.from_bus && br.to_bus == e.to_bus) ||
           (br.from_bus == e.to_bus && br.to_bus == e.from_bus);
  };
  std::vector<bool> rated(net.branches.size(), false);
  std::vector<const RatingEntry*> pending;
  for (std::size_t k = 0; k < ratings.size(); ++k) {
    if (k < net.branches.size() && !rated[k] && same_ends(net.branches[k], ratings[k])) {
      rated[k] = true;
      auto& br = net.branches[k];
      if (ratings[k].rating_mva > 0.0) br.flow_limit = ratings[k].rating_mva / net.base_mva;
      else br.flow_limit.reset();
    } else {
      pending.push_back(&ratings[k]);
    }
  }
  for (const RatingEntry* e : pending) {
    bool placed = false;
    for (std::size_t m = 0; m < net.branches.size() && !placed; ++m) {
      if (rated[m] || !same_ends(net.branches[m], *e)) continue;
      rated[m] = placed = true;
      if (e->rating_mva > 0.0) net.branches[m].flow_limit = e->rating_mva / net.base_mva;
      else net.branches[m].flow_limit.reset();
    }
    if (!placed)
      throw ValidationError("rating for " + std::to_string(e->from_bus) + "-" + std::to_string(e->to_bus) +
                            " matches no unrated branch");
  }
}

void validate(const Network& net) {
  if (net.buses.empty()) throw ValidationError("network has no buses");
  if (!(net.base_mva > 0.0)) throw ValidationError("base_mva must be positive");

  std::size_t refs = 0;
  std::unordered_map<int, std::size_t> ids;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    if (!ids.emplace(b.id, i).second) throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::reference) ++refs;
    if (!(b.v_min > 0.0 && b.v_max > 0.0 && b.v_min < b.v_max))
      throw ValidationError("bus " + std::to_string(b.id) + " has invalid voltage bounds");
  }
  if (refs == 0) throw ValidationError("network has no reference bus");
  if (refs > 1) throw ValidationError("network has " + std::to_string(refs) + " reference buses");

  const BusIndex index(net);
  for (std::size_t m = 0; m < net.branches.size(); ++m) {
    const Branch& br = net.branches[m];
    const std::string tag = "branch " + std::to_string(m + 1) + " (" + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + ")";
    if (!index.contains(br.from_bus) || !index.contains(br.to_bus))
      throw ValidationError(tag + " references a missing bus");
    if (!(br.r * br.r + br.x * br.x > 0.0)) throw ValidationError(tag + " has zero series impedance");
    if (!(br.tap > 0.0)) throw ValidationError(tag + " has a non-positive tap");
    if (br.flow_limit && !(*br.flow_limit > 0.0)) throw ValidationError(tag + " has a non-positive flow limit");
  }
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const Generator& g = net.generators[k];
    const std::string tag = "generator " + std::to_string(k + 1) + " at bus " + std::to_string(g.bus);
    if (!index.contains(g.bus)) throw ValidationError(tag + " references a missing bus");
    if (g.p_min > g.p_max || g.q_min > g.q_max) throw ValidationError(tag + " has inverted limits");
    if (g.cost_b < 0.0 || g.cost_c < 0.0) throw ValidationError(tag + " has a concave cost");
  }

  std::vector<std::vector<std::size_t>> adj(net.buses.size());
  for (const Branch& br : net.branches) {
    adj[index(br.from_bus)].push_back(index(br.to_bus));
    adj[index(br.to_bus)].push_back(index(br.from_bus));
  }
  std::vector<bool> seen(net.buses.size(), false);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!todo.empty()) {
    const std::size_t u = todo.front();
    todo.pop();
    for (std::size_t v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        todo.push(v);
      }
  }
  if (reached != net.buses.size())
    throw ValidationError("network is disconnected (" + std::to_string(net.buses.size() - reached) +
                          " buses unreachable)");
}

AdmittancePair build_admittance(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  AdmittancePair adm;
  adm.y_full = Eigen::MatrixXcd::Zero(n, n);
  adm.y_series = Eigen::MatrixXcd::Zero(n, n);
  const BusIndex index(net);
  for (std::size_t m = 0; m < net.branches.size(); ++m) {
    const Branch& br = net.branches[m];
    const cplx z(br.r, br.x);
    if (std::abs(z) == 0.0) throw ValidationError("branch " + std::to_string(m + 1) + " has zero series impedance");
    const cplx ys = 1.0 / z;
    const cplx charge(0.0, br.b_charge / 2.0);
    const double t = br.tap;
    const auto f = static_cast<Eigen::Index>(index(br.from_bus));
    const auto k = static_cast<Eigen::Index>(index(br.to_bus));

    adm.y_series(f, f) += ys / t;
    adm.y_series(k, k) += ys / t;
    adm.y_series(f, k) -= ys / t;
    adm.y_series(k, f) -= ys / t;

    adm.y_full(f, f) += (ys + charge) / (t * t);
    adm.y_full(k, k) += ys + charge;
    adm.y_full(f, k) -= ys / t;
    adm.y_full(k, f) -= ys / t;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& b = net.buses[static_cast<std::size_t>(i)];
    adm.y_full(i, i) += cplx(b.g_shunt, b.b_shunt);
  }
  return adm;
}

Network scale_load(Network net, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ArgumentError("load scale factor must be positive");
  for (Bus& b : net.buses) {
    b.p_demand *= factor;
    b.q_demand *= factor;
  }
  return net;
}

std::string to_native(const Network& net) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["format"] = "lmp-network";
  doc["version"] = 1;
  doc["base_mva"] = net.base_mva;
  doc["buses"] = ordered_json::array();
  for (const Bus& b : net.buses) {
    doc["buses"].push_back({{"id", b.id},
                            {"kind", std::string(to_string(b.kind))},
                            {"p_demand", b.p_demand},
                            {"q_demand", b.q_demand},
                            {"g_shunt", b.g_shunt},
                            {"b_shunt", b.b_shunt},
                            {"v_min", b.v_min},
                            {"v_max", b.v_max}});
  }
  doc["branches"] = ordered_json::array();
  for (const Branch& br : net.branches) {
    ordered_json j = {{"from_bus", br.from_bus}, {"to_bus", br.to_bus}, {"r", br.r},
                      {"x", br.x},               {"b_charge", br.b_charge}, {"tap", br.tap}};
    j["flow_limit"] = br.flow_limit ? ordered_json(*br.flow_limit) : ordered_json(nullptr);
    doc["branches"].push_back(std::move(j));
  }
  doc["generators"] = ordered_json::array();
  for (const Generator& g : net.generators) {
    doc["generators"].push_back({{"bus", g.bus},       {"p_min", g.p_min},   {"p_max", g.p_max},
                                 {"q_min", g.q_min},   {"q_max", g.q_max},   {"cost_a", g.cost_a},
                                 {"cost_b", g.cost_b}, {"cost_c", g.cost_c}, {"p_set", g.p_set},
                                 {"q_set", g.q_set},   {"v_set", g.v_set}});
  }
  return doc.dump(2) + "\n";
}

Network from_native(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("native network: ") + e.what());
  }
  try {
    if (doc.at("format") != "lmp-network") throw ValidationError("not an lmp-network document");
    Network net;
    net.base_mva = doc.at("base_mva").get<double>();
    for (const auto& j : doc.at("buses")) {
      Bus b;
      b.id = j.at("id").get<int>();
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "reference") b.kind = BusKind::reference;
      else if (kind == "generator") b.kind = BusKind::generator;
      else if (kind == "load") b.kind = BusKind::load;
      else throw ValidationError("unknown bus kind '" + kind + "'");
      b.p_demand = j.at("p_demand").get<double>();
      b.q_demand = j.at("q_demand").get<double>();
      b.g_shunt = j.at("g_shunt").get<double>();
      b.b_shunt = j.at("b_shunt").get<double>();
      b.v_min = j.at("v_min").get<double>();
      b.v_max = j.at("v_max").get<double>();
      net.buses.push_back(b);
    }
    for (const auto& j : doc.at("branches")) {
      Branch br;
      br.from_bus = j.at("from_bus").get<int>();
      br.to_bus = j.at("to_bus").get<int>();
      br.r = j.at("r").get<double>();
      br.x = j.at("x").get<double>();
      br.b_charge = j.at("b_charge").get<double>();
      br.tap = j.at("tap").get<double>();
      if (!j.at("flow_limit").is_null()) br.flow_limit = j.at("flow_limit").get<double>();
      net.branches.push_back(br);
    }
    for (const auto& j : doc.at("generators")) {
      Generator g;
      g.bus = j.at("bus").get<int>();
      g.p_min = j.at("p_min").get<double>();
      g.p_max = j.at("p_max").get<double>();
      g.q_min = j.at("q_min").get<double>();
      g.q_max = j.at("q_max").get<double>();
      g.cost_a = j.at("cost_a").get<double>();
      g.cost_b = j.at("cost_b").get<double>();
      g.cost_c = j.at("cost_c").get<double>();
      g.p_set = j.value("p_set", 0.0);
      g.q_set = j.value("q_set", 0.0);
      g.v_set = j.value("v_set", 1.0);
      net.generators.push_back(g);
    }
    validate(net);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("native network: ") + e.what());
  }
}

}  // namespace lmp
