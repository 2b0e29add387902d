#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmp {

enum class BusKind { reference, generator, load };

// All electrical quantities are per-unit on Network::base_mva.
struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  double p_demand = 0.0;
  double q_demand = 0.0;
  double g_shunt = 0.0;
  double b_shunt = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charge = 0.0;
  double tap = 1.0;
  std::optional<double> flow_limit;  // empty = unconstrained

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  // cost(P, Q) = cost_a * P + cost_b * P^2 + cost_c * Q^2, P and Q in per-unit.
  double cost_a = 0.0;
  double cost_b = 0.0;
  double cost_c = 0.0;
  // Power-flow setpoints carried over from the case file (base-case replay only).
  double p_set = 0.0;
  double q_set = 0.0;
  double v_set = 1.0;

  bool operator==(const Generator&) const = default;
};

struct Network {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_branches() const { return branches.size(); }

  // Throws ValidationError for unknown ids. Linear scan; use BusIndex in loops.
  std::size_t index_of(int bus_id) const;
  std::size_t reference_index() const;

  bool operator==(const Network&) const = default;
};

// External bus id -> position in Network::buses.
class BusIndex {
 public:
  explicit BusIndex(const Network& net);
  std::size_t operator()(int bus_id) const;
  bool contains(int bus_id) const { return map_.count(bus_id) != 0; }

 private:
  std::unordered_map<int, std::size_t> map_;
};

struct AdmittancePair {
  Eigen::MatrixXcd y_full;    // Y = G + jB, shunts and line charging included
  Eigen::MatrixXcd y_series;  // Y' = G' + jB', series elements only
};

struct RatingEntry {
  int from_bus = 0;
  int to_bus = 0;
  double rating_mva = 0.0;
};

// MATPOWER text case (bus/gen/branch/gencost tables) -> validated per-unit Network.
Network parse_case(std::string_view text);
Network load_case(const std::filesystem::path& path);

// "from to rating" triples, one per line; '#' and '%' start comments.
std::vector<RatingEntry> parse_ratings(std::string_view text);
std::vector<RatingEntry> load_ratings(const std::filesystem::path& path);

// The k-th entry applies to branch k when endpoints agree (either orientation);
// otherwise it goes to the first not-yet-rated branch with matching endpoints.
// A zero rating leaves the branch unconstrained.
void merge_ratings(Network& net, const std::vector<RatingEntry>& ratings);

void validate(const Network& net);

AdmittancePair build_admittance(const Network& net);

Network scale_load(Network net, double factor);

// Native single-document format (JSON), lossless for doubles.
std::string to_native(const Network& net);
Network from_native(std::string_view text);

std::string_view to_string(BusKind kind);

}  // namespace lmp
