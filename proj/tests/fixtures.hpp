#pragma once

#include "lmp/network.hpp"

#include <string>

namespace fixture {

inline std::string path(const std::string& name) { return std::string(LMP_DATA_DIR) + "/" + name; }

inline lmp::Network two_bus() { return lmp::load_case(path("two_bus.m")); }
inline lmp::Network three_bus() { return lmp::load_case(path("three_bus.m")); }

inline lmp::Network case118() {
  lmp::Network net = lmp::load_case(path("case118.m"));
  lmp::merge_ratings(net, lmp::load_ratings(path("case118_ratings.txt")));
  return net;
}

}  // namespace fixture
