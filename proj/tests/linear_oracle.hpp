#pragma once
// Linearized network quantities rebuilt from raw branch data.

#include "lmp/network.hpp"

#include <Eigen/Dense>
#include <complex>
#include <unordered_map>

namespace oracle {

struct Linear {
  Eigen::MatrixXd c;
  Eigen::VectorXd g, b;  // per branch, of y / tap
  std::vector<Eigen::Index> from, to;
};

inline Linear linearize(const lmp::Network& net) {
  const auto n = static_cast<Eigen::Index>(net.num_buses());
  std::unordered_map<int, Eigen::Index> pos;
  for (Eigen::Index i = 0; i < n; ++i) pos[net.buses[static_cast<std::size_t>(i)].id] = i;
  Eigen::MatrixXd gs = Eigen::MatrixXd::Zero(n, n), bs = gs, gf = gs, bf = gs;
  Linear out;
  out.g.resize(static_cast<Eigen::Index>(net.num_branches()));
  out.b.resize(out.g.size());
  Eigen::Index m = 0;
  for (const auto& br : net.branches) {
    const Eigen::Index i = pos.at(br.from_bus), j = pos.at(br.to_bus);
    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    const double t = br.tap;
    const std::complex<double> yt = y / t;
    for (auto [a, c, s] : {std::tuple{i, i, 1.0}, {j, j, 1.0}, {i, j, -1.0}, {j, i, -1.0}}) {
      gs(a, c) += s * yt.real();
      bs(a, c) += s * yt.imag();
    }
    const std::complex<double> half(0.0, br.b_charge / 2.0);
    const std::complex<double> yff = (y + half) / (t * t), ytt = y + half;
    gf(i, i) += yff.real(), bf(i, i) += yff.imag();
    gf(j, j) += ytt.real(), bf(j, j) += ytt.imag();
    gf(i, j) -= yt.real(), bf(i, j) -= yt.imag();
    gf(j, i) -= yt.real(), bf(j, i) -= yt.imag();
    out.g(m) = yt.real();
    out.b(m) = yt.imag();
    out.from.push_back(i);
    out.to.push_back(j);
    ++m;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    gf(i, i) += net.buses[static_cast<std::size_t>(i)].g_shunt;
    bf(i, i) += net.buses[static_cast<std::size_t>(i)].b_shunt;
  }
  out.c.resize(2 * n, 2 * n);
  out.c << bs, -gf, gs, bf;
  return out;
}

// Solve -C_red s = [P; Q]_red for the state, reference angle fixed at zero.
inline Eigen::VectorXd solve_state(const Linear& lin, Eigen::Index ref, const Eigen::VectorXd& pq) {
  const Eigen::Index n2 = lin.c.rows();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < n2; ++k)
    if (k != ref) keep.push_back(k);
  const auto r = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd cr(r, r);
  Eigen::VectorXd rhs(r);
  for (Eigen::Index a = 0; a < r; ++a) {
    rhs(a) = pq(keep[static_cast<std::size_t>(a)]);
    for (Eigen::Index c = 0; c < r; ++c) cr(a, c) = lin.c(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(c)]);
  }
  const Eigen::VectorXd sr = (-cr).partialPivLu().solve(rhs);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n2);
  for (Eigen::Index a = 0; a < r; ++a) s(keep[static_cast<std::size_t>(a)]) = sr(a);
  return s;
}

// Active and reactive branch flow from the state.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> direct_flows(const Linear& lin, const Eigen::VectorXd& s) {
  const Eigen::Index n = lin.c.rows() / 2, m = lin.g.size();
  Eigen::VectorXd p(m), q(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = lin.from[static_cast<std::size_t>(k)], j = lin.to[static_cast<std::size_t>(k)];
    const double dv = s(n + i) - s(n + j), dt = s(i) - s(j);
    p(k) = lin.g(k) * dv - lin.b(k) * dt;
    q(k) = -lin.b(k) * dv - lin.g(k) * dt;
  }
  return {p, q};
}

}  // namespace oracle
