#pragma once

#include "iqvip/problem.hpp"
#include "iqvip/projections.hpp"
#include "iqvip/traffic.hpp"
#include "iqvip/types.hpp"

namespace iqvip {

/// Planar benchmark problem: V(x) = Q x with
///   Q = [ 3.4   -0.64 ]
///       [ 2.375  0.8  ]
/// psi(x) = box spanned by the origin and x, mu = 2, solution (0, 0).
/// The declared constants L = 2.2, eta = 2, rho = 1 are reference inputs
/// for this instance and are taken as given.
inline IqvipProblem<double> example51(double mu = 2.0) {
  Matrix<double> q(2, 2);
  q << 3.4, -0.64, 2.375, 0.8;
  IqvipProblem<double> problem;
  problem.forward.eval = [q](const VectorXd& x) { return VectorXd(q * x); };
  problem.forward.lipschitz = 2.2;
  problem.forward.strong_monotonicity = 2.0;
  problem.psi = span_box_family<double>(2);
  problem.mu = mu;
  problem.known_solution = VectorXd::Zero(2);
  return problem;
}

namespace traffic {

/// Synthetic four-bridge network: 8 nodes, 16 links. Links 0-3 are the
/// bridges carrying each origin O_i (nodes 0-3) to its destination D_i
/// (nodes 4-7); the remaining links chain the origin and destination sides
/// so every commodity has detour routes over the neighboring bridges.
/// Bridges 0-2 are tolled, with flow corridors [40,90], [0,50], [100,200].
/// Demands and capacities are invented for this example; only the topology
/// and the corridor bounds follow the reference four-bridge setting.
inline TrafficNetwork<double> demo_network() {
  TrafficNetwork<double> net;
  net.node_count = 8;
  auto add = [&](int tail, int head, double t0, double cap) {
    net.links.push_back({tail, head, t0, cap});
  };
  // bridges O_i -> D_i
  add(0, 4, 10.0, 60.0);   // link 0, tolled
  add(1, 5, 8.0, 40.0);    // link 1, tolled
  add(2, 6, 12.0, 100.0);  // link 2, tolled
  add(3, 7, 9.0, 80.0);    // link 3
  // origin-side connectors
  add(0, 1, 3.0, 150.0);   // link 4
  add(1, 0, 3.0, 150.0);   // link 5
  add(1, 2, 3.0, 150.0);   // link 6
  add(2, 1, 3.0, 150.0);   // link 7
  add(2, 3, 3.0, 150.0);   // link 8
  add(3, 2, 3.0, 150.0);   // link 9
  // destination-side connectors
  add(4, 5, 3.0, 150.0);   // link 10
  add(5, 4, 3.0, 150.0);   // link 11
  add(5, 6, 3.0, 150.0);   // link 12
  add(6, 5, 3.0, 150.0);   // link 13
  add(6, 7, 3.0, 150.0);   // link 14
  add(7, 6, 3.0, 150.0);   // link 15

  net.od_pairs = {{0, 4, 120.0}, {1, 5, 70.0}, {2, 6, 150.0}, {3, 7, 100.0}};
  net.controlled = {{0, 40.0, 90.0}, {1, 0.0, 50.0}, {2, 100.0, 200.0}};
  net.validate();
  return net;
}

}  // namespace traffic

}  // namespace iqvip
