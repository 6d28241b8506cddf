#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqvip/problem.hpp"
#include "iqvip/solvers.hpp"
#include "iqvip/types.hpp"

namespace iqvip::traffic {

template <typename Scalar>
struct Link {
  int tail = 0;
  int head = 0;
  Scalar t0 = 1;   // free-flow travel time
  Scalar cap = 1;  // capacity
};

template <typename Scalar>
struct OdPair {
  int origin = 0;
  int dest = 0;
  Scalar demand = 0;
};

/// A controlled link carries a toll x_i and a moving flow corridor
/// psi(x)_i = [lo + x_i, hi + x_i] that the operator wants the flow to hit.
template <typename Scalar>
struct ControlledLink {
  int link = 0;
  Scalar lo = 0;
  Scalar hi = 0;
};

template <typename Scalar>
struct TrafficNetwork {
  int node_count = 0;
  std::vector<Link<Scalar>> links;
  std::vector<OdPair<Scalar>> od_pairs;
  std::vector<ControlledLink<Scalar>> controlled;

  void validate() const {
    detail::require(node_count > 0, "TrafficNetwork: node_count must be positive");
    for (const auto& l : links) {
      detail::require(l.tail >= 0 && l.tail < node_count && l.head >= 0 &&
                          l.head < node_count,
                      "TrafficNetwork: link endpoint out of range");
      detail::require(l.t0 > Scalar(0), "TrafficNetwork: t0 must be positive");
      detail::require(l.cap > Scalar(0), "TrafficNetwork: cap must be positive");
    }
    for (const auto& od : od_pairs) {
      detail::require(od.origin >= 0 && od.origin < node_count && od.dest >= 0 &&
                          od.dest < node_count,
                      "TrafficNetwork: od node out of range");
      detail::require(od.demand >= Scalar(0),
                      "TrafficNetwork: demand must be >= 0");
    }
    for (const auto& c : controlled) {
      detail::require(c.link >= 0 && c.link < static_cast<int>(links.size()),
                      "TrafficNetwork: controlled link index out of range");
      detail::require(c.lo <= c.hi, "TrafficNetwork: corridor lo must be <= hi");
    }
  }
};

template <typename Scalar>
using TollVector = Vector<Scalar>;

/// BPR link latency t0 * (1 + 0.15 (flow/cap)^4).
template <typename Scalar>
Scalar bpr_time(Scalar t0, Scalar cap, Scalar flow) {
  detail::require(t0 > Scalar(0), "bpr_time: t0 must be positive");
  detail::require(cap > Scalar(0), "bpr_time: cap must be positive");
  detail::require(flow >= Scalar(0), "bpr_time: flow must be >= 0");
  const Scalar r = flow / cap;
  const Scalar r2 = r * r;
  return t0 * (Scalar(1) + Scalar(0.15) * r2 * r2);
}

/// Integral of the BPR latency: t0 * f * (1 + 0.03 (f/cap)^4).
template <typename Scalar>
Scalar bpr_integral(Scalar t0, Scalar cap, Scalar flow) {
  const Scalar r = flow / cap;
  const Scalar r2 = r * r;
  return t0 * flow * (Scalar(1) + Scalar(0.03) * r2 * r2);
}

template <typename Scalar>
struct UeParams {
  Scalar gap_tol = Scalar(1e-7);
  int max_iter = 200000;
  Scalar value_of_time = 1;  // converts tolls into time-equivalent cost
};

/// User-equilibrium assignment: link flows, the per-commodity split used for
/// conservation checks, the relative gap reached, and iterations spent.
template <typename Scalar>
struct UeResult {
  Vector<Scalar> link_flows;
  Matrix<Scalar> commodity_flows;  // one row per OD pair
  Scalar relative_gap = 0;
  int iterations = 0;
};

namespace detail_tr {

template <typename Scalar>
Vector<Scalar> toll_per_link(const TrafficNetwork<Scalar>& net,
                             const TollVector<Scalar>& tolls,
                             Scalar value_of_time) {
  iqvip::detail::require(
      tolls.size() == static_cast<Eigen::Index>(net.controlled.size()),
      "toll vector length must match controlled link count");
  iqvip::detail::require(tolls.allFinite(), "toll vector must be finite");
  Vector<Scalar> per_link = Vector<Scalar>::Zero(net.links.size());
  for (std::size_t i = 0; i < net.controlled.size(); ++i)
    per_link[net.controlled[i].link] += value_of_time * tolls[i];
  // A subsidy may not push a link's generalized cost below zero at any
  // load; shortest-path costs must stay nonnegative.
  for (std::size_t i = 0; i < net.links.size(); ++i)
    per_link[static_cast<Eigen::Index>(i)] =
        std::max(per_link[static_cast<Eigen::Index>(i)], -net.links[i].t0);
  return per_link;
}

template <typename Scalar>
Vector<Scalar> link_costs(const TrafficNetwork<Scalar>& net,
                          const Vector<Scalar>& flows,
                          const Vector<Scalar>& toll_cost) {
  Vector<Scalar> costs(net.links.size());
  for (std::size_t i = 0; i < net.links.size(); ++i)
    costs[i] = bpr_time(net.links[i].t0, net.links[i].cap, flows[i]) +
               toll_cost[i];
  return costs;
}

template <typename Scalar>
Scalar beckmann(const TrafficNetwork<Scalar>& net, const Vector<Scalar>& flows,
                const Vector<Scalar>& toll_cost) {
  Scalar total = 0;
  for (std::size_t i = 0; i < net.links.size(); ++i)
    total += bpr_integral(net.links[i].t0, net.links[i].cap, flows[i]) +
             toll_cost[i] * flows[i];
  return total;
}

struct Adjacency {
  std::vector<std::vector<int>> out;  // per node, link indices sorted ascending

  template <typename Scalar>
  explicit Adjacency(const TrafficNetwork<Scalar>& net)
      : out(net.node_count) {
    for (std::size_t i = 0; i < net.links.size(); ++i)
      out[net.links[i].tail].push_back(static_cast<int>(i));
  }
};

// Dijkstra over generalized costs. Ties between equal-cost paths break
// toward the lower predecessor link index, which keeps the all-or-nothing
// assignment deterministic.
template <typename Scalar>
void shortest_paths(const TrafficNetwork<Scalar>& net, const Adjacency& adj,
                    const Vector<Scalar>& costs, int origin,
                    std::vector<Scalar>& dist, std::vector<int>& pred_link) {
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  dist.assign(net.node_count, inf);
  pred_link.assign(net.node_count, -1);
  dist[origin] = 0;
  using Item = std::pair<Scalar, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.push({Scalar(0), origin});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (int li : adj.out[u]) {
      const auto& link = net.links[li];
      const Scalar nd = d + costs[li];
      if (nd < dist[link.head] ||
          (nd == dist[link.head] && pred_link[link.head] >= 0 &&
           li < pred_link[link.head])) {
        dist[link.head] = nd;
        pred_link[link.head] = li;
        heap.push({nd, link.head});
      }
    }
  }
}

template <typename Scalar>
struct AonWorkspace {
  std::vector<Scalar> dist;
  std::vector<int> pred_link;
};

// All-or-nothing assignment onto current shortest paths. Returns the total
// shortest-path travel cost (demand-weighted) and fills per-commodity rows.
template <typename Scalar>
Scalar all_or_nothing(const TrafficNetwork<Scalar>& net, const Adjacency& adj,
                      const Vector<Scalar>& costs, Matrix<Scalar>& commodity,
                      AonWorkspace<Scalar>& ws) {
  commodity.setZero();
  Scalar sptt = 0;
  for (std::size_t k = 0; k < net.od_pairs.size(); ++k) {
    const auto& od = net.od_pairs[k];
    if (od.demand == Scalar(0)) continue;
    // One Dijkstra per OD pair keeps the loop simple; pairs sharing an
    // origin could share a tree if this ever shows up in profiles.
    shortest_paths(net, adj, costs, od.origin, ws.dist, ws.pred_link);
    if (!std::isfinite(static_cast<double>(ws.dist[od.dest])))
      throw std::runtime_error("user_equilibrium: destination unreachable from origin");
    sptt += od.demand * ws.dist[od.dest];
    for (int node = od.dest; node != od.origin;) {
      const int li = ws.pred_link[node];
      commodity(static_cast<Eigen::Index>(k), li) += od.demand;
      node = net.links[li].tail;
    }
  }
  return sptt;
}

// Golden-section minimization of g over [0, 1] to interval width `tol`.
template <typename Scalar, typename Fn>
Scalar golden_section(Fn&& g, Scalar tol) {
  const Scalar invphi = Scalar(0.6180339887498949);
  Scalar a = 0, b = 1;
  Scalar c = b - invphi * (b - a);
  Scalar d = a + invphi * (b - a);
  Scalar gc = g(c), gd = g(d);
  while (b - a > tol) {
    if (gc < gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - invphi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + invphi * (b - a);
      gd = g(d);
    }
  }
  return (a + b) / 2;
}

}  // namespace detail_tr

/// Frank-Wolfe user equilibrium under the given tolls: repeated
/// all-or-nothing assignment on shortest generalized-cost paths with exact
/// golden-section line search on the Beckmann objective, until the relative
/// gap drops below gap_tol or max_iter is reached.
template <typename Scalar>
UeResult<Scalar> user_equilibrium(const TrafficNetwork<Scalar>& net,
                                  const TollVector<Scalar>& tolls,
                                  Scalar gap_tol, int max_iter,
                                  Scalar value_of_time = 1) {
  net.validate();
  detail::require(gap_tol > Scalar(0), "user_equilibrium: gap_tol must be positive");
  detail::require(max_iter >= 1, "user_equilibrium: max_iter must be >= 1");

  const auto n_links = static_cast<Eigen::Index>(net.links.size());
  const auto n_od = static_cast<Eigen::Index>(net.od_pairs.size());
  const detail_tr::Adjacency adj(net);
  const Vector<Scalar> toll_cost =
      detail_tr::toll_per_link(net, tolls, value_of_time);

  UeResult<Scalar> result;
  result.commodity_flows = Matrix<Scalar>::Zero(n_od, n_links);
  Matrix<Scalar> target(n_od, n_links);
  detail_tr::AonWorkspace<Scalar> ws;

  // Initial assignment at free-flow costs.
  Vector<Scalar> flows = Vector<Scalar>::Zero(n_links);
  Vector<Scalar> costs = detail_tr::link_costs(net, flows, toll_cost);
  detail_tr::all_or_nothing(net, adj, costs, result.commodity_flows, ws);
  flows = result.commodity_flows.colwise().sum().transpose();

  const Scalar ls_tol = Scalar(1e-10);
  Vector<Scalar> direction(n_links);
  for (int it = 1; it <= max_iter; ++it) {
    for (Eigen::Index i = 0; i < n_links; ++i)
      costs[i] = bpr_time(net.links[i].t0, net.links[i].cap, flows[i]) +
                 toll_cost[i];
    const Scalar sptt = detail_tr::all_or_nothing(net, adj, costs, target, ws);
    const Scalar tstt = costs.dot(flows);
    result.relative_gap =
        tstt > Scalar(0) ? (tstt - sptt) / tstt : Scalar(0);
    result.iterations = it;
    if (result.relative_gap <= gap_tol) break;

    direction = target.colwise().sum().transpose() - flows;
    const Scalar alpha = detail_tr::golden_section(
        [&](Scalar a) {
          Scalar total = 0;
          for (Eigen::Index i = 0; i < n_links; ++i) {
            const Scalar f = flows[i] + a * direction[i];
            total += bpr_integral(net.links[i].t0, net.links[i].cap, f) +
                     toll_cost[i] * f;
          }
          return total;
        },
        ls_tol);
    flows += alpha * direction;
    result.commodity_flows += alpha * (target - result.commodity_flows);
    // stagnation: the line search can no longer move the flows, so a
    // tighter gap target is unreachable at this search resolution
    if (alpha * direction.norm() <= Scalar(1e-13) * (Scalar(1) + flows.norm()))
      break;
  }
  result.link_flows = flows;
  return result;
}

/// The controlled-link flow map x |-> V(x): the components of the
/// user-equilibrium link flows on the controlled links. This is the forward
/// map of the toll-setting IQVIP.
template <typename Scalar>
Vector<Scalar> flow_map(const TrafficNetwork<Scalar>& net,
                        const TollVector<Scalar>& tolls,
                        const UeParams<Scalar>& params) {
  UeResult<Scalar> ue = user_equilibrium(net, tolls, params.gap_tol,
                                         params.max_iter, params.value_of_time);
  Vector<Scalar> v(net.controlled.size());
  for (std::size_t i = 0; i < net.controlled.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = ue.link_flows[net.controlled[i].link];
  return v;
}

/// Convergence monitor of the toll problem:
/// r = || P_{psi(x)}(V(x) + mu x) - V(x) ||
/// with the moving corridor psi(x)_i = [lo_i + x_i, hi_i + x_i]. The +mu x
/// sign comes from restating the toll IQVIP in terms of W = -V.
template <typename Scalar>
Scalar traffic_residual(const TrafficNetwork<Scalar>& net,
                        const TollVector<Scalar>& tolls,
                        const Vector<Scalar>& flows, Scalar mu) {
  detail::require(
      tolls.size() == static_cast<Eigen::Index>(net.controlled.size()) &&
          flows.size() == tolls.size(),
      "traffic_residual: dimension mismatch");
  Scalar sq = 0;
  for (std::size_t i = 0; i < net.controlled.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    const Scalar lo = net.controlled[i].lo + tolls[j];
    const Scalar hi = net.controlled[i].hi + tolls[j];
    const Scalar proj = std::clamp(flows[j] + mu * tolls[j], lo, hi);
    sq += (proj - flows[j]) * (proj - flows[j]);
  }
  return std::sqrt(sq);
}

/// Wraps the toll-setting problem as a standard-form IQVIP in the rewritten
/// variables W = -V, psi_W(x) = -psi(x). The natural map of the wrapped
/// problem satisfies ||B(x)|| = traffic_residual(x), so solver traces report
/// exactly the monitor r_n. No analytic Lipschitz/monotonicity constants are
/// available for the equilibrium flow map, so the forward map carries none.
template <typename Scalar>
IqvipProblem<Scalar> toll_problem(const TrafficNetwork<Scalar>& net, Scalar mu,
                                  const UeParams<Scalar>& params) {
  net.validate();
  detail::require(!net.controlled.empty(),
                  "toll_problem: network has no controlled links");
  detail::require(mu > Scalar(0), "toll_problem: mu must be positive");

  IqvipProblem<Scalar> problem;
  problem.mu = mu;
  problem.forward.eval = [net, params](const Vector<Scalar>& x) {
    return Vector<Scalar>(-flow_map(net, x, params));
  };
  problem.psi.dim = static_cast<Eigen::Index>(net.controlled.size());
  problem.psi.rho = 1;  // translate of a fixed box by the shift -x
  problem.psi.project = [net](const Vector<Scalar>& base,
                              const Vector<Scalar>& y) {
    Vector<Scalar> out(y.size());
    for (std::size_t i = 0; i < net.controlled.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(i);
      out[j] = std::clamp(y[j], -(net.controlled[i].hi + base[j]),
                          -(net.controlled[i].lo + base[j]));
    }
    return out;
  };
  problem.psi.sample = [net](const Vector<Scalar>& base, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector<Scalar> a(base.size());
    for (std::size_t i = 0; i < net.controlled.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(i);
      const Scalar lo = -(net.controlled[i].hi + base[j]);
      const Scalar hi = -(net.controlled[i].lo + base[j]);
      a[j] = lo + Scalar(u(rng)) * (hi - lo);
    }
    return a;
  };
  return problem;
}

/// Runs the configured scheme on the wrapped toll problem starting from zero
/// tolls (or `x0` when given). Each trace residual equals the monitor r_n.
template <typename Scalar>
IterTrace<Scalar> solve_tolls(
    const TrafficNetwork<Scalar>& net, const SolverConfig<Scalar>& config,
    const UeParams<Scalar>& params, Scalar mu,
    const std::optional<Vector<Scalar>>& x0 = std::nullopt,
    const std::type_identity_t<std::function<void(const IterRecord<Scalar>&)>>&
        on_iterate = {}) {
  IqvipProblem<Scalar> problem = toll_problem(net, mu, params);
  Vector<Scalar> start =
      x0 ? *x0 : Vector<Scalar>::Zero(problem.dim());
  return solve(problem, start, start, config, on_iterate);
}

/// Reads a network from the JSON document shape
/// {"nodes": n, "links": [{"tail","head","t0","cap"}...],
///  "od": [{"o","d","demand"}...], "controlled": [{"link","lo","hi"}...]}.
inline TrafficNetwork<double> load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_network: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  TrafficNetwork<double> net;
  net.node_count = doc.at("nodes").get<int>();
  for (const auto& jl : doc.at("links")) {
    Link<double> l;
    l.tail = jl.at("tail").get<int>();
    l.head = jl.at("head").get<int>();
    l.t0 = jl.at("t0").get<double>();
    l.cap = jl.at("cap").get<double>();
    net.links.push_back(l);
  }
  for (const auto& jo : doc.at("od")) {
    OdPair<double> od;
    od.origin = jo.at("o").get<int>();
    od.dest = jo.at("d").get<int>();
    od.demand = jo.at("demand").get<double>();
    net.od_pairs.push_back(od);
  }
  if (doc.contains("controlled")) {
    for (const auto& jc : doc.at("controlled")) {
      ControlledLink<double> c;
      c.link = jc.at("link").get<int>();
      c.lo = jc.at("lo").get<double>();
      c.hi = jc.at("hi").get<double>();
      net.controlled.push_back(c);
    }
  }
  net.validate();
  return net;
}

inline void save_network(const TrafficNetwork<double>& net,
                         const std::string& path) {
  nlohmann::json doc;
  doc["nodes"] = net.node_count;
  doc["links"] = nlohmann::json::array();
  for (const auto& l : net.links)
    doc["links"].push_back(
        {{"tail", l.tail}, {"head", l.head}, {"t0", l.t0}, {"cap", l.cap}});
  doc["od"] = nlohmann::json::array();
  for (const auto& od : net.od_pairs)
    doc["od"].push_back(
        {{"o", od.origin}, {"d", od.dest}, {"demand", od.demand}});
  doc["controlled"] = nlohmann::json::array();
  for (const auto& c : net.controlled)
    doc["controlled"].push_back({{"link", c.link}, {"lo", c.lo}, {"hi", c.hi}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_network: cannot open " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace iqvip::traffic
