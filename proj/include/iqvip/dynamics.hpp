#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "iqvip/problem.hpp"
#include "iqvip/types.hpp"

namespace iqvip {

/// Configuration of the second-order system
///   x'' + sigma(t) x' + tau(t) B(x) = 0,  x(0) = x0, x'(0) = v0,
/// integrated as a first-order system in the doubled state (x, x').
template <typename Scalar>
struct DynamicsConfig {
  std::function<Scalar(Scalar)> sigma_fn;
  std::function<Scalar(Scalar)> tau_fn;
  Vector<Scalar> x0;
  Vector<Scalar> v0;
  Scalar step = Scalar(1e-3);
  Scalar horizon = 1;

  void validate() const {
    detail::require(static_cast<bool>(sigma_fn) && static_cast<bool>(tau_fn),
                    "DynamicsConfig: coefficient functions not set");
    detail::require(step > Scalar(0), "DynamicsConfig: step must be positive");
    detail::require(horizon >= step, "DynamicsConfig: horizon must be >= step");
    detail::require(x0.size() == v0.size(),
                    "DynamicsConfig: x0/v0 dimension mismatch");
  }
};

template <typename Scalar>
struct TrajectorySample {
  Scalar t;
  Vector<Scalar> x;
  Vector<Scalar> v;
};

/// Sampled trajectory. `dist` and `half_sq` track ||x(t) - x*|| and
/// (1/2)||x(t) - x*||^2 per sample; both stay empty when no reference
/// solution was supplied.
template <typename Scalar>
struct TrajectoryTrace {
  std::vector<TrajectorySample<Scalar>> samples;
  std::vector<Scalar> dist;
  std::vector<Scalar> half_sq;
};

/// Exponential-decay fit ||x(t) - x*|| ~= nu * ||x(0) - x*|| * exp(-zeta t).
template <typename Scalar>
struct RateEstimate {
  Scalar nu = 1;
  Scalar zeta = 0;
  Scalar r_squared = 0;
};

/// Right-hand side of the doubled first-order system:
/// (u, v) |-> (v, -tau(t) B(u) - sigma(t) v).
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> vector_field(
    const IqvipProblem<Scalar>& problem,
    const std::function<Scalar(Scalar)>& sigma_fn,
    const std::function<Scalar(Scalar)>& tau_fn, Scalar t,
    const std::pair<Vector<Scalar>, Vector<Scalar>>& state) {
  const auto& [u, v] = state;
  detail::require(u.size() == v.size(), "vector_field: state dimension mismatch");
  Vector<Scalar> acc = -tau_fn(t) * natural_map(problem, u) - sigma_fn(t) * v;
  return {v, std::move(acc)};
}

/// Classical fixed-step RK4 on the doubled state from t = 0 to the horizon,
/// sampling after every step. sigma(t), tau(t) are evaluated at the RK4 stage
/// times, which keeps fourth order for time-varying coefficients. Throws
/// DivergenceError when the state leaves the finite guard range.
template <typename Scalar>
TrajectoryTrace<Scalar> integrate(
    const IqvipProblem<Scalar>& problem, const DynamicsConfig<Scalar>& config,
    const std::optional<Vector<Scalar>>& x_star = std::nullopt,
    const std::type_identity_t<
        std::function<void(const TrajectorySample<Scalar>&)>>& on_sample = {}) {
  config.validate();
  detail::require(config.x0.size() == problem.dim(),
                  "integrate: state dimension mismatch");
  if (x_star)
    detail::require(x_star->size() == problem.dim(),
                    "integrate: x_star dimension mismatch");

  const Scalar h = config.step;
  const auto steps = static_cast<long>(
      std::floor(static_cast<double>(config.horizon / h) + 1e-9));

  TrajectoryTrace<Scalar> trace;
  trace.samples.reserve(static_cast<std::size_t>(steps) + 1);

  Vector<Scalar> x = config.x0;
  Vector<Scalar> v = config.v0;

  auto accel = [&](Scalar t, const Vector<Scalar>& u, const Vector<Scalar>& w) {
    return Vector<Scalar>(-config.tau_fn(t) * natural_map(problem, u) -
                          config.sigma_fn(t) * w);
  };

  auto record = [&](Scalar t) {
    trace.samples.push_back({t, x, v});
    if (x_star) {
      const Scalar d = (x - *x_star).norm();
      trace.dist.push_back(d);
      trace.half_sq.push_back(Scalar(0.5) * d * d);
    }
    if (on_sample) on_sample(trace.samples.back());
  };

  record(Scalar(0));
  for (long k = 0; k < steps; ++k) {
    const Scalar t = Scalar(k) * h;
    const Vector<Scalar> k1x = v;
    const Vector<Scalar> k1v = accel(t, x, v);
    const Vector<Scalar> k2x = v + (h / 2) * k1v;
    const Vector<Scalar> k2v = accel(t + h / 2, x + (h / 2) * k1x, k2x);
    const Vector<Scalar> k3x = v + (h / 2) * k2v;
    const Vector<Scalar> k3v = accel(t + h / 2, x + (h / 2) * k2x, k3x);
    const Vector<Scalar> k4x = v + h * k3v;
    const Vector<Scalar> k4v = accel(t + h, x + h * k3x, k4x);
    x += (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += (h / 6) * (k1v + 2 * k2v + 2 * k3v + k4v);
    const Scalar t_next = Scalar(k + 1) * h;
    if (!detail::within_blowup_guard(x) || !detail::within_blowup_guard(v))
      throw DivergenceError("integrate: trajectory diverged at t = " +
                                std::to_string(static_cast<double>(t_next)),
                            static_cast<double>(t_next));
    record(t_next);
  }
  return trace;
}

/// Fits log dist(t) = log(nu * dist(0)) - zeta * t over the trailing
/// `tail_fraction` of the trace. A zero distance inside the tail truncates
/// the fit to the samples before it; an all-zero tail reports exact
/// convergence with zeta = +infinity.
template <typename Scalar>
RateEstimate<Scalar> estimate_rate(const TrajectoryTrace<Scalar>& trace,
                                   Scalar tail_fraction) {
  detail::require(tail_fraction > Scalar(0) && tail_fraction <= Scalar(1),
                  "estimate_rate: tail_fraction in (0, 1]");
  detail::require(!trace.dist.empty(),
                  "estimate_rate: trace has no distance data");
  const std::size_t n = trace.dist.size();
  const auto tail_len = static_cast<std::size_t>(
      std::ceil(static_cast<double>(tail_fraction) * static_cast<double>(n)));
  const std::size_t begin = n - tail_len;

  std::vector<Scalar> ts, logs;
  bool hit_zero = false;
  for (std::size_t i = begin; i < n; ++i) {
    if (trace.dist[i] <= Scalar(0)) {
      hit_zero = true;
      break;  // fit on the prefix before the first zero
    }
    ts.push_back(trace.samples[i].t);
    logs.push_back(std::log(trace.dist[i]));
  }

  RateEstimate<Scalar> est;
  if (ts.empty() || (hit_zero && ts.size() < 2)) {
    est.zeta = std::numeric_limits<Scalar>::infinity();
    est.nu = 1;
    est.r_squared = 1;
    return est;
  }
  if (!hit_zero)
    detail::require(ts.size() >= 10,
                    "estimate_rate: need >= 10 positive-distance tail samples");

  auto [a, b, r2] = detail::line_fit(ts, logs);
  est.zeta = -b;
  est.r_squared = r2;
  const Scalar d0 = trace.dist.front();
  est.nu = d0 > Scalar(0) ? std::exp(a) / d0 : Scalar(1);
  return est;
}

}  // namespace iqvip
