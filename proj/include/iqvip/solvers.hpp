#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "iqvip/problem.hpp"
#include "iqvip/types.hpp"

namespace iqvip {

enum class SolverVariant { general, inertial, first_order };

enum class StopReason { residual, error, max_iter };

/// Parameters of the discretized schemes. The general variant takes
/// per-iteration schedules for (h_n, sigma_n, tau_n); the inertial and
/// first-order variants take constants only, matching the setting in which
/// linear convergence is certified.
template <typename Scalar>
struct SolverConfig {
  SolverVariant variant = SolverVariant::inertial;
  Scalar sigma = Scalar(0.5);
  Scalar tau = Scalar(1e-4);
  // general variant only; fall back to the constants above when unset
  std::function<Scalar(int)> sigma_schedule;
  std::function<Scalar(int)> tau_schedule;
  std::function<Scalar(int)> step_schedule;  // h_n
  int max_iter = 100000;
  std::optional<Scalar> stop_residual;
  std::optional<Scalar> stop_error;  // needs a known solution

  void validate() const {
    detail::require(max_iter >= 1, "SolverConfig: max_iter must be >= 1");
    if (stop_residual)
      detail::require(*stop_residual > Scalar(0),
                      "SolverConfig: stop_residual must be positive");
    if (stop_error)
      detail::require(*stop_error > Scalar(0),
                      "SolverConfig: stop_error must be positive");
    if (variant != SolverVariant::general)
      detail::require(!sigma_schedule && !tau_schedule && !step_schedule,
                      "SolverConfig: schedules are general-variant only");
  }
};

template <typename Scalar>
struct IterRecord {
  int n = 0;
  Vector<Scalar> x;
  Scalar residual = 0;
  std::optional<Scalar> v;  // ||x_n - x*||^2 when a solution is known
};

template <typename Scalar>
struct IterTrace {
  std::vector<IterRecord<Scalar>> iterates;
  StopReason stop_reason = StopReason::max_iter;
  int steps_used = 0;
};

/// One step of the general explicit discretization:
/// x_{n+1} = x_n + (1 - sigma h)(x_n - x_{n-1})
///           + tau h^2 (P_{psi(x_n)}(V(x_n) - mu x_n) - V(x_n)).
template <typename Scalar>
Vector<Scalar> step_general(const IqvipProblem<Scalar>& problem,
                            const Vector<Scalar>& x_n,
                            const Vector<Scalar>& x_prev, Scalar h,
                            Scalar sigma, Scalar tau) {
  detail::require(x_n.size() == x_prev.size(),
                  "step_general: iterate dimension mismatch");
  Vector<Scalar> pv = -natural_map(problem, x_n);  // P(...) - V = -B
  return x_n + (Scalar(1) - sigma * h) * (x_n - x_prev) + (tau * h * h) * pv;
}

/// One step of the inertial projection scheme:
/// y_n = x_n + (1 - sigma)(x_n - x_{n-1}); x_{n+1} = y_n - tau B(x_n).
template <typename Scalar>
Vector<Scalar> step_inertial(const IqvipProblem<Scalar>& problem,
                             const Vector<Scalar>& x_n,
                             const Vector<Scalar>& x_prev, Scalar sigma,
                             Scalar tau) {
  detail::require(x_n.size() == x_prev.size(),
                  "step_inertial: iterate dimension mismatch");
  Vector<Scalar> pv = -natural_map(problem, x_n);
  Vector<Scalar> y = x_n + (Scalar(1) - sigma) * (x_n - x_prev);
  return y + tau * pv;
}

/// One step of the first-order projection baseline:
/// x_{n+1} = x_n - tau B(x_n).
template <typename Scalar>
Vector<Scalar> step_first_order(const IqvipProblem<Scalar>& problem,
                                const Vector<Scalar>& x_n, Scalar tau) {
  Vector<Scalar> pv = -natural_map(problem, x_n);
  return x_n + tau * pv;
}

/// Runs the configured scheme from x0 (with x_{-1} = x_minus1) until a
/// stopping rule fires. The trace records every iterate with its residual
/// ||B(x_n)|| and, when the problem carries a known solution, the diagnostic
/// v_n = ||x_n - x*||^2. `on_iterate`, when set, is invoked for each record
/// as it is produced, so partial output survives a divergence abort.
template <typename Scalar>
IterTrace<Scalar> solve(
    const IqvipProblem<Scalar>& problem, const Vector<Scalar>& x0,
    const Vector<Scalar>& x_minus1, const SolverConfig<Scalar>& config,
    const std::type_identity_t<std::function<void(const IterRecord<Scalar>&)>>&
        on_iterate = {}) {
  config.validate();
  detail::check_input(problem, x0);
  detail::require(x_minus1.size() == x0.size(),
                  "solve: x_minus1 dimension mismatch");
  if (config.stop_error)
    detail::require(problem.known_solution.has_value(),
                    "solve: stop_error requires a known solution");

  auto sigma_at = [&](int n) {
    return config.sigma_schedule ? config.sigma_schedule(n) : config.sigma;
  };
  auto tau_at = [&](int n) {
    return config.tau_schedule ? config.tau_schedule(n) : config.tau;
  };
  auto h_at = [&](int n) {
    return config.step_schedule ? config.step_schedule(n) : Scalar(1);
  };

  IterTrace<Scalar> trace;
  Vector<Scalar> x = x0;
  Vector<Scalar> x_prev = x_minus1;

  for (int n = 0;; ++n) {
    Vector<Scalar> bx = natural_map(problem, x);
    IterRecord<Scalar> rec;
    rec.n = n;
    rec.x = x;
    rec.residual = bx.norm();
    Scalar err = 0;
    if (problem.known_solution) {
      err = (x - *problem.known_solution).norm();
      rec.v = err * err;
    }
    trace.iterates.push_back(rec);
    if (on_iterate) on_iterate(trace.iterates.back());
    trace.steps_used = n;

    if (config.stop_residual && rec.residual <= *config.stop_residual) {
      trace.stop_reason = StopReason::residual;
      break;
    }
    if (config.stop_error && err <= *config.stop_error) {
      trace.stop_reason = StopReason::error;
      break;
    }
    if (n >= config.max_iter) {
      trace.stop_reason = StopReason::max_iter;
      break;
    }

    Vector<Scalar> next;
    switch (config.variant) {
      case SolverVariant::general:
        next = x + (Scalar(1) - sigma_at(n) * h_at(n)) * (x - x_prev) +
               (tau_at(n) * h_at(n) * h_at(n)) * (-bx);
        break;
      case SolverVariant::inertial: {
        Vector<Scalar> y = x + (Scalar(1) - config.sigma) * (x - x_prev);
        next = y + config.tau * (-bx);
        break;
      }
      case SolverVariant::first_order:
        next = x + config.tau * (-bx);
        break;
    }
    if (!detail::within_blowup_guard(next))
      throw DivergenceError(
          "solve: iterate diverged at n = " + std::to_string(n + 1), n + 1);
    x_prev = std::move(x);
    x = std::move(next);
  }
  return trace;
}

/// Convenience overload with the default warm start x_{-1} = x0.
template <typename Scalar>
IterTrace<Scalar> solve(const IqvipProblem<Scalar>& problem,
                        const Vector<Scalar>& x0,
                        const SolverConfig<Scalar>& config) {
  return solve(problem, x0, x0, config);
}

/// Least-squares geometric-decay fit of the error sequence over the trailing
/// `tail_fraction` of the trace: log e_n ~= const + n log q. Uses
/// ||x_n - x*|| when the trace carries it, the residual otherwise. Zeros in
/// the tail are handled as in estimate_rate; an all-zero tail reports exact
/// convergence with q = 0.
template <typename Scalar>
std::pair<Scalar, Scalar> estimate_linear_rate(const IterTrace<Scalar>& trace,
                                               Scalar tail_fraction) {
  detail::require(tail_fraction > Scalar(0) && tail_fraction <= Scalar(1),
                  "estimate_linear_rate: tail_fraction in (0, 1]");
  detail::require(!trace.iterates.empty(), "estimate_linear_rate: empty trace");

  const bool have_error = trace.iterates.front().v.has_value();
  auto error_at = [&](std::size_t i) {
    return have_error ? std::sqrt(*trace.iterates[i].v)
                      : trace.iterates[i].residual;
  };

  const std::size_t n = trace.iterates.size();
  const auto tail_len = static_cast<std::size_t>(
      std::ceil(static_cast<double>(tail_fraction) * static_cast<double>(n)));
  const std::size_t begin = n - tail_len;

  std::vector<Scalar> ns, logs;
  bool hit_zero = false;
  for (std::size_t i = begin; i < n; ++i) {
    const Scalar e = error_at(i);
    if (e <= Scalar(0)) {
      hit_zero = true;
      break;
    }
    ns.push_back(static_cast<Scalar>(trace.iterates[i].n));
    logs.push_back(std::log(e));
  }
  if (ns.empty() || (hit_zero && ns.size() < 2)) return {Scalar(0), Scalar(1)};
  if (!hit_zero)
    detail::require(ns.size() >= 10,
                    "estimate_linear_rate: need >= 10 tail points");

  auto [a, b, r2] = detail::line_fit(ns, logs);
  (void)a;
  return {std::exp(b), r2};
}

}  // namespace iqvip
