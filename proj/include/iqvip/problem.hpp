#pragma once

#include <functional>
#include <optional>
#include <random>
#include <utility>

#include "iqvip/types.hpp"

namespace iqvip {

/// The single-valued map V together with its declared regularity constants.
/// L and eta are certificates supplied by the caller (analytic where
/// possible); they stay unset for maps like the traffic flow function whose
/// constants are not known in closed form.
template <typename Scalar>
struct ForwardMap {
  std::function<Vector<Scalar>(const Vector<Scalar>&)> eval;
  std::optional<Scalar> lipschitz;            // L
  std::optional<Scalar> strong_monotonicity;  // eta, 0 < eta <= L when set

  void validate() const {
    detail::require(static_cast<bool>(eval), "ForwardMap: eval not set");
    if (lipschitz && strong_monotonicity) {
      detail::require(*strong_monotonicity > Scalar(0) &&
                          *strong_monotonicity <= *lipschitz,
                      "ForwardMap: need 0 < eta <= L");
    }
  }
};

/// A family of projectors x |-> P_{psi(x)}: project(base, y) returns the
/// metric projection of y onto psi(base). `rho` is the declared constant of
/// the family Lipschitz bound ||P_{psi(r)}(y) - P_{psi(s)}(y)|| <= rho ||r-s||.
///
/// `sample`, when present, draws a point of psi(base); it exists so tests can
/// exercise the variational characterization of the projection and is never
/// consulted by the solvers.
template <typename Scalar>
struct ProjectorFamily {
  Eigen::Index dim = 0;
  std::function<Vector<Scalar>(const Vector<Scalar>&, const Vector<Scalar>&)>
      project;
  Scalar rho = 0;
  std::function<Vector<Scalar>(const Vector<Scalar>&, std::mt19937_64&)> sample;

  void validate() const {
    detail::require(dim > 0, "ProjectorFamily: dim must be positive");
    detail::require(static_cast<bool>(project),
                    "ProjectorFamily: project not set");
    detail::require(rho >= Scalar(0), "ProjectorFamily: rho must be >= 0");
  }
};

/// The inverse quasi-variational inequality instance: find x* with
/// V(x*) in psi(x*) and <x*, z - V(x*)> >= 0 for all z in psi(x*).
template <typename Scalar>
struct IqvipProblem {
  ForwardMap<Scalar> forward;       // V
  ProjectorFamily<Scalar> psi;      // moving constraint set
  Scalar mu = 1;                    // regularization of the natural map
  std::optional<Vector<Scalar>> known_solution;

  Eigen::Index dim() const { return psi.dim; }

  void validate() const {
    forward.validate();
    psi.validate();
    detail::require(mu > Scalar(0), "IqvipProblem: mu must be positive");
    if (known_solution) {
      detail::require(known_solution->size() == psi.dim,
                      "IqvipProblem: known_solution dimension mismatch");
    }
  }
};

namespace detail {

template <typename Scalar>
void check_input(const IqvipProblem<Scalar>& problem, const Vector<Scalar>& x) {
  require(x.size() == problem.dim(), "dimension mismatch");
  require(all_finite(x), "input vector has non-finite entries");
}

}  // namespace detail

/// Natural (residual) map B(x) = V(x) - P_{psi(x)}(V(x) - mu x).
/// Zeros of B are exactly the IQVIP solutions.
template <typename Scalar>
Vector<Scalar> natural_map(const IqvipProblem<Scalar>& problem,
                           const Vector<Scalar>& x) {
  detail::check_input(problem, x);
  Vector<Scalar> vx = problem.forward.eval(x);
  Vector<Scalar> shifted = vx - problem.mu * x;
  return vx - problem.psi.project(x, shifted);
}

template <typename Scalar>
Scalar residual_norm(const IqvipProblem<Scalar>& problem,
                     const Vector<Scalar>& x) {
  return natural_map(problem, x).norm();
}

template <typename Scalar>
bool is_solution(const IqvipProblem<Scalar>& problem, const Vector<Scalar>& x,
                 Scalar tol) {
  detail::require(tol > Scalar(0), "is_solution: tol must be positive");
  return residual_norm(problem, x) <= tol;
}

}  // namespace iqvip
