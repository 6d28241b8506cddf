#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "iqvip/builtin.hpp"
#include "iqvip/certificates.hpp"
#include "iqvip/problem.hpp"
#include "iqvip/projections.hpp"
#include "oracles.hpp"
#include "random_problems.hpp"

using iqvip::IqvipProblem;
using iqvip::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

// psi(x) = R^n: the projection is the identity, so B(x) = mu x.
IqvipProblem<double> free_problem() {
  IqvipProblem<double> p = iqvip::example51();
  p.psi.project = [](const VectorXd&, const VectorXd& y) { return y; };
  p.psi.sample = nullptr;
  p.known_solution.reset();
  return p;
}

// psi(x) = {V(x)}: the projection lands on V(x) itself and B vanishes
// identically, so every point solves the problem.
IqvipProblem<double> degenerate_problem() {
  IqvipProblem<double> p = iqvip::example51();
  auto forward = p.forward.eval;
  p.psi.project = [forward](const VectorXd& base, const VectorXd&) {
    return forward(base);
  };
  p.psi.sample = nullptr;
  p.known_solution.reset();
  return p;
}

}  // namespace

TEST_CASE("natural map vanishes at the known solution") {
  const auto problem = iqvip::example51();
  const VectorXd b = iqvip::natural_map(problem, *problem.known_solution);
  CHECK(b.norm() == 0.0);
  CHECK(iqvip::residual_norm(problem, *problem.known_solution) <= 1e-9);
}

TEST_CASE("natural map on the benchmark problem matches the clamp oracle") {
  const auto problem = iqvip::example51();
  const VectorXd x = vec2(7.0, 5.0);
  const VectorXd b = iqvip::natural_map(problem, x);
  CHECK(b[0] == doctest::Approx(14.0).epsilon(1e-9));
  CHECK(b[1] == doctest::Approx(15.625).epsilon(1e-9));
  const VectorXd expected = oracles::example51_natural_map(x);
  CHECK((b - expected).norm() <= 1e-15);

  std::mt19937_64 rng(7);
  for (int k = 0; k < 200; ++k) {
    const VectorXd w = oracles::random_vec(rng, 2, -10.0, 10.0);
    CHECK((iqvip::natural_map(problem, w) -
           oracles::example51_natural_map(w)).norm() <= 1e-13);
  }
}

TEST_CASE("identity projection reduces the natural map to mu x") {
  const auto problem = free_problem();
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const VectorXd x = oracles::random_vec(rng, 2, -20.0, 20.0);
    CHECK((iqvip::natural_map(problem, x) - problem.mu * x).norm() <= 1e-13);
  }
  CHECK(iqvip::is_solution(problem, VectorXd(VectorXd::Zero(2)), 1e-9));
  CHECK_FALSE(iqvip::is_solution(problem, vec2(1.0, 0.0), 1e-9));
}

TEST_CASE("a family pinned to V(x) makes every point a solution") {
  const auto problem = degenerate_problem();
  std::mt19937_64 rng(13);
  for (int k = 0; k < 50; ++k) {
    const VectorXd x = oracles::random_vec(rng, 2, -20.0, 20.0);
    CHECK(iqvip::natural_map(problem, x).norm() == 0.0);
    CHECK(iqvip::is_solution(problem, x, 1e-9));
  }
}

TEST_CASE("residual norm values") {
  const auto problem = iqvip::example51();
  CHECK(iqvip::residual_norm(problem, vec2(7.0, 5.0)) ==
        doctest::Approx(std::sqrt(440.140625)).epsilon(1e-12));
  CHECK(iqvip::residual_norm(problem, vec2(7.0, 5.0)) ==
        doctest::Approx(20.979).epsilon(1e-4));
  // regression at (1,1), expected value from the clamp oracle
  const double expected = oracles::example51_natural_map(vec2(1.0, 1.0)).norm();
  CHECK(iqvip::residual_norm(problem, vec2(1.0, 1.0)) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(2.9547631).epsilon(1e-6));
}

TEST_CASE("is_solution") {
  const auto problem = iqvip::example51();
  CHECK(iqvip::is_solution(problem, VectorXd(VectorXd::Zero(2)), 1e-9));
  CHECK_FALSE(iqvip::is_solution(problem, vec2(3.0, -4.0), 1e-9));
  CHECK_THROWS_AS(iqvip::is_solution(problem, vec2(0.0, 0.0), 0.0),
                  std::invalid_argument);
}

TEST_CASE("contract violations") {
  const auto problem = iqvip::example51();
  VectorXd bad(3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(iqvip::natural_map(problem, bad), std::invalid_argument);
  VectorXd nan2 = vec2(1.0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(iqvip::natural_map(problem, nan2), std::invalid_argument);
}

TEST_CASE("natural map is Lipschitz with modulus 2L + rho + mu") {
  const auto problem = iqvip::example51();
  const double modulus = 2 * 2.2 + 1.0 + 2.0;
  std::mt19937_64 rng(23);
  for (int k = 0; k < 500; ++k) {
    const VectorXd a = oracles::random_vec(rng, 2, -10.0, 10.0);
    const VectorXd b = oracles::random_vec(rng, 2, -10.0, 10.0);
    const double lhs =
        (iqvip::natural_map(problem, a) - iqvip::natural_map(problem, b)).norm();
    CHECK(lhs <= modulus * (a - b).norm() + 1e-9);
  }
}

TEST_CASE("sampled regularity bounds respect declared analytic constants") {
  // the sampled estimates are lower bounds on L and upper bounds on eta, so
  // instances with analytically computed constants must dominate them
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 3; ++trial) {
    const auto inst = testgen::make_random_instance(rng, 3 + trial);
    const auto& fwd = inst.problem.forward;
    const double l_hat =
        oracles::sampled_lipschitz(fwd.eval, inst.problem.dim(), 400, rng);
    const double eta_hat =
        oracles::sampled_monotonicity(fwd.eval, inst.problem.dim(), 400, rng);
    CHECK(l_hat <= *fwd.lipschitz + 1e-9);
    CHECK(eta_hat >= *fwd.strong_monotonicity - 1e-9);
  }
}

TEST_CASE("error-bound inequalities hold on the benchmark problem") {
  const auto problem = iqvip::example51();
  const auto constants = iqvip::compute_constants(2.2, 2.0, 1.0, 2.0);
  REQUIRE(constants.theta > 0);
  std::mt19937_64 rng(31);
  for (int k = 0; k < 1000; ++k) {
    const VectorXd w = oracles::random_vec(rng, 2, -10.0, 10.0);
    const VectorXd b = iqvip::natural_map(problem, w);
    const double inner = b.dot(w);  // x* = 0
    CHECK(constants.theta1 * b.squaredNorm() <= inner + 1e-9);
    CHECK(constants.theta * w.norm() <= b.norm() + 1e-9);
  }
}
