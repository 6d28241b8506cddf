#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "iqvip/builtin.hpp"
#include "iqvip/certificates.hpp"
#include "iqvip/solvers.hpp"
#include "oracles.hpp"
#include "random_problems.hpp"

using iqvip::IqvipProblem;
using iqvip::SolverConfig;
using iqvip::SolverVariant;
using iqvip::StopReason;
using iqvip::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

IqvipProblem<double> divergent_problem() {
  IqvipProblem<double> p = iqvip::example51();
  auto forward = p.forward.eval;
  // B(x) = -x: each first-order step with tau = 1 doubles the iterate
  p.psi.project = [forward](const VectorXd& base, const VectorXd&) {
    return VectorXd(forward(base) + base);
  };
  p.psi.sample = nullptr;
  p.known_solution.reset();
  return p;
}

}  // namespace

TEST_CASE("step formulas at the fixed point") {
  const auto problem = iqvip::example51();
  const VectorXd star = *problem.known_solution;
  CHECK((iqvip::step_general(problem, star, star, 0.7, 0.3, 0.1) - star).norm() ==
        0.0);
  CHECK((iqvip::step_inertial(problem, star, star, 0.59, 0.000146) - star)
            .norm() == 0.0);
  CHECK((iqvip::step_first_order(problem, star, 0.2) - star).norm() == 0.0);
}

TEST_CASE("degenerate parameters reduce to pure extrapolation") {
  const auto problem = iqvip::example51();
  const VectorXd xn = vec2(3.0, -1.0), xp = vec2(1.0, 2.0);
  const VectorXd out = iqvip::step_general(problem, xn, xp, 1.0, 0.0, 0.0);
  CHECK((out - (2.0 * xn - xp)).norm() == 0.0);

  // tau = 0 leaves the first-order iterate unchanged
  CHECK((iqvip::step_first_order(problem, xn, 0.0) - xn).norm() == 0.0);
}

TEST_CASE("reference one-step value of the inertial scheme") {
  const auto problem = iqvip::example51();
  const VectorXd x = vec2(7.0, 5.0);
  const VectorXd next = iqvip::step_inertial(problem, x, x, 0.59, 0.000146);
  CHECK(next[0] == doctest::Approx(6.997956).epsilon(1e-9));
  CHECK(next[1] == doctest::Approx(4.99771875).epsilon(1e-9));
  const VectorXd first = iqvip::step_first_order(problem, x, 0.000146);
  CHECK(first[0] == doctest::Approx(6.997956).epsilon(1e-9));
  CHECK(first[1] == doctest::Approx(4.99771875).epsilon(1e-9));
}

TEST_CASE("reduction identities") {
  const auto problem = iqvip::example51();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int k = 0; k < 500; ++k) {
    const VectorXd xn = oracles::random_vec(rng, 2, -10.0, 10.0);
    const VectorXd xp = oracles::random_vec(rng, 2, -10.0, 10.0);
    const double sigma = u(rng);
    const double tau = 1e-3 * u(rng);
    CHECK((iqvip::step_general(problem, xn, xp, 1.0, sigma, tau) -
           iqvip::step_inertial(problem, xn, xp, sigma, tau))
              .lpNorm<Eigen::Infinity>() <= 1e-15);
    CHECK((iqvip::step_inertial(problem, xn, xp, 1.0, tau) -
           iqvip::step_first_order(problem, xn, tau))
              .lpNorm<Eigen::Infinity>() <= 1e-15);
  }
}

TEST_CASE("solve reproduces the reference step counts") {
  const auto problem = iqvip::example51();
  const VectorXd x0 = vec2(7.0, 5.0);
  SolverConfig<double> cfg;
  cfg.variant = SolverVariant::inertial;
  cfg.sigma = 0.59;
  cfg.tau = 0.000146;
  cfg.max_iter = 100000;
  cfg.stop_error = 0.1;
  const auto inertial = iqvip::solve(problem, x0, x0, cfg);
  CHECK(inertial.stop_reason == StopReason::error);
  CHECK(std::abs(inertial.steps_used - 12957) <= 1296);  // +-10%

  cfg.variant = SolverVariant::first_order;
  const auto first = iqvip::solve(problem, x0, x0, cfg);
  CHECK(std::abs(first.steps_used - 20745) <= 2075);  // +-10%
  CHECK(inertial.steps_used < first.steps_used);
}

TEST_CASE("solve stops immediately at the solution") {
  const auto problem = iqvip::example51();
  SolverConfig<double> cfg;
  cfg.stop_error = 0.1;
  cfg.stop_residual = 1e-6;
  const VectorXd star = *problem.known_solution;
  const auto trace = iqvip::solve(problem, star, star, cfg);
  CHECK(trace.steps_used == 0);
  CHECK((trace.stop_reason == StopReason::residual ||
         trace.stop_reason == StopReason::error));
}

TEST_CASE("general schedules reproduce the inertial trace") {
  const auto problem = iqvip::example51();
  const VectorXd x0 = vec2(7.0, -5.0);
  SolverConfig<double> inertial;
  inertial.variant = SolverVariant::inertial;
  inertial.sigma = 0.59;
  inertial.tau = 0.000146;
  inertial.max_iter = 500;

  SolverConfig<double> general;
  general.variant = SolverVariant::general;
  general.sigma_schedule = [](int) { return 0.59; };
  general.tau_schedule = [](int) { return 0.000146; };
  general.step_schedule = [](int) { return 1.0; };
  general.max_iter = 500;

  const auto a = iqvip::solve(problem, x0, x0, inertial);
  const auto b = iqvip::solve(problem, x0, x0, general);
  REQUIRE(a.iterates.size() == b.iterates.size());
  for (std::size_t i = 0; i < a.iterates.size(); ++i)
    CHECK((a.iterates[i].x - b.iterates[i].x).lpNorm<Eigen::Infinity>() <=
          1e-13);
}

TEST_CASE("trace integrity: residuals and v_n recompute") {
  const auto problem = iqvip::example51();
  const VectorXd x0 = vec2(7.0, 5.0);
  SolverConfig<double> cfg;
  cfg.sigma = 0.59;
  cfg.tau = 0.000146;
  cfg.max_iter = 300;
  const auto trace = iqvip::solve(problem, x0, x0, cfg);
  REQUIRE(trace.iterates.size() == 301);
  int prev = -1;
  for (const auto& rec : trace.iterates) {
    CHECK(rec.n == prev + 1);
    prev = rec.n;
    CHECK(std::abs(rec.residual - iqvip::residual_norm(problem, rec.x)) <= 1e-12);
    REQUIRE(rec.v.has_value());
    CHECK(std::abs(*rec.v - rec.x.squaredNorm()) <= 1e-12);
  }
}

TEST_CASE("certified parameters give eventually decreasing errors") {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = testgen::make_random_instance(rng, 2 + trial);
    const auto cert = iqvip::check_discrete(inst.constants, 0.59,
                                            0.9 * iqvip::discrete_tau_bound(
                                                      inst.constants, 0.59));
    REQUIRE(cert.discrete_ok);
    SolverConfig<double> cfg;
    cfg.sigma = 0.59;
    cfg.tau = cert.tau;
    cfg.max_iter = 4000;
    const VectorXd x0 =
        oracles::random_vec(rng, inst.problem.dim(), -5.0, 5.0);
    const auto trace = iqvip::solve(inst.problem, x0, x0, cfg);
    const auto& its = trace.iterates;
    const int window = 1000;
    for (std::size_t n = 0; n + window < its.size(); n += 97) {
      const double en = std::sqrt(*its[n].v);
      bool dropped = false;
      for (std::size_t m = n + 1; m <= n + window; ++m)
        if (std::sqrt(*its[m].v) < en) {
          dropped = true;
          break;
        }
      CHECK(dropped);
    }
  }
}

TEST_CASE("linear rate estimation") {
  // synthetic geometric errors e_n = 4 * 0.9^n
  iqvip::IterTrace<double> synth;
  for (int n = 0; n <= 60; ++n) {
    iqvip::IterRecord<double> rec;
    rec.n = n;
    rec.x = VectorXd::Zero(1);
    rec.residual = 1.0;
    const double e = 4.0 * std::pow(0.9, n);
    rec.v = e * e;
    synth.iterates.push_back(rec);
  }
  const auto [q, r2] = iqvip::estimate_linear_rate(synth, 1.0);
  CHECK(q == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(r2 == doctest::Approx(1.0).epsilon(1e-12));

  // constant errors: q = 1
  iqvip::IterTrace<double> flat = synth;
  for (auto& rec : flat.iterates) rec.v = 4.0;
  CHECK(iqvip::estimate_linear_rate(flat, 1.0).first ==
        doctest::Approx(1.0).epsilon(1e-12));

  // all-zero tail reports exact convergence
  iqvip::IterTrace<double> zero = synth;
  for (auto& rec : zero.iterates) rec.v = 0.0;
  CHECK(iqvip::estimate_linear_rate(zero, 0.5).first == 0.0);

  // benchmark run: contraction factor below one with a clean fit
  const auto problem = iqvip::example51();
  const VectorXd x0 = vec2(7.0, 5.0);
  SolverConfig<double> cfg;
  cfg.sigma = 0.59;
  cfg.tau = 0.000146;
  cfg.max_iter = 100000;
  cfg.stop_error = 0.1;
  const auto trace = iqvip::solve(problem, x0, x0, cfg);
  const auto [qb, r2b] = iqvip::estimate_linear_rate(trace, 0.5);
  CHECK(qb < 1.0);
  CHECK(r2b >= 0.99);
}

TEST_CASE("divergence raises with partial output delivered") {
  const auto problem = divergent_problem();
  SolverConfig<double> cfg;
  cfg.variant = SolverVariant::first_order;
  cfg.tau = 1.0;
  cfg.max_iter = 1000;
  int delivered = 0;
  CHECK_THROWS_AS(
      iqvip::solve(problem, vec2(1.0, 1.0), vec2(1.0, 1.0), cfg,
                   [&](const iqvip::IterRecord<double>&) { ++delivered; }),
      iqvip::DivergenceError);
  CHECK(delivered > 0);
  CHECK(delivered < 100);
}

TEST_CASE("config validation") {
  const auto problem = iqvip::example51();
  SolverConfig<double> cfg;
  cfg.max_iter = 0;
  CHECK_THROWS_AS(iqvip::solve(problem, vec2(1, 1), vec2(1, 1), cfg),
                  std::invalid_argument);
  cfg.max_iter = 10;
  cfg.stop_error = 0.1;
  auto no_solution = problem;
  no_solution.known_solution.reset();
  CHECK_THROWS_AS(iqvip::solve(no_solution, vec2(1, 1), vec2(1, 1), cfg),
                  std::invalid_argument);
  SolverConfig<double> sched;
  sched.variant = SolverVariant::inertial;
  sched.sigma_schedule = [](int) { return 0.5; };
  CHECK_THROWS_AS(iqvip::solve(problem, vec2(1, 1), vec2(1, 1), sched),
                  std::invalid_argument);
}
