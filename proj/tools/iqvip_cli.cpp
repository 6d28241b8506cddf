// Command-line runner: certify convergence constants, run the discrete
// solvers and the continuous-time simulator, and drive the toll-setting
// traffic application. Traces go to CSV, summaries to stdout as JSON.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iqvip/builtin.hpp"
#include "iqvip/certificates.hpp"
#include "iqvip/dynamics.hpp"
#include "iqvip/problem.hpp"
#include "iqvip/projections.hpp"
#include "iqvip/solvers.hpp"
#include "iqvip/trace_io.hpp"
#include "iqvip/traffic.hpp"

namespace {

using iqvip::VectorXd;
using nlohmann::json;

int log_level() {
  const char* env = std::getenv("IQVIP_LOG");
  return env ? std::atoi(env) : 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[iqvip] " << msg << "\n";
}

VectorXd json_to_vector(const json& arr) {
  const auto vals = arr.get<std::vector<double>>();
  VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    vals.push_back(std::stod(item));
  }
  if (vals.empty()) throw CLI::ValidationError("empty vector literal");
  VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

struct LoadedProblem {
  iqvip::IqvipProblem<double> problem;
  double declared_rho = 0;
  VectorXd default_x0;
};

// Built-in "example51" or a JSON file describing a linear problem
// {"Q": [[...]], "L":, "eta":, "rho":, "mu":, "family": "span_box" |
//  {"moving_box": {"lo": [...], "hi": [...], "shift_scale": s}},
//  "solution": [...] (optional), "x0": [...] (optional)}.
LoadedProblem load_problem(const std::string& source, std::optional<double> mu) {
  LoadedProblem out;
  if (source == "example51") {
    out.problem = iqvip::example51(mu.value_or(2.0));
    out.declared_rho = 1.0;
    out.default_x0 = parse_vector("7,5");
    return out;
  }
  std::ifstream in(source);
  if (!in) throw CLI::ValidationError("cannot open problem file: " + source);
  json doc = json::parse(in);

  const auto qrows = doc.at("Q").get<std::vector<std::vector<double>>>();
  const auto dim = static_cast<Eigen::Index>(qrows.size());
  iqvip::Matrix<double> q(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (static_cast<Eigen::Index>(qrows[i].size()) != dim)
      throw CLI::ValidationError("problem file: Q must be square");
    for (Eigen::Index j = 0; j < dim; ++j) q(i, j) = qrows[i][j];
  }
  iqvip::IqvipProblem<double> problem;
  problem.forward.eval = [q](const VectorXd& x) { return VectorXd(q * x); };
  if (doc.contains("L")) problem.forward.lipschitz = doc.at("L").get<double>();
  if (doc.contains("eta"))
    problem.forward.strong_monotonicity = doc.at("eta").get<double>();
  problem.mu = mu.value_or(doc.value("mu", 1.0));

  const auto& fam = doc.at("family");
  if (fam.is_string() && fam.get<std::string>() == "span_box") {
    problem.psi = iqvip::span_box_family<double>(dim);
  } else if (fam.is_object() && fam.contains("moving_box")) {
    const auto& mb = fam.at("moving_box");
    iqvip::BoxSpec<double> box;
    box.lower = json_to_vector(mb.at("lo"));
    box.upper = json_to_vector(mb.at("hi"));
    const double scale = mb.value("shift_scale", 1.0);
    iqvip::MovingSetSpec<double> spec;
    spec.base = iqvip::box_projector(box);
    spec.shift = [scale](const VectorXd& x) { return VectorXd(scale * x); };
    spec.shift_lipschitz = std::abs(scale);
    problem.psi = iqvip::moving_family(spec);
  } else {
    throw CLI::ValidationError("problem file: unknown projector family");
  }
  out.declared_rho = doc.value("rho", problem.psi.rho);
  problem.psi.rho = out.declared_rho;
  if (doc.contains("solution")) problem.known_solution = json_to_vector(doc.at("solution"));
  out.default_x0 =
      doc.contains("x0") ? json_to_vector(doc.at("x0")) : VectorXd(VectorXd::Zero(dim));
  out.problem = problem;
  return out;
}

std::string stop_reason_name(iqvip::StopReason r) {
  switch (r) {
    case iqvip::StopReason::residual: return "residual";
    case iqvip::StopReason::error: return "error";
    case iqvip::StopReason::max_iter: return "max_iter";
  }
  return "unknown";
}

struct Options {
  std::string command;
  std::string problem_source;
  std::string variant = "inertial";
  double sigma = 0.5;
  double tau = 1e-4;
  std::optional<double> mu;
  double h = 1.0;
  std::string x0_text;
  std::string v0_text;
  double horizon = 1.0;
  double dt = 1e-3;
  std::optional<double> stop_residual;
  std::optional<double> stop_error;
  int max_iter = 100000;
  bool max_iter_given = false;
  double gap_tol = 1e-7;
  unsigned seed = 0;
  std::string out_path;
};

iqvip::SolverConfig<double> make_config(const Options& opt) {
  iqvip::SolverConfig<double> config;
  if (opt.variant == "general")
    config.variant = iqvip::SolverVariant::general;
  else if (opt.variant == "inertial")
    config.variant = iqvip::SolverVariant::inertial;
  else if (opt.variant == "first_order")
    config.variant = iqvip::SolverVariant::first_order;
  else
    throw CLI::ValidationError("unknown variant: " + opt.variant);
  config.sigma = opt.sigma;
  config.tau = opt.tau;
  if (config.variant == iqvip::SolverVariant::general && opt.h != 1.0) {
    const double h = opt.h;
    config.step_schedule = [h](int) { return h; };
  }
  config.max_iter = opt.max_iter;
  config.stop_residual = opt.stop_residual;
  config.stop_error = opt.stop_error;
  return config;
}

int run_certify(const Options& opt) {
  const auto loaded = load_problem(
      opt.problem_source.empty() ? "example51" : opt.problem_source, opt.mu);
  const auto& fwd = loaded.problem.forward;
  if (!fwd.lipschitz || !fwd.strong_monotonicity) {
    std::cerr << "certify: problem carries no (L, eta) constants\n";
    return 1;
  }
  const auto constants = iqvip::compute_constants(
      *fwd.lipschitz, *fwd.strong_monotonicity, loaded.declared_rho,
      loaded.problem.mu);
  const auto step = iqvip::check_discrete(constants, opt.sigma, opt.tau);
  bool continuous_ok = false;
  if (constants.theta > 0 && opt.tau > 1)
    continuous_ok = iqvip::check_continuous(constants, opt.sigma, opt.tau);

  json doc;
  doc["seed"] = opt.seed;
  doc["constants"] = {{"L", constants.lipschitz},
                      {"eta", constants.strong_monotonicity},
                      {"rho", constants.rho},
                      {"mu", constants.mu},
                      {"theta", constants.theta},
                      {"theta1", constants.theta1},
                      {"existence_margin", constants.existence_margin}};
  doc["step_certificate"] = {{"sigma", step.sigma},
                             {"tau", step.tau},
                             {"tau_max", step.tau_max},
                             {"discrete_ok", step.discrete_ok},
                             {"continuous_ok", continuous_ok}};
  if (!step.discrete_ok) doc["step_certificate"]["reason"] = step.reason;
  const std::string text = doc.dump(2) + "\n";
  std::cout << text;
  if (!opt.out_path.empty()) {
    std::ofstream out(opt.out_path);
    out << text;
  }
  return 0;
}

int run_solve(const Options& opt) {
  const auto loaded = load_problem(
      opt.problem_source.empty() ? "example51" : opt.problem_source, opt.mu);
  VectorXd x0 =
      opt.x0_text.empty() ? loaded.default_x0 : parse_vector(opt.x0_text);
  const auto config = make_config(opt);

  std::ofstream out;
  std::function<void(const iqvip::IterRecord<double>&)> sink;
  bool header_written = false;
  if (!opt.out_path.empty()) {
    out.open(opt.out_path);
    if (!out) {
      std::cerr << "cannot open output file: " << opt.out_path << "\n";
      return 1;
    }
    const bool with_error = loaded.problem.known_solution.has_value();
    sink = [&out, &header_written, with_error](
               const iqvip::IterRecord<double>& rec) {
      if (!header_written) {
        out << "n";
        for (Eigen::Index i = 0; i < rec.x.size(); ++i) out << ",x" << (i + 1);
        out << ",residual";
        if (with_error) out << ",error";
        out << "\n";
        header_written = true;
      }
      out << rec.n;
      for (Eigen::Index i = 0; i < rec.x.size(); ++i)
        out << "," << iqvip::detail::format_number(rec.x[i]);
      out << "," << iqvip::detail::format_number(rec.residual);
      if (with_error)
        out << "," << iqvip::detail::format_number(std::sqrt(*rec.v));
      out << "\n";
    };
  }

  const auto trace = iqvip::solve(loaded.problem, x0, x0, config, sink);
  log_info("solve finished after " + std::to_string(trace.steps_used) +
           " steps");

  json doc;
  doc["seed"] = opt.seed;
  doc["steps_used"] = trace.steps_used;
  doc["stop_reason"] = stop_reason_name(trace.stop_reason);
  doc["final_residual"] = trace.iterates.back().residual;
  if (trace.iterates.back().v)
    doc["final_error"] = std::sqrt(*trace.iterates.back().v);
  try {
    const auto [q, r2] = iqvip::estimate_linear_rate(trace, 0.5);
    doc["rate_q"] = q;
    doc["r_squared"] = r2;
  } catch (const std::invalid_argument&) {
    // too few points for a fit; summary stays without a rate
  }
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int run_simulate(const Options& opt) {
  const auto loaded = load_problem(
      opt.problem_source.empty() ? "example51" : opt.problem_source, opt.mu);
  iqvip::DynamicsConfig<double> config;
  const double sigma = opt.sigma, tau = opt.tau;
  config.sigma_fn = [sigma](double) { return sigma; };
  config.tau_fn = [tau](double) { return tau; };
  config.x0 =
      opt.x0_text.empty() ? loaded.default_x0 : parse_vector(opt.x0_text);
  config.v0 = opt.v0_text.empty()
                  ? VectorXd(VectorXd::Zero(config.x0.size()))
                  : parse_vector(opt.v0_text);
  config.step = opt.dt;
  config.horizon = opt.horizon;

  const auto trace =
      iqvip::integrate(loaded.problem, config, loaded.problem.known_solution);
  std::vector<double> residuals;
  residuals.reserve(trace.samples.size());
  for (const auto& s : trace.samples)
    residuals.push_back(iqvip::residual_norm(loaded.problem, s.x));

  if (!opt.out_path.empty()) {
    std::ofstream out(opt.out_path);
    if (!out) {
      std::cerr << "cannot open output file: " << opt.out_path << "\n";
      return 1;
    }
    iqvip::write_trajectory_csv(out, trace, residuals);
  }

  json doc;
  doc["seed"] = opt.seed;
  doc["samples"] = trace.samples.size();
  doc["final_residual"] = residuals.back();
  if (!trace.dist.empty()) {
    doc["final_dist"] = trace.dist.back();
    try {
      const auto rate = iqvip::estimate_rate(trace, 0.5);
      doc["zeta"] = rate.zeta;
      doc["nu"] = rate.nu;
      doc["r_squared"] = rate.r_squared;
    } catch (const std::invalid_argument&) {
    }
  }
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int run_traffic(const Options& opt) {
  iqvip::traffic::TrafficNetwork<double> net;
  const std::string source =
      opt.problem_source.empty() ? "traffic-demo" : opt.problem_source;
  if (source == "traffic-demo")
    net = iqvip::traffic::demo_network();
  else
    net = iqvip::traffic::load_network(source);

  iqvip::traffic::UeParams<double> ue;
  ue.gap_tol = opt.gap_tol;
  const double mu = opt.mu.value_or(0.5);

  auto problem = iqvip::traffic::toll_problem(net, mu, ue);
  // Remember the flows behind each forward-map call so the trace can report
  // them without a second equilibrium run per iteration.
  auto inner = problem.forward.eval;
  auto last = std::make_shared<std::pair<VectorXd, VectorXd>>();
  problem.forward.eval = [inner, last](const VectorXd& x) {
    VectorXd w = inner(x);
    *last = {x, VectorXd(-w)};  // stores V(x), not W(x)
    return w;
  };

  auto config = make_config(opt);
  if (!opt.max_iter_given) config.max_iter = 150;

  std::vector<VectorXd> flows;
  iqvip::IterTrace<double> trace;
  VectorXd x0 = opt.x0_text.empty()
                    ? VectorXd(VectorXd::Zero(problem.dim()))
                    : parse_vector(opt.x0_text);
  trace = iqvip::solve(problem, x0, x0, config,
                       [&](const iqvip::IterRecord<double>& rec) {
                         flows.push_back(last->second);
                         if (rec.n % 25 == 0)
                           log_info("traffic iter " + std::to_string(rec.n) +
                                    " residual " +
                                    std::to_string(rec.residual));
                       });

  if (!opt.out_path.empty()) {
    std::ofstream out(opt.out_path);
    if (!out) {
      std::cerr << "cannot open output file: " << opt.out_path << "\n";
      return 1;
    }
    iqvip::write_traffic_trace_csv(out, trace, flows);
  }

  json doc;
  doc["seed"] = opt.seed;
  doc["steps_used"] = trace.steps_used;
  doc["stop_reason"] = stop_reason_name(trace.stop_reason);
  doc["initial_residual"] = trace.iterates.front().residual;
  doc["final_residual"] = trace.iterates.back().residual;
  doc["residual_ratio"] =
      trace.iterates.back().residual / trace.iterates.front().residual;
  std::cout << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse quasi-variational inequality solver"};
  app.set_help_flag("--help", "print usage");

  Options opt;
  app.add_option("--command", opt.command,
                 "one of: certify, solve, simulate, traffic")
      ->required();
  app.add_option("--problem", opt.problem_source,
                 "built-in name (example51, traffic-demo) or file path");
  app.add_option("--variant", opt.variant,
                 "solver variant: general, inertial, first_order");
  app.add_option("--sigma", opt.sigma, "damping parameter");
  app.add_option("--tau", opt.tau, "relaxation parameter");
  app.add_option("--mu", [&opt](const CLI::results_t& r) {
    opt.mu = std::stod(r[0]);
    return true;
  }, "regularization parameter");
  app.add_option("--h", opt.h, "step size of the general scheme");
  app.add_option("--x0", opt.x0_text, "initial point, comma-separated");
  app.add_option("--v0", opt.v0_text, "initial velocity, comma-separated");
  app.add_option("--horizon", opt.horizon, "integration horizon");
  app.add_option("--dt", opt.dt, "integration step");
  app.add_option("--stop-residual", [&opt](const CLI::results_t& r) {
    opt.stop_residual = std::stod(r[0]);
    return true;
  }, "stop when the residual falls below this value");
  app.add_option("--stop-error", [&opt](const CLI::results_t& r) {
    opt.stop_error = std::stod(r[0]);
    return true;
  }, "stop when the distance to the known solution falls below this value");
  auto* max_iter_opt = app.add_option("--max-iter", opt.max_iter,
                                      "iteration budget (traffic default 150)");
  app.add_option("--gap-tol", opt.gap_tol, "user-equilibrium relative gap");
  app.add_option("--seed", opt.seed, "sampling seed (recorded in outputs)");
  app.add_option("--out", opt.out_path, "trace output path (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  opt.max_iter_given = max_iter_opt->count() > 0;

  try {
    if (opt.command == "certify") return run_certify(opt);
    if (opt.command == "solve") return run_solve(opt);
    if (opt.command == "simulate") return run_simulate(opt);
    if (opt.command == "traffic") return run_traffic(opt);
    std::cerr << "unknown command: " << opt.command << "\n";
    return 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed input file: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const iqvip::DivergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
