#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "iqvip/types.hpp"

namespace iqvip {

/// Convergence certificate bundle derived from the problem constants
/// (L, eta, rho, mu):
///
///   theta            = eta - rho - 1/2 - L^2/2 - mu^2/2 + mu*eta
///   theta1           = theta / (2L + rho + mu)^2
///   existence_margin = mu - sqrt(L^2 - 2*eta*mu + mu^2) - rho
///
/// theta > 0 enables both the exponential (continuous-time) and linear
/// (discrete) convergence results; existence_margin > 0 certifies a unique
/// solution. theta <= 0 is a reported state, not an error.
template <typename Scalar>
struct CertifiedConstants {
  Scalar lipschitz = 0;            // L
  Scalar strong_monotonicity = 0;  // eta
  Scalar rho = 0;
  Scalar mu = 0;
  Scalar theta = 0;
  Scalar theta1 = 0;
  Scalar existence_margin = 0;
};

template <typename Scalar>
CertifiedConstants<Scalar> compute_constants(Scalar lipschitz, Scalar eta,
                                             Scalar rho, Scalar mu) {
  detail::require(eta > Scalar(0), "compute_constants: eta must be positive");
  detail::require(lipschitz >= eta,
                  "compute_constants: need L >= eta (invalid constants)");
  detail::require(mu > Scalar(0), "compute_constants: mu must be positive");
  detail::require(rho >= Scalar(0), "compute_constants: rho must be >= 0");
  CertifiedConstants<Scalar> c;
  c.lipschitz = lipschitz;
  c.strong_monotonicity = eta;
  c.rho = rho;
  c.mu = mu;
  c.theta = eta - rho - Scalar(0.5) - Scalar(0.5) * lipschitz * lipschitz -
            Scalar(0.5) * mu * mu + mu * eta;
  const Scalar denom = Scalar(2) * lipschitz + rho + mu;
  c.theta1 = c.theta / (denom * denom);
  // L >= eta makes the sqrt argument >= (L - mu)^2 >= 0.
  c.existence_margin =
      mu - std::sqrt(lipschitz * lipschitz - Scalar(2) * eta * mu + mu * mu) -
      rho;
  return c;
}

/// Outcome of the discrete step-size conditions
///   0 < sigma < 1   and   0 < tau < theta1 * min{(1-sigma)/4, sigma^2/(4-sigma)},
/// which certify linear convergence of the inertial scheme. continuous_ok
/// reports the constant-coefficient admissibility check of the
/// continuous-time dynamics when it applies (theta > 0, tau > 1).
template <typename Scalar>
struct StepCertificate {
  Scalar sigma = 0;
  Scalar tau = 0;
  Scalar tau_max = 0;
  bool discrete_ok = false;
  bool continuous_ok = false;
  std::string reason;  // set when discrete_ok is false
};

template <typename Scalar>
Scalar discrete_tau_bound(const CertifiedConstants<Scalar>& c, Scalar sigma) {
  return c.theta1 * std::min((Scalar(1) - sigma) / Scalar(4),
                             sigma * sigma / (Scalar(4) - sigma));
}

template <typename Scalar>
StepCertificate<Scalar> check_discrete(const CertifiedConstants<Scalar>& c,
                                       Scalar sigma, Scalar tau) {
  StepCertificate<Scalar> cert;
  cert.sigma = sigma;
  cert.tau = tau;
  cert.tau_max = discrete_tau_bound(c, sigma);
  if (c.theta <= Scalar(0)) {
    cert.reason = "theta <= 0: no convergence certificate available";
    return cert;
  }
  if (!(sigma > Scalar(0) && sigma < Scalar(1))) {
    cert.reason = "damping out of range: need 0 < sigma < 1";
    return cert;
  }
  if (!(tau > Scalar(0) && tau < cert.tau_max)) {
    cert.reason = "relaxation out of range: need 0 < tau < tau_max";
    return cert;
  }
  cert.discrete_ok = true;
  return cert;
}

/// Constant-coefficient admissibility for exponential convergence of the
/// continuous-time dynamics:
///   1/2 + 1/2*sqrt(1 + 8*tau/theta1) <= sigma <= theta^2*theta1*(tau - 1).
/// Constants (sigma, tau) in this interval satisfy the damping conditions
/// checked pointwise by check_conditions_i_iii.
template <typename Scalar>
bool check_continuous(const CertifiedConstants<Scalar>& c, Scalar sigma,
                      Scalar tau) {
  detail::require(c.theta > Scalar(0), "check_continuous: requires theta > 0");
  if (!(tau > Scalar(1)))
    throw std::domain_error(
        "check_continuous: tau must exceed 1 for a nonempty interval");
  const Scalar lower =
      Scalar(0.5) + Scalar(0.5) * std::sqrt(Scalar(1) + Scalar(8) * tau / c.theta1);
  const Scalar upper = c.theta * c.theta * c.theta1 * (tau - Scalar(1));
  return lower <= sigma && sigma <= upper;
}

/// The slowly-varying coefficient family sigma(t) = sigma + 1/(t+1),
/// tau(t) = tau - 1/(t+1); locally absolutely continuous by construction.
template <typename Scalar>
std::pair<std::function<Scalar(Scalar)>, std::function<Scalar(Scalar)>>
time_varying_coefficients(Scalar sigma, Scalar tau) {
  detail::require(sigma > Scalar(1),
                  "time_varying_coefficients: sigma must exceed 1");
  detail::require(tau > Scalar(1),
                  "time_varying_coefficients: tau must exceed 1");
  auto sigma_fn = [sigma](Scalar t) { return sigma + Scalar(1) / (t + Scalar(1)); };
  auto tau_fn = [tau](Scalar t) { return tau - Scalar(1) / (t + Scalar(1)); };
  return {sigma_fn, tau_fn};
}

/// Grid check of the exponential-convergence conditions for opaque
/// coefficient functions:
///   (i)   1 < sigma(t) <= theta^2*theta1*tau(t) + 1 at every grid point,
///   (ii)  finite-difference slopes of sigma(t) and sigma(t)/tau(t) are
///         <= 1e-9 between consecutive points,
///   (iii) sigma(t)^2 - sigma(t) - 2*tau(t)/theta1 >= 0 at every grid point.
template <typename Scalar>
bool check_conditions_i_iii(const CertifiedConstants<Scalar>& c,
                            const std::function<Scalar(Scalar)>& sigma_fn,
                            const std::function<Scalar(Scalar)>& tau_fn,
                            const std::vector<Scalar>& t_grid) {
  detail::require(!t_grid.empty(), "check_conditions_i_iii: empty grid");
  detail::require(t_grid.front() == Scalar(0),
                  "check_conditions_i_iii: grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    detail::require(t_grid[i] > t_grid[i - 1],
                    "check_conditions_i_iii: grid must be increasing");

  const Scalar slope_tol = Scalar(1e-9);
  Scalar prev_sigma = 0, prev_ratio = 0, prev_t = 0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const Scalar t = t_grid[i];
    const Scalar s = sigma_fn(t);
    const Scalar tau = tau_fn(t);
    if (!(s > Scalar(1))) return false;
    if (!(s <= c.theta * c.theta * c.theta1 * tau + Scalar(1))) return false;
    if (!(s * s - s - Scalar(2) * tau / c.theta1 >= Scalar(0))) return false;
    const Scalar ratio = s / tau;
    if (i > 0) {
      const Scalar dt = t - prev_t;
      if ((s - prev_sigma) / dt > slope_tol) return false;
      if ((ratio - prev_ratio) / dt > slope_tol) return false;
    }
    prev_sigma = s;
    prev_ratio = ratio;
    prev_t = t;
  }
  return true;
}

}  // namespace iqvip
