#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace iqvip {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;

/// Thrown when an iterate or trajectory leaves the finite range the solver
/// can represent. `where` is the iteration index or integration time at
/// which the blow-up was detected.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double where)
      : std::runtime_error(what), where_(where) {}
  double where() const { return where_; }

 private:
  double where_;
};

namespace detail {

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <typename Scalar>
bool all_finite(const Vector<Scalar>& v) {
  return v.allFinite();
}

// Magnitude guard shared by the integrator and the iterative solvers.
template <typename Scalar>
bool within_blowup_guard(const Vector<Scalar>& v) {
  return v.allFinite() && v.template lpNorm<Eigen::Infinity>() < Scalar(1e12);
}

// Least-squares line fit y = a + b*x; returns (a, b, r_squared). Shared by
// the exponential and linear rate estimators.
template <typename Scalar>
std::tuple<Scalar, Scalar, Scalar> line_fit(const std::vector<Scalar>& xs,
                                            const std::vector<Scalar>& ys) {
  const auto n = static_cast<Scalar>(xs.size());
  Scalar sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const Scalar mx = sx / n, my = sy / n;
  Scalar sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Scalar dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const Scalar b = sxy / sxx;
  const Scalar a = my - b * mx;
  const Scalar r2 = (syy == Scalar(0)) ? Scalar(1) : (sxy * sxy) / (sxx * syy);
  return {a, b, r2};
}

}  // namespace detail

}  // namespace iqvip
