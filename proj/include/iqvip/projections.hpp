#pragma once

#include <functional>
#include <random>

#include "iqvip/problem.hpp"
#include "iqvip/types.hpp"

namespace iqvip {

/// Projector onto one fixed nonempty closed convex set, with an optional
/// sampler of points of the set for verification purposes.
template <typename Scalar>
struct Projector {
  Eigen::Index dim = 0;
  std::function<Vector<Scalar>(const Vector<Scalar>&)> project;
  std::function<Vector<Scalar>(std::mt19937_64&)> sample;
};

template <typename Scalar>
struct BoxSpec {
  Vector<Scalar> lower;
  Vector<Scalar> upper;

  void validate() const {
    detail::require(lower.size() == upper.size(),
                    "BoxSpec: bound dimension mismatch");
    detail::require((lower.array() <= upper.array()).all(),
                    "BoxSpec: lower must not exceed upper");
  }
};

/// Componentwise clamp of y into [lower, upper].
template <typename Scalar>
Vector<Scalar> project_box(const BoxSpec<Scalar>& box, const Vector<Scalar>& y) {
  box.validate();
  detail::require(y.size() == box.lower.size(), "project_box: dimension mismatch");
  return y.cwiseMax(box.lower).cwiseMin(box.upper);
}

template <typename Scalar>
Projector<Scalar> box_projector(BoxSpec<Scalar> box) {
  box.validate();
  Projector<Scalar> p;
  p.dim = box.lower.size();
  p.project = [box](const Vector<Scalar>& y) { return project_box(box, y); };
  p.sample = [box](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector<Scalar> a(box.lower.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
      a[i] = box.lower[i] + Scalar(u(rng)) * (box.upper[i] - box.lower[i]);
    return a;
  };
  return p;
}

/// Projection onto the closed ball of radius r about c.
template <typename Scalar>
Projector<Scalar> ball_projector(Vector<Scalar> center, Scalar radius) {
  detail::require(radius > Scalar(0), "ball_projector: radius must be positive");
  Projector<Scalar> p;
  p.dim = center.size();
  p.project = [center, radius](const Vector<Scalar>& y) -> Vector<Scalar> {
    Vector<Scalar> d = y - center;
    Scalar n = d.norm();
    if (n <= radius) return y;
    return center + (radius / n) * d;
  };
  p.sample = [center, radius](std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector<Scalar> d(center.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = Scalar(g(rng));
    Scalar n = d.norm();
    if (n == Scalar(0)) return center;
    Scalar scale =
        radius * Scalar(std::pow(u(rng), 1.0 / double(center.size())));
    return Vector<Scalar>(center + (scale / n) * d);
  };
  return p;
}

template <typename Scalar>
Projector<Scalar> singleton_projector(Vector<Scalar> point) {
  Projector<Scalar> p;
  p.dim = point.size();
  p.project = [point](const Vector<Scalar>&) { return point; };
  p.sample = [point](std::mt19937_64&) { return point; };
  return p;
}

/// Moving set psi(x) = h(x) + Psi, a fixed convex set translated by a
/// Lipschitz shift. The induced projector family satisfies the family
/// Lipschitz bound with rho = shift_lipschitz.
template <typename Scalar>
struct MovingSetSpec {
  Projector<Scalar> base;  // projection onto the fixed set Psi
  std::function<Vector<Scalar>(const Vector<Scalar>&)> shift;  // h
  Scalar shift_lipschitz = 0;                                  // l
};

template <typename Scalar>
Vector<Scalar> project_moving(const MovingSetSpec<Scalar>& set,
                              const Vector<Scalar>& base_point,
                              const Vector<Scalar>& y) {
  detail::require(y.size() == set.base.dim, "project_moving: dimension mismatch");
  Vector<Scalar> offset = set.shift(base_point);
  detail::require(offset.size() == y.size(),
                  "project_moving: shift dimension mismatch");
  return offset + set.base.project(y - offset);
}

template <typename Scalar>
ProjectorFamily<Scalar> moving_family(MovingSetSpec<Scalar> set) {
  ProjectorFamily<Scalar> fam;
  fam.dim = set.base.dim;
  fam.rho = set.shift_lipschitz;
  fam.project = [set](const Vector<Scalar>& base_point, const Vector<Scalar>& y) {
    return project_moving(set, base_point, y);
  };
  if (set.base.sample) {
    fam.sample = [set](const Vector<Scalar>& base_point, std::mt19937_64& rng) {
      return Vector<Scalar>(set.shift(base_point) + set.base.sample(rng));
    };
  }
  return fam;
}

/// psi(x) = box spanned by the origin and x, i.e.
/// [min(0,x_i), max(0,x_i)] per coordinate. This stays a nonempty closed
/// convex set for every sign pattern of x; its family Lipschitz constant is 1.
template <typename Scalar>
ProjectorFamily<Scalar> span_box_family(Eigen::Index dim) {
  detail::require(dim > 0, "span_box_family: dim must be positive");
  ProjectorFamily<Scalar> fam;
  fam.dim = dim;
  fam.rho = 1;
  fam.project = [](const Vector<Scalar>& base,
                   const Vector<Scalar>& y) -> Vector<Scalar> {
    const Vector<Scalar> zero = Vector<Scalar>::Zero(base.size());
    return y.cwiseMax(base.cwiseMin(zero)).cwiseMin(base.cwiseMax(zero));
  };
  fam.sample = [](const Vector<Scalar>& base, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector<Scalar> a(base.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = Scalar(u(rng)) * base[i];
    return a;
  };
  return fam;
}

/// Checks the variational characterization <y - P(y), a - P(y)> <= 0 against
/// `sample_count` points a drawn from the projector's set sampler.
/// Deterministic given `seed`; tolerance 1e-9 absolute.
template <typename Scalar>
bool verify_projection(const Projector<Scalar>& projector,
                       const Vector<Scalar>& y, int sample_count,
                       unsigned seed) {
  detail::require(sample_count >= 1, "verify_projection: sample_count >= 1");
  detail::require(y.size() == projector.dim,
                  "verify_projection: dimension mismatch");
  if (!projector.sample)
    throw std::runtime_error(
        "verify_projection: projector has no set sampler; verification "
        "unsupported");
  const Scalar tol = Scalar(1e-9);
  std::mt19937_64 rng(seed);
  Vector<Scalar> p = projector.project(y);
  Vector<Scalar> gap = y - p;
  for (int k = 0; k < sample_count; ++k) {
    Vector<Scalar> a = projector.sample(rng);
    if (gap.dot(a - p) > tol) return false;
  }
  return true;
}

/// Empirical lower bound on the family constant rho: the largest observed
/// ratio ||P_{psi(r)}(y) - P_{psi(s)}(y)|| / ||r - s|| over sampled triples
/// drawn uniformly from [-10, 10]^dim. Diagnostic only; never a certificate.
template <typename Scalar>
Scalar estimate_rho(const ProjectorFamily<Scalar>& family, int sample_count,
                    unsigned seed) {
  detail::require(sample_count >= 1, "estimate_rho: sample_count >= 1");
  family.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  auto draw = [&](Eigen::Index n) {
    Vector<Scalar> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = Scalar(u(rng));
    return v;
  };
  Scalar best = 0;
  int usable = 0;
  for (int k = 0; k < sample_count; ++k) {
    Vector<Scalar> y = draw(family.dim);
    Vector<Scalar> r = draw(family.dim);
    Vector<Scalar> s = draw(family.dim);
    Scalar dist = (r - s).norm();
    if (dist == Scalar(0)) continue;  // degenerate pair, skip
    ++usable;
    Scalar ratio = (family.project(r, y) - family.project(s, y)).norm() / dist;
    if (ratio > best) best = ratio;
  }
  if (usable == 0)
    throw std::runtime_error("estimate_rho: all sampled pairs degenerate");
  return best;
}

}  // namespace iqvip
