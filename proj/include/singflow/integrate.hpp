#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "singflow/errors.hpp"
#include "singflow/fields.hpp"
#include "singflow/vec.hpp"

namespace singflow {

/// Adaptive step control for integration toward the singularity:
///   dt = min(dt_max, c * X^(1-alpha), c * X / |f(x)|),  X = max(|x|, floor).
/// The middle term is the homogeneous-scaling step (constant step in the
/// self-similar clock); the last term caps the per-step displacement at a
/// fraction c of the current radius scale, which matters where |F| >> 1 on
/// the sphere. floor is the regularization radius when integrating a
/// regularized system (the field is smooth at that scale, so the step need
/// not shrink further inside the ball).
struct StepPolicy {
  double dt_max = 1e-3;
  double c = 0.1;
  double dt_min = 1e-14;
};

enum class StopReason {
  reached_t_end,
  reached_stop_radius,
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  StopReason termination = StopReason::reached_t_end;
};

/// One classical fourth-order step. Throws numerical_error if the result is
/// non-finite (covers non-finite stage values as well).
template <class Rhs>
Vec rk4_step(Rhs&& rhs, const Vec& x, double dt) {
  const Vec k1 = rhs(x);
  const Vec k2 = rhs(x + (0.5 * dt) * k1);
  const Vec k3 = rhs(x + (0.5 * dt) * k2);
  const Vec k4 = rhs(x + dt * k3);
  Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.finite()) throw numerical_error("rk4_step: non-finite state");
  return out;
}

namespace detail {

/// rk4_step with the first stage already evaluated (the driver needs f(x)
/// for step-size control anyway).
template <class Rhs>
Vec rk4_step_k1(Rhs&& rhs, const Vec& x, const Vec& k1, double dt) {
  const Vec k2 = rhs(x + (0.5 * dt) * k1);
  const Vec k3 = rhs(x + (0.5 * dt) * k2);
  const Vec k4 = rhs(x + dt * k3);
  Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.finite())
    throw numerical_error("integrate: non-finite state during step");
  return out;
}

struct DriveResult {
  double t;
  Vec x;
  StopReason reason;
};

/// Adaptive driver shared by the singular and regularized integrators.
/// Lands exactly on t_end; terminates early when |x| <= stop_radius
/// (stop_radius <= 0 disables the radius stop). Calls obs(t, x) after every
/// accepted step (not for the initial state).
template <class Rhs, class Obs>
DriveResult drive_adaptive(Rhs&& rhs, double alpha, const StepPolicy& pol,
                           double floor_radius, double t0, Vec x, double t_end,
                           double stop_radius, Obs&& obs) {
  if (!(t_end >= t0)) throw domain_error("integrate: t_end before start time");
  double t = t0;
  while (t < t_end) {
    const double r = x.norm();
    if (stop_radius > 0.0 && r <= stop_radius)
      return {t, x, StopReason::reached_stop_radius};
    const Vec k1 = rhs(x);
    const double X = std::max(r, floor_radius);
    if (!(X > 0.0))
      throw singularity_error("integrate: state reached the singular point");
    double dt = std::min(pol.dt_max, pol.c * std::pow(X, 1.0 - alpha));
    const double fnorm = k1.norm();
    if (fnorm > 0.0) dt = std::min(dt, pol.c * X / fnorm);
    const double remaining = t_end - t;
    if (fnorm * remaining <= 1e-12 * X) {
      // Numerically stationary: over the whole remaining interval the state
      // would move by less than 1e-12 of its own scale, so the constant
      // solution is exact to roundoff. Blended regularized fields have
      // genuine interior equilibria; without this jump a trapped state
      // grinds through the rest of the interval at the floor step size.
      t = t_end;
      break;
    }
    if (remaining <= pol.dt_min) {
      // Sub-resolution remainder: arrival. Displacement over it is below
      // the scheme's own error floor.
      t = t_end;
      break;
    }
    if (dt < pol.dt_min)
      throw stiffness_error("integrate: step underflow below dt_min");
    if (dt >= remaining) dt = remaining;
    x = rk4_step_k1(rhs, x, k1, dt);
    t = (dt == remaining) ? t_end : t + dt;
    obs(t, x);
  }
  if (stop_radius > 0.0 && x.norm() <= stop_radius)
    return {t, x, StopReason::reached_stop_radius};
  return {t, x, StopReason::reached_t_end};
}

}  // namespace detail

/// Integrates dx/dt = |x|^alpha F(x/|x|) from x0 over [0, t_end], recording
/// every accepted step. Terminates early once |x| <= stop_radius
/// (default 1e-8 |x0|); pass stop_radius = 0 to disable the radius stop.
inline Trajectory integrate_singular(const HomogeneousField& field,
                                     const Vec& x0, double t_end,
                                     const StepPolicy& policy = {},
                                     double stop_radius = -1.0) {
  if (x0.size() != field.dim())
    throw domain_error("integrate_singular: dimension mismatch");
  if (!(x0.norm() > 0.0))
    throw domain_error("integrate_singular: x0 at the singular point");
  if (stop_radius < 0.0) stop_radius = 1e-8 * x0.norm();
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  auto rhs = [&field](const Vec& x) { return singular_rhs(field, x); };
  auto rec = [&traj](double t, const Vec& x) {
    traj.times.push_back(t);
    traj.states.push_back(x);
  };
  const auto res = detail::drive_adaptive(rhs, field.alpha(), policy, 0.0, 0.0,
                                          x0, t_end, stop_radius, rec);
  traj.termination = res.reason;
  return traj;
}

namespace detail {

/// Fixed-step sphere driver with renormalization after every step.
/// obs(s, y) is called for the initial point and after every step.
template <class Obs>
UnitVec sphere_drive(const HomogeneousField& field, UnitVec y, double s_end,
                     double ds, Obs&& obs) {
  if (!(ds > 0.0)) throw domain_error("integrate_sphere: ds must be > 0");
  if (!(s_end >= 0.0)) throw domain_error("integrate_sphere: s_end < 0");
  auto rhs = [&field](const Vec& v) { return sphere_rhs(field, UnitVec(v)); };
  double s = 0.0;
  obs(s, y);
  while (s < s_end) {
    const double remaining = s_end - s;
    const double h = std::min(ds, remaining);
    if (h <= s_end * 1e-16) break;
    y = UnitVec(rk4_step(rhs, y.vec(), h));
    s = (h == remaining) ? s_end : s + h;
    obs(s, y);
  }
  return y;
}

}  // namespace detail

/// Integrates the sphere dynamics dy/ds = F_s(y) with fixed step ds,
/// renormalizing after each step. Records every step.
inline Trajectory integrate_sphere(const HomogeneousField& field,
                                   const UnitVec& y0, double s_end,
                                   double ds) {
  Trajectory traj;
  auto rec = [&traj](double s, const UnitVec& y) {
    traj.times.push_back(s);
    traj.states.push_back(y.vec());
  };
  detail::sphere_drive(field, y0, s_end, ds, rec);
  traj.termination = StopReason::reached_t_end;
  return traj;
}

struct CrossingEvent {
  double t;
  Vec x;
};

/// Refines the time at which |x(t)| crosses `level` inside one accepted step
/// [t0, t1], given the step endpoints. Bisection on sub-steps of the same
/// fourth-order scheme from (t0, x0); after the bracket is machine-tight the
/// point is radially snapped onto the level sphere (the remaining radial
/// residual at small levels is below time-representability, so the snap is
/// within the refinement's own error budget).
template <class Rhs>
CrossingEvent detect_crossing(Rhs&& rhs, double t0, const Vec& x0, double t1,
                              const Vec& x1, double level) {
  if (!(level > 0.0)) throw domain_error("detect_crossing: level must be > 0");
  if (!(t1 > t0)) throw domain_error("detect_crossing: empty step interval");
  const double g0 = x0.norm() - level;
  const double g1 = x1.norm() - level;
  if (g0 == 0.0) return {t0, x0};
  if (g1 == 0.0) return {t1, x1};
  if ((g0 > 0.0) == (g1 > 0.0))
    throw bracket_error("detect_crossing: no sign change across the step");

  double lo = t0, hi = t1;
  bool lo_positive = g0 > 0.0;
  Vec x_mid = x1;
  double t_mid = t1;
  for (int it = 0; it < 200; ++it) {
    t_mid = 0.5 * (lo + hi);
    if (t_mid <= lo || t_mid >= hi) break;  // machine-tight bracket
    x_mid = rk4_step(rhs, x0, t_mid - t0);
    const double gm = x_mid.norm() - level;
    if (gm == 0.0) break;
    if ((gm > 0.0) == lo_positive)
      lo = t_mid;
    else
      hi = t_mid;
  }
  x_mid = rk4_step(rhs, x0, t_mid - t0);
  const double r = x_mid.norm();
  if (!(r > 0.0))
    throw bracket_error("detect_crossing: degenerate refined point");
  x_mid *= level / r;
  return {t_mid, x_mid};
}

}  // namespace singflow
