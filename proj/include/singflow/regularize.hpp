#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "singflow/errors.hpp"
#include "singflow/fields.hpp"
#include "singflow/integrate.hpp"
#include "singflow/rng.hpp"
#include "singflow/vec.hpp"

namespace singflow {

/// Smooth field on the closed unit ball used inside the regularization
/// region, blending a constant drift H0 with the singular field f on the
/// collar:
///   H(z) = (1 - S1(eta)) H0 + S1(eta) f(z),  eta = 2|z| - 1/2,
/// so H = H0 for |z| <= 1/4 and H = f exactly for |z| >= 3/4. The latter
/// makes the regularized field C^1 across the ball boundary.
class InnerField {
 public:
  InnerField(HomogeneousField outer, Vec H0)
      : outer_(std::move(outer)), H0_(std::move(H0)) {
    if (H0_.size() != outer_.dim())
      throw domain_error("InnerField: H0 dimension mismatch");
  }

  int dim() const { return outer_.dim(); }
  const Vec& H0() const { return H0_; }

  Vec H(const Vec& z) const {
    const double s = smoothstep(2.0 * z.norm() - 0.5);
    if (s <= 0.0) return H0_;
    Vec out = (1.0 - s) * H0_;
    out += s * singular_rhs(outer_, z);
    return out;
  }

 private:
  HomogeneousField outer_;
  Vec H0_;
};

/// Inner field with the stochastic drift of the 4-d example generalized to
/// any dimension: H0 = (X_0, ..., X_{d-2}, X_{d-1} - 1) with X_i uniform in
/// [-1/2, 1/2], drawn from the (seed)-keyed stream. The -1 offset on the
/// last component biases escapes toward the defocusing basin.
inline InnerField random_inner_field(const HomogeneousField& field,
                                     std::uint64_t seed) {
  RngStream rng(seed);
  Vec H0(field.dim());
  for (int i = 0; i < field.dim(); ++i) H0[i] = rng.uniform(-0.5, 0.5);
  H0[field.dim() - 1] -= 1.0;
  return InnerField(field, H0);
}

/// Per-trajectory variant: an independent stream keyed by (seed, index).
inline InnerField random_inner_field(const HomogeneousField& field,
                                     std::uint64_t seed, std::uint64_t index) {
  return random_inner_field(field, derive_stream_seed(seed, index));
}

/// Regularized right-hand side:
///   f_nu(x) = |x|^alpha F(x/|x|)   for |x| >= nu,
///   f_nu(x) = nu^alpha H(x/nu)     for |x| <  nu.
/// Both branches agree exactly on a collar around |x| = nu because H = f
/// there.
class RegularizedField {
 public:
  RegularizedField(HomogeneousField field, InnerField inner, double nu)
      : field_(std::move(field)), inner_(std::move(inner)), nu_(nu) {
    if (!(nu_ > 0.0)) throw domain_error("RegularizedField: nu must be > 0");
    if (inner_.dim() != field_.dim())
      throw domain_error("RegularizedField: inner field dimension mismatch");
    nu_alpha_ = std::pow(nu_, field_.alpha());
    inv_nu_ = 1.0 / nu_;
  }

  double nu() const { return nu_; }
  const HomogeneousField& field() const { return field_; }

  Vec operator()(const Vec& x) const {
    if (x.norm() >= nu_) return singular_rhs(field_, x);
    return nu_alpha_ * inner_.H(inv_nu_ * x);
  }

 private:
  HomogeneousField field_;
  InnerField inner_;
  double nu_;
  double nu_alpha_;
  double inv_nu_;
};

inline Vec regularized_rhs(const HomogeneousField& field,
                           const InnerField& inner, double nu, const Vec& x) {
  return RegularizedField(field, inner, nu)(x);
}

/// First crossing of the sphere |x| = nu by the unregularized trajectory.
struct EntryEvent {
  double t_ent = 0.0;
  Vec x_ent;  // |x_ent| = nu
  double nu = 0.0;
};

/// Integrates the singular system from x0 until |x| first reaches nu and
/// refines the crossing. Throws no_entry_error if the radius never reaches
/// nu by t_max.
inline EntryEvent find_entry(const HomogeneousField& field, const Vec& x0,
                             double nu, const StepPolicy& policy = {},
                             double t_max = 50.0) {
  if (!(nu > 0.0)) throw domain_error("find_entry: nu must be > 0");
  if (!(x0.norm() > nu)) throw domain_error("find_entry: |x0| must exceed nu");
  auto rhs = [&field](const Vec& x) { return singular_rhs(field, x); };
  double t_prev = 0.0;
  Vec x_prev = x0;
  double t_last = 0.0;
  Vec x_last = x0;
  auto watch = [&](double t, const Vec& x) {
    t_prev = t_last;
    x_prev = x_last;
    t_last = t;
    x_last = x;
  };
  const auto res = detail::drive_adaptive(rhs, field.alpha(), policy, 0.0, 0.0,
                                          x0, t_max, nu, watch);
  if (res.reason != StopReason::reached_stop_radius)
    throw no_entry_error("find_entry: radius never reached nu before t_max");
  const CrossingEvent ev =
      detect_crossing(rhs, t_prev, x_prev, res.t, res.x, nu);
  return EntryEvent{ev.t, ev.x, nu};
}

/// State handed back to the outer dynamics after traversing the
/// regularization ball.
struct EscapeSample {
  double t_esc = 0.0;
  Vec x_esc;        // original-scale point, |x_esc| > nu
  Vec z_esc;        // rescaled point x_esc / nu
  double T_used = 0.0;  // rescaled traversal time actually applied
};

/// Deterministic escape: rescales the entry point to the unit ball, runs the
/// nu = 1 regularized flow for rescaled time T and maps back,
///   x_esc = nu * Phi_1^T(x_ent / nu),  t_esc = t_ent + nu^(1-alpha) T.
/// If the rescaled state has not left the unit ball after T it integrates
/// on, doubling the total budget up to max_doublings times before raising
/// trapped_error.
inline EscapeSample escape_via_flow(const HomogeneousField& field,
                                    const InnerField& inner,
                                    const EntryEvent& entry, double T,
                                    const StepPolicy& escape_policy = {0.02, 0.1,
                                                                      1e-14},
                                    int max_doublings = 8) {
  if (!(T > 0.0)) throw domain_error("escape_via_flow: T must be > 0");
  const RegularizedField unit_flow(field, inner, 1.0);
  Vec z = (1.0 / entry.nu) * entry.x_ent;
  auto noop = [](double, const Vec&) {};
  double elapsed = 0.0;
  double budget = T;
  for (int k = 0;; ++k) {
    const auto res = detail::drive_adaptive(unit_flow, field.alpha(),
                                            escape_policy, 1.0, elapsed, z,
                                            budget, 0.0, noop);
    z = res.x;
    elapsed = budget;
    if (z.norm() > 1.0) break;
    if (k >= max_doublings)
      throw trapped_error(
          "escape_via_flow: rescaled state never left the unit ball");
    budget *= 2.0;
  }
  EscapeSample esc;
  esc.T_used = elapsed;
  esc.t_esc = entry.t_ent + std::pow(entry.nu, 1.0 - field.alpha()) * elapsed;
  esc.z_esc = z;
  esc.x_esc = entry.nu * z;
  return esc;
}

/// Escape-point distribution families for the stochastic regularization map.
/// point   : all mass at radius * normalize(cap_center)
/// cap     : uniform on the radius-sphere cap of half-angle cap_angle around
///           cap_center
/// gaussian: N(radius * cap_center, sigma^2 I) restricted to |z| > 1 and to
///           the cone of half-angle cap_angle around cap_center
struct SamplerSpec {
  std::string family = "spherical_cap";
  double radius = 2.0;
  std::vector<double> cap_center;  // defaults to -e0 for the field dimension
  double cap_angle = 0.5;
  double sigma = 0.5;
};

/// How the regularization ball is traversed by an ensemble:
///   direct           : integrate the regularized ODE through the ball
///   map_deterministic: replace the traversal by the entry -> escape map of
///                      the unit-scale flow (one shared inner field)
///   map_stochastic   : replace the traversal by a draw from an escape
///                      distribution
enum class RegMode { direct, map_deterministic, map_stochastic };

struct RegularizationSpec {
  RegMode mode = RegMode::direct;
  double nu = 1e-6;
  double T = 20.0;  // rescaled traversal time for the map modes
  SamplerSpec sampler;
};

namespace detail {

inline UnitVec sampler_axis(const SamplerSpec& spec, int dim) {
  if (spec.cap_center.empty()) {
    Vec c(dim);
    c[0] = -1.0;
    return UnitVec(c);
  }
  if (static_cast<int>(spec.cap_center.size()) != dim)
    throw sampler_error("sampler: cap_center dimension mismatch");
  return UnitVec(Vec::from(spec.cap_center));
}

}  // namespace detail

/// Draws an escape point from the configured family, keyed by
/// (seed, index) so draws are independent of scheduling. The escape time is
/// the deterministic map time t_esc = t_ent + nu^(1-alpha) T.
inline EscapeSample sample_escape(const HomogeneousField& field,
                                  const SamplerSpec& spec,
                                  const EntryEvent& entry, double T,
                                  std::uint64_t seed, std::uint64_t index) {
  const int d = field.dim();
  const UnitVec axis = detail::sampler_axis(spec, d);
  RngStream rng(seed, index);
  Vec z;
  if (spec.family == "point_mass") {
    if (!(spec.radius > 1.0))
      throw sampler_error("sampler: point mass must lie outside the unit ball");
    z = spec.radius * axis.vec();
  } else if (spec.family == "spherical_cap") {
    if (!(spec.radius > 1.0))
      throw sampler_error("sampler: cap radius must exceed 1");
    if (!(spec.cap_angle > 0.0))
      throw sampler_error("sampler: cap_angle must be > 0");
    const double cmin = std::cos(std::min(spec.cap_angle, 3.15));
    int tries = 0;
    while (true) {
      const UnitVec dir = rng.unit_vector(d);
      if (dir.vec().dot(axis.vec()) >= cmin) {
        z = spec.radius * dir.vec();
        break;
      }
      if (++tries > 100000)
        throw sampler_error("sampler: cap rejection loop stalled");
    }
  } else if (spec.family == "truncated_gaussian") {
    if (!(spec.sigma > 0.0)) throw sampler_error("sampler: sigma must be > 0");
    const double cmin = std::cos(std::min(spec.cap_angle, 3.15));
    const Vec mean = spec.radius * axis.vec();
    int tries = 0;
    while (true) {
      Vec cand(d);
      for (int i = 0; i < d; ++i) cand[i] = mean[i] + spec.sigma * rng.normal();
      const double r = cand.norm();
      if (r > 1.0 && cand.dot(axis.vec()) >= cmin * r) {
        z = cand;
        break;
      }
      if (++tries > 100000)
        throw sampler_error(
            "sampler: gaussian truncation rejects everything (support "
            "misconfigured?)");
    }
  } else {
    throw sampler_error("sampler: unknown family '" + spec.family + "'");
  }
  EscapeSample esc;
  esc.T_used = T;
  esc.t_esc = entry.t_ent + std::pow(entry.nu, 1.0 - field.alpha()) * T;
  esc.z_esc = z;
  esc.x_esc = entry.nu * z;
  return esc;
}

/// States of the unregularized flow started at the escape point, evaluated
/// at the requested times. reentered[k] marks targets reached after the
/// trajectory dipped back inside |x| < nu (state still reported).
struct ContinuationResult {
  std::vector<Vec> states;
  std::vector<char> reentered;
};

inline ContinuationResult continue_from_escape(
    const HomogeneousField& field, const EscapeSample& esc, double nu,
    const std::vector<double>& t_targets, const StepPolicy& policy = {}) {
  for (std::size_t k = 0; k < t_targets.size(); ++k) {
    if (t_targets[k] < esc.t_esc)
      throw domain_error("continue_from_escape: target before escape time");
    if (k > 0 && !(t_targets[k] > t_targets[k - 1]))
      throw domain_error("continue_from_escape: targets must increase");
  }
  auto rhs = [&field](const Vec& x) { return singular_rhs(field, x); };
  ContinuationResult out;
  out.states.reserve(t_targets.size());
  out.reentered.reserve(t_targets.size());
  bool dipped = false;
  auto watch = [&](double, const Vec& x) {
    if (x.norm() < nu) dipped = true;
  };
  double t = esc.t_esc;
  Vec x = esc.x_esc;
  for (double target : t_targets) {
    const auto res = detail::drive_adaptive(rhs, field.alpha(), policy, 0.0, t,
                                            x, target, 0.0, watch);
    t = res.t;
    x = res.x;
    out.states.push_back(x);
    out.reentered.push_back(dipped ? 1 : 0);
  }
  return out;
}

}  // namespace singflow
