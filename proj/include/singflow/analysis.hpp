#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "singflow/ensemble.hpp"
#include "singflow/errors.hpp"
#include "singflow/fields.hpp"
#include "singflow/integrate.hpp"
#include "singflow/vec.hpp"

namespace singflow {

// ---------------------------------------------------------------------------
// Joint sphere / slave / memory integrator
//
// The radial dynamics near the singular point reduces, in rescaled time s, to
// the master-slave pair
//   dy/ds = F_s(y),    dw/ds = 1 + (alpha - 1) F_r(y) w,
// where w is the profile coordinate of the radius. The stepper below carries
// (y, w, C) with C(s) = integral of F_r along the orbit, so callers can both
// follow the slave variable and reconstruct synchronization integrals from
// the accumulated memory.

class SphereOrbit {
 public:
  SphereOrbit(HomogeneousField field, const UnitVec& y0, double w0 = 1.0)
      : field_(std::move(field)), d_(field_.dim()), state_(field_.dim() + 2) {
    if (!(w0 > 0.0)) throw domain_error("SphereOrbit: w0 must be > 0");
    for (int i = 0; i < d_; ++i) state_[i] = y0[i];
    state_[d_] = w0;
    state_[d_ + 1] = 0.0;
  }

  void step(double h) {
    auto rhs = [this](const Vec& p) { return packed_rhs(p); };
    state_ = rk4_step(rhs, state_, h);
    double r2 = 0.0;
    for (int i = 0; i < d_; ++i) r2 += state_[i] * state_[i];
    const double inv = 1.0 / std::sqrt(r2);
    for (int i = 0; i < d_; ++i) state_[i] *= inv;
    s_ += h;
  }

  /// Advances by total rescaled time `length` in uniform steps of roughly h.
  void advance(double length, double h) {
    const auto n = std::max<long long>(1, std::llround(length / h));
    const double he = length / static_cast<double>(n);
    for (long long k = 0; k < n; ++k) step(he);
  }

  double s() const { return s_; }
  double w() const { return state_[d_]; }
  double C() const { return state_[d_ + 1]; }
  void set_w(double w0) {
    if (!(w0 > 0.0)) throw domain_error("SphereOrbit: w must stay > 0");
    state_[d_] = w0;
  }

  Vec y() const {
    Vec out(d_);
    for (int i = 0; i < d_; ++i) out[i] = state_[i];
    return out;
  }
  UnitVec unit_y() const { return UnitVec(y()); }

  /// Radial component F_r at the current direction (fresh evaluation).
  double radial() const { return decompose(field_, unit_y()).radial; }

  const HomogeneousField& field() const { return field_; }

 private:
  Vec packed_rhs(const Vec& p) const {
    Vec y(d_);
    for (int i = 0; i < d_; ++i) y[i] = p[i];
    const FieldSplit sp = decompose(field_, UnitVec(y));
    Vec out(d_ + 2);
    for (int i = 0; i < d_; ++i) out[i] = sp.tangential[i];
    out[d_] = 1.0 + (field_.alpha() - 1.0) * sp.radial * p[d_];
    out[d_ + 1] = sp.radial;
    return out;
  }

  HomogeneousField field_;
  int d_;
  Vec state_;  // [y_0 .. y_{d-1}, w, C]
  double s_ = 0.0;
};

// ---------------------------------------------------------------------------
// Synchronization integral G
//
// G(y) = int_0^inf exp[ (alpha-1) int_0^{s1} F_r(y(-s2)) ds2 ] ds1
//
// is the value the slave variable locks onto. Under the standing hypothesis
// F_r >= F_m > 0 along the relevant orbits, the integrand decays at least
// like exp[-(1-alpha) F_m s1], so the integral truncated at a window s_p
// misses at most exp[(alpha-1) C(s_p)] / ((1-alpha) F_m). That bound is
// added back as a tail estimate; it is exact when F_r is constant beyond the
// window and an upper estimate otherwise, so the result is within the bound
// of the true value either way.

struct GsyncConfig {
  double s_p = 0.0;        // truncation window; 0 = derive from tolerance
  double quad_step = 1e-3;  // orbit and quadrature step
  double F_m = 0.0;        // certified lower bound on F_r (required, > 0)
  double tolerance = 1e-10;  // truncation target for the automatic window
};

namespace detail {

inline double auto_window(double alpha, double F_m, double tol) {
  const double rate = (1.0 - alpha) * F_m;
  const double arg = 1.0 / (tol * rate);
  return arg > 1.0 ? std::log(arg) / rate : 1.0;
}

/// Composite Simpson over samples g_0..g_K at spacing h (K even).
inline double simpson(const std::vector<double>& g, double h) {
  const std::size_t K = g.size() - 1;
  double sum = g[0] + g[K];
  for (std::size_t j = 1; j < K; j += 2) sum += 4.0 * g[j];
  for (std::size_t j = 2; j < K; j += 2) sum += 2.0 * g[j];
  return sum * h / 3.0;
}

inline int window_steps(double span, double h) {
  int k = static_cast<int>(std::ceil(span / h - 1e-9));
  if (k < 2) k = 2;
  if (k % 2) ++k;
  return k;
}

}  // namespace detail

/// Rolling memory of the accumulated radial integral C(s) along a forward
/// orbit, spanning a fixed trailing window. Once full it can evaluate the
/// synchronization integral at the current orbit point from history alone,
/// without any backward integration (which would be unstable when the sphere
/// dynamics is chaotic).
class MemoryWindow {
 public:
  MemoryWindow(double span, double h) : h_(h) {
    if (!(span > 0.0) || !(h > 0.0))
      throw domain_error("MemoryWindow: span and h must be > 0");
    cap_ = detail::window_steps(span, h) + 1;
    buf_.assign(static_cast<std::size_t>(cap_), 0.0);
  }

  void push(double c) {
    buf_[static_cast<std::size_t>(head_)] = c;
    head_ = (head_ + 1) % cap_;
    if (count_ < cap_) ++count_;
  }

  bool full() const { return count_ == cap_; }
  double h() const { return h_; }
  double span() const { return h_ * (cap_ - 1); }
  int steps_to_fill() const { return cap_; }

  /// Truncated synchronization integral with tail estimate; requires the
  /// window to be full. alpha < 1 and F_m > 0 are the caller's certified
  /// hypotheses.
  double gsync(double alpha, double F_m) const {
    if (!full())
      throw domain_error("MemoryWindow: window not yet filled");
    if (!(F_m > 0.0)) throw domain_error("MemoryWindow: F_m must be > 0");
    const int K = cap_ - 1;
    const double c_now = sample(K);
    std::vector<double> g(static_cast<std::size_t>(K) + 1);
    for (int j = 0; j <= K; ++j)
      g[static_cast<std::size_t>(j)] =
          std::exp((alpha - 1.0) * (c_now - sample(K - j)));
    const double body = detail::simpson(g, h_);
    const double tail =
        std::exp((alpha - 1.0) * (c_now - sample(0))) / ((1.0 - alpha) * F_m);
    return body + tail;
  }

 private:
  double sample(int j) const {  // j = 0 oldest ... cap_-1 newest
    return buf_[static_cast<std::size_t>((head_ - count_ + j + 2 * cap_) % cap_)];
  }

  double h_;
  int cap_ = 0;
  int head_ = 0;
  int count_ = 0;
  std::vector<double> buf_;
};

/// Evaluates G(y0) by integrating the sphere dynamics backward from y0 and
/// applying Simpson quadrature plus the certified tail. Only valid where
/// backward orbits are well conditioned (fixed points, planar flows,
/// hypothesis-satisfying fields); on chaotic attractors use MemoryWindow
/// along a forward orbit instead. Throws bound_violation_error if F_r drops
/// below F_m along the backward orbit.
inline double gsync_value(const HomogeneousField& field, const UnitVec& y0,
                          const GsyncConfig& cfg) {
  if (!(cfg.F_m > 0.0)) throw domain_error("gsync_value: F_m must be > 0");
  const double alpha = field.alpha();
  const double span = cfg.s_p > 0.0
                          ? cfg.s_p
                          : detail::auto_window(alpha, cfg.F_m, cfg.tolerance);
  const double h = cfg.quad_step;
  const int K = detail::window_steps(span, h);
  const int d = field.dim();

  auto rhs = [&](const Vec& p) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = p[i];
    const FieldSplit sp = decompose(field, UnitVec(y));
    Vec out(d + 1);
    for (int i = 0; i < d; ++i) out[i] = -sp.tangential[i];
    out[d] = sp.radial;  // C(sigma) = int_0^sigma F_r(y(-u)) du
    return out;
  };

  Vec p(d + 1);
  for (int i = 0; i < d; ++i) p[i] = y0[i];
  p[d] = 0.0;
  std::vector<double> g(static_cast<std::size_t>(K) + 1);
  double c_end = 0.0;
  for (int j = 0; j <= K; ++j) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = p[i];
    const UnitVec yn(y);
    const double fr = decompose(field, yn).radial;
    if (fr < cfg.F_m - 1e-9)
      throw bound_violation_error(
          "gsync_value: F_r dropped below F_m along the backward orbit");
    g[static_cast<std::size_t>(j)] = std::exp((alpha - 1.0) * p[d]);
    c_end = p[d];
    if (j < K) {
      p = rk4_step(rhs, p, h);
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) r2 += p[i] * p[i];
      const double inv = 1.0 / std::sqrt(r2);
      for (int i = 0; i < d; ++i) p[i] *= inv;
    }
  }
  const double tail =
      std::exp((alpha - 1.0) * c_end) / ((1.0 - alpha) * cfg.F_m);
  return detail::simpson(g, h) + tail;
}

namespace detail {

/// Generic RK4 step over a flat state vector (used where the packed state
/// exceeds the small fixed-capacity Vec).
template <class Rhs>
inline void rk4_step_flat(const Rhs& rhs, std::vector<double>& x, double h) {
  const std::size_t n = x.size();
  std::vector<double> k1 = rhs(x), tmp(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  std::vector<double> k2 = rhs(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  std::vector<double> k3 = rhs(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  std::vector<double> k4 = rhs(tmp);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(x[i]))
      throw numerical_error("rk4_step_flat: non-finite state");
  }
}

/// Central-difference Jacobian of the tangential part and gradient of the
/// radial part of the degree-0 extension F(z/|z|), evaluated at unit y.
/// Js is d x d row-major: Js[i*d+j] = d(F_s)_i / dz_j.
inline void field_jacobians(const HomogeneousField& field, const Vec& y,
                            double eps, std::vector<double>& Js, Vec& grad_r) {
  const int d = field.dim();
  for (int j = 0; j < d; ++j) {
    Vec zp = y;
    zp[j] += eps;
    const FieldSplit sp = decompose(field, UnitVec(zp));
    Vec zm = y;
    zm[j] -= eps;
    const FieldSplit sm = decompose(field, UnitVec(zm));
    for (int i = 0; i < d; ++i)
      Js[static_cast<std::size_t>(i) * d + j] =
          (sp.tangential[i] - sm.tangential[i]) / (2.0 * eps);
    grad_r[j] = (sp.radial - sm.radial) / (2.0 * eps);
  }
}

}  // namespace detail

/// Tangential gradient of G at y0 via the backward variational flow:
///   grad G = (alpha-1) int_0^inf e^{(alpha-1) C(sigma)} A(sigma) dsigma,
///   A(sigma) = int_0^sigma grad F_r(y(-u)) . Y(u) du,
/// with Y the derivative of the backward orbit w.r.t. y0. Subject to the
/// same hypotheses as gsync_value; additionally the backward variational
/// growth must stay below the synchronization rate for the integral to
/// converge, and the run aborts with bound_violation_error if Y blows up.
inline Vec gsync_gradient(const HomogeneousField& field, const UnitVec& y0,
                          const GsyncConfig& cfg) {
  if (!(cfg.F_m > 0.0)) throw domain_error("gsync_gradient: F_m must be > 0");
  const double alpha = field.alpha();
  const double span = cfg.s_p > 0.0
                          ? cfg.s_p
                          : detail::auto_window(alpha, cfg.F_m, cfg.tolerance);
  const double h = cfg.quad_step;
  const int K = detail::window_steps(span, h);
  const int d = field.dim();

  // Flat state: y (d), C (1), Y row-major (d*d), A (d).
  const std::size_t ny = static_cast<std::size_t>(d);
  const std::size_t iC = ny;
  const std::size_t iY = iC + 1;
  const std::size_t iA = iY + ny * ny;
  std::vector<double> state(iA + ny, 0.0);
  for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] = y0[i];
  for (int i = 0; i < d; ++i)
    state[iY + static_cast<std::size_t>(i) * ny + static_cast<std::size_t>(i)] = 1.0;

  const double fd_eps = 1e-6;
  auto rhs = [&](const std::vector<double>& p) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = p[static_cast<std::size_t>(i)];
    const FieldSplit sp = decompose(field, UnitVec(y));
    std::vector<double> Js(ny * ny);
    Vec gr(d);
    detail::field_jacobians(field, y, fd_eps, Js, gr);
    std::vector<double> out(p.size(), 0.0);
    for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = -sp.tangential[i];
    out[iC] = sp.radial;
    for (std::size_t i = 0; i < ny; ++i)
      for (std::size_t j = 0; j < ny; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ny; ++k)
          acc += Js[i * ny + k] * p[iY + k * ny + j];
        out[iY + i * ny + j] = -acc;
      }
    for (std::size_t j = 0; j < ny; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ny; ++k)
        acc += gr[static_cast<int>(k)] * p[iY + k * ny + j];
      out[iA + j] = acc;
    }
    return out;
  };

  std::vector<double> weights(static_cast<std::size_t>(K) + 1);
  std::vector<Vec> avals(static_cast<std::size_t>(K) + 1, Vec(d));
  for (int j = 0; j <= K; ++j) {
    Vec y(d);
    for (int i = 0; i < d; ++i) y[i] = state[static_cast<std::size_t>(i)];
    const double fr = decompose(field, UnitVec(y)).radial;
    if (fr < cfg.F_m - 1e-9)
      throw bound_violation_error(
          "gsync_gradient: F_r dropped below F_m along the backward orbit");
    double ynorm2 = 0.0;
    for (std::size_t i = 0; i < ny * ny; ++i)
      ynorm2 += state[iY + i] * state[iY + i];
    if (ynorm2 > 1e24)
      throw bound_violation_error(
          "gsync_gradient: backward variational flow is expanding too fast "
          "for the gradient integral to converge");
    weights[static_cast<std::size_t>(j)] =
        std::exp((alpha - 1.0) * state[iC]);
    Vec a(d);
    for (int i = 0; i < d; ++i) a[i] = state[iA + static_cast<std::size_t>(i)];
    avals[static_cast<std::size_t>(j)] = a;
    if (j < K) {
      detail::rk4_step_flat(rhs, state, h);
      double r2 = 0.0;
      for (int i = 0; i < d; ++i)
        r2 += state[static_cast<std::size_t>(i)] * state[static_cast<std::size_t>(i)];
      const double inv = 1.0 / std::sqrt(r2);
      for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] *= inv;
    }
  }

  Vec grad(d);
  for (int c = 0; c < d; ++c) {
    std::vector<double> g(static_cast<std::size_t>(K) + 1);
    for (int j = 0; j <= K; ++j)
      g[static_cast<std::size_t>(j)] =
          weights[static_cast<std::size_t>(j)] * avals[static_cast<std::size_t>(j)][c];
    grad[c] = (alpha - 1.0) * detail::simpson(g, h);
  }
  return tangent_project(grad, y0);
}

// ---------------------------------------------------------------------------
// Slave-variable reconstruction and synchronization diagnostics

/// Quadrature reconstruction of the slave variable at rescaled time s_end:
///   w(s) = w0 e^{(alpha-1) C(s)}
///        + int_0^s e^{(alpha-1)(C(s) - C(s - s1))} ds1,
/// computed from the accumulated C along the forward orbit. Serves as an
/// integration-free cross-check of the master-slave ODE.
inline double explicit_w(const HomogeneousField& field, const UnitVec& y0,
                         double w0, double s_end, double h) {
  if (!(s_end > 0.0) || !(h > 0.0))
    throw domain_error("explicit_w: s_end and h must be > 0");
  auto n = std::max<long long>(2, std::llround(s_end / h));
  if (n % 2) ++n;
  const double he = s_end / static_cast<double>(n);
  SphereOrbit orbit(field, y0, w0);
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  c[0] = 0.0;
  for (long long k = 1; k <= n; ++k) {
    orbit.step(he);
    c[static_cast<std::size_t>(k)] = orbit.C();
  }
  const double alpha = field.alpha();
  const double cn = c[static_cast<std::size_t>(n)];
  std::vector<double> g(static_cast<std::size_t>(n) + 1);
  for (long long j = 0; j <= n; ++j)
    g[static_cast<std::size_t>(j)] = std::exp(
        (alpha - 1.0) * (cn - c[static_cast<std::size_t>(n - j)]));
  return w0 * std::exp((alpha - 1.0) * cn) + detail::simpson(g, he);
}

struct SyncResult {
  double error = 0.0;  // |w - G| at the end of the run
  double w = 0.0;
  double g = 0.0;
};

/// Runs the master-slave pair and measures how far the slave is from the
/// history-reconstructed synchronization value. The direction is first
/// burned in for burn_in (slave untouched), then the slave is reset to w0
/// and both are run for another s_sync.
inline SyncResult sync_error(const HomogeneousField& field, const UnitVec& y0,
                             double w0, double burn_in, double s_sync,
                             double h, double window_span, double F_m) {
  if (!(s_sync > 0.0)) throw domain_error("sync_error: s_sync must be > 0");
  SphereOrbit orbit(field, y0, 1.0);
  MemoryWindow win(window_span, h);
  win.push(orbit.C());
  const auto n1 = std::max<long long>(0, std::llround(burn_in / h));
  for (long long k = 0; k < n1; ++k) {
    orbit.step(h);
    win.push(orbit.C());
  }
  orbit.set_w(w0);
  const auto n2 = std::max<long long>(1, std::llround(s_sync / h));
  for (long long k = 0; k < n2; ++k) {
    orbit.step(h);
    win.push(orbit.C());
  }
  if (!win.full())
    throw domain_error(
        "sync_error: run shorter than the memory window; increase burn_in");
  SyncResult out;
  out.w = orbit.w();
  out.g = win.gsync(field.alpha(), F_m);
  out.error = std::abs(out.w - out.g);
  return out;
}

// ---------------------------------------------------------------------------
// Statistics along sphere orbits

/// Time average of g(y) along a forward sphere orbit (trapezoid in s),
/// discarding a burn-in transient. For ergodic dynamics this approximates
/// the average of g against the invariant measure of the attractor.
template <class Fn>
inline double srb_average(const HomogeneousField& field, const UnitVec& y0,
                          double burn_in, double s_total, double h, Fn&& g) {
  if (!(s_total > 0.0)) throw domain_error("srb_average: s_total must be > 0");
  SphereOrbit orbit(field, y0, 1.0);
  if (burn_in > 0.0) orbit.advance(burn_in, h);
  const auto n = std::max<long long>(1, std::llround(s_total / h));
  const double he = s_total / static_cast<double>(n);
  double acc = 0.5 * g(orbit.unit_y());
  for (long long k = 1; k <= n; ++k) {
    orbit.step(he);
    const double v = g(orbit.unit_y());
    acc += (k == n) ? 0.5 * v : v;
  }
  return acc * he / s_total;
}

struct RadialRange {
  double F_m = 0.0;
  double F_M = 0.0;
};

/// Empirical range of F_r along an orbit after burn-in, estimated from the
/// per-step increments of the accumulated radial integral (mean of F_r over
/// each step; the smoothing is O(h^2) and negligible against the safety
/// margins these numbers feed).
inline RadialRange estimate_radial_range(const HomogeneousField& field,
                                         const UnitVec& y0, double burn_in,
                                         double s_total, double h) {
  if (!(s_total > 0.0))
    throw domain_error("estimate_radial_range: s_total must be > 0");
  SphereOrbit orbit(field, y0, 1.0);
  if (burn_in > 0.0) orbit.advance(burn_in, h);
  const auto n = std::max<long long>(1, std::llround(s_total / h));
  double lo = 0.0, hi = 0.0;
  double c_prev = orbit.C();
  for (long long k = 0; k < n; ++k) {
    orbit.step(h);
    const double fr = (orbit.C() - c_prev) / h;
    c_prev = orbit.C();
    if (k == 0) {
      lo = hi = fr;
    } else {
      lo = std::min(lo, fr);
      hi = std::max(hi, fr);
    }
  }
  return {lo, hi};
}

struct TrappingBounds {
  double w_min = 0.0;
  double w_max = 0.0;
};

/// Absorbing interval for the slave variable implied by radial bounds
/// 0 < F_m <= F_r <= F_M: once w enters (w_min, w_max) it never leaves.
inline TrappingBounds trapping_bounds(double alpha, double F_m, double F_M) {
  if (!(alpha < 1.0)) throw domain_error("trapping_bounds: alpha must be < 1");
  if (!(F_m > 0.0) || !(F_M >= F_m))
    throw domain_error("trapping_bounds: need 0 < F_m <= F_M");
  return {1.0 / ((1.0 - alpha) * F_M), 1.0 / ((1.0 - alpha) * F_m)};
}

// ---------------------------------------------------------------------------
// Invariant-measure sampling and the post-blowup predictor

/// A sample of the synchronized state: direction y, slave value w = G(y),
/// and its weight under the w-corrected invariant measure (proportional to
/// 1/G, normalized over the ensemble).
struct SRBPrimePoint {
  UnitVec y;
  double w = 0.0;
  double weight = 0.0;
};

/// Samples M points along a forward sphere orbit at the given stride,
/// evaluating G from the trailing memory window at each sample. Weights are
/// normalized 1/G values, so the cloud targets the post-blowup emergence
/// measure rather than the plain orbit average. Fully deterministic.
/// Throws bound_violation_error if the per-step mean of F_r drops below F_m.
inline std::vector<SRBPrimePoint> srb_prime_ensemble(
    const HomogeneousField& field, const UnitVec& y0, std::size_t M,
    double burn_in, double stride, double h, double window_span, double F_m) {
  if (M == 0) throw domain_error("srb_prime_ensemble: M must be >= 1");
  if (!(stride > 0.0)) throw domain_error("srb_prime_ensemble: stride <= 0");
  SphereOrbit orbit(field, y0, 1.0);
  MemoryWindow win(window_span, h);
  win.push(orbit.C());
  double c_prev = orbit.C();
  auto step_checked = [&]() {
    orbit.step(h);
    const double fr = (orbit.C() - c_prev) / h;
    c_prev = orbit.C();
    if (fr < F_m - 1e-9)
      throw bound_violation_error(
          "srb_prime_ensemble: F_r dropped below F_m along the orbit");
    win.push(orbit.C());
  };
  const auto nb = std::llround(burn_in / h);
  for (long long k = 0; k < nb || !win.full(); ++k) step_checked();
  const auto ns = std::max<long long>(1, std::llround(stride / h));
  const double alpha = field.alpha();
  std::vector<SRBPrimePoint> out;
  out.reserve(M);
  double wsum = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    if (m > 0)
      for (long long k = 0; k < ns; ++k) step_checked();
    const double g = win.gsync(alpha, F_m);
    out.push_back({orbit.unit_y(), g, 1.0 / g});
    wsum += 1.0 / g;
  }
  for (auto& p : out) p.weight /= wsum;
  return out;
}

/// Maps synchronized samples to predicted post-blowup positions at time t:
///   x = ((t - t_b) / w)^{1/(1-alpha)} y.
inline SampleSet predict_post_blowup(const std::vector<SRBPrimePoint>& pts,
                                     double t_b, double t, double alpha) {
  if (!(t > t_b))
    throw domain_error("predict_post_blowup: t must exceed t_b");
  SampleSet s;
  s.t = t;
  s.points.reserve(pts.size());
  s.weights.reserve(pts.size());
  for (const auto& p : pts) {
    if (!(p.w > 0.0))
      throw domain_error("predict_post_blowup: nonpositive slave value");
    const double r = std::pow((t - t_b) / p.w, 1.0 / (1.0 - alpha));
    s.points.push_back(r * p.y.vec());
    s.weights.push_back(p.weight);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Blowup time

struct BlowupResult {
  double t_b = 0.0;    // estimated singularity time
  double t_stop = 0.0;  // time at which integration stopped
  double r_stop = 0.0;  // radius reached
  UnitVec y_stop;      // direction at the stop radius
};

struct BlowupOptions {
  StepPolicy policy{};
  double stop_fraction = 1e-8;  // stop radius as a fraction of |x0|
  double angle_tol = 1e-3;      // direction change over the last decade
  int max_extensions = 5;       // extra 100x radius reductions allowed
  double t_max = 100.0;
};

/// Integrates a focusing trajectory until its direction has settled (change
/// below angle_tol over the final decade of radius) and completes the
/// remaining time analytically from the frozen-direction radial law:
///   dt_tail = r^{1-alpha} / ((1-alpha) |F_r(y)|).
/// Throws not_focusing_error if the radius never reaches the target, the
/// direction keeps wandering after all extensions, or F_r at the settled
/// direction is not negative.
inline BlowupResult blowup_time(const HomogeneousField& field, const Vec& x0,
                                const BlowupOptions& opt = {}) {
  const double r0 = x0.norm();
  if (!(r0 > 0.0)) throw domain_error("blowup_time: |x0| must be > 0");
  auto rhs = [&field](const Vec& x) { return singular_rhs(field, x); };
  auto noop = [](double, const Vec&) {};
  double t = 0.0;
  Vec x = x0;
  double r_target = opt.stop_fraction * r0;
  for (int round = 0; round <= opt.max_extensions; ++round) {
    auto res = detail::drive_adaptive(rhs, field.alpha(), opt.policy, 0.0, t,
                                      x, opt.t_max, 10.0 * r_target, noop);
    if (res.reason != StopReason::reached_stop_radius)
      throw not_focusing_error(
          "blowup_time: radius never reached the stop target (trajectory "
          "does not focus)");
    const UnitVec y_hi(res.x);
    res = detail::drive_adaptive(rhs, field.alpha(), opt.policy, 0.0, res.t,
                                 res.x, opt.t_max, r_target, noop);
    if (res.reason != StopReason::reached_stop_radius)
      throw not_focusing_error(
          "blowup_time: radius never reached the stop target (trajectory "
          "does not focus)");
    const UnitVec y_lo(res.x);
    t = res.t;
    x = res.x;
    if ((y_hi.vec() - y_lo.vec()).norm() <= opt.angle_tol) {
      const double fr = decompose(field, y_lo).radial;
      if (!(fr < -1e-6))
        throw not_focusing_error(
            "blowup_time: settled direction is not focusing (F_r >= 0)");
      const double r = x.norm();
      const double tail =
          std::pow(r, 1.0 - field.alpha()) / ((1.0 - field.alpha()) * (-fr));
      return {t + tail, t, r, y_lo};
    }
    r_target *= 1e-2;
  }
  throw not_focusing_error(
      "blowup_time: direction kept wandering after all radius extensions");
}

}  // namespace singflow
