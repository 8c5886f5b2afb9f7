#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "singflow/errors.hpp"
#include "singflow/fields.hpp"
#include "singflow/integrate.hpp"
#include "singflow/regularize.hpp"
#include "singflow/rng.hpp"
#include "singflow/vec.hpp"

namespace singflow {

/// Weighted point cloud at a fixed observation time. Empty weights mean
/// uniform 1/N.
struct SampleSet {
  double t = 0.0;
  std::vector<Vec> points;
  std::vector<double> weights;
};

struct FailureRecord {
  std::size_t index = 0;
  std::string what;
};

struct EnsembleResult {
  std::vector<double> t_targets;
  std::vector<SampleSet> sets;  // aligned with t_targets
  std::vector<FailureRecord> failures;
  std::vector<std::size_t> reentry_counts;  // per target, map modes only
  std::size_t n_requested = 0;
  EntryEvent entry;  // shared by every member
};

struct EnsembleOptions {
  StepPolicy policy{};                          // original-scale integration
  StepPolicy escape_policy{0.02, 0.1, 1e-14};   // unit-scale traversal
  int workers = 1;
  double entry_t_max = 50.0;
  double failure_fraction = 0.01;  // abort above this fraction of failures
};

namespace detail {

/// Runs fn(i) for i in [0, n). With workers > 1 the indices are distributed
/// dynamically over threads; fn must not throw and results must go into
/// preallocated slots so the outcome is independent of the schedule.
template <class Fn>
inline void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int extra = std::min<int>(workers, static_cast<int>(n)) - 1;
  pool.reserve(static_cast<std::size_t>(extra));
  for (int k = 0; k < extra; ++k) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Propagates an ensemble of N realizations through the regularization ball
/// and reports the point clouds at the requested times.
///
/// All members share the entry event (the flow is deterministic outside the
/// ball, so the pre-entry segment is common by construction). Per-member
/// randomness is keyed by (seed, index), which makes the result independent
/// of the worker count. A member that throws is recorded as a failure and
/// excluded from the clouds; if more than failure_fraction of members fail
/// the whole run is rejected with ensemble_error.
inline EnsembleResult run_ensemble(const HomogeneousField& field,
                                   const RegularizationSpec& reg,
                                   const Vec& x0, std::size_t n,
                                   const std::vector<double>& t_targets,
                                   std::uint64_t seed,
                                   const EnsembleOptions& opt = {}) {
  if (n == 0) throw domain_error("run_ensemble: empty ensemble");
  if (t_targets.empty()) throw domain_error("run_ensemble: no target times");
  for (std::size_t k = 1; k < t_targets.size(); ++k)
    if (!(t_targets[k] > t_targets[k - 1]))
      throw domain_error("run_ensemble: target times must increase");

  EnsembleResult out;
  out.t_targets = t_targets;
  out.n_requested = n;
  out.entry = find_entry(field, x0, reg.nu, opt.policy, opt.entry_t_max);
  if (!(t_targets.front() > out.entry.t_ent))
    throw domain_error("run_ensemble: target time precedes ball entry");

  const std::size_t kk = t_targets.size();
  std::vector<std::vector<Vec>> slots(n);
  std::vector<std::vector<char>> reent(n);
  std::vector<std::string> fail_msg(n);
  const std::size_t max_failures =
      static_cast<std::size_t>(opt.failure_fraction * static_cast<double>(n));
  std::atomic<std::size_t> fail_count{0};
  std::atomic<bool> aborted{false};

  auto guard = [&](std::size_t i, auto&& work) {
    if (aborted.load(std::memory_order_relaxed)) return;
    try {
      work();
    } catch (const std::exception& e) {
      fail_msg[i] = e.what();
      if (fail_count.fetch_add(1) + 1 > max_failures) aborted.store(true);
    }
  };

  if (reg.mode == RegMode::direct) {
    detail::parallel_for(n, opt.workers, [&](std::size_t i) {
      guard(i, [&] {
        const InnerField inner = random_inner_field(field, seed, i);
        const RegularizedField rhs(field, inner, reg.nu);
        auto noop = [](double, const Vec&) {};
        double t = out.entry.t_ent;
        Vec x = out.entry.x_ent;
        std::vector<Vec> states;
        states.reserve(kk);
        for (double target : t_targets) {
          const auto res = detail::drive_adaptive(
              rhs, field.alpha(), opt.policy, reg.nu, t, x, target, 0.0, noop);
          t = res.t;
          x = res.x;
          states.push_back(x);
        }
        slots[i] = std::move(states);
      });
    });
  } else if (reg.mode == RegMode::map_deterministic) {
    // One shared inner field: every member traverses the ball identically.
    const InnerField inner = random_inner_field(field, seed);
    const EscapeSample esc =
        escape_via_flow(field, inner, out.entry, reg.T, opt.escape_policy);
    const ContinuationResult cont =
        continue_from_escape(field, esc, reg.nu, t_targets, opt.policy);
    for (std::size_t i = 0; i < n; ++i) {
      slots[i] = cont.states;
      reent[i] = cont.reentered;
    }
  } else {
    detail::parallel_for(n, opt.workers, [&](std::size_t i) {
      guard(i, [&] {
        const EscapeSample esc =
            sample_escape(field, reg.sampler, out.entry, reg.T, seed, i);
        ContinuationResult cont =
            continue_from_escape(field, esc, reg.nu, t_targets, opt.policy);
        slots[i] = std::move(cont.states);
        reent[i] = std::move(cont.reentered);
      });
    });
  }

  if (fail_count.load() > max_failures)
    throw ensemble_error("run_ensemble: more than " +
                         std::to_string(100.0 * opt.failure_fraction) +
                         "% of members failed (first failure: " +
                         [&]() -> std::string {
                           for (const auto& m : fail_msg)
                             if (!m.empty()) return m;
                           return "unknown";
                         }() +
                         ")");

  out.sets.resize(kk);
  out.reentry_counts.assign(kk, 0);
  for (std::size_t k = 0; k < kk; ++k) {
    out.sets[k].t = t_targets[k];
    out.sets[k].points.reserve(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!fail_msg[i].empty()) {
      out.failures.push_back({i, fail_msg[i]});
      continue;
    }
    for (std::size_t k = 0; k < kk; ++k) {
      out.sets[k].points.push_back(slots[i][k]);
      if (!reent[i].empty() && reent[i][k]) ++out.reentry_counts[k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Histograms and ensemble distances

struct GridBounds {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

/// Two-dimensional density on a regular grid. mass sums to 1 over in-bounds
/// cells; out_of_bounds records the weight fraction that fell outside.
struct Histogram2D {
  GridBounds bounds;
  int nx = 0, ny = 0;
  std::vector<double> mass;  // row-major, index iy * nx + ix
  double out_of_bounds = 0.0;

  double& at(int ix, int iy) { return mass[static_cast<std::size_t>(iy) * nx + ix]; }
  double at(int ix, int iy) const {
    return mass[static_cast<std::size_t>(iy) * nx + ix];
  }
};

namespace detail {

inline int cell_index(double v, double lo, double hi, int n) {
  if (!(v >= lo) || !(v <= hi)) return -1;  // non-finite lands here too
  const int i = static_cast<int>((v - lo) / (hi - lo) * n);
  return std::min(i, n - 1);
}

}  // namespace detail

/// Histograms the (dim_x, dim_y) coordinates of a sample set. In-bounds mass
/// is normalized to 1. Throws histogram_error if nothing lands in bounds.
inline Histogram2D histogram2d(const SampleSet& s, int dim_x, int dim_y,
                               const GridBounds& b, int nx, int ny) {
  if (nx <= 0 || ny <= 0) throw histogram_error("histogram2d: empty grid");
  if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin))
    throw histogram_error("histogram2d: degenerate bounds");
  if (s.points.empty()) throw histogram_error("histogram2d: empty sample set");
  if (!s.weights.empty() && s.weights.size() != s.points.size())
    throw histogram_error("histogram2d: weight/point count mismatch");
  Histogram2D h;
  h.bounds = b;
  h.nx = nx;
  h.ny = ny;
  h.mass.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  const double unit = 1.0 / static_cast<double>(s.points.size());
  double in = 0.0, outw = 0.0;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Vec& p = s.points[i];
    if (dim_x >= p.size() || dim_y >= p.size())
      throw histogram_error("histogram2d: dimension index out of range");
    const double w = s.weights.empty() ? unit : s.weights[i];
    const int ix = detail::cell_index(p[dim_x], b.xmin, b.xmax, nx);
    const int iy = detail::cell_index(p[dim_y], b.ymin, b.ymax, ny);
    if (ix < 0 || iy < 0) {
      outw += w;
      continue;
    }
    h.at(ix, iy) += w;
    in += w;
  }
  if (!(in > 0.0))
    throw histogram_error("histogram2d: no sample mass inside the bounds");
  for (double& m : h.mass) m /= in;
  h.out_of_bounds = outw / (in + outw);
  return h;
}

/// L1 distance between two densities on the same grid.
inline double l1_distance(const Histogram2D& a, const Histogram2D& b) {
  if (a.nx != b.nx || a.ny != b.ny || a.bounds.xmin != b.bounds.xmin ||
      a.bounds.xmax != b.bounds.xmax || a.bounds.ymin != b.bounds.ymin ||
      a.bounds.ymax != b.bounds.ymax)
    throw histogram_error("l1_distance: grids do not match");
  double d = 0.0;
  for (std::size_t i = 0; i < a.mass.size(); ++i)
    d += std::abs(a.mass[i] - b.mass[i]);
  return d;
}

/// Sampling-noise floor: mean L1 distance between histograms of independent
/// bootstrap resamples of the same cloud. Distances between ensembles are
/// judged against multiples of this floor.
inline double bootstrap_self_distance(const SampleSet& s, int dim_x, int dim_y,
                                      const GridBounds& b, int nx, int ny,
                                      int n_boot, std::uint64_t seed) {
  if (n_boot <= 0) throw domain_error("bootstrap_self_distance: n_boot < 1");
  const std::size_t n = s.points.size();
  if (n == 0) throw histogram_error("bootstrap_self_distance: empty sample");
  std::vector<double> cdf;
  if (!s.weights.empty()) {
    cdf.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += s.weights[i];
      cdf[i] = acc;
    }
    if (!(acc > 0.0))
      throw histogram_error("bootstrap_self_distance: zero total weight");
    for (double& c : cdf) c /= acc;
  }
  auto draw = [&](RngStream& rng) -> std::size_t {
    const double u = rng.uniform();
    if (cdf.empty()) {
      const auto i = static_cast<std::size_t>(u * static_cast<double>(n));
      return std::min(i, n - 1);
    }
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(
        static_cast<std::size_t>(it - cdf.begin()), n - 1);
  };
  auto resample = [&](RngStream& rng) {
    SampleSet r;
    r.t = s.t;
    r.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) r.points.push_back(s.points[draw(rng)]);
    return histogram2d(r, dim_x, dim_y, b, nx, ny);
  };
  double total = 0.0;
  for (int rep = 0; rep < n_boot; ++rep) {
    RngStream rng(seed, static_cast<std::uint64_t>(rep));
    const Histogram2D h1 = resample(rng);
    const Histogram2D h2 = resample(rng);
    total += l1_distance(h1, h2);
  }
  return total / n_boot;
}

/// Noise floor for comparing two different ensembles: root-mean-square of
/// their individual bootstrap floors.
inline double combined_floor(double floor_a, double floor_b) {
  return std::sqrt(0.5 * (floor_a * floor_a + floor_b * floor_b));
}

// ---------------------------------------------------------------------------
// Self-similar pullback

/// Post-blowup cloud rewritten in self-similar variables: direction y on the
/// sphere and profile coordinate w = (t - t_b) |x|^(alpha - 1), which is the
/// synchronized slave value the point corresponds to.
struct PullbackSet {
  double t = 0.0;
  std::vector<UnitVec> y;
  std::vector<double> w;
  std::vector<double> weights;  // empty = uniform
};

inline PullbackSet pullback_samples(const SampleSet& s, double t_b,
                                    double alpha) {
  if (!(s.t > t_b))
    throw domain_error("pullback_samples: sample time must exceed t_b");
  PullbackSet p;
  p.t = s.t;
  p.y.reserve(s.points.size());
  p.w.reserve(s.points.size());
  for (const Vec& x : s.points) {
    const double r = x.norm();
    if (!(r > 0.0))
      throw domain_error("pullback_samples: sample at the singular point");
    p.y.emplace_back(x);
    p.w.push_back((s.t - t_b) * std::pow(r, alpha - 1.0));
  }
  p.weights = s.weights;
  return p;
}

/// Packs fn(y_i, w_i) -> Vec into a sample set, e.g. for histogramming
/// (w, chart coordinate) pairs. Weights carry over.
template <class Fn>
inline SampleSet map_pullback(const PullbackSet& p, Fn&& fn) {
  SampleSet s;
  s.t = p.t;
  s.points.reserve(p.y.size());
  for (std::size_t i = 0; i < p.y.size(); ++i) s.points.push_back(fn(p.y[i], p.w[i]));
  s.weights = p.weights;
  return s;
}

}  // namespace singflow
