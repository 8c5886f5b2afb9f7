#pragma once

// Named experiment drivers behind the CLI. Each one runs a configured
// scenario, writes its artifacts (NDJSON samples, CSV/PGM histograms), and
// returns a report with machine-readable metrics plus a pass/fail status for
// thresholded comparisons. Everything is deterministic given config + seed.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "singflow/analysis.hpp"
#include "singflow/config.hpp"
#include "singflow/ensemble.hpp"
#include "singflow/io.hpp"

namespace singflow {

struct ExperimentReport {
  std::string experiment;
  std::string status = "pass";  // pass | fail
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::string> notes;
  std::vector<std::string> artifacts;
};

namespace detail {

inline std::string out_path(const ExperimentConfig& cfg,
                            const std::string& name) {
  return cfg.output_dir + "/" + name;
}

inline ArtifactStamp stamp_of(const ExperimentConfig& cfg) {
  return ArtifactStamp{config_hash(cfg), cfg.seed};
}

inline EnsembleOptions ensemble_options(const ExperimentConfig& cfg) {
  EnsembleOptions opt;
  opt.workers = cfg.ensemble.workers;
  return opt;
}

inline RegularizationSpec reg_spec(const ExperimentConfig& cfg) {
  RegularizationSpec spec;
  spec.mode = cfg.regularization.mode;
  spec.nu = cfg.regularization.nu;
  spec.T = cfg.regularization.T;
  spec.sampler = cfg.regularization.sampler;
  return spec;
}

inline double angle_between(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0))
    throw domain_error("angle_between: zero vector");
  double c = a.dot(b) / (na * nb);
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c);
}

/// Fixed stream tags for bootstrap draws, so every artifact's noise floor is
/// reproducible and independent of the trajectory streams.
inline std::uint64_t boot_seed(const ExperimentConfig& cfg,
                               std::uint64_t tag) {
  return derive_stream_seed(cfg.seed, 0x626f6f74ull + tag);
}

constexpr int kBootstrapReps = 32;

struct HistBundle {
  Histogram2D hist;
  double floor = 0.0;
};

inline HistBundle hist_with_floor(const ExperimentConfig& cfg,
                                  const SampleSet& set, std::uint64_t tag) {
  HistBundle b;
  const auto& g = cfg.ensemble.grid;
  b.hist = histogram2d(set, cfg.ensemble.dim_x, cfg.ensemble.dim_y, g.bounds,
                       g.nx, g.ny);
  b.floor = bootstrap_self_distance(set, cfg.ensemble.dim_x, cfg.ensemble.dim_y,
                                    g.bounds, g.nx, g.ny, kBootstrapReps,
                                    boot_seed(cfg, tag));
  return b;
}

inline nlohmann::json grid_json(const GridBounds& b, int nx, int ny) {
  return nlohmann::json{{"bounds", {b.xmin, b.xmax, b.ymin, b.ymax}},
                        {"nx", nx},
                        {"ny", ny}};
}

/// Data-driven zoom window: central percentiles padded by 10%, so the
/// supplementary images resolve the cloud even when the configured grid is
/// much wider than the support.
inline bool zoom_bounds(const SampleSet& set, int dx, int dy, GridBounds& out) {
  std::vector<double> xs, ys;
  xs.reserve(set.points.size());
  ys.reserve(set.points.size());
  for (const auto& p : set.points) {
    if (std::isfinite(p[dx]) && std::isfinite(p[dy])) {
      xs.push_back(p[dx]);
      ys.push_back(p[dy]);
    }
  }
  if (xs.size() < 16) return false;
  auto pct = [](std::vector<double>& v, double q) {
    const auto k = static_cast<std::size_t>(q * (v.size() - 1));
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
  };
  const double x1 = pct(xs, 0.01), x2 = pct(xs, 0.99);
  const double y1 = pct(ys, 0.01), y2 = pct(ys, 0.99);
  const double px = 0.1 * (x2 - x1), py = 0.1 * (y2 - y1);
  if (!(px > 0.0) || !(py > 0.0)) return false;
  out = GridBounds{x1 - px, x2 + px, y1 - py, y2 + py};
  return true;
}

inline void emit_histogram(const ExperimentConfig& cfg, ExperimentReport& rep,
                           const Histogram2D& h, const std::string& base) {
  const auto stamp = stamp_of(cfg);
  write_histogram_csv(out_path(cfg, base + ".csv"), h, stamp);
  write_histogram_pgm(out_path(cfg, base + ".pgm"), h, stamp);
  rep.artifacts.push_back(base + ".csv");
  rep.artifacts.push_back(base + ".pgm");
}

inline void check_threshold(ExperimentReport& rep, const std::string& name,
                            double value, double threshold) {
  char line[160];
  const bool ok = value <= threshold;
  std::snprintf(line, sizeof(line), "%s: %.6g (threshold %.6g) -> %s",
                name.c_str(), value, threshold, ok ? "pass" : "fail");
  rep.notes.push_back(line);
  if (!ok) rep.status = "fail";
}

/// Sphere start for the synchronization analysis: the configured escape-cap
/// axis, which the presets point at the defocusing attractor.
inline UnitVec analysis_start(const ExperimentConfig& cfg, int dim) {
  return sampler_axis(cfg.regularization.sampler, dim);
}

constexpr double kSphereStep = 1e-3;  // fixed step for sphere-orbit quadrature

struct SrbSetup {
  double F_m = 0.0;
  double window = 0.0;
};

inline SrbSetup srb_setup(const ExperimentConfig& cfg,
                          const HomogeneousField& field, const UnitVec& y0) {
  SrbSetup s;
  if (cfg.analysis.F_m > 0.0) {
    s.F_m = cfg.analysis.F_m;
  } else {
    const auto range =
        estimate_radial_range(field, y0, 100.0, 500.0, kSphereStep);
    s.F_m = 0.9 * range.F_m;
    if (!(s.F_m > 0.0))
      throw bound_violation_error(
          "srb setup: empirical F_r minimum is not positive");
  }
  s.window = cfg.analysis.s_p > 0.0
                 ? cfg.analysis.s_p
                 : auto_window(field.alpha(), s.F_m, cfg.analysis.tolerance);
  return s;
}

}  // namespace detail

// --- individual experiments ---

inline ExperimentReport run_blowup(const ExperimentConfig& cfg,
                                   const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  const auto res = blowup_time(field, config_x0(cfg));
  rep.metrics["t_b"] = res.t_b;
  rep.metrics["t_stop"] = res.t_stop;
  rep.metrics["r_stop"] = res.r_stop;
  std::vector<double> y(res.y_stop.vec().size());
  for (int k = 0; k < res.y_stop.size(); ++k) y[k] = res.y_stop.vec()[k];
  rep.metrics["y_stop"] = y;
  char line[96];
  std::snprintf(line, sizeof(line), "blowup time t_b = %.9f", res.t_b);
  rep.notes.push_back(line);
  return rep;
}

inline ExperimentReport run_trajectories(const ExperimentConfig& cfg,
                                         const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  const Vec x0 = config_x0(cfg);
  const double t_end = cfg.ensemble.t_targets.back();
  const double nu = cfg.regularization.nu;
  const auto stamp = detail::stamp_of(cfg);
  StepPolicy policy{};
  for (int k = 0; k < cfg.ensemble.N; ++k) {
    const auto inner =
        random_inner_field(field, cfg.seed, static_cast<std::uint64_t>(k));
    const RegularizedField reg(field, inner, nu);
    auto rhs = [&reg](const Vec& x) { return reg(x); };
    std::vector<double> times{0.0};
    std::vector<Vec> states{x0};
    auto obs = [&](double t, const Vec& x) {
      times.push_back(t);
      states.push_back(x);
    };
    Vec x = x0;
    detail::drive_adaptive(rhs, field.alpha(), policy, nu, 0.0, x, t_end, 0.0,
                           obs);
    const std::string name = "traj_" + std::to_string(k) + ".ndjson";
    write_trajectory_ndjson(detail::out_path(cfg, name), times, states, stamp);
    rep.artifacts.push_back(name);
  }
  rep.metrics["realizations"] = cfg.ensemble.N;
  rep.metrics["t_end"] = t_end;
  rep.notes.push_back("wrote " + std::to_string(cfg.ensemble.N) +
                      " regularized realizations");
  return rep;
}

inline ExperimentReport run_density(const ExperimentConfig& cfg,
                                    const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  const auto res = run_ensemble(field, detail::reg_spec(cfg), config_x0(cfg),
                                static_cast<std::size_t>(cfg.ensemble.N),
                                cfg.ensemble.t_targets, cfg.seed,
                                detail::ensemble_options(cfg));
  const auto stamp = detail::stamp_of(cfg);
  rep.metrics["exclusion_rate"] =
      static_cast<double>(res.failures.size()) / cfg.ensemble.N;
  rep.metrics["t_entry"] = res.entry.t_ent;
  auto targets = nlohmann::json::array();
  for (std::size_t i = 0; i < res.sets.size(); ++i) {
    const auto& set = res.sets[i];
    const std::string tag = "t" + std::to_string(i);
    write_sample_ndjson(detail::out_path(cfg, "samples_" + tag + ".ndjson"),
                        set, stamp);
    rep.artifacts.push_back("samples_" + tag + ".ndjson");
    const auto bundle = detail::hist_with_floor(cfg, set, i);
    detail::emit_histogram(cfg, rep, bundle.hist, "hist_" + tag);
    nlohmann::json m{{"t", set.t},
                     {"out_of_bounds", bundle.hist.out_of_bounds},
                     {"bootstrap_floor", bundle.floor}};
    GridBounds zb;
    if (detail::zoom_bounds(set, cfg.ensemble.dim_x, cfg.ensemble.dim_y, zb)) {
      const auto zoom =
          histogram2d(set, cfg.ensemble.dim_x, cfg.ensemble.dim_y, zb,
                      cfg.ensemble.grid.nx, cfg.ensemble.grid.ny);
      detail::emit_histogram(cfg, rep, zoom, "zoom_" + tag);
      m["zoom"] = detail::grid_json(zb, cfg.ensemble.grid.nx,
                                    cfg.ensemble.grid.ny);
    }
    targets.push_back(m);
  }
  rep.metrics["targets"] = targets;
  char line[96];
  std::snprintf(line, sizeof(line), "excluded %zu of %d members",
                res.failures.size(), cfg.ensemble.N);
  rep.notes.push_back(line);
  return rep;
}

/// Densities across a nu ladder; consecutive rungs must agree within twice
/// the combined bootstrap floor for the run to pass.
inline ExperimentReport run_nu_convergence(const ExperimentConfig& cfg,
                                           const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  std::vector<double> ladder = cfg.regularization.nu_ladder;
  if (ladder.empty()) ladder = {1e-4, 1e-6};
  const Vec x0 = config_x0(cfg);
  std::vector<detail::HistBundle> bundles;
  auto rungs = nlohmann::json::array();
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    auto spec = detail::reg_spec(cfg);
    spec.nu = ladder[k];
    const auto res = run_ensemble(field, spec, x0,
                                  static_cast<std::size_t>(cfg.ensemble.N),
                                  cfg.ensemble.t_targets, cfg.seed,
                                  detail::ensemble_options(cfg));
    const auto& set = res.sets.front();
    bundles.push_back(detail::hist_with_floor(cfg, set, k));
    detail::emit_histogram(cfg, rep, bundles.back().hist,
                           "hist_nu" + std::to_string(k));
    rungs.push_back({{"nu", ladder[k]},
                     {"bootstrap_floor", bundles.back().floor},
                     {"exclusion_rate", static_cast<double>(res.failures.size()) /
                                            cfg.ensemble.N}});
  }
  auto pairs = nlohmann::json::array();
  for (std::size_t k = 0; k + 1 < bundles.size(); ++k) {
    const double l1 = l1_distance(bundles[k].hist, bundles[k + 1].hist);
    const double floor = combined_floor(bundles[k].floor, bundles[k + 1].floor);
    pairs.push_back({{"nu_a", ladder[k]},
                     {"nu_b", ladder[k + 1]},
                     {"l1", l1},
                     {"combined_floor", floor},
                     {"threshold", 2.0 * floor}});
    char name[64];
    std::snprintf(name, sizeof(name), "L1(nu=%.3g, nu=%.3g)", ladder[k],
                  ladder[k + 1]);
    detail::check_threshold(rep, name, l1, 2.0 * floor);
  }
  rep.metrics["rungs"] = rungs;
  rep.metrics["pairs"] = pairs;
  rep.metrics["t"] = cfg.ensemble.t_targets.front();
  return rep;
}

/// Escape-sampler independence: spherical-cap vs truncated-Gaussian escape
/// distributions through the stochastic map must yield densities within
/// twice the combined bootstrap floor.
inline ExperimentReport run_sampler_independence(const ExperimentConfig& cfg,
                                                 const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  const Vec x0 = config_x0(cfg);
  const char* families[2] = {"spherical_cap", "truncated_gaussian"};
  const char* tags[2] = {"cap", "gauss"};
  std::vector<std::vector<detail::HistBundle>> bundles(2);
  for (int f = 0; f < 2; ++f) {
    auto spec = detail::reg_spec(cfg);
    spec.mode = RegMode::map_stochastic;
    spec.sampler.family = families[f];
    const auto res = run_ensemble(field, spec, x0,
                                  static_cast<std::size_t>(cfg.ensemble.N),
                                  cfg.ensemble.t_targets, cfg.seed,
                                  detail::ensemble_options(cfg));
    for (std::size_t i = 0; i < res.sets.size(); ++i) {
      bundles[f].push_back(
          detail::hist_with_floor(cfg, res.sets[i], 16 * f + i));
      detail::emit_histogram(cfg, rep, bundles[f].back().hist,
                             std::string("hist_") + tags[f] + "_t" +
                                 std::to_string(i));
    }
  }
  auto comparisons = nlohmann::json::array();
  for (std::size_t i = 0; i < bundles[0].size(); ++i) {
    const double l1 = l1_distance(bundles[0][i].hist, bundles[1][i].hist);
    const double floor =
        combined_floor(bundles[0][i].floor, bundles[1][i].floor);
    comparisons.push_back({{"t", cfg.ensemble.t_targets[i]},
                           {"l1", l1},
                           {"combined_floor", floor},
                           {"threshold", 2.0 * floor}});
    char name[64];
    std::snprintf(name, sizeof(name), "L1(cap, gauss) at t=%.4g",
                  cfg.ensemble.t_targets[i]);
    detail::check_threshold(rep, name, l1, 2.0 * floor);
  }
  rep.metrics["comparisons"] = comparisons;
  return rep;
}

/// Synchronized-measure prediction vs the stochastic ensemble: weighted
/// points from one long sphere orbit, pushed to time t, must match the
/// ensemble density within three combined bootstrap floors.
inline ExperimentReport run_srb_predict(const ExperimentConfig& cfg,
                                        const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  const Vec x0 = config_x0(cfg);
  const double t_b = blowup_time(field, x0).t_b;
  rep.metrics["t_b"] = t_b;
  const UnitVec y0 = detail::analysis_start(cfg, field.dim());
  const auto setup = detail::srb_setup(cfg, field, y0);
  rep.metrics["F_m"] = setup.F_m;
  rep.metrics["window"] = setup.window;
  const auto pts = srb_prime_ensemble(
      field, y0, static_cast<std::size_t>(cfg.analysis.M), cfg.analysis.s_burn,
      cfg.analysis.stride, detail::kSphereStep, setup.window, setup.F_m);
  const auto stamp = detail::stamp_of(cfg);
  write_srb_ndjson(detail::out_path(cfg, "srb_points.ndjson"), pts, stamp);
  rep.artifacts.push_back("srb_points.ndjson");

  const auto res = run_ensemble(field, detail::reg_spec(cfg), x0,
                                static_cast<std::size_t>(cfg.ensemble.N),
                                cfg.ensemble.t_targets, cfg.seed,
                                detail::ensemble_options(cfg));
  auto comparisons = nlohmann::json::array();
  for (std::size_t i = 0; i < res.sets.size(); ++i) {
    const double t = cfg.ensemble.t_targets[i];
    const auto pred = predict_post_blowup(pts, t_b, t, field.alpha());
    const auto pb = detail::hist_with_floor(cfg, pred, 32 + i);
    const auto eb = detail::hist_with_floor(cfg, res.sets[i], 48 + i);
    const std::string tag = "t" + std::to_string(i);
    detail::emit_histogram(cfg, rep, pb.hist, "hist_pred_" + tag);
    detail::emit_histogram(cfg, rep, eb.hist, "hist_ens_" + tag);
    const double l1 = l1_distance(pb.hist, eb.hist);
    const double floor = combined_floor(pb.floor, eb.floor);
    comparisons.push_back({{"t", t},
                           {"l1", l1},
                           {"combined_floor", floor},
                           {"threshold", 3.0 * floor}});
    char name[64];
    std::snprintf(name, sizeof(name), "L1(predicted, ensemble) at t=%.4g", t);
    detail::check_threshold(rep, name, l1, 3.0 * floor);
  }
  rep.metrics["comparisons"] = comparisons;
  return rep;
}

/// Pulled-back ensembles at different times must agree as (w, chart-x)
/// clouds: the post-blowup evolution is one self-similar profile.
inline ExperimentReport run_self_similarity(const ExperimentConfig& cfg,
                                            const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  if (cfg.ensemble.t_targets.size() < 2)
    throw config_error("self-similarity needs at least two t_targets",
                       "ensemble.t_targets");
  const Vec x0 = config_x0(cfg);
  const double t_b = blowup_time(field, x0).t_b;
  rep.metrics["t_b"] = t_b;
  const auto res = run_ensemble(field, detail::reg_spec(cfg), x0,
                                static_cast<std::size_t>(cfg.ensemble.N),
                                cfg.ensemble.t_targets, cfg.seed,
                                detail::ensemble_options(cfg));
  const auto stamp = detail::stamp_of(cfg);
  auto chart_pair = [&field](const UnitVec& y, double w) {
    Vec v(2);
    v[0] = w;
    v[1] = field.dim() == 4 ? stereo_forward(y)[0] : y.vec()[0];
    return v;
  };
  std::vector<detail::HistBundle> bundles;
  const auto& g = cfg.ensemble.grid;
  for (std::size_t i = 0; i < res.sets.size(); ++i) {
    const auto pulled = pullback_samples(res.sets[i], t_b, field.alpha());
    const auto flat = map_pullback(pulled, chart_pair);
    const std::string tag = "t" + std::to_string(i);
    write_sample_ndjson(detail::out_path(cfg, "pullback_" + tag + ".ndjson"),
                        flat, stamp);
    rep.artifacts.push_back("pullback_" + tag + ".ndjson");
    detail::HistBundle b;
    b.hist = histogram2d(flat, 0, 1, g.bounds, g.nx, g.ny);
    b.floor = bootstrap_self_distance(flat, 0, 1, g.bounds, g.nx, g.ny,
                                      detail::kBootstrapReps,
                                      detail::boot_seed(cfg, 64 + i));
    bundles.push_back(b);
    detail::emit_histogram(cfg, rep, b.hist, "hist_pullback_" + tag);
  }
  auto comparisons = nlohmann::json::array();
  for (std::size_t i = 0; i + 1 < bundles.size(); ++i) {
    const double l1 = l1_distance(bundles[i].hist, bundles[i + 1].hist);
    const double floor = combined_floor(bundles[i].floor, bundles[i + 1].floor);
    comparisons.push_back({{"t_a", cfg.ensemble.t_targets[i]},
                           {"t_b", cfg.ensemble.t_targets[i + 1]},
                           {"l1", l1},
                           {"combined_floor", floor},
                           {"threshold", 2.0 * floor}});
    char name[80];
    std::snprintf(name, sizeof(name), "L1(pullback t=%.4g, t=%.4g)",
                  cfg.ensemble.t_targets[i], cfg.ensemble.t_targets[i + 1]);
    detail::check_threshold(rep, name, l1, 2.0 * floor);
  }
  rep.metrics["comparisons"] = comparisons;
  return rep;
}

/// Reruns the density comparison after the configured smooth bump is added
/// to the angular field. Reported, not gated: the drift against the
/// unperturbed density is the observable.
inline ExperimentReport run_perturbation(const ExperimentConfig& cfg,
                                         const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  if (!cfg.perturbation.enabled())
    throw config_error("perturbation experiment needs nonzero eps_s or eps_r",
                       "perturbation.eps_s");
  ExperimentConfig base_cfg = cfg;
  base_cfg.perturbation = PerturbationConfig{};
  const HomogeneousField base = make_field(base_cfg);
  const Vec x0 = config_x0(cfg);
  const HomogeneousField* fields[2] = {&base, &field};
  const char* tags[2] = {"base", "pert"};
  std::vector<std::vector<detail::HistBundle>> bundles(2);
  for (int f = 0; f < 2; ++f) {
    const auto res = run_ensemble(*fields[f], detail::reg_spec(cfg), x0,
                                  static_cast<std::size_t>(cfg.ensemble.N),
                                  cfg.ensemble.t_targets, cfg.seed,
                                  detail::ensemble_options(cfg));
    for (std::size_t i = 0; i < res.sets.size(); ++i) {
      bundles[f].push_back(
          detail::hist_with_floor(cfg, res.sets[i], 96 + 16 * f + i));
      detail::emit_histogram(cfg, rep, bundles[f].back().hist,
                             std::string("hist_") + tags[f] + "_t" +
                                 std::to_string(i));
    }
  }
  auto comparisons = nlohmann::json::array();
  for (std::size_t i = 0; i < bundles[0].size(); ++i) {
    const double l1 = l1_distance(bundles[0][i].hist, bundles[1][i].hist);
    const double floor =
        combined_floor(bundles[0][i].floor, bundles[1][i].floor);
    comparisons.push_back({{"t", cfg.ensemble.t_targets[i]},
                           {"l1", l1},
                           {"combined_floor", floor}});
    char line[128];
    std::snprintf(line, sizeof(line),
                  "perturbed vs base L1 at t=%.4g: %.6g (floor %.6g)",
                  cfg.ensemble.t_targets[i], l1, floor);
    rep.notes.push_back(line);
  }
  rep.metrics["comparisons"] = comparisons;
  rep.metrics["eps_s"] = cfg.perturbation.eps_s;
  rep.metrics["eps_r"] = cfg.perturbation.eps_r;
  return rep;
}

/// Deterministic-map sensitivity: one fixed inner field, post-blowup
/// direction compared between nu and nu/sqrt(10) across a ladder. Passing
/// means at least one rung separates by more than 0.5 rad, demonstrating
/// that the deterministic regularized limit is not robust. The threshold is
/// a demonstration scale, not a theorem constant.
inline ExperimentReport run_det_sensitivity(const ExperimentConfig& cfg,
                                            const HomogeneousField& field) {
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  std::vector<double> ladder = cfg.regularization.nu_ladder;
  if (ladder.empty())
    for (int k = 0; k <= 4; ++k) ladder.push_back(std::pow(10.0, -4.0 - 0.5 * k));
  const Vec x0 = config_x0(cfg);
  const double t_star = cfg.ensemble.t_targets.front();
  const auto inner = random_inner_field(field, cfg.seed);
  const double ratio = 1.0 / std::sqrt(10.0);

  std::map<double, Vec> directions;  // nu -> unit direction at t_star
  auto direction_at = [&](double nu) -> const Vec& {
    auto it = directions.find(nu);
    if (it != directions.end()) return it->second;
    const auto entry = find_entry(field, x0, nu);
    const auto esc = escape_via_flow(field, inner, entry, cfg.regularization.T);
    const auto cont = continue_from_escape(field, esc, nu, {t_star});
    Vec dir = cont.states.front();
    const double r = dir.norm();
    if (!(r > 0.0))
      throw numerical_error("det-sensitivity: zero post-blowup state");
    dir = (1.0 / r) * dir;
    return directions.emplace(nu, dir).first->second;
  };

  auto rungs = nlohmann::json::array();
  double max_angle = 0.0;
  int valid = 0;
  std::string rows = "nu_hi,nu_lo,angle_rad,status\n";
  for (double nu : ladder) {
    const double nu_lo = nu * ratio;
    nlohmann::json rung{{"nu", nu}, {"nu_lo", nu_lo}};
    char row[128];
    try {
      const double a = detail::angle_between(direction_at(nu),
                                             direction_at(nu_lo));
      rung["angle_rad"] = a;
      rung["status"] = "ok";
      max_angle = std::max(max_angle, a);
      ++valid;
      std::snprintf(row, sizeof(row), "%.6g,%.6g,%.9g,ok\n", nu, nu_lo, a);
    } catch (const error& e) {
      rung["status"] = e.what();
      std::snprintf(row, sizeof(row), "%.6g,%.6g,,failed\n", nu, nu_lo);
    }
    rows += row;
    rungs.push_back(rung);
  }
  const auto stamp = detail::stamp_of(cfg);
  write_text(detail::out_path(cfg, "rungs.csv"),
             "# config_hash=" + stamp.config_hash +
                 " seed=" + std::to_string(stamp.seed) + "\n" + rows);
  rep.artifacts.push_back("rungs.csv");
  rep.metrics["rungs"] = rungs;
  rep.metrics["max_angle_rad"] = max_angle;
  rep.metrics["t"] = t_star;
  char line[128];
  std::snprintf(line, sizeof(line),
                "max direction separation %.4f rad over %d valid rungs",
                max_angle, valid);
  rep.notes.push_back(line);
  if (valid == 0 || !(max_angle > 0.5)) rep.status = "fail";
  return rep;
}

/// Dispatches a validated config to its experiment driver.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const HomogeneousField field = make_field(cfg);
  if (cfg.experiment == "blowup") return run_blowup(cfg, field);
  if (cfg.experiment == "trajectories") return run_trajectories(cfg, field);
  if (cfg.experiment == "density") return run_density(cfg, field);
  if (cfg.experiment == "nu-convergence") return run_nu_convergence(cfg, field);
  if (cfg.experiment == "sampler-independence")
    return run_sampler_independence(cfg, field);
  if (cfg.experiment == "srb-predict") return run_srb_predict(cfg, field);
  if (cfg.experiment == "self-similarity")
    return run_self_similarity(cfg, field);
  if (cfg.experiment == "perturbation") return run_perturbation(cfg, field);
  if (cfg.experiment == "det-sensitivity")
    return run_det_sensitivity(cfg, field);
  throw config_error("unknown experiment name '" + cfg.experiment + "'",
                     "experiment");
}

/// Writes report.json (machine) and report.txt (human), both deterministic
/// functions of the report content.
inline void write_report(const ExperimentReport& rep,
                         const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = rep.experiment;
  j["status"] = rep.status;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["metrics"] = rep.metrics;
  j["artifacts"] = rep.artifacts;
  j["notes"] = rep.notes;
  write_text(detail::out_path(cfg, "report.json"), j.dump(2) + "\n");

  std::string txt;
  txt += "experiment: " + rep.experiment + "\n";
  txt += "status: " + rep.status + "\n";
  txt += "config_hash: " + config_hash(cfg) + "\n";
  txt += "seed: " + std::to_string(cfg.seed) + "\n";
  for (const auto& n : rep.notes) txt += n + "\n";
  if (!rep.artifacts.empty()) {
    txt += "artifacts:\n";
    for (const auto& a : rep.artifacts) txt += "  " + a + "\n";
  }
  write_text(detail::out_path(cfg, "report.txt"), txt);
}

}  // namespace singflow
