#pragma once

// JSON experiment configuration: parsing with defaults, strict validation
// (unknown keys rejected with their full field path), canonical
// serialization, and the config hash stamped into artifacts.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "singflow/errors.hpp"
#include "singflow/fields.hpp"
#include "singflow/io.hpp"
#include "singflow/regularize.hpp"

namespace singflow {

struct FieldConfig {
  std::string name = "lorenz4d";  // planar | lorenz4d | radial
  // radial-family parameters, ignored by the named examples
  double radial_F0 = 1.0;
  double radial_alpha = 1.0 / 3.0;
  int radial_dim = 2;
};

struct RegularizationConfig {
  RegMode mode = RegMode::direct;
  double nu = 1e-6;
  double T = 20.0;
  SamplerSpec sampler;
  std::vector<double> nu_ladder;  // optional; strictly decreasing when given
};

struct GridConfig {
  GridBounds bounds{-4.0, 4.0, -4.0, 4.0};
  int nx = 64;
  int ny = 64;
};

struct EnsembleConfig {
  int N = 1000;
  std::vector<double> t_targets{1.6};
  GridConfig grid;
  int dim_x = 1;  // histogram projection coordinates (0-based)
  int dim_y = 2;
  int workers = 1;
};

struct AnalysisConfig {
  double s_burn = 100.0;
  double s_total = 2000.0;
  int M = 10000;
  double stride = 0.5;
  double tolerance = 1e-8;
  double F_m = 0.0;  // 0 = estimate empirically
  double s_p = 0.0;  // 0 = derive from the tail bound
};

/// Smooth bump added to the angular field; active when either amplitude
/// is nonzero.
struct PerturbationConfig {
  double eps_s = 0.0;
  double eps_r = 0.0;
  std::vector<double> center;
  double radius = 0.3;
  std::vector<double> direction;

  bool enabled() const { return eps_s != 0.0 || eps_r != 0.0; }
};

struct ExperimentConfig {
  std::string experiment;
  FieldConfig field;
  std::vector<double> x0;
  RegularizationConfig regularization;
  EnsembleConfig ensemble;
  AnalysisConfig analysis;
  PerturbationConfig perturbation;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "blowup",          "trajectories",         "density",
      "nu-convergence",  "sampler-independence", "srb-predict",
      "self-similarity", "perturbation",         "det-sensitivity"};
  return names;
}

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void require_keys(const json& obj, const std::string& base,
                         std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw config_error("unknown key", join_path(base, item.key()));
  }
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw config_error("expected a number", path);
  return v.get<double>();
}

inline int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw config_error("expected an integer", path);
  return v.get<int>();
}

inline std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw config_error("expected a nonnegative integer", path);
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw config_error("expected a string", path);
  return v.get<std::string>();
}

inline std::vector<double> as_number_array(const json& v,
                                           const std::string& path) {
  if (!v.is_array()) throw config_error("expected an array", path);
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline RegMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "direct") return RegMode::direct;
  if (s == "map_deterministic") return RegMode::map_deterministic;
  if (s == "map_stochastic") return RegMode::map_stochastic;
  throw config_error(
      "mode must be direct, map_deterministic or map_stochastic", path);
}

inline const char* mode_name(RegMode m) {
  switch (m) {
    case RegMode::direct: return "direct";
    case RegMode::map_deterministic: return "map_deterministic";
    default: return "map_stochastic";
  }
}

inline void parse_field(const json& j, const std::string& base,
                        FieldConfig& out) {
  require_keys(j, base, {"name", "params"});
  if (j.contains("name")) out.name = as_string(j["name"], join_path(base, "name"));
  if (out.name != "planar" && out.name != "lorenz4d" && out.name != "radial")
    throw config_error("field name must be planar, lorenz4d or radial",
                       join_path(base, "name"));
  if (j.contains("params")) {
    const std::string pbase = join_path(base, "params");
    const json& p = j["params"];
    require_keys(p, pbase, {"F0", "alpha", "dim"});
    if (p.contains("F0")) out.radial_F0 = as_number(p["F0"], join_path(pbase, "F0"));
    if (p.contains("alpha"))
      out.radial_alpha = as_number(p["alpha"], join_path(pbase, "alpha"));
    if (p.contains("dim")) out.radial_dim = as_int(p["dim"], join_path(pbase, "dim"));
    if (!(out.radial_alpha > 0.0 && out.radial_alpha < 1.0))
      throw config_error("alpha must lie in (0,1)", join_path(pbase, "alpha"));
    if (out.radial_dim < 2 || out.radial_dim > Vec::kMaxDim)
      throw config_error("dim out of range", join_path(pbase, "dim"));
  }
}

inline void parse_sampler(const json& j, const std::string& base,
                          SamplerSpec& out) {
  require_keys(j, base, {"family", "radius", "cap_center", "cap_angle", "sigma"});
  if (j.contains("family"))
    out.family = as_string(j["family"], join_path(base, "family"));
  if (out.family != "point_mass" && out.family != "spherical_cap" &&
      out.family != "truncated_gaussian")
    throw config_error(
        "family must be point_mass, spherical_cap or truncated_gaussian",
        join_path(base, "family"));
  if (j.contains("radius"))
    out.radius = as_number(j["radius"], join_path(base, "radius"));
  if (!(out.radius > 1.0))
    throw config_error("sampler radius must exceed 1 (the rescaled ball)",
                       join_path(base, "radius"));
  if (j.contains("cap_center"))
    out.cap_center = as_number_array(j["cap_center"], join_path(base, "cap_center"));
  if (j.contains("cap_angle"))
    out.cap_angle = as_number(j["cap_angle"], join_path(base, "cap_angle"));
  if (!(out.cap_angle > 0.0))
    throw config_error("cap_angle must be > 0", join_path(base, "cap_angle"));
  if (j.contains("sigma"))
    out.sigma = as_number(j["sigma"], join_path(base, "sigma"));
  if (!(out.sigma > 0.0))
    throw config_error("sigma must be > 0", join_path(base, "sigma"));
}

inline void parse_regularization(const json& j, const std::string& base,
                                 RegularizationConfig& out) {
  require_keys(j, base, {"mode", "nu", "T", "sampler", "nu_ladder"});
  if (j.contains("mode"))
    out.mode = parse_mode(as_string(j["mode"], join_path(base, "mode")),
                          join_path(base, "mode"));
  if (j.contains("nu")) out.nu = as_number(j["nu"], join_path(base, "nu"));
  if (!(out.nu > 0.0) || out.nu >= 1.0)
    throw config_error("nu must lie in (0,1)", join_path(base, "nu"));
  if (j.contains("T")) out.T = as_number(j["T"], join_path(base, "T"));
  if (!(out.T > 0.0)) throw config_error("T must be > 0", join_path(base, "T"));
  if (j.contains("sampler"))
    parse_sampler(j["sampler"], join_path(base, "sampler"), out.sampler);
  if (j.contains("nu_ladder")) {
    out.nu_ladder =
        as_number_array(j["nu_ladder"], join_path(base, "nu_ladder"));
    for (std::size_t i = 0; i < out.nu_ladder.size(); ++i) {
      if (!(out.nu_ladder[i] > 0.0) || out.nu_ladder[i] >= 1.0)
        throw config_error("ladder entries must lie in (0,1)",
                           join_path(base, "nu_ladder"));
      if (i && !(out.nu_ladder[i] < out.nu_ladder[i - 1]))
        throw config_error("ladder must be strictly decreasing",
                           join_path(base, "nu_ladder"));
    }
  }
}

inline void parse_grid(const json& j, const std::string& base,
                       GridConfig& out) {
  require_keys(j, base, {"bounds", "nx", "ny"});
  if (j.contains("bounds")) {
    const auto b = as_number_array(j["bounds"], join_path(base, "bounds"));
    if (b.size() != 4)
      throw config_error("bounds must be [xmin, xmax, ymin, ymax]",
                         join_path(base, "bounds"));
    out.bounds = GridBounds{b[0], b[1], b[2], b[3]};
  }
  if (!(out.bounds.xmax > out.bounds.xmin) ||
      !(out.bounds.ymax > out.bounds.ymin))
    throw config_error("bounds must be nonempty intervals",
                       join_path(base, "bounds"));
  if (j.contains("nx")) out.nx = as_int(j["nx"], join_path(base, "nx"));
  if (j.contains("ny")) out.ny = as_int(j["ny"], join_path(base, "ny"));
  if (out.nx < 1 || out.ny < 1)
    throw config_error("grid must have at least one cell per axis",
                       join_path(base, "nx"));
}

inline void parse_ensemble(const json& j, const std::string& base,
                           EnsembleConfig& out) {
  require_keys(j, base, {"N", "t_targets", "grid", "dims", "workers"});
  if (j.contains("N")) out.N = as_int(j["N"], join_path(base, "N"));
  if (out.N < 1) throw config_error("N must be >= 1", join_path(base, "N"));
  if (j.contains("t_targets")) {
    out.t_targets =
        as_number_array(j["t_targets"], join_path(base, "t_targets"));
    if (out.t_targets.empty())
      throw config_error("t_targets must be nonempty",
                         join_path(base, "t_targets"));
    for (std::size_t i = 0; i < out.t_targets.size(); ++i) {
      if (!(out.t_targets[i] > 0.0))
        throw config_error("t_targets must be positive",
                           join_path(base, "t_targets"));
      if (i && !(out.t_targets[i] > out.t_targets[i - 1]))
        throw config_error("t_targets must be strictly increasing",
                           join_path(base, "t_targets"));
    }
  }
  if (j.contains("grid")) parse_grid(j["grid"], join_path(base, "grid"), out.grid);
  if (j.contains("dims")) {
    const std::string dbase = join_path(base, "dims");
    if (!j["dims"].is_array() || j["dims"].size() != 2)
      throw config_error("dims must be a pair of coordinate indices", dbase);
    out.dim_x = as_int(j["dims"][0], dbase + "[0]");
    out.dim_y = as_int(j["dims"][1], dbase + "[1]");
  }
  if (out.dim_x < 0 || out.dim_y < 0 || out.dim_x == out.dim_y)
    throw config_error("dims must be distinct nonnegative indices",
                       join_path(base, "dims"));
  if (j.contains("workers"))
    out.workers = as_int(j["workers"], join_path(base, "workers"));
  if (out.workers < 1)
    throw config_error("workers must be >= 1", join_path(base, "workers"));
}

inline void parse_analysis(const json& j, const std::string& base,
                           AnalysisConfig& out) {
  require_keys(j, base,
               {"s_burn", "s_total", "M", "stride", "tolerance", "F_m", "s_p"});
  if (j.contains("s_burn"))
    out.s_burn = as_number(j["s_burn"], join_path(base, "s_burn"));
  if (j.contains("s_total"))
    out.s_total = as_number(j["s_total"], join_path(base, "s_total"));
  if (j.contains("M")) out.M = as_int(j["M"], join_path(base, "M"));
  if (j.contains("stride"))
    out.stride = as_number(j["stride"], join_path(base, "stride"));
  if (j.contains("tolerance"))
    out.tolerance = as_number(j["tolerance"], join_path(base, "tolerance"));
  if (j.contains("F_m")) out.F_m = as_number(j["F_m"], join_path(base, "F_m"));
  if (j.contains("s_p")) out.s_p = as_number(j["s_p"], join_path(base, "s_p"));
  if (!(out.s_burn >= 0.0))
    throw config_error("s_burn must be >= 0", join_path(base, "s_burn"));
  if (!(out.s_total > out.s_burn))
    throw config_error("s_total must exceed s_burn", join_path(base, "s_total"));
  if (out.M < 1) throw config_error("M must be >= 1", join_path(base, "M"));
  if (!(out.stride > 0.0))
    throw config_error("stride must be > 0", join_path(base, "stride"));
  if (!(out.tolerance > 0.0))
    throw config_error("tolerance must be > 0", join_path(base, "tolerance"));
  if (out.F_m < 0.0)
    throw config_error("F_m must be >= 0", join_path(base, "F_m"));
  if (out.s_p < 0.0)
    throw config_error("s_p must be >= 0", join_path(base, "s_p"));
}

inline void parse_perturbation(const json& j, const std::string& base,
                               PerturbationConfig& out) {
  require_keys(j, base, {"eps_s", "eps_r", "center", "radius", "direction"});
  if (j.contains("eps_s"))
    out.eps_s = as_number(j["eps_s"], join_path(base, "eps_s"));
  if (j.contains("eps_r"))
    out.eps_r = as_number(j["eps_r"], join_path(base, "eps_r"));
  if (j.contains("center"))
    out.center = as_number_array(j["center"], join_path(base, "center"));
  if (j.contains("radius"))
    out.radius = as_number(j["radius"], join_path(base, "radius"));
  if (j.contains("direction"))
    out.direction = as_number_array(j["direction"], join_path(base, "direction"));
  if (!(out.radius > 0.0))
    throw config_error("radius must be > 0", join_path(base, "radius"));
  if (out.enabled() && out.center.empty())
    throw config_error("an active perturbation needs a center",
                       join_path(base, "center"));
}

}  // namespace detail

/// Parses and validates a configuration document. Unknown keys anywhere in
/// the tree are rejected with their full path; missing keys take defaults.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using detail::join_path;
  ExperimentConfig cfg;
  detail::require_keys(root, "",
                       {"experiment", "field", "x0", "regularization",
                        "ensemble", "analysis", "perturbation", "seed",
                        "output_dir"});
  if (!root.contains("experiment"))
    throw config_error("missing required key", "experiment");
  cfg.experiment = detail::as_string(root["experiment"], "experiment");
  bool known = false;
  for (const auto& n : experiment_names())
    if (n == cfg.experiment) known = true;
  if (!known)
    throw config_error("unknown experiment name '" + cfg.experiment + "'",
                       "experiment");
  if (root.contains("field"))
    detail::parse_field(root["field"], "field", cfg.field);
  if (root.contains("x0"))
    cfg.x0 = detail::as_number_array(root["x0"], "x0");
  if (root.contains("regularization"))
    detail::parse_regularization(root["regularization"], "regularization",
                                 cfg.regularization);
  if (root.contains("ensemble"))
    detail::parse_ensemble(root["ensemble"], "ensemble", cfg.ensemble);
  if (root.contains("analysis"))
    detail::parse_analysis(root["analysis"], "analysis", cfg.analysis);
  if (root.contains("perturbation"))
    detail::parse_perturbation(root["perturbation"], "perturbation",
                               cfg.perturbation);
  if (root.contains("seed")) cfg.seed = detail::as_seed(root["seed"], "seed");
  if (root.contains("output_dir"))
    cfg.output_dir = detail::as_string(root["output_dir"], "output_dir");

  const int dim = cfg.field.name == "planar"      ? 2
                  : cfg.field.name == "lorenz4d"  ? 4
                                                  : cfg.field.radial_dim;
  if (!cfg.x0.empty() && static_cast<int>(cfg.x0.size()) != dim)
    throw config_error("x0 dimension does not match the field", "x0");
  if (!cfg.regularization.sampler.cap_center.empty() &&
      static_cast<int>(cfg.regularization.sampler.cap_center.size()) != dim)
    throw config_error("cap_center dimension does not match the field",
                       "regularization.sampler.cap_center");
  if (cfg.perturbation.enabled()) {
    if (static_cast<int>(cfg.perturbation.center.size()) != dim)
      throw config_error("center dimension does not match the field",
                         "perturbation.center");
    if (!cfg.perturbation.direction.empty() &&
        static_cast<int>(cfg.perturbation.direction.size()) != dim)
      throw config_error("direction dimension does not match the field",
                         "perturbation.direction");
  }
  if (cfg.ensemble.dim_x >= dim || cfg.ensemble.dim_y >= dim)
    throw config_error("dims exceed the field dimension", "ensemble.dims");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file", path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(std::string("JSON parse error: ") + e.what(), path);
  }
  if (!root.is_object())
    throw config_error("config root must be a JSON object", path);
  return parse_config(root);
}

/// Canonical JSON form (sorted keys, every field explicit). load -> serialize
/// -> load is the identity, and the dump is the hashing preimage.
inline nlohmann::json serialize_config(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  j["field"]["name"] = cfg.field.name;
  if (cfg.field.name == "radial") {
    j["field"]["params"]["F0"] = cfg.field.radial_F0;
    j["field"]["params"]["alpha"] = cfg.field.radial_alpha;
    j["field"]["params"]["dim"] = cfg.field.radial_dim;
  }
  j["x0"] = cfg.x0;
  j["regularization"]["mode"] = detail::mode_name(cfg.regularization.mode);
  j["regularization"]["nu"] = cfg.regularization.nu;
  j["regularization"]["T"] = cfg.regularization.T;
  j["regularization"]["sampler"]["family"] = cfg.regularization.sampler.family;
  j["regularization"]["sampler"]["radius"] = cfg.regularization.sampler.radius;
  j["regularization"]["sampler"]["cap_center"] =
      cfg.regularization.sampler.cap_center;
  j["regularization"]["sampler"]["cap_angle"] =
      cfg.regularization.sampler.cap_angle;
  j["regularization"]["sampler"]["sigma"] = cfg.regularization.sampler.sigma;
  if (!cfg.regularization.nu_ladder.empty())
    j["regularization"]["nu_ladder"] = cfg.regularization.nu_ladder;
  j["ensemble"]["N"] = cfg.ensemble.N;
  j["ensemble"]["t_targets"] = cfg.ensemble.t_targets;
  j["ensemble"]["grid"]["bounds"] = {
      cfg.ensemble.grid.bounds.xmin, cfg.ensemble.grid.bounds.xmax,
      cfg.ensemble.grid.bounds.ymin, cfg.ensemble.grid.bounds.ymax};
  j["ensemble"]["grid"]["nx"] = cfg.ensemble.grid.nx;
  j["ensemble"]["grid"]["ny"] = cfg.ensemble.grid.ny;
  j["ensemble"]["dims"] = {cfg.ensemble.dim_x, cfg.ensemble.dim_y};
  j["ensemble"]["workers"] = cfg.ensemble.workers;
  j["analysis"]["s_burn"] = cfg.analysis.s_burn;
  j["analysis"]["s_total"] = cfg.analysis.s_total;
  j["analysis"]["M"] = cfg.analysis.M;
  j["analysis"]["stride"] = cfg.analysis.stride;
  j["analysis"]["tolerance"] = cfg.analysis.tolerance;
  j["analysis"]["F_m"] = cfg.analysis.F_m;
  j["analysis"]["s_p"] = cfg.analysis.s_p;
  if (cfg.perturbation.enabled()) {
    j["perturbation"]["eps_s"] = cfg.perturbation.eps_s;
    j["perturbation"]["eps_r"] = cfg.perturbation.eps_r;
    j["perturbation"]["center"] = cfg.perturbation.center;
    j["perturbation"]["radius"] = cfg.perturbation.radius;
    j["perturbation"]["direction"] = cfg.perturbation.direction;
  }
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  return j;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  return hash_hex(fnv1a(serialize_config(cfg).dump()));
}

/// Resolves the configured field, with the perturbation bump applied when
/// active.
inline HomogeneousField make_field(const ExperimentConfig& cfg) {
  HomogeneousField base =
      cfg.field.name == "planar"     ? planar_example()
      : cfg.field.name == "lorenz4d" ? lorenz4d_example()
                                     : radial_field(cfg.field.radial_dim,
                                                    cfg.field.radial_alpha,
                                                    cfg.field.radial_F0);
  if (!cfg.perturbation.enabled()) return base;
  const UnitVec center(Vec::from(cfg.perturbation.center));
  Vec dir = cfg.perturbation.direction.empty()
                ? Vec(base.dim())
                : Vec::from(cfg.perturbation.direction);
  return perturb_field(base, cfg.perturbation.eps_s, cfg.perturbation.eps_r,
                       center, cfg.perturbation.radius, dir);
}

inline Vec config_x0(const ExperimentConfig& cfg) {
  if (cfg.x0.empty())
    throw config_error("this experiment requires an initial state", "x0");
  return Vec::from(cfg.x0);
}

}  // namespace singflow
