#pragma once

#include <stdexcept>
#include <string>

namespace singflow {

// Base class for all library failures so callers can catch one type.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments or violated preconditions (non-unit vectors, alpha >= 1, ...).
class domain_error : public error {
 public:
  explicit domain_error(const std::string& msg) : error(msg) {}
};

// Field evaluation requested exactly at the singular point.
class singularity_error : public error {
 public:
  explicit singularity_error(const std::string& msg) : error(msg) {}
};

// Non-finite state or overflow produced during integration/evaluation.
class numerical_error : public error {
 public:
  explicit numerical_error(const std::string& msg) : error(msg) {}
};

// Adaptive step fell below dt_min before reaching a termination condition.
class stiffness_error : public error {
 public:
  explicit stiffness_error(const std::string& msg) : error(msg) {}
};

// detect_crossing called without a sign change across the step.
class bracket_error : public error {
 public:
  explicit bracket_error(const std::string& msg) : error(msg) {}
};

// Trajectory never reached the requested radius within the time budget.
class no_entry_error : public error {
 public:
  explicit no_entry_error(const std::string& msg) : error(msg) {}
};

// Rescaled trajectory failed to leave the unit ball after all retries.
class trapped_error : public error {
 public:
  explicit trapped_error(const std::string& msg) : error(msg) {}
};

// Escape sampler misconfigured (support inside the unit ball, rejection
// loop that cannot terminate, ...).
class sampler_error : public error {
 public:
  explicit sampler_error(const std::string& msg) : error(msg) {}
};

// Histogram construction or comparison failure (no in-bounds mass,
// mismatched grids).
class histogram_error : public error {
 public:
  explicit histogram_error(const std::string& msg) : error(msg) {}
};

// Stereographic chart evaluated at its projection pole.
class pole_error : public error {
 public:
  explicit pole_error(const std::string& msg) : error(msg) {}
};

// A certified bound required by a quadrature was violated along the orbit
// (radial component dipped below the configured lower bound, variational
// growth left the certified regime).
class bound_violation_error : public error {
 public:
  explicit bound_violation_error(const std::string& msg) : error(msg) {}
};

// Too large a fraction of ensemble members failed to integrate.
class ensemble_error : public error {
 public:
  explicit ensemble_error(const std::string& msg) : error(msg) {}
};

// Blowup-time estimation stopped before the direction settled onto a
// focusing fixed point.
class not_focusing_error : public error {
 public:
  explicit not_focusing_error(const std::string& msg) : error(msg) {}
};

// Configuration file rejected; carries the offending field path.
class config_error : public error {
 public:
  config_error(const std::string& msg, std::string path)
      : error(path.empty() ? msg : msg + " (at " + path + ")"),
        field_path_(std::move(path)) {}
  const std::string& field_path() const { return field_path_; }

 private:
  std::string field_path_;
};

}  // namespace singflow
