#pragma once

// Artifact serialization: NDJSON sample dumps, CSV/PGM histograms.
// Every writer stamps the artifact with the config hash and seed so any
// output file can be traced back to the exact run that produced it. All
// floating-point output uses shortest round-trip formatting, making files
// byte-identical across runs with the same inputs.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "singflow/analysis.hpp"
#include "singflow/ensemble.hpp"
#include "singflow/errors.hpp"

namespace singflow {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  return std::string(buf, 16);
}

/// Provenance carried into every artifact file.
struct ArtifactStamp {
  std::string config_hash;  // 16 hex chars
  std::uint64_t seed = 0;
};

namespace detail {

inline std::ofstream open_artifact(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw numerical_error("io: cannot open " + path + " for writing");
  return out;
}

inline void append_json_vec(std::string& line, const Vec& v) {
  line += '[';
  for (int k = 0; k < v.size(); ++k) {
    if (k) line += ',';
    line += format_double(v[k]);
  }
  line += ']';
}

}  // namespace detail

/// One metadata record, then one record per sample point:
///   {"index":i,"t":...,"x":[...]}            (uniform weights)
///   {"index":i,"t":...,"x":[...],"weight":w} (weighted sets)
inline void write_sample_ndjson(const std::string& path, const SampleSet& s,
                                const ArtifactStamp& stamp) {
  auto out = detail::open_artifact(path);
  out << "{\"config_hash\":\"" << stamp.config_hash
      << "\",\"seed\":" << stamp.seed << ",\"t\":" << format_double(s.t)
      << ",\"n\":" << s.points.size() << "}\n";
  const bool weighted = !s.weights.empty();
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    std::string line = "{\"index\":";
    line += std::to_string(i);
    line += ",\"t\":";
    line += format_double(s.t);
    line += ",\"x\":";
    detail::append_json_vec(line, s.points[i]);
    if (weighted) {
      line += ",\"weight\":";
      line += format_double(s.weights[i]);
    }
    line += "}\n";
    out << line;
  }
}

/// Time-ordered path of one realization: {"index":k,"t":...,"x":[...]} per
/// accepted step.
inline void write_trajectory_ndjson(const std::string& path,
                                    const std::vector<double>& times,
                                    const std::vector<Vec>& states,
                                    const ArtifactStamp& stamp) {
  if (times.size() != states.size())
    throw domain_error("write_trajectory_ndjson: length mismatch");
  auto out = detail::open_artifact(path);
  out << "{\"config_hash\":\"" << stamp.config_hash
      << "\",\"seed\":" << stamp.seed << ",\"n\":" << times.size() << "}\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::string line = "{\"index\":";
    line += std::to_string(i);
    line += ",\"t\":";
    line += format_double(times[i]);
    line += ",\"x\":";
    detail::append_json_vec(line, states[i]);
    line += "}\n";
    out << line;
  }
}

/// Weighted sphere samples: {"y":[...],"w":...,"weight":...} per record.
inline void write_srb_ndjson(const std::string& path,
                             const std::vector<SRBPrimePoint>& pts,
                             const ArtifactStamp& stamp) {
  auto out = detail::open_artifact(path);
  out << "{\"config_hash\":\"" << stamp.config_hash
      << "\",\"seed\":" << stamp.seed << ",\"n\":" << pts.size() << "}\n";
  for (const auto& p : pts) {
    std::string line = "{\"y\":";
    detail::append_json_vec(line, p.y.vec());
    line += ",\"w\":";
    line += format_double(p.w);
    line += ",\"weight\":";
    line += format_double(p.weight);
    line += "}\n";
    out << line;
  }
}

/// Header comment, a bounds/grid row, then one row per cell (i, j, mass),
/// i fastest. Cell (i, j) covers the i-th x-bin and j-th y-bin.
inline void write_histogram_csv(const std::string& path, const Histogram2D& h,
                                const ArtifactStamp& stamp) {
  auto out = detail::open_artifact(path);
  out << "# config_hash=" << stamp.config_hash << " seed=" << stamp.seed
      << "\n";
  out << "nx,ny,xmin,xmax,ymin,ymax,out_of_bounds\n";
  out << h.nx << ',' << h.ny << ',' << format_double(h.bounds.xmin) << ','
      << format_double(h.bounds.xmax) << ',' << format_double(h.bounds.ymin)
      << ',' << format_double(h.bounds.ymax) << ','
      << format_double(h.out_of_bounds) << "\n";
  out << "i,j,mass\n";
  for (int j = 0; j < h.ny; ++j)
    for (int i = 0; i < h.nx; ++i)
      out << i << ',' << j << ',' << format_double(h.at(i, j)) << "\n";
}

/// ASCII PGM (P2) with intensity proportional to log(mass + floor),
/// floor = 1e-12, scaled so the empty level is black and the modal cell is
/// white. Top image row is the largest y bin, matching plot orientation.
inline void write_histogram_pgm(const std::string& path, const Histogram2D& h,
                                const ArtifactStamp& stamp,
                                double floor_mass = 1e-12) {
  double mmax = 0.0;
  for (double m : h.mass)
    if (m > mmax) mmax = m;
  if (!(mmax > 0.0))
    throw histogram_error("pgm: histogram carries no mass");
  const double lo = std::log(floor_mass);
  const double hi = std::log(mmax + floor_mass);
  const double span = hi - lo;
  auto out = detail::open_artifact(path);
  out << "P2\n";
  out << "# config_hash=" << stamp.config_hash << " seed=" << stamp.seed
      << "\n";
  out << h.nx << ' ' << h.ny << "\n255\n";
  for (int j = h.ny - 1; j >= 0; --j) {
    for (int i = 0; i < h.nx; ++i) {
      const double v = (std::log(h.at(i, j) + floor_mass) - lo) / span;
      const int g = static_cast<int>(std::lround(255.0 * std::min(1.0, std::max(0.0, v))));
      out << g << (i + 1 < h.nx ? ' ' : '\n');
    }
  }
}

/// Writes a string artifact (report text/JSON) verbatim.
inline void write_text(const std::string& path, const std::string& content) {
  auto out = detail::open_artifact(path);
  out << content;
}

}  // namespace singflow
