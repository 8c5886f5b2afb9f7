#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "singflow/errors.hpp"

namespace singflow {

/// Small dense vector with inline storage. Dimension is a runtime value but
/// bounded by kMaxDim so states never touch the heap in integration loops.
/// Used both for phase-space points (d = 2..4) and packed augmented states
/// (sphere point + synchronization variable, d + 1 components).
class Vec {
 public:
  static constexpr int kMaxDim = 8;

  Vec() : n_(0) { data_.fill(0.0); }

  explicit Vec(int n, double fill = 0.0) : n_(n) {
    if (n < 0 || n > kMaxDim) throw domain_error("Vec: dimension out of range");
    data_.fill(0.0);
    for (int i = 0; i < n_; ++i) data_[i] = fill;
  }

  Vec(std::initializer_list<double> xs) : n_(static_cast<int>(xs.size())) {
    if (n_ > kMaxDim) throw domain_error("Vec: dimension out of range");
    data_.fill(0.0);
    int i = 0;
    for (double x : xs) data_[i++] = x;
  }

  static Vec from(const std::vector<double>& xs) {
    if (xs.size() > static_cast<std::size_t>(kMaxDim))
      throw domain_error("Vec: dimension out of range");
    Vec v(static_cast<int>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<int>(i)] = xs[i];
    return v;
  }

  int size() const { return n_; }

  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n_; ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n_; ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vec& operator*=(double a) {
    for (int i = 0; i < n_; ++i) data_[i] *= a;
    return *this;
  }

  double dot(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += data_[i] * o.data_[i];
    return s;
  }

  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }

  bool finite() const {
    for (int i = 0; i < n_; ++i)
      if (!std::isfinite(data_[i])) return false;
    return true;
  }

  std::vector<double> to_std() const {
    return std::vector<double>(data_.begin(), data_.begin() + n_);
  }

 private:
  std::array<double, kMaxDim> data_;
  int n_;
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator*(double s, Vec a) { return a *= s; }
inline Vec operator*(Vec a, double s) { return a *= s; }

inline double dot(const Vec& a, const Vec& b) { return a.dot(b); }
inline double norm(const Vec& a) { return a.norm(); }

/// Unit vector on S^{d-1}. Renormalizes on construction; rejects zero or
/// non-finite input. Norm stays within 1e-12 of 1 by construction.
class UnitVec {
 public:
  explicit UnitVec(const Vec& v) : v_(v) {
    if (!v.finite()) throw domain_error("UnitVec: non-finite components");
    const double n = v.norm();
    if (!(n > 0.0)) throw domain_error("UnitVec: zero vector");
    v_ *= 1.0 / n;
  }

  UnitVec(std::initializer_list<double> xs) : UnitVec(Vec(xs)) {}

  const Vec& vec() const { return v_; }
  int size() const { return v_.size(); }
  double operator[](int i) const { return v_[i]; }

 private:
  Vec v_;
};

/// Tangential projection P_s v = v - (v.y) y at a sphere point y.
inline Vec tangent_project(const Vec& v, const UnitVec& y) {
  return v - v.dot(y.vec()) * y.vec();
}

}  // namespace singflow
