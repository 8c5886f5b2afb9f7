#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "singflow/errors.hpp"
#include "singflow/vec.hpp"

namespace singflow {

/// Scale-homogeneous field f(x) = |x|^alpha F(x/|x|) with alpha < 1.
/// F must be continuously differentiable on the unit sphere; it is stored as
/// an evaluator on unit vectors and decomposed on demand into a tangential
/// part and a radial multiplier.
class HomogeneousField {
 public:
  using Evaluator = std::function<Vec(const UnitVec&)>;

  HomogeneousField(int dim, double alpha, Evaluator F)
      : dim_(dim), alpha_(alpha), F_(std::move(F)) {
    if (dim_ < 2) throw domain_error("HomogeneousField: dim must be >= 2");
    if (!(alpha_ < 1.0))
      throw domain_error("HomogeneousField: alpha must be < 1");
    if (!F_) throw domain_error("HomogeneousField: missing evaluator");
  }

  int dim() const { return dim_; }
  double alpha() const { return alpha_; }

  Vec F(const UnitVec& y) const { return F_(y); }

 private:
  int dim_;
  double alpha_;
  Evaluator F_;
};

/// F(y) split into the sphere-tangential part and the radial multiplier:
/// F(y) = tangential + radial * y with tangential . y = 0.
struct FieldSplit {
  Vec tangential;
  double radial = 0.0;
};

inline FieldSplit decompose(const HomogeneousField& field, const UnitVec& y) {
  if (y.size() != field.dim())
    throw domain_error("decompose: dimension mismatch");
  const Vec f = field.F(y);
  FieldSplit s;
  s.radial = f.dot(y.vec());
  s.tangential = f - s.radial * y.vec();
  return s;
}

/// Right-hand side of the singular system dx/dt = |x|^alpha F(x/|x|).
inline Vec singular_rhs(const HomogeneousField& field, const Vec& x) {
  if (x.size() != field.dim())
    throw domain_error("singular_rhs: dimension mismatch");
  const double r = x.norm();
  if (!(r > 0.0))
    throw singularity_error("singular_rhs: evaluation at the singular point");
  const UnitVec y(x);
  return std::pow(r, field.alpha()) * field.F(y);
}

/// Right-hand side of the sphere-restricted dynamics dy/ds = F_s(y).
inline Vec sphere_rhs(const HomogeneousField& field, const UnitVec& y) {
  return decompose(field, y).tangential;
}

/// Sphere point plus positive synchronization variable.
struct ExtendedState {
  ExtendedState(UnitVec y_, double w_) : y(std::move(y_)), w(w_) {
    if (!(w > 0.0)) throw domain_error("ExtendedState: w must be > 0");
  }
  UnitVec y;
  double w;
};

struct SphereRate {
  Vec dy;
  double dw = 0.0;
};

/// Self-similar extended system in logarithmic time tau:
/// dy/dtau = w F_s(y),  dw/dtau = w + (alpha - 1) F_r(y) w^2.
inline SphereRate extended_rhs(const HomogeneousField& field,
                               const ExtendedState& st) {
  const FieldSplit s = decompose(field, st.y);
  SphereRate r;
  r.dy = st.w * s.tangential;
  r.dw = st.w + (field.alpha() - 1.0) * s.radial * st.w * st.w;
  return r;
}

/// Master-slave system in sphere arclength time s:
/// dy/ds = F_s(y),  dw/ds = 1 + (alpha - 1) F_r(y) w.
/// At w = 0 the drive dw/ds = 1 keeps w positive.
inline SphereRate master_slave_rhs(const HomogeneousField& field,
                                   const UnitVec& y, double w) {
  const FieldSplit s = decompose(field, y);
  SphereRate r;
  r.dy = s.tangential;
  r.dw = 1.0 + (field.alpha() - 1.0) * s.radial * w;
  return r;
}

/// Clamped cubic: 0 for x <= 0, 3x^2 - 2x^3 on [0, 1], 1 for x >= 1.
/// C^1 across both joints.
inline double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

/// Planar example, d = 2, alpha = 1/3:
///   F(y) = (y1^2 + y1 y2 + y1 y2^2, y1 y2 + y2^2 - y1^2 y2)
/// which splits into F_s = (y1 y2^2, -y1^2 y2) and F_r = y1 + y2 on the
/// circle. Focusing/defocusing fixed points sit at (-1,0)/(1,0) with
/// repelling fixed points at (0,+-1).
inline HomogeneousField planar_example() {
  return HomogeneousField(
      2, 1.0 / 3.0, [](const UnitVec& y) -> Vec {
        const double y1 = y[0], y2 = y[1];
        return Vec{y1 * y1 + y1 * y2 + y1 * y2 * y2,
                   y1 * y2 + y2 * y2 - y1 * y1 * y2};
      });
}

/// Field with constant radial multiplier F0 and no tangential part:
/// F(y) = F0 * y. Every sphere point is a fixed point of the angular
/// dynamics; closed forms exist for the synchronization variable, which
/// makes this the reference problem for integrator-order and
/// synchronization tests.
inline HomogeneousField radial_field(int dim, double alpha, double F0) {
  return HomogeneousField(dim, alpha,
                          [F0](const UnitVec& y) -> Vec { return F0 * y.vec(); });
}

/// Parameters of the chaotic 3-d benchmark system and of the scaled
/// stereographic chart used to wrap it onto S^3.
struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double projection_scale = 40.0;
  double projection_shift = 38.0;
};

/// Classic chaotic benchmark flow in R^3.
inline Vec lorenz_rhs(const Vec& u, const LorenzParams& p = {}) {
  if (u.size() != 3) throw domain_error("lorenz_rhs: expects dimension 3");
  return Vec{p.sigma * (u[1] - u[0]), u[0] * (p.rho - u[2]) - u[1],
             u[0] * u[1] - p.beta * u[2]};
}

/// Scaled stereographic chart S^3 \ {north pole} -> R^3:
///   u_i = scale * y_i / (1 - y0) for i = 1, 2;  u_3 = shift + scale * y3 / (1 - y0).
inline Vec stereo_forward(const UnitVec& y, const LorenzParams& p = {}) {
  if (y.size() != 4) throw domain_error("stereo_forward: expects S^3 point");
  const double denom = 1.0 - y[0];
  if (denom <= 1e-14)
    throw pole_error("stereo_forward: evaluation at the projection pole");
  const double a = p.projection_scale / denom;
  return Vec{a * y[1], a * y[2], p.projection_shift + a * y[3]};
}

/// Inverse chart R^3 -> S^3: with v = (u1, u2, u3 - shift)/scale,
///   y0 = (|v|^2 - 1)/(|v|^2 + 1),  y_i = 2 v_i / (|v|^2 + 1).
inline UnitVec stereo_inverse(const Vec& u, const LorenzParams& p = {}) {
  if (u.size() != 3) throw domain_error("stereo_inverse: expects R^3 point");
  const double v1 = u[0] / p.projection_scale;
  const double v2 = u[1] / p.projection_scale;
  const double v3 = (u[2] - p.projection_shift) / p.projection_scale;
  const double q = v1 * v1 + v2 * v2 + v3 * v3;
  const double c = 1.0 / (q + 1.0);
  return UnitVec(Vec{(q - 1.0) * c, 2.0 * v1 * c, 2.0 * v2 * c, 2.0 * v3 * c});
}

namespace detail {

/// Pushforward of the chaotic benchmark field through the inverse chart,
/// evaluated away from the projection pole. Analytic chart Jacobian:
/// with v = (u - shift e3)/scale, q = |v|^2, c = 1/(1+q),
///   d y0 / d u_j = 4 c^2 v_j / scale,
///   d y_i / d u_j = c (2 delta_ij - 4 c v_i v_j) / scale.
inline Vec lorenz_pushforward(const UnitVec& y, const LorenzParams& p) {
  const Vec u = stereo_forward(y, p);
  const double v1 = u[0] / p.projection_scale;
  const double v2 = u[1] / p.projection_scale;
  const double v3 = (u[2] - p.projection_shift) / p.projection_scale;
  const double q = v1 * v1 + v2 * v2 + v3 * v3;
  const double c = 1.0 / (q + 1.0);
  const Vec L = lorenz_rhs(u, p);
  const double vdotL = v1 * L[0] + v2 * L[1] + v3 * L[2];
  const double inv_scale = 1.0 / p.projection_scale;
  Vec out(4);
  out[0] = 4.0 * c * c * vdotL * inv_scale;
  out[1] = (2.0 * c * L[0] - 4.0 * c * c * v1 * vdotL) * inv_scale;
  out[2] = (2.0 * c * L[1] - 4.0 * c * c * v2 * vdotL) * inv_scale;
  out[3] = (2.0 * c * L[2] - 4.0 * c * c * v3 * vdotL) * inv_scale;
  return out;
}

}  // namespace detail

/// Four-dimensional example, alpha = 1/3. Radial multiplier F_r(y) = -y0.
/// Tangential part blends a linear focusing node at the pole y = e0
/// (eigenvalues -1, -2, -3) with the pushforward of the chaotic benchmark
/// flow on the opposite hemisphere:
///   F_s(y) = S1(xi) F_-(y) + (1 - S1(xi)) F_+(y),  xi = 2 y0 - 1/2,
/// where F_-(y) = P_s(0, -y1, -2 y2, -3 y3). Pure node for y0 >= 3/4, pure
/// pushforward for y0 <= 1/4. The blend is re-projected tangentially to
/// absorb rounding in the pushforward.
inline HomogeneousField lorenz4d_example(const LorenzParams& p = {}) {
  return HomogeneousField(4, 1.0 / 3.0, [p](const UnitVec& y) -> Vec {
    const double xi = 2.0 * y[0] - 0.5;
    const double s = smoothstep(xi);
    Vec fs(4);
    if (s > 0.0) {
      const Vec raw{0.0, -y[1], -2.0 * y[2], -3.0 * y[3]};
      fs += s * tangent_project(raw, y);
    }
    if (s < 1.0) fs += (1.0 - s) * detail::lorenz_pushforward(y, p);
    fs = tangent_project(fs, y);
    const double fr = -y[0];
    return fs + fr * y.vec();
  });
}

/// Compactly supported C^1 perturbation of a field:
///   F'(y) = F(y) + bump(y) (eps_s P_s e + eps_r y),
/// bump(y) = smoothstep(1 - |y - center|^2 / radius^2), so the perturbation
/// vanishes outside the geodesic ball |y - center| < radius. Perturbs both
/// the tangential part (along the projected direction e) and the radial
/// multiplier.
inline HomogeneousField perturb_field(const HomogeneousField& base,
                                      double eps_s, double eps_r,
                                      const UnitVec& center, double radius,
                                      const Vec& direction) {
  if (center.size() != base.dim() || direction.size() != base.dim())
    throw domain_error("perturb_field: dimension mismatch");
  if (!(radius > 0.0)) throw domain_error("perturb_field: radius must be > 0");
  const Vec c = center.vec();
  const Vec e = direction;
  const double inv_r2 = 1.0 / (radius * radius);
  return HomogeneousField(
      base.dim(), base.alpha(),
      [base, eps_s, eps_r, c, e, inv_r2](const UnitVec& y) -> Vec {
        Vec f = base.F(y);
        const Vec d = y.vec() - c;
        const double b = smoothstep(1.0 - d.norm2() * inv_r2);
        if (b > 0.0) {
          f += (b * eps_s) * tangent_project(e, y);
          f += (b * eps_r) * y.vec();
        }
        return f;
      });
}

}  // namespace singflow
