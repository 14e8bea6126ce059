#pragma once

// Geometry of the space of inner products on R^n, realised as SPD matrices
// with the invariant metric  g_h(k1,k2) = tr(h^-1 k1 h^-1 k2), and of its
// determinant-one slice.

#include <Eigen/Dense>

#include "solitonlab/common.hpp"

namespace solitonlab {

/// A point of the space of inner products, optionally on the det = 1 slice.
struct SPDPoint {
  Mat H;
  bool det_normalized = false;
};

inline void check_spd(const Mat& h, const char* who = "matrix") {
  if (h.rows() != h.cols()) throw InvalidInput(std::string(who) + ": not square");
  if (!is_symmetric(h, 1e-12))
    throw InvalidInput(std::string(who) + ": not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(h));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidInput(std::string(who) + ": not positive definite");
}

inline SPDPoint make_spd_point(const Mat& h, bool det_normalized = false) {
  check_spd(h, "SPD point");
  SPDPoint p{symmetrize(h), det_normalized};
  if (det_normalized && std::abs(p.H.determinant() - 1.0) > 1e-12)
    throw InvalidInput("SPD point flagged det-normalized has det != 1");
  return p;
}

namespace detail {

template <class F>
Mat sym_func(const Mat& a, F f, bool require_positive) {
  Eigen::SelfAdjointEigenSolver<Mat> es;
  if (a.rows() <= 3)
    es.computeDirect(symmetrize(a));
  else
    es.compute(symmetrize(a));
  Vec l = es.eigenvalues();
  if (require_positive && l.minCoeff() <= 0.0)
    throw InvalidInput("sym_func: matrix is not positive definite");
  for (int i = 0; i < l.size(); ++i) l[i] = f(l[i]);
  return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline Mat spd_log(const Mat& a) {
  return detail::sym_func(a, [](double x) { return std::log(x); }, true);
}

inline Mat sym_exp(const Mat& a) {
  return detail::sym_func(a, [](double x) { return std::exp(x); }, false);
}

inline Mat spd_sqrt(const Mat& a) {
  return detail::sym_func(a, [](double x) { return std::sqrt(x); }, true);
}

inline Mat spd_inv_sqrt(const Mat& a) {
  return detail::sym_func(a, [](double x) { return 1.0 / std::sqrt(x); }, true);
}

/// sqrt and inverse sqrt of a base point, cached for repeated exp/log calls.
struct SpdFrame {
  Mat hs, hsi;
  explicit SpdFrame(const Mat& h) : hs(spd_sqrt(h)), hsi(spd_inv_sqrt(h)) {}

  Mat log(const Mat& q) const {
    return hs * spd_log(symmetrize(hsi * q * hsi)) * hs;
  }
  Mat exp(const Mat& v) const {
    return hs * sym_exp(symmetrize(hsi * v * hsi)) * hs;
  }
  double dist(const Mat& q) const {
    return spd_log(symmetrize(hsi * q * hsi)).norm();
  }
};

inline double gsym_inner(const Mat& h, const Mat& k1, const Mat& k2) {
  Mat hi = h.inverse();
  return (hi * k1 * hi * k2).trace();
}

inline double gsym_norm(const Mat& h, const Mat& k) {
  return std::sqrt(std::max(0.0, gsym_inner(h, k, k)));
}

inline Mat exp_map(const Mat& h, const Mat& v) { return SpdFrame(h).exp(v); }

inline Mat log_map(const Mat& h, const Mat& q) { return SpdFrame(h).log(q); }

inline double dist(const Mat& h, const Mat& q) { return SpdFrame(h).dist(q); }

/// Pull-back action: (q.h)(x,y) = h(q^-1 x, q^-1 y), i.e. q^-T H q^-1.
inline Mat group_act(const Mat& q, const Mat& h) {
  Eigen::FullPivLU<Mat> lu(q);
  if (!lu.isInvertible()) throw InvalidInput("group_act: singular matrix");
  Mat qi = lu.inverse();
  return symmetrize(qi.transpose() * h * qi);
}

inline Mat project_det1(const Mat& h) {
  double d = h.determinant();
  if (d <= 0.0) throw InvalidInput("project_det1: determinant not positive");
  return h / std::pow(d, 1.0 / h.rows());
}

/// Sectional curvature at h spanned by orthonormal tangent vectors x, y,
/// probed with geodesic triangles and one Richardson step.
inline double sectional_curvature_probe(const Mat& h, const Mat& x,
                                        const Mat& y, double r = 0.2) {
  auto defect_over_area = [&](double s) {
    SpdFrame f(h);
    Mat p = f.exp(s * x), q = f.exp(s * y);
    SpdFrame fp(p), fq(q);
    Mat lpo = fp.log(h), lpq = fp.log(q);
    Mat lqo = fq.log(h), lqp = fq.log(p);
    auto angle = [](const Mat& base, const Mat& u, const Mat& v) {
      double c = gsym_inner(base, u, v) /
                 (gsym_norm(base, u) * gsym_norm(base, v));
      return std::acos(std::clamp(c, -1.0, 1.0));
    };
    double a0 = angle(h, x, y);
    double a1 = angle(p, lpo, lpq);
    double a2 = angle(q, lqo, lqp);
    double d01 = s, d02 = s;  // geodesic parameters are exact
    double d12 = dist(p, q);
    // Euclidean Heron area is accurate to the order we keep
    double sp = 0.5 * (d01 + d02 + d12);
    double area = std::sqrt(sp * (sp - d01) * (sp - d02) * (sp - d12));
    return (a0 + a1 + a2 - M_PI) / area;
  };
  double k1 = defect_over_area(r);
  double k2 = defect_over_area(r / 2);
  return (4.0 * k2 - k1) / 3.0;
}

}  // namespace solitonlab
