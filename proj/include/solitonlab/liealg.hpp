#pragma once

// Structure-constant Lie algebra engine: curvature of left-invariant metrics,
// nilsoliton search and certification, the symmetry algebra of a nilsoliton,
// soliton vector-field zeros, and Einstein one-dimensional extensions.

#include <Eigen/Dense>
#include <vector>

#include "solitonlab/common.hpp"
#include "solitonlab/spdgeom.hpp"

namespace solitonlab {

// ---------------------------------------------------------------------------
// Types

struct LieAlgebra {
  int dim = 0;
  // adm[i](k,j) = c_ij^k, so [e_i, e_j] = adm[i] * e_j.
  std::vector<Mat> adm;
  int step = 0;  // nilpotency step, 0 when not nilpotent

  Vec bracket(const Vec& x, const Vec& y) const {
    Vec out = Vec::Zero(dim);
    for (int i = 0; i < dim; ++i)
      if (x[i] != 0.0) out += x[i] * (adm[i] * y);
    return out;
  }

  Mat ad(const Vec& x) const {
    Mat out = Mat::Zero(dim, dim);
    for (int i = 0; i < dim; ++i)
      if (x[i] != 0.0) out += x[i] * adm[i];
    return out;
  }

  double c(int i, int j, int k) const { return adm[i](k, j); }

  bool is_abelian(double tol = 1e-14) const {
    for (const Mat& a : adm)
      if (a.cwiseAbs().maxCoeff() > tol) return false;
    return true;
  }
};

struct BracketEntry {
  int i, j, k;  // 1-indexed, i < j
  double c;
};

inline LieAlgebra make_algebra(int dim, const std::vector<BracketEntry>& br) {
  if (dim < 1) throw InvalidInput("algebra dimension must be >= 1");
  LieAlgebra a;
  a.dim = dim;
  a.adm.assign(dim, Mat::Zero(dim, dim));
  for (const auto& e : br) {
    if (e.i < 1 || e.j < 1 || e.k < 1 || e.i > dim || e.j > dim || e.k > dim)
      throw InvalidInput("bracket index out of range");
    if (e.i == e.j) throw InvalidInput("bracket with i == j");
    a.adm[e.i - 1](e.k - 1, e.j - 1) += e.c;
    a.adm[e.j - 1](e.k - 1, e.i - 1) -= e.c;
  }
  return a;
}

inline LieAlgebra abelian_algebra(int n) {
  LieAlgebra a = make_algebra(n, {});
  a.step = 1;
  return a;
}

/// Heisenberg algebra, [e1,e2] = mu e3.
inline LieAlgebra heis3(double mu = 1.0) {
  LieAlgebra a = make_algebra(3, {{1, 2, 3, mu}});
  a.step = 2;
  return a;
}

inline LieAlgebra heis3xR() {
  LieAlgebra a = make_algebra(4, {{1, 2, 3, 1.0}});
  a.step = 2;
  return a;
}

// New basis f_a = sum_i S(i,a) e_i.
inline LieAlgebra change_basis(const LieAlgebra& alg, const Mat& s) {
  int n = alg.dim;
  Mat si = s.inverse();
  LieAlgebra out;
  out.dim = n;
  out.step = alg.step;
  out.adm.assign(n, Mat::Zero(n, n));
  for (int a = 0; a < n; ++a) {
    Mat ad_fa = si * alg.ad(s.col(a)) * s;
    out.adm[a] = ad_fa;
  }
  return out;
}

/// Basis transform making the metric orthonormal: columns of S span the new
/// basis, S^T H S = Id.
inline Mat orthonormal_frame(const Mat& h) {
  Eigen::LLT<Mat> llt(symmetrize(h));
  if (llt.info() != Eigen::Success)
    throw InvalidInput("metric is not positive definite");
  Mat l = llt.matrixL();
  return l.transpose()
      .triangularView<Eigen::Upper>()
      .solve(Mat::Identity(h.rows(), h.cols()));
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  double antisymmetry_gap = 0.0;
  double jacobi_gap = 0.0;
  int computed_step = 0;  // 0 when not nilpotent
  std::vector<int> series_dims;
  bool valid = false;
};

struct CentralSeries {
  std::vector<Mat> terms;  // orthonormal bases of n^1 >= n^2 >= ..., nonzero terms
  bool nilpotent = false;
};

/// Lower central series n^1 = n, n^{m+1} = [n, n^m], by rank of bracket images.
inline CentralSeries lower_central_series(const LieAlgebra& alg,
                                          double tol = 1e-10) {
  int n = alg.dim;
  CentralSeries out;
  Mat cur = Mat::Identity(n, n);
  out.terms.push_back(cur);
  while (true) {
    Mat img(n, n * cur.cols());
    for (int i = 0; i < n; ++i)
      img.block(0, i * cur.cols(), n, cur.cols()) = alg.adm[i] * cur;
    Eigen::JacobiSVD<Mat> svd(img, Eigen::ComputeThinU);
    int r = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > tol) ++r;
    if (r == 0) {
      out.nilpotent = true;
      return out;
    }
    if (r >= cur.cols()) return out;  // series stalled: not nilpotent
    cur = svd.matrixU().leftCols(r);
    out.terms.push_back(cur);
  }
}

inline ValidationReport validate_algebra(const LieAlgebra& alg) {
  ValidationReport rep;
  int n = alg.dim;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        rep.antisymmetry_gap =
            std::max(rep.antisymmetry_gap, std::abs(alg.c(i, j, k) + alg.c(j, i, k)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        Vec ei = Vec::Unit(n, i), ej = Vec::Unit(n, j), ek = Vec::Unit(n, k);
        Vec J = alg.bracket(alg.bracket(ei, ej), ek) +
                alg.bracket(alg.bracket(ej, ek), ei) +
                alg.bracket(alg.bracket(ek, ei), ej);
        rep.jacobi_gap = std::max(rep.jacobi_gap, J.cwiseAbs().maxCoeff());
      }
  auto series = lower_central_series(alg);
  for (const Mat& b : series.terms) rep.series_dims.push_back(int(b.cols()));
  if (series.nilpotent) rep.series_dims.push_back(0);
  rep.computed_step = series.nilpotent ? int(series.terms.size()) : 0;
  rep.valid = rep.antisymmetry_gap <= 1e-12 && rep.jacobi_gap <= 1e-12;
  return rep;
}

/// Validates and fills in the nilpotency step; throws on bad input.
inline LieAlgebra finalize_algebra(LieAlgebra alg) {
  auto rep = validate_algebra(alg);
  if (!rep.valid)
    throw InvalidInput("structure constants violate antisymmetry or Jacobi (gap " +
                       std::to_string(std::max(rep.antisymmetry_gap, rep.jacobi_gap)) + ")");
  alg.step = rep.computed_step;
  return alg;
}

// ---------------------------------------------------------------------------
// Ricci curvature

/// Ricci endomorphism of the left-invariant metric h, via Christoffel
/// coefficients in an h-orthonormal frame.  Ground truth for everything else.
inline Mat ricci_oracle(const LieAlgebra& alg, const Mat& h) {
  int n = alg.dim;
  check_spd(h, "metric");
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(h));
    double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    if (cond > 1e12) throw InvalidInput("metric is ill-conditioned");
  }
  Mat s = orthonormal_frame(h);
  LieAlgebra f = change_basis(alg, s);
  // gamma[a](d,b) = <nabla_{e_a} e_b, e_d>
  std::vector<Mat> gamma(n, Mat::Zero(n, n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int d = 0; d < n; ++d)
        gamma[a](d, b) = 0.5 * (f.c(a, b, d) - f.c(b, d, a) + f.c(d, a, b));
  Mat ric = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Mat curv = gamma[a] * gamma[b] - gamma[b] * gamma[a];
      for (int m = 0; m < n; ++m) curv -= f.c(a, b, m) * gamma[m];
      ric.row(b) += curv.row(a);
    }
  ric = symmetrize(ric);
  return s * ric * s.inverse();
}

inline double scal(const LieAlgebra& alg, const Mat& h) {
  return ricci_oracle(alg, h).trace();
}

enum class Lambda2Convention { OrderedPairs, FullSum };

inline const char* to_string(Lambda2Convention c) {
  return c == Lambda2Convention::OrderedPairs ? "ordered_pairs_i<j" : "full_sum";
}

namespace detail {

// delta(E)(e_i,e_j) = -E[e_i,e_j] + [E e_i, e_j] + [e_i, E e_j]
inline std::vector<Mat> delta_of(const LieAlgebra& alg, const Mat& e) {
  int n = alg.dim;
  std::vector<Mat> d(n, Mat::Zero(n, n));  // d[i].col(j) = delta(E)(e_i,e_j)
  for (int i = 0; i < n; ++i) {
    Mat bi = alg.adm[i];                 // [e_i, .]
    Mat t = -e * bi + alg.ad(e.col(i)) + bi * e;
    d[i] = t;
  }
  return d;
}

inline Mat ricci_moment_map_frame(const LieAlgebra& f, Lambda2Convention conv) {
  int n = f.dim;
  Mat ric = Mat::Zero(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      Mat epq = Mat::Zero(n, n);
      epq(p, q) = 1.0;
      auto d = delta_of(f, epq);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        int j0 = (conv == Lambda2Convention::OrderedPairs) ? i + 1 : 0;
        for (int j = j0; j < n; ++j) acc += d[i].col(j).dot(f.adm[i].col(j));
      }
      ric(q, p) = -0.5 * acc;
    }
  return symmetrize(ric);
}

}  // namespace detail

/// One-time calibration of the Lambda^2 n* (x) n inner product against the
/// Christoffel oracle, on the Heisenberg algebra with the identity metric.
inline Lambda2Convention lambda2_convention() {
  static Lambda2Convention cached = [] {
    LieAlgebra h3 = heis3(1.3);
    Mat oracle = ricci_oracle(h3, Mat::Identity(3, 3));
    Mat half = detail::ricci_moment_map_frame(h3, Lambda2Convention::OrderedPairs);
    Mat full = detail::ricci_moment_map_frame(h3, Lambda2Convention::FullSum);
    double eh = (oracle - half).norm(), ef = (oracle - full).norm();
    return eh <= ef ? Lambda2Convention::OrderedPairs : Lambda2Convention::FullSum;
  }();
  return cached;
}

/// Ricci endomorphism from the moment-map identity
/// tr(Ric^E E) = -1/2 <delta(E), [.,.]>_h for all E.
inline Mat ricci_moment_map(const LieAlgebra& alg, const Mat& h) {
  if (alg.step < 1) throw InvalidInput("ricci_moment_map requires a nilpotent algebra");
  check_spd(h, "metric");
  Mat s = orthonormal_frame(h);
  LieAlgebra f = change_basis(alg, s);
  Mat ric = detail::ricci_moment_map_frame(f, lambda2_convention());
  return s * ric * s.inverse();
}

// ---------------------------------------------------------------------------
// Derivations

/// Orthonormal (Frobenius) basis of Der(n), the null space of E -> delta(E).
inline std::vector<Mat> derivation_space(const LieAlgebra& alg,
                                         double tol = 1e-10) {
  int n = alg.dim;
  int rows = n * n * (n - 1) / 2;
  Mat big = Mat::Zero(std::max(rows, 1), n * n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      Mat epq = Mat::Zero(n, n);
      epq(p, q) = 1.0;
      auto d = detail::delta_of(alg, epq);
      int col = p + q * n, r = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          for (int k = 0; k < n; ++k) big(r++, col) = d[i](k, j);
    }
  Eigen::JacobiSVD<Mat> svd(big, Eigen::ComputeFullV);
  std::vector<Mat> basis;
  int m = n * n;
  for (int c = 0; c < m; ++c) {
    double sv = c < svd.singularValues().size() ? svd.singularValues()[c] : 0.0;
    if (sv <= tol) {
      Mat e = Eigen::Map<const Mat>(svd.matrixV().col(c).data(), n, n);
      basis.push_back(e);
    }
  }
  return basis;
}

inline Mat project_onto(const std::vector<Mat>& onb, const Mat& m) {
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (const Mat& b : onb) out += frob_inner(m, b) * b;
  return out;
}

/// Eigenvalues (ascending) of an h-self-adjoint endomorphism.
inline Vec sym_eigenvalues_wrt(const Mat& h, const Mat& e) {
  Mat s = orthonormal_frame(h);
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(s.inverse() * e * s));
  return es.eigenvalues();
}

inline double delta_norm(const LieAlgebra& alg, const Mat& e) {
  auto d = detail::delta_of(alg, e);
  double acc = 0.0;
  for (int i = 0; i < alg.dim; ++i)
    for (int j = i + 1; j < alg.dim; ++j) acc += d[i].col(j).squaredNorm();
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Nilsoliton certification

struct NilsolitonCertificate {
  double lambda = 0.0;
  Mat D;     // Ric^E = lambda Id - D, D a derivation
  Mat beta;  // Ricci endomorphism normalised to tr beta = -1 (zero if abelian)
  double residual = 0.0;
  double trace_identity_gap = 0.0;  // |tr D^2 - lambda tr D|
  double ric_scal_gap = 0.0;        // ||Ric|^2 - lambda scal|
  double scal = 0.0;
  bool certified = false;
  std::string lambda2_conv;
};

namespace detail {

struct SolitonFit {
  double lambda;
  Mat D;  // in the same basis as the input Ricci
  double residual;
};

// Least-squares Ric = lambda Id - D over lambda in R and D in span(der),
// measured in the Frobenius norm of the h-orthonormal frame (si = S^-1).
inline SolitonFit fit_soliton(const Mat& ric_frame,
                              const std::vector<Mat>& der_frame) {
  int n = ric_frame.rows();
  int m = int(der_frame.size());
  Mat a(n * n, m + 1);
  a.col(0) = Eigen::Map<const Vec>(Mat(Mat::Identity(n, n)).data(), n * n);
  for (int k = 0; k < m; ++k)
    a.col(k + 1) = -Eigen::Map<const Vec>(der_frame[k].data(), n * n);
  Vec rhs = Eigen::Map<const Vec>(ric_frame.data(), n * n);
  Vec x = a.colPivHouseholderQr().solve(rhs);
  SolitonFit fit;
  fit.lambda = x[0];
  fit.D = Mat::Zero(n, n);
  for (int k = 0; k < m; ++k) fit.D += x[k + 1] * der_frame[k];
  fit.residual = (ric_frame - (fit.lambda * Mat::Identity(n, n) - fit.D)).norm();
  return fit;
}

}  // namespace detail

inline NilsolitonCertificate certify_nilsoliton(const LieAlgebra& alg,
                                                const Mat& h,
                                                double tol = 1e-8) {
  int n = alg.dim;
  check_spd(h, "metric");
  NilsolitonCertificate cert;
  cert.lambda2_conv = to_string(lambda2_convention());
  Mat ric = ricci_oracle(alg, h);
  cert.scal = ric.trace();
  if (alg.is_abelian()) {
    // Ric = 0; the flat fibre convention pins lambda = -1/2, D = lambda Id.
    cert.lambda = -0.5;
    cert.D = -0.5 * Mat::Identity(n, n);
    cert.beta = Mat::Zero(n, n);
    cert.residual = ric.norm();
    cert.trace_identity_gap = 0.0;
    cert.ric_scal_gap = std::abs((ric * ric).trace() + 0.5 * cert.scal);
    cert.certified = cert.residual <= tol;
    return cert;
  }
  Mat s = orthonormal_frame(h);
  Mat si = s.inverse();
  Mat ric_f = symmetrize(si * ric * s);
  LieAlgebra alg_f = change_basis(alg, s);
  auto der_f = derivation_space(alg_f);
  auto fit = detail::fit_soliton(ric_f, der_f);
  cert.lambda = fit.lambda;
  cert.D = s * fit.D * si;
  cert.residual = fit.residual;
  cert.trace_identity_gap =
      std::abs((fit.D * fit.D).trace() - fit.lambda * fit.D.trace());
  cert.ric_scal_gap = std::abs((ric_f * ric_f).trace() - fit.lambda * cert.scal);
  double tr = ric_f.trace();
  if (tr < -1e-14) cert.beta = s * (ric_f / (-tr)) * si;
  else cert.beta = Mat::Zero(n, n);
  cert.certified = cert.residual <= tol && cert.trace_identity_gap <= tol &&
                   cert.ric_scal_gap <= tol;
  return cert;
}

struct FlowOptions {
  double tol = 1e-9;
  int max_iters = 50000;
  double dt_max = 0.01;
  double dt_scale = 0.1;
};

struct NilsolitonResult {
  Mat h;  // scal = -1 representative
  NilsolitonCertificate cert;
  int iters = 0;
};

/// Scal-normalised left-invariant Ricci flow H <- H - 2 dt Ric_h; converges to
/// the nilsoliton metric when one exists.
inline NilsolitonResult find_nilsoliton(const LieAlgebra& alg, const Mat& init,
                                        FlowOptions opts = {}) {
  int n = alg.dim;
  check_spd(init, "initial metric");
  if (alg.step < 1) throw InvalidInput("find_nilsoliton requires a nilpotent algebra");
  NilsolitonResult out;
  if (alg.is_abelian()) {
    out.h = init;
    out.cert = certify_nilsoliton(alg, init);
    return out;
  }
  auto der = derivation_space(alg);
  Mat h = init;
  for (int it = 0; it < opts.max_iters; ++it) {
    Mat ric;
    try {
      ric = ricci_oracle(alg, h);
    } catch (const InvalidInput& e) {
      throw NonConvergence(std::string("no nilsoliton found: flow degenerated (") +
                           e.what() + ")");
    }
    double s0 = ric.trace();  // scal < 0 for non-abelian nilpotent
    h *= -s0;
    ric /= -s0;
    Mat s = orthonormal_frame(h);
    Mat si = s.inverse();
    Mat ric_f = symmetrize(si * ric * s);
    std::vector<Mat> der_f(der.size());
    for (size_t k = 0; k < der.size(); ++k) der_f[k] = si * der[k] * s;
    auto fit = detail::fit_soliton(ric_f, der_f);
    if (fit.residual <= opts.tol) {
      out.h = h;
      out.iters = it;
      out.cert = certify_nilsoliton(alg, h, std::max(opts.tol * 10, 1e-9));
      return out;
    }
    double dt = std::min(opts.dt_max, opts.dt_scale / ric_f.norm());
    // Step by the soliton-fit residual instead of the raw Ricci: identical
    // dynamics modulo the automorphism orbit, but the metric coordinates stay
    // bounded instead of drifting along exp(tD).
    Mat d_orig = s * fit.D * si;
    Mat rho = ric - (fit.lambda * Mat::Identity(n, n) - d_orig);
    h = symmetrize(h - dt * 2.0 * (h * rho));
  }
  throw NonConvergence("no nilsoliton found after " +
                       std::to_string(opts.max_iters) + " iterations");
}

/// lambda rescales as lambda_t = lambda / t under h -> t h.  Returns the
/// metric rescaled so the fitted cosmological constant equals target.
inline Mat rescale_to_lambda(const Mat& h, const NilsolitonCertificate& cert,
                             double target = -0.5) {
  if (cert.lambda >= 0.0) throw InvalidInput("rescale needs lambda < 0");
  return (cert.lambda / target) * h;
}

// ---------------------------------------------------------------------------
// Symmetry algebra of a nilsoliton

struct SymmetryAlgebra {
  std::vector<Mat> basis_g, basis_k, basis_p;  // original basis
  int dim_g = 0, dim_k = 0, dim_p = 0;
};

/// g = { E in Der(n) : [E, beta] = 0, tr E = 0 }, with the Cartan split
/// k = g ^ skew(h), p = g ^ sym(h).
inline SymmetryAlgebra lie_of_G(const LieAlgebra& alg, const Mat& h,
                                const NilsolitonCertificate& cert) {
  if (!cert.certified) throw InvalidInput("lie_of_G requires a certified nilsoliton");
  int n = alg.dim;
  Mat s = orthonormal_frame(h);
  Mat si = s.inverse();
  LieAlgebra alg_f = change_basis(alg, s);
  Mat beta_f = symmetrize(si * cert.beta * s);
  auto der_f = derivation_space(alg_f);
  int m = int(der_f.size());
  SymmetryAlgebra out;
  if (m == 0) return out;
  Mat rows(n * n + 1, m);
  for (int k = 0; k < m; ++k) {
    Mat comm = der_f[k] * beta_f - beta_f * der_f[k];
    rows.block(0, k, n * n, 1) = Eigen::Map<const Vec>(comm.data(), n * n);
    rows(n * n, k) = der_f[k].trace();
  }
  Eigen::JacobiSVD<Mat> svd(rows, Eigen::ComputeFullV);
  double thresh = 1e-6 * std::max(1.0, svd.singularValues().maxCoeff());
  std::vector<Mat> g_f;
  for (int c = 0; c < m; ++c) {
    double sv = c < svd.singularValues().size() ? svd.singularValues()[c] : 0.0;
    if (sv <= thresh) {
      Mat e = Mat::Zero(n, n);
      for (int k = 0; k < m; ++k) e += svd.matrixV()(k, c) * der_f[k];
      g_f.push_back(e);
    }
  }
  out.dim_g = int(g_f.size());
  // The symmetric / skew parts of g-elements stay in g at a nilsoliton.
  auto rank_basis = [&](bool sym_part) {
    std::vector<Mat> parts;
    for (const Mat& e : g_f) {
      Mat p = sym_part ? symmetrize(e) : Mat(0.5 * (e - e.transpose()));
      if (p.norm() > 1e-9) parts.push_back(p);
    }
    if (parts.empty()) return parts;
    Mat stack(n * n, parts.size());
    for (size_t k = 0; k < parts.size(); ++k)
      stack.col(k) = Eigen::Map<const Vec>(parts[k].data(), n * n);
    Eigen::JacobiSVD<Mat> sv2(stack, Eigen::ComputeThinU);
    std::vector<Mat> onb;
    for (int c = 0; c < sv2.singularValues().size(); ++c)
      if (sv2.singularValues()[c] > 1e-7 * sv2.singularValues().maxCoeff())
        onb.push_back(Eigen::Map<const Mat>(sv2.matrixU().col(c).data(), n, n));
    return onb;
  };
  auto p_f = rank_basis(true);
  auto k_f = rank_basis(false);
  out.dim_p = int(p_f.size());
  out.dim_k = int(k_f.size());
  if (out.dim_k + out.dim_p != out.dim_g)
    throw Error("Cartan split dimensions do not add up");
  for (const Mat& e : g_f) out.basis_g.push_back(s * e * si);
  for (const Mat& e : k_f) out.basis_k.push_back(s * e * si);
  for (const Mat& e : p_f) out.basis_p.push_back(s * e * si);
  return out;
}

// ---------------------------------------------------------------------------
// Soliton vector field zero

/// Right-invariant field in exponential coordinates: F(U) = P(ad U) Y with
/// P(x) = x/(e^x - 1); the series terminates at the nilpotency step.
inline Vec right_invariant_field(const LieAlgebra& alg, const Vec& u, const Vec& y) {
  static const double bern[8] = {1.0,      -1.0 / 2,     1.0 / 12, 0.0,
                                 -1.0 / 720, 0.0,        1.0 / 30240, 0.0};
  if (alg.step < 1 || alg.step > 8)
    throw InvalidInput("right_invariant_field supports nilpotency steps 1..8");
  Mat adu = alg.ad(u);
  Vec term = y, out = Vec::Zero(alg.dim);
  for (int k = 0; k < alg.step; ++k) {
    out += bern[k] * term;
    term = adu * term;
  }
  return out;
}

/// Solve Dtilde U + F(U) = 0 by the lower-central-series iteration.
inline Vec find_soliton_vf_zero(const LieAlgebra& alg, const Mat& dtilde,
                                const Vec& y) {
  int n = alg.dim;
  if (alg.step < 1) throw InvalidInput("find_soliton_vf_zero requires a nilpotent algebra");
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(dtilde));
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw InvalidInput("Dtilde must have positive-definite symmetric part");
  }
  auto series = lower_central_series(alg).terms;
  Vec u = Vec::Zero(n);
  for (size_t k = 0; k < series.size(); ++k) {
    Vec r = dtilde * u + right_invariant_field(alg, u, y);
    Mat proj = Mat::Identity(n, n);
    if (k + 1 < series.size())
      proj -= series[k + 1] * series[k + 1].transpose();
    Mat a = proj * dtilde * series[k];
    Vec rhs = -(proj * r);
    Vec c = a.colPivHouseholderQr().solve(rhs);
    if ((a * c - rhs).norm() > 1e-9 * (1.0 + rhs.norm()))
      throw Error("singular induced map in quotient solve");
    u += series[k] * c;
  }
  Vec final = dtilde * u + right_invariant_field(alg, u, y);
  if (final.norm() > 1e-10 * (1.0 + y.norm()))
    throw Error("soliton vector-field zero did not verify");
  return u;
}

// ---------------------------------------------------------------------------
// Einstein extension

struct SolvableExtension {
  LieAlgebra base_algebra;  // dimension dim+1, last generator is xi
  Mat D_used;
  double alpha = 0.0;
};

struct ExtensionReport {
  Mat ric_ext;                 // Ricci endomorphism of the extension
  double einstein_gap = 0.0;   // ||Ric + 1/2 Id||
  double tr_alphaD2 = 0.0;     // must be 1/2
  double trace_identity_gap = 0.0;  // |tr D^2 + 1/2 tr D|
  double der_projection_gap = 0.0;  // distance of -(Ric+Id/2) from Der(n)
  double jacobi_gap = 0.0;
  Mat metric_ext;
};

/// Rank-one solvable extension R xi + n with [xi, U] = alpha D U and the
/// product metric; Einstein with constant -1/2 when (n, h) is a lambda = -1/2
/// nilsoliton.
inline std::pair<SolvableExtension, ExtensionReport> einstein_extension(
    const LieAlgebra& alg, const Mat& h, const NilsolitonCertificate& cert) {
  if (!cert.certified)
    throw InvalidInput("einstein_extension requires a certified nilsoliton");
  int n = alg.dim;
  Mat h2 = h;
  if (!alg.is_abelian()) {
    h2 = rescale_to_lambda(h, cert);
    auto check = certify_nilsoliton(alg, h2, std::max(cert.residual * 20, 1e-9));
    if (std::abs(check.lambda + 0.5) > 1e-10)
      throw InvalidInput("metric does not rescale to lambda = -1/2");
  }
  Mat ric = ricci_oracle(alg, h2);
  Mat dm_raw = -(ric + 0.5 * Mat::Identity(n, n));
  auto der = derivation_space(alg);
  Mat dm = project_onto(der, dm_raw);
  ExtensionReport rep;
  rep.der_projection_gap = (dm - dm_raw).norm();
  double trd2 = (dm * dm).trace();
  if (trd2 <= 0.0) throw InvalidInput("degenerate soliton derivation");
  double alpha = 1.0 / std::sqrt(2.0 * trd2);
  rep.tr_alphaD2 = alpha * alpha * trd2;
  rep.trace_identity_gap = std::abs(trd2 + 0.5 * dm.trace());

  LieAlgebra ext;
  ext.dim = n + 1;
  ext.adm.assign(n + 1, Mat::Zero(n + 1, n + 1));
  for (int i = 0; i < n; ++i)
    ext.adm[i].topLeftCorner(n, n) = alg.adm[i];
  Mat ad_xi = alpha * dm;
  ext.adm[n].topLeftCorner(n, n) = ad_xi;
  for (int i = 0; i < n; ++i) ext.adm[i].col(n).head(n) = -ad_xi.col(i);
  auto vrep = validate_algebra(ext);
  rep.jacobi_gap = vrep.jacobi_gap;
  ext.step = 0;  // solvable, not nilpotent

  Mat hext = Mat::Identity(n + 1, n + 1);
  hext.topLeftCorner(n, n) = h2;
  rep.metric_ext = hext;
  rep.ric_ext = ricci_oracle(ext, hext);
  rep.einstein_gap =
      (rep.ric_ext + 0.5 * Mat::Identity(n + 1, n + 1)).norm();

  SolvableExtension se;
  se.base_algebra = ext;
  se.D_used = dm;
  se.alpha = alpha;
  return {se, rep};
}

}  // namespace solitonlab
