#pragma once

// Conformal-factor equation on the mesh:  Delta u = (1/2) e^{2u} - 1 - nu,
// solved by Newton with the exact sparse Jacobian, plus the Gauss-Bonnet
// constraint and the constrained variational diagnostics.

#include <Eigen/SparseCholesky>

#include "solitonlab/common.hpp"
#include "solitonlab/surface.hpp"

namespace solitonlab {

struct BaseSolveOptions {
  double tol = 1e-10;  // on the sup norm of the pointwise residual
  int max_iters = 50;
  bool check_uniqueness = true;  // re-solve from u = 1 and compare
};

struct BaseSolveResult {
  Vec u;
  double residual = 0.0;
  int iters = 0;
  std::vector<double> residual_history;
  double uniqueness_gap = 0.0;
  bool curvature_warning = false;  // background far from curvature -1
};

namespace detail {

inline Vec base_residual(const SpMat& l, const std::vector<double>& area,
                         const Vec& u, const Vec& nu) {
  Vec f = l * u;
  for (int v = 0; v < u.size(); ++v)
    f[v] = f[v] / area[v] - 0.5 * std::exp(2.0 * u[v]) + 1.0 + nu[v];
  return f;
}

}  // namespace detail

inline BaseSolveResult solve_base(const TwistedSurfaceMesh& mesh, const Vec& nu,
                                  BaseSolveOptions opts = {}) {
  int V = mesh.V;
  if (nu.size() != V) throw InvalidInput("nu has wrong size");
  if (nu.minCoeff() < 0.0) throw InvalidInput("nu must be nonnegative");
  SpMat l = laplacian(mesh);
  const auto& area = mesh.vertex_area;

  auto newton = [&](double u0) {
    Vec u = Vec::Constant(V, u0);
    std::vector<double> hist;
    for (int it = 0; it < opts.max_iters; ++it) {
      Vec f = detail::base_residual(l, area, u, nu);
      double rn = f.cwiseAbs().maxCoeff();
      hist.push_back(rn);
      if (rn <= opts.tol) return std::make_pair(u, hist);
      SpMat j = l;
      std::vector<Eigen::Triplet<double>> diag;
      for (int v = 0; v < V; ++v)
        diag.emplace_back(v, v, -area[v] * std::exp(2.0 * u[v]));
      SpMat d(V, V);
      d.setFromTriplets(diag.begin(), diag.end());
      j += d;
      Eigen::SimplicialLDLT<SpMat> solver(j);
      if (solver.info() != Eigen::Success)
        throw NonConvergence("base equation: Jacobian factorisation failed");
      Vec rhs = -(f.array() * Eigen::Map<const Eigen::ArrayXd>(area.data(), V)).matrix();
      Vec step = solver.solve(rhs);
      // damping by halving when the full step does not reduce the residual
      double s = 1.0;
      for (int half = 0; half < 30; ++half) {
        Vec cand = u + s * step;
        double rc = detail::base_residual(l, area, cand, nu).cwiseAbs().maxCoeff();
        if (rc < rn || s < 1e-8) {
          u = cand;
          break;
        }
        s *= 0.5;
      }
    }
    double rn = detail::base_residual(l, area, u, nu).cwiseAbs().maxCoeff();
    hist.push_back(rn);
    if (rn > opts.tol) {
      std::string msg = "base equation Newton did not converge; residuals:";
      for (double r : hist) msg += " " + std::to_string(r);
      throw NonConvergence(msg);
    }
    return std::make_pair(u, hist);
  };

  auto [u, hist] = newton(0.0);
  BaseSolveResult res;
  res.u = u;
  res.residual_history = hist;
  res.residual = hist.back();
  res.iters = int(hist.size()) - 1;
  res.curvature_warning =
      std::abs(2.0 * M_PI * mesh.chi / mesh.total_area + 1.0) > 0.2;
  if (opts.check_uniqueness) {
    auto [u2, hist2] = newton(1.0);
    res.uniqueness_gap = (u - u2).cwiseAbs().maxCoeff();
  }
  return res;
}

/// |2 pi chi + 1/2 Int e^{2u} - Int nu|; at a solved u this equals the
/// area-weighted integral of the pointwise residual.
inline double gauss_bonnet_constraint(const TwistedSurfaceMesh& mesh, const Vec& u,
                                      const Vec& nu) {
  double acc = 2.0 * M_PI * mesh.chi;
  for (int v = 0; v < mesh.V; ++v)
    acc += (0.5 * std::exp(2.0 * u[v]) - nu[v]) * mesh.vertex_area[v];
  return std::abs(acc);
}

/// I[u] = Int |du|^2 - u (1 + nu); decreases along descent paths to the
/// constrained solution (diagnostic only).
inline double energy_functional(const TwistedSurfaceMesh& mesh, const Vec& u,
                                const Vec& nu) {
  double dirichlet = 0.0;
  for (const auto& e : mesh.edges) {
    double d = u[e.i] - u[e.j];
    dirichlet += e.weight * d * d;
  }
  double linear = 0.0;
  for (int v = 0; v < mesh.V; ++v)
    linear += u[v] * (1.0 + nu[v]) * mesh.vertex_area[v];
  return dirichlet - linear;
}

/// Pointwise residual of the curvature form of the base equation,
/// |K(g_B) + 1/2 - nu e^{-2u}| with K(g_B) = e^{-2u}(-Delta u - 1).
inline Vec check_base_equation(const TwistedSurfaceMesh& mesh, const Vec& u,
                               const Vec& nu) {
  SpMat l = laplacian(mesh);
  Vec lu = l * u;
  Vec r(mesh.V);
  for (int v = 0; v < mesh.V; ++v) {
    double e2u = std::exp(2.0 * u[v]);
    double k = (-(lu[v] / mesh.vertex_area[v]) - 1.0) / e2u;
    r[v] = std::abs(k + 0.5 - nu[v] / e2u);
  }
  return r;
}

}  // namespace solitonlab
