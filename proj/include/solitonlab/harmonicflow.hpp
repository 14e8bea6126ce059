#pragma once

// Twisted (rho-equivariant) harmonic map machinery: discrete tension field,
// energy and pull-back metric, heat flow into the SPD symmetric space,
// conformality (Hopf) residual and the nu density.

#include <functional>
#include <thread>

#include "solitonlab/common.hpp"
#include "solitonlab/spdgeom.hpp"
#include "solitonlab/surface.hpp"

namespace solitonlab {

struct HField {
  const TwistedSurfaceMesh* mesh = nullptr;
  std::vector<Mat> values;  // per-vertex SPD matrix
  bool on_slice = false;    // det = 1 everywhere

  int fiber_dim() const { return values.empty() ? 0 : int(values[0].rows()); }
};

inline HField constant_field(const TwistedSurfaceMesh& mesh, const Mat& value,
                             bool on_slice = true) {
  HField h;
  h.mesh = &mesh;
  h.values.assign(mesh.V, on_slice ? project_det1(value) : value);
  h.on_slice = on_slice;
  return h;
}

inline HField random_field(const TwistedSurfaceMesh& mesh, int n,
                           std::uint64_t seed, double sigma = 0.5,
                           bool on_slice = true) {
  auto rng = seeded_rng(seed);
  HField h;
  h.mesh = &mesh;
  h.on_slice = on_slice;
  h.values.reserve(mesh.V);
  for (int v = 0; v < mesh.V; ++v) {
    Mat m = sym_exp(random_symmetric(n, rng, sigma));
    h.values.push_back(on_slice ? project_det1(m) : m);
  }
  return h;
}

inline void check_field(const HField& hf) {
  if (!hf.mesh) throw InvalidInput("field has no mesh");
  if (int(hf.values.size()) != hf.mesh->V)
    throw InvalidInput("field size does not match mesh");
  if (hf.mesh->n_fiber != hf.fiber_dim())
    throw InvalidInput("field fiber dimension does not match mesh transports");
}

namespace detail {

inline void parallel_for(int n, const std::function<void(int)>& body) {
  int threads = env_thread_count();
  if (threads <= 1 || n < 4 * threads) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([=, &body] {
      int lo = t * chunk, hi = std::min(n, lo + chunk);
      for (int i = lo; i < hi; ++i) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// tau_v = (1/area_v) sum_j w_vj log_{h_v}(g_vj . h_j); zero iff the section
/// is discrete-harmonic.
inline std::vector<Mat> tension(const HField& hf) {
  check_field(hf);
  const auto& mesh = *hf.mesh;
  std::vector<Mat> tau(mesh.V);
  detail::parallel_for(mesh.V, [&](int v) {
    SpdFrame frame(hf.values[v]);
    Mat acc = Mat::Zero(hf.fiber_dim(), hf.fiber_dim());
    for (int e : mesh.vertex_edges[v]) {
      int j = mesh.other_vertex(e, v);
      Mat moved = group_act(mesh.transport_to(e, v), hf.values[j]);
      acc += mesh.edges[e].weight * frame.log(moved);
    }
    tau[v] = acc / mesh.vertex_area[v];
  });
  return tau;
}

inline std::vector<double> tension_norms(const HField& hf,
                                         const std::vector<Mat>& tau) {
  std::vector<double> out(tau.size());
  for (size_t v = 0; v < tau.size(); ++v)
    out[v] = gsym_norm(hf.values[v], tau[v]);
  return out;
}

inline double max_tension_norm(const HField& hf) {
  auto tau = tension(hf);
  double worst = 0.0;
  for (size_t v = 0; v < tau.size(); ++v)
    worst = std::max(worst, gsym_norm(hf.values[v], tau[v]));
  return worst;
}

/// Per-triangle pull-back metric in the triangle's orthonormal layout frame.
/// The base point is one Karcher fixed-point iteration from the arithmetic
/// mean of the three (gauge-aligned) corner values.
inline std::vector<Eigen::Matrix2d> pullback_metric(const HField& hf) {
  check_field(hf);
  const auto& mesh = *hf.mesh;
  std::vector<Eigen::Matrix2d> out(mesh.tris.size());
  detail::parallel_for(int(mesh.tris.size()), [&](int f) {
    const MeshTri& t = mesh.tris[f];
    // corner values in the gauge of corner 0
    Mat a0 = hf.values[t.v[0]];
    Mat a1 = group_act(mesh.transport_to(t.e[0], t.v[0]), hf.values[t.v[1]]);
    Mat a2 = group_act(mesh.transport_to(t.e[2], t.v[0]), hf.values[t.v[2]]);
    Mat mean = (a0 + a1 + a2) / 3.0;
    SpdFrame fm(mean);
    Mat mid = fm.exp((fm.log(a0) + fm.log(a1) + fm.log(a2)) / 3.0);
    SpdFrame fmid(mid);
    Mat v0 = fmid.log(a0), v1 = fmid.log(a1), v2 = fmid.log(a2);
    // planar layout: P0 = (0,0), P1 = (l0, 0), P2 from the side lengths
    double l0 = mesh.edges[t.e[0]].len;
    double l1 = mesh.edges[t.e[1]].len;
    double l2 = mesh.edges[t.e[2]].len;
    double x2 = (l2 * l2 + l0 * l0 - l1 * l1) / (2 * l0);
    double y2 = std::sqrt(std::max(0.0, l2 * l2 - x2 * x2));
    Eigen::Vector2d p0(0, 0), p1(l0, 0), p2(x2, y2);
    double two_a = l0 * y2;
    auto rot90 = [](const Eigen::Vector2d& u) {
      return Eigen::Vector2d(-u.y(), u.x());
    };
    Eigen::Vector2d g0 = rot90(p2 - p1) / two_a;
    Eigen::Vector2d g1 = rot90(p0 - p2) / two_a;
    Eigen::Vector2d g2 = rot90(p1 - p0) / two_a;
    Mat wx = g0.x() * v0 + g1.x() * v1 + g2.x() * v2;
    Mat wy = g0.y() * v0 + g1.y() * v1 + g2.y() * v2;
    Mat mi = mid.inverse();
    Eigen::Matrix2d q;
    q(0, 0) = (mi * wx * mi * wx).trace();
    q(0, 1) = q(1, 0) = (mi * wx * mi * wy).trace();
    q(1, 1) = (mi * wy * mi * wy).trace();
    out[f] = q;
  });
  return out;
}

inline double energy(const HField& hf) {
  auto q = pullback_metric(hf);
  const auto& mesh = *hf.mesh;
  double e = 0.0;
  for (size_t f = 0; f < q.size(); ++f) e += mesh.tri_area[f] * q[f].trace();
  return e;
}

/// Trace-free part of the pull-back metric; zero iff weakly conformal.
inline std::vector<double> conformality_residual(const HField& hf) {
  auto q = pullback_metric(hf);
  std::vector<double> out(q.size());
  for (size_t f = 0; f < q.size(); ++f) {
    Eigen::Matrix2d tf = q[f] - 0.5 * q[f].trace() * Eigen::Matrix2d::Identity();
    out[f] = tf.norm();
  }
  return out;
}

/// nu_v = area-weighted average of (1/2) tr Q over incident triangles.
inline std::vector<double> nu_field(const HField& hf) {
  auto q = pullback_metric(hf);
  const auto& mesh = *hf.mesh;
  std::vector<double> num(mesh.V, 0.0), den(mesh.V, 0.0);
  for (size_t f = 0; f < q.size(); ++f)
    for (int s = 0; s < 3; ++s) {
      num[mesh.tris[f].v[s]] += mesh.tri_area[f] * 0.5 * q[f].trace();
      den[mesh.tris[f].v[s]] += mesh.tri_area[f];
    }
  std::vector<double> nu(mesh.V);
  for (int v = 0; v < mesh.V; ++v) nu[v] = std::max(0.0, num[v] / den[v]);
  return nu;
}

struct HarmonicFlowOptions {
  double tol = 1e-8;       // on max_v |tau_v|_gsym
  int max_iters = 400000;
  double dt = 0.0;         // 0: derive from the stability contract
  double dt_safety = 0.9;  // dt <= safety * min_v(area_v / sum_j |w_vj|)
  int trace_stride = 50;
};

struct FlowResult {
  HField field;
  bool converged = false;
  bool stalled = false;
  int iters = 0;
  double final_tension = 0.0;
  double final_energy = 0.0;
  std::vector<double> energy_trace;
};

inline double stable_dt(const TwistedSurfaceMesh& mesh, double safety) {
  double dt = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mesh.V; ++v) {
    double wsum = 0.0;
    for (int e : mesh.vertex_edges[v]) wsum += std::abs(mesh.edges[e].weight);
    if (wsum > 0) dt = std::min(dt, mesh.vertex_area[v] / wsum);
  }
  return safety * dt;
}

/// Explicit heat flow h <- exp_h(dt tau).  Energy is non-increasing across
/// accepted steps; a violating step is halved.  Stalls (reducible monodromy)
/// are reported as a diagnostic, not an error.
inline FlowResult harmonic_flow(const HField& init, HarmonicFlowOptions opts = {}) {
  check_field(init);
  const auto& mesh = *init.mesh;
  double dt0 = opts.dt > 0 ? opts.dt : stable_dt(mesh, opts.dt_safety);
  double dt = dt0;
  FlowResult res;
  res.field = init;
  double e_cur = energy(res.field);
  // progress window for the reducible-monodromy stall diagnostic
  double best_tension = std::numeric_limits<double>::infinity();
  int no_progress = 0;
  for (int it = 0; it < opts.max_iters; ++it) {
    auto tau = tension(res.field);
    double worst = 0.0, l2 = 0.0;
    for (int v = 0; v < mesh.V; ++v) {
      double tn = gsym_norm(res.field.values[v], tau[v]);
      worst = std::max(worst, tn);
      l2 += mesh.vertex_area[v] * tn * tn;
    }
    if (it % opts.trace_stride == 0) res.energy_trace.push_back(e_cur);
    if (worst <= opts.tol) {
      res.converged = true;
      res.iters = it;
      res.final_tension = worst;
      res.final_energy = energy(res.field);
      return res;
    }
    if (worst < 0.999 * best_tension) {
      best_tension = worst;
      no_progress = 0;
    } else if (++no_progress > 400) {
      res.stalled = true;
      res.iters = it;
      res.final_tension = worst;
      res.final_energy = energy(res.field);
      return res;
    }
    // Energy must not increase across accepted steps; the check is enforced
    // only while the expected first-order drop dt <tau,tau> is resolvable
    // above the evaluation noise of E itself.
    double noise = 1e-12 * std::max(1.0, std::abs(e_cur));
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      HField cand = res.field;
      detail::parallel_for(mesh.V, [&](int v) {
        cand.values[v] = exp_map(res.field.values[v], dt * tau[v]);
        if (cand.on_slice) cand.values[v] = project_det1(cand.values[v]);
      });
      double expected_drop = dt * l2;
      if (expected_drop <= 8.0 * noise) {
        res.field = std::move(cand);
        accepted = true;
        break;
      }
      double e_new = energy(cand);
      if (e_new <= e_cur + noise) {
        res.field = std::move(cand);
        e_cur = e_new;
        accepted = true;
      } else {
        dt *= 0.5;
      }
    }
    if (!accepted) {
      res.stalled = true;
      res.iters = it;
      res.final_tension = worst;
      res.final_energy = e_cur;
      return res;
    }
    dt = std::min(dt * 1.5, dt0);
  }
  auto tau = tension(res.field);
  double worst = 0.0;
  for (int v = 0; v < mesh.V; ++v)
    worst = std::max(worst, gsym_norm(res.field.values[v], tau[v]));
  res.iters = opts.max_iters;
  res.final_tension = worst;
  res.final_energy = energy(res.field);
  return res;
}

/// Global gauge move h -> q.h (transports must be conjugated alongside).
inline HField act_on_field(const Mat& q, const HField& hf) {
  HField out = hf;
  for (auto& v : out.values) v = group_act(q, v);
  return out;
}

}  // namespace solitonlab
