#include <doctest.h>

#include "solitonlab/harmonicflow.hpp"

using namespace solitonlab;

namespace {

Mat rot2(double th) {
  Mat m(2, 2);
  m << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return m;
}

// twisted cycle: flat torus whose x-loop carries exp(S dhat), sampled with the
// geodesic field h(i,j) = act(exp(i ds dhat), Id)
struct GeodesicChain {
  TwistedSurfaceMesh mesh;
  HField field;
  double ds;
  Mat dhat;
};

GeodesicChain make_chain(int nx, double span = 3.0, double d11 = 0.4) {
  GeodesicChain c;
  c.ds = span / nx;
  c.dhat = Mat::Zero(2, 2);
  c.dhat(0, 0) = d11;
  c.dhat(1, 1) = -d11;
  Mat seam = sym_exp(Mat(span * c.dhat));
  c.mesh = build_flat_torus(nx, 4, c.ds, 0.3, seam);
  c.field.mesh = &c.mesh;
  c.field.on_slice = true;
  c.field.values.resize(c.mesh.V);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < nx; ++i) {
      Mat q = sym_exp(Mat(i * c.ds * c.dhat));
      c.field.values[j * nx + i] = group_act(q, Mat::Identity(2, 2));
    }
  return c;
}

}  // namespace

TEST_CASE("constant field with stabilising transports has zero tension") {
  auto mesh = build_genus2_mesh(1);
  attach_representation(mesh, trivial_representation(2));
  auto hf = constant_field(mesh, Mat::Identity(2, 2));
  for (const Mat& t : tension(hf)) CHECK(t.norm() <= 1e-12);

  Representation rot;
  rot.gens["a1"] = rot2(0.3);
  rot.gens["b1"] = rot2(1.1);
  rot.gens["a2"] = rot2(-0.4);
  rot.gens["b2"] = rot2(0.9);
  attach_representation(mesh, rot);
  auto hf2 = constant_field(mesh, Mat::Identity(2, 2));
  for (const Mat& t : tension(hf2)) CHECK(t.norm() <= 1e-12);
}

TEST_CASE("tension linearises exactly on a commuting family") {
  auto mesh = build_genus2_mesh(1);
  attach_representation(mesh, trivial_representation(2));
  Mat s(2, 2);
  s << 0.21, 0.05, 0.05, -0.13;
  auto rng = seeded_rng(7);
  std::normal_distribution<double> g;
  Vec phi(mesh.V);
  for (int v = 0; v < mesh.V; ++v) phi[v] = g(rng);
  HField hf;
  hf.mesh = &mesh;
  hf.on_slice = false;
  for (int v = 0; v < mesh.V; ++v) hf.values.push_back(sym_exp(Mat(phi[v] * s)));
  auto tau = tension(hf);
  Vec lphi = laplacian(mesh) * phi;
  for (int v = 0; v < mesh.V; ++v) {
    // logs along the commuting family are (phi_j - phi_v) h^(1/2) S h^(1/2)
    Mat expect = lphi[v] / mesh.vertex_area[v] * (hf.values[v] * s);
    CHECK((tau[v] - expect).norm() <= 1e-11 * std::max(1.0, expect.norm()));
  }
}

TEST_CASE("geodesic twisted cycle: tension vanishes to roundoff, well inside O(ds^2)") {
  for (int nx : {16, 32, 64}) {
    auto c = make_chain(nx);
    double worst = max_tension_norm(c.field);
    CHECK(worst <= 1e-10);           // roundoff scale
    CHECK(worst <= c.ds * c.ds);     // a fortiori the second-order envelope
  }
}

TEST_CASE("geodesic chain energy density equals the squared speed") {
  auto c = make_chain(48);
  auto q = pullback_metric(c.field);
  double speed2 = 4.0 * (c.dhat * c.dhat).trace();
  for (size_t f = 0; f < q.size(); ++f) {
    CHECK(q[f].trace() == doctest::Approx(speed2).epsilon(1e-8));
    // geodesics seen from the surface are maximally non-conformal
    Eigen::Matrix2d tf = q[f] - 0.5 * q[f].trace() * Eigen::Matrix2d::Identity();
    CHECK(tf.norm() == doctest::Approx(speed2 / std::sqrt(2.0)).epsilon(1e-6));
  }
}

TEST_CASE("constant untwisted field has zero energy and pull-back") {
  auto mesh = build_genus2_mesh(0);
  attach_representation(mesh, trivial_representation(2));
  auto hf = constant_field(mesh, Mat::Identity(2, 2));
  CHECK(energy(hf) <= 1e-18);
  for (auto& q : pullback_metric(hf)) CHECK(q.norm() <= 1e-12);
  for (double r : conformality_residual(hf)) CHECK(r <= 1e-12);
  for (double nv : nu_field(hf)) CHECK(nv <= 1e-12);
}

TEST_CASE("energy bookkeeping and isometry invariance") {
  auto c = make_chain(24);
  auto q = pullback_metric(c.field);
  double manual = 0.0;
  for (size_t f = 0; f < q.size(); ++f) manual += c.mesh.tri_area[f] * q[f].trace();
  CHECK(energy(c.field) == doctest::Approx(manual).epsilon(1e-15));

  // q commuting with the (diagonal) seam transport
  Mat g = Mat::Zero(2, 2);
  g(0, 0) = 1.7;
  g(1, 1) = 1.0 / 1.7;
  HField moved = act_on_field(g, c.field);
  CHECK(energy(moved) == doctest::Approx(energy(c.field)).epsilon(1e-10));
}

TEST_CASE("flow with trivial monodromy collapses to a point: E -> 0") {
  auto mesh = build_genus2_mesh(1);
  attach_representation(mesh, trivial_representation(2));
  auto init = random_field(mesh, 2, 12345, 0.4);
  auto res = harmonic_flow(init);
  CHECK(res.converged);
  CHECK(res.final_energy <= 1e-8);
  // energy trace is non-increasing
  for (size_t i = 1; i < res.energy_trace.size(); ++i)
    CHECK(res.energy_trace[i] <= res.energy_trace[i - 1] + 1e-12);
}

TEST_CASE("flow with orthogonal monodromy converges to the stabilised point") {
  auto mesh = build_genus2_mesh(1);
  Representation rot;
  rot.gens["a1"] = rot2(0.41);
  rot.gens["b1"] = rot2(1.13);
  rot.gens["a2"] = rot2(-0.29);
  rot.gens["b2"] = rot2(0.67);
  attach_representation(mesh, rot);
  auto init = random_field(mesh, 2, 999, 0.3);
  auto res = harmonic_flow(init);
  CHECK(res.converged);
  CHECK(res.final_energy <= 1e-8);
  for (int v = 0; v < mesh.V; ++v)
    CHECK(dist(res.field.values[v], Mat::Identity(2, 2)) <= 1e-2);
}

TEST_CASE("flow equivariance under a global isometry commuting with transports") {
  auto c = make_chain(12);
  auto init = random_field(c.mesh, 2, 4242, 0.2);
  Mat g = Mat::Zero(2, 2);
  g(0, 0) = 1.4;
  g(1, 1) = 1.0 / 1.4;
  HarmonicFlowOptions opts;
  opts.max_iters = 60;
  opts.tol = 0.0;  // run a fixed number of steps
  auto r1 = harmonic_flow(init, opts);
  auto r2 = harmonic_flow(act_on_field(g, init), opts);
  for (int v = 0; v < c.mesh.V; ++v)
    CHECK(dist(r2.field.values[v], group_act(g, r1.field.values[v])) <= 1e-9);
}

TEST_CASE("nu and conformality residual are gauge invariant") {
  auto mesh = build_genus2_mesh(1);
  auto rep = uniformizing_representation(mesh);
  attach_representation(mesh, rep);
  HField dev;
  dev.mesh = &mesh;
  dev.on_slice = true;
  for (int v = 0; v < mesh.V; ++v) dev.values.push_back(disk_to_spd(mesh.pos[v]));
  auto nu1 = nu_field(dev);
  auto cf1 = conformality_residual(dev);

  Mat g(2, 2);
  g << 1.3, 0.2, 0.1, 0.9;
  g /= std::sqrt(std::abs(g.determinant()));
  auto mesh2 = build_genus2_mesh(1);
  Representation conj;
  for (auto& [k, m] : rep.gens) conj.gens[k] = g * m * g.inverse();
  attach_representation(mesh2, conj);
  HField dev2;
  dev2.mesh = &mesh2;
  dev2.on_slice = true;
  for (int v = 0; v < mesh2.V; ++v)
    dev2.values.push_back(group_act(g, disk_to_spd(mesh2.pos[v])));
  auto nu2 = nu_field(dev2);
  auto cf2 = conformality_residual(dev2);
  for (int v = 0; v < mesh.V; ++v) CHECK(std::abs(nu1[v] - nu2[v]) <= 1e-10);
  for (size_t f = 0; f < cf1.size(); ++f) CHECK(std::abs(cf1[f] - cf2[f]) <= 1e-10);
}

TEST_CASE("developing map: nu near 2, energy near 16 pi, tension refines") {
  double prev_tension = -1.0;
  for (int s : {1, 2}) {
    auto mesh = build_genus2_mesh(s);
    attach_representation(mesh, uniformizing_representation(mesh));
    HField dev;
    dev.mesh = &mesh;
    dev.on_slice = true;
    for (int v = 0; v < mesh.V; ++v) dev.values.push_back(disk_to_spd(mesh.pos[v]));
    double e = energy(dev);
    CHECK(e == doctest::Approx(16.0 * M_PI).epsilon(0.08));
    auto nu = nu_field(dev);
    double mean_nu = 0.0;
    for (double x : nu) mean_nu += x;
    mean_nu /= nu.size();
    CHECK(mean_nu == doctest::Approx(2.0).epsilon(0.08));
    double t = max_tension_norm(dev);
    if (prev_tension > 0) CHECK(t < 0.8 * prev_tension);
    prev_tension = t;
  }
}
