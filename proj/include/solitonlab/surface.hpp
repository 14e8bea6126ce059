#pragma once

// Discrete closed-surface model: triangle meshes with intrinsic edge lengths,
// cotangent Laplacian, angle-defect curvature, and a flat twisted connection
// stored as per-edge transport elements.  The built-in base is the regular
// hyperbolic octagon with the identification a b a^-1 b^-1 c d c^-1 d^-1.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <complex>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "solitonlab/common.hpp"

namespace solitonlab {

using Cx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Poincare disk helpers

inline double hyp_dist_disk(Cx z, Cx w) {
  double t = std::abs((z - w) / (1.0 - std::conj(w) * z));
  return 2.0 * std::atanh(std::min(t, 1.0 - 1e-16));
}

/// Disk isometry z -> (a z + b) / (conj(b) z + conj(a)), |a|^2 - |b|^2 = 1.
struct Mobius {
  Cx a{1.0, 0.0}, b{0.0, 0.0};

  Cx operator()(Cx z) const {
    return (a * z + b) / (std::conj(b) * z + std::conj(a));
  }
  Mobius inv() const { return {std::conj(a), -b}; }
  Mobius compose(const Mobius& o) const {
    Cx na = a * o.a + b * std::conj(o.b);
    Cx nb = a * o.b + b * std::conj(o.a);
    double d = std::sqrt(std::norm(na) - std::norm(nb));
    return {na / d, nb / d};
  }
};

inline Mobius mobius_translate_to_origin(Cx p) {
  double s = std::sqrt(1.0 - std::norm(p));
  return {Cx(1.0, 0.0) / s, -p / s};
}

inline Mobius mobius_rotation(double theta) {
  return {std::polar(1.0, theta / 2.0), Cx(0.0, 0.0)};
}

inline Cx hyp_midpoint(Cx z, Cx w) {
  Mobius t = mobius_translate_to_origin(z);
  Cx w2 = t(w);
  double r = std::abs(w2);
  if (r < 1e-300) return z;
  double rm = std::tanh(0.5 * std::atanh(r));
  return t.inv()(w2 / r * rm);
}

/// Isometry mapping (p,q) to (0, positive real axis).
inline Mobius mobius_align(Cx p, Cx q) {
  Mobius t = mobius_translate_to_origin(p);
  return mobius_rotation(-std::arg(t(q))).compose(t);
}

/// The corresponding real Moebius matrix on the upper half-plane, det = 1.
inline Eigen::Matrix2d su11_to_sl2(const Mobius& m) {
  Eigen::Matrix2d g;
  g << m.a.real() + m.b.real(), m.a.imag() - m.b.imag(),
      -m.a.imag() - m.b.imag(), m.a.real() - m.b.real();
  return g;
}

inline Cx disk_to_uhp(Cx z) { return Cx(0, 1) * (1.0 + z) / (1.0 - z); }

/// Equivariant embedding of the half-plane into det-1 SPD(2):
/// S(g.z) = g . S(z) for the pull-back action.
inline Mat uhp_to_spd(Cx z) {
  double x = z.real(), y = z.imag();
  Mat s(2, 2);
  s << 1.0 / y, -x / y, -x / y, (x * x + y * y) / y;
  return s;
}

inline Mat disk_to_spd(Cx z) { return uhp_to_spd(disk_to_uhp(z)); }

// ---------------------------------------------------------------------------
// Mesh types

struct MeshEdge {
  int i = -1, j = -1;
  double len = 0.0;
  std::vector<int> word;  // deck word (generator indices, +-1..4), may be empty
  Mat transport;          // carries fibre data from j into i's gauge
  Mat transport_inv;
  double weight = 0.0;  // cotangent weight
};

struct MeshTri {
  std::array<int, 3> v;
  std::array<int, 3> e;  // e[s] joins v[s] and v[(s+1)%3]
};

struct Representation {
  std::map<std::string, Mat> gens;  // keys a1, b1, a2, b2
};

struct TwistedSurfaceMesh {
  int V = 0;
  std::vector<MeshTri> tris;
  std::vector<MeshEdge> edges;
  int chi = 0;
  int n_fiber = 0;
  bool rep_attached = false;

  // geometry caches filled by finalize_mesh
  std::vector<double> tri_area;                  // hyperbolic-angle areas
  std::vector<std::array<double, 3>> tri_angle;  // Euclidean corner angles
  std::vector<double> vertex_area;
  std::vector<double> defect;
  std::vector<std::vector<int>> vertex_edges;  // incident edge ids
  double total_area = 0.0;

  // builder-only extras (empty for file meshes)
  std::vector<Cx> pos;        // canonical disk position per vertex
  std::vector<char> is_cone;  // octagon corner class
  std::vector<Mat> gen_sl2;   // uniformizing generators a1,b1,a2,b2

  const Mat& transport_to(int edge, int to_vertex) const {
    const MeshEdge& e = edges[edge];
    return to_vertex == e.i ? e.transport : e.transport_inv;
  }
  int other_vertex(int edge, int v) const {
    const MeshEdge& e = edges[edge];
    return e.i == v ? e.j : e.i;
  }
  double edge_len(int i, int j) const {
    for (const auto& e : edges)
      if ((e.i == i && e.j == j) || (e.i == j && e.j == i)) return e.len;
    throw InvalidInput("no such edge");
  }
};

// ---------------------------------------------------------------------------
// Geometry finalisation

namespace detail {

inline std::array<double, 3> euclid_angles(double l0, double l1, double l2) {
  // angle[k] is at the corner opposite side k
  auto ang = [](double a, double b, double c) {
    return std::acos(std::clamp((b * b + c * c - a * a) / (2 * b * c), -1.0, 1.0));
  };
  return {ang(l0, l1, l2), ang(l1, l2, l0), ang(l2, l0, l1)};
}

inline double hyp_area(double l0, double l1, double l2) {
  auto ang = [](double a, double b, double c) {
    double v = (std::cosh(b) * std::cosh(c) - std::cosh(a)) /
               (std::sinh(b) * std::sinh(c));
    return std::acos(std::clamp(v, -1.0, 1.0));
  };
  return M_PI - ang(l0, l1, l2) - ang(l1, l2, l0) - ang(l2, l0, l1);
}

}  // namespace detail

/// Validates lengths and fills every cached geometric quantity.  Triangle
/// areas use the hyperbolic angle-defect formula, so for a geodesic
/// triangulation of a hyperbolic surface the total area is exactly -2 pi chi.
/// Vertex curvature uses Euclidean-cone angle defects.
inline void finalize_mesh(TwistedSurfaceMesh& mesh) {
  int V = mesh.V, F = int(mesh.tris.size()), E = int(mesh.edges.size());
  if (V - E + F != mesh.chi)
    throw InvalidInput("Euler characteristic mismatch: V-E+F = " +
                       std::to_string(V - E + F));
  mesh.tri_area.assign(F, 0.0);
  mesh.tri_angle.assign(F, {0, 0, 0});
  mesh.vertex_area.assign(V, 0.0);
  mesh.defect.assign(V, 2.0 * M_PI);
  mesh.vertex_edges.assign(V, {});
  for (auto& e : mesh.edges) e.weight = 0.0;
  mesh.total_area = 0.0;

  for (int f = 0; f < F; ++f) {
    const MeshTri& t = mesh.tris[f];
    double l0 = mesh.edges[t.e[0]].len;  // side v0-v1
    double l1 = mesh.edges[t.e[1]].len;  // side v1-v2
    double l2 = mesh.edges[t.e[2]].len;  // side v2-v0
    if (!(l0 + l1 > l2 && l1 + l2 > l0 && l2 + l0 > l1))
      throw InvalidInput("triangle inequality violated in face " + std::to_string(f));
    // Euclidean corner angles: angle at v0 is opposite side v1-v2 (= l1)
    auto ang = detail::euclid_angles(l1, l2, l0);
    // ang[0] at v0, ang[1] at v1, ang[2] at v2
    for (int s = 0; s < 3; ++s) {
      if (ang[s] < 1e-8)
        throw InvalidInput("degenerate triangle (angle < 1e-8) in face " +
                           std::to_string(f));
      mesh.tri_angle[f][s] = ang[s];
      mesh.defect[t.v[s]] -= ang[s];
    }
    double area = detail::hyp_area(l0, l1, l2);
    if (area <= 0.0) throw InvalidInput("non-positive triangle area");
    mesh.tri_area[f] = area;
    mesh.total_area += area;
    for (int s = 0; s < 3; ++s) {
      mesh.vertex_area[t.v[s]] += area / 3.0;
      // cotangent weight for side s sits at the opposite corner (s+2)%3
      double c = ang[(s + 2) % 3];
      mesh.edges[t.e[s]].weight += 0.5 * std::cos(c) / std::sin(c);
    }
  }
  for (int e = 0; e < E; ++e) {
    mesh.vertex_edges[mesh.edges[e].i].push_back(e);
    mesh.vertex_edges[mesh.edges[e].j].push_back(e);
  }
  if (mesh.is_cone.empty()) mesh.is_cone.assign(V, 0);
}

/// Intrinsic cotangent operator, negative semidefinite, constants in kernel.
inline SpMat laplacian(const TwistedSurfaceMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.edges.size() * 4);
  for (const auto& e : mesh.edges) {
    trip.emplace_back(e.i, e.j, e.weight);
    trip.emplace_back(e.j, e.i, e.weight);
    trip.emplace_back(e.i, e.i, -e.weight);
    trip.emplace_back(e.j, e.j, -e.weight);
  }
  SpMat l(mesh.V, mesh.V);
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

inline std::vector<double> vertex_areas(const TwistedSurfaceMesh& mesh) {
  return mesh.vertex_area;
}

/// Alternative vertex areas: mixed Voronoi cells (circumcentric when the
/// triangle is non-obtuse, half/quarter split otherwise), computed from the
/// Euclidean-cone picture.  Barycentric areas remain the default everywhere.
inline std::vector<double> mixed_voronoi_areas(const TwistedSurfaceMesh& mesh) {
  std::vector<double> area(mesh.V, 0.0);
  for (size_t f = 0; f < mesh.tris.size(); ++f) {
    const MeshTri& t = mesh.tris[f];
    double l0 = mesh.edges[t.e[0]].len;  // v0-v1
    double l1 = mesh.edges[t.e[1]].len;  // v1-v2
    double l2 = mesh.edges[t.e[2]].len;  // v2-v0
    auto ang = detail::euclid_angles(l1, l2, l0);  // ang[s] at v[s]
    double s = 0.5 * (l0 + l1 + l2);
    double ta = std::sqrt(std::max(0.0, s * (s - l0) * (s - l1) * (s - l2)));
    int obtuse = -1;
    for (int k = 0; k < 3; ++k)
      if (ang[k] > M_PI / 2) obtuse = k;
    if (obtuse >= 0) {
      for (int k = 0; k < 3; ++k)
        area[t.v[k]] += (k == obtuse) ? ta / 2 : ta / 4;
      continue;
    }
    // opposite[k] = squared length of the side not touching v[k]
    double opp[3] = {l1, l2, l0};
    for (int k = 0; k < 3; ++k) {
      double adj1 = opp[(k + 1) % 3], adj2 = opp[(k + 2) % 3];
      area[t.v[k]] += (adj1 * adj1 / std::tan(ang[(k + 1) % 3]) +
                       adj2 * adj2 / std::tan(ang[(k + 2) % 3])) / 8.0;
    }
  }
  return area;
}

/// K_v = angle defect / vertex area.
inline std::vector<double> gauss_curvature(const TwistedSurfaceMesh& mesh) {
  std::vector<double> k(mesh.V);
  for (int v = 0; v < mesh.V; ++v) k[v] = mesh.defect[v] / mesh.vertex_area[v];
  return k;
}

// ---------------------------------------------------------------------------
// Genus-2 builder

namespace detail {

struct BuildTri {
  std::array<Cx, 3> p;
};

struct OctagonBuilder {
  std::vector<Mobius> gens;      // a, b, c, d pairing maps
  std::vector<BuildTri> faces;
  std::array<Cx, 8> corner;

  OctagonBuilder() {
    double cot8 = 1.0 / std::tan(M_PI / 8.0);
    double rv = std::acosh(cot8 * cot8);  // circumradius
    double rad = std::tanh(rv / 2.0);
    for (int k = 0; k < 8; ++k)
      corner[k] = std::polar(rad, k * M_PI / 4.0);
    auto pair_map = [&](int src_from, int src_to, int dst_from, int dst_to) {
      Mobius a = mobius_align(corner[src_from], corner[src_to]);
      Mobius b = mobius_align(corner[dst_from], corner[dst_to]);
      return b.inv().compose(a);
    };
    // boundary word a b a^-1 b^-1 c d c^-1 d^-1 on sides s_k = (V_k, V_k+1);
    // generator directions chosen so the standard commutator relator holds
    gens.push_back(pair_map(3, 2, 0, 1));  // a1 : (V3,V2) -> (V0,V1)
    gens.push_back(pair_map(1, 2, 4, 3));  // b1 : (V1,V2) -> (V4,V3)
    gens.push_back(pair_map(7, 6, 4, 5));  // a2 : (V7,V6) -> (V4,V5)
    gens.push_back(pair_map(5, 6, 0, 7));  // b2 : (V5,V6) -> (V0,V7)
    for (int k = 0; k < 8; ++k) {
      Cx m = hyp_midpoint(corner[k], corner[(k + 1) % 8]);
      faces.push_back({{Cx(0, 0), corner[k], m}});
      faces.push_back({{Cx(0, 0), m, corner[(k + 1) % 8]}});
    }
  }

  Mobius word_map(const std::vector<int>& w) const {
    Mobius m;
    for (int g : w)
      m = m.compose(g > 0 ? gens[g - 1] : gens[-g - 1].inv());
    return m;
  }

  void subdivide() {
    std::vector<BuildTri> next;
    next.reserve(faces.size() * 4);
    for (const auto& t : faces) {
      Cx m01 = hyp_midpoint(t.p[0], t.p[1]);
      Cx m12 = hyp_midpoint(t.p[1], t.p[2]);
      Cx m20 = hyp_midpoint(t.p[2], t.p[0]);
      next.push_back({{t.p[0], m01, m20}});
      next.push_back({{m01, t.p[1], m12}});
      next.push_back({{m20, m12, t.p[2]}});
      next.push_back({{m01, m12, m20}});
    }
    faces = std::move(next);
  }
};

// Spatial hash for welding nearly-identical positions.
struct PointIndex {
  double cell = 1e-7;
  std::unordered_map<long long, std::vector<int>> grid;
  std::vector<Cx> pts;

  long long key(double x, double y) const {
    long long a = llround(x / cell), b = llround(y / cell);
    return a * 2000003LL + b;
  }
  int find(Cx p, double tol) const {
    long long a = llround(p.real() / cell), b = llround(p.imag() / cell);
    for (long long da = -1; da <= 1; ++da)
      for (long long db = -1; db <= 1; ++db) {
        auto it = grid.find((a + da) * 2000003LL + (b + db));
        if (it == grid.end()) continue;
        for (int id : it->second)
          if (std::abs(pts[id] - p) <= tol) return id;
      }
    return -1;
  }
  int insert(Cx p) {
    int id = int(pts.size());
    pts.push_back(p);
    grid[key(p.real(), p.imag())].push_back(id);
    return id;
  }
};

struct UnionFind {
  std::vector<int> up;
  explicit UnionFind(int n) : up(n) {
    for (int i = 0; i < n; ++i) up[i] = i;
  }
  int find(int x) {
    while (up[x] != x) x = up[x] = up[up[x]];
    return x;
  }
  void unite(int a, int b) { up[find(a)] = find(b); }
};

}  // namespace detail

/// Regular hyperbolic octagon (interior angles pi/4) with the identification
/// a b a^-1 b^-1 c d c^-1 d^-1, triangulated by a 16-face fan through edge
/// midpoints and `subdiv` rounds of 4:1 midpoint subdivision.  Transports of
/// all edges start as the identity (trivial representation); deck words are
/// stored so attach_representation can install any twisted connection.
inline TwistedSurfaceMesh build_genus2_mesh(int subdiv, int n_fiber = 2) {
  if (subdiv < 0) throw InvalidInput("subdiv must be >= 0");
  detail::OctagonBuilder ob;
  for (int s = 0; s < subdiv; ++s) ob.subdivide();
  int F = int(ob.faces.size());

  // 1. collect position nodes
  detail::PointIndex idx;
  std::vector<std::array<int, 3>> face_node(F);
  for (int f = 0; f < F; ++f)
    for (int s = 0; s < 3; ++s) {
      Cx p = ob.faces[f].p[s];
      int id = idx.find(p, 1e-7);
      if (id < 0) id = idx.insert(p);
      face_node[f][s] = id;
    }
  int N = int(idx.pts.size());

  // 2. weld nodes across the side pairings; remember the generator graph
  detail::UnionFind uf(N);
  struct GlueArc {
    int from, to, gen;  // gen(pos[from]) = pos[to], gen in +-1..4
  };
  std::vector<GlueArc> arcs;
  for (int id = 0; id < N; ++id)
    for (int g = 1; g <= 4; ++g) {
      for (int sgn : {+1, -1}) {
        Mobius m = sgn > 0 ? ob.gens[g - 1] : ob.gens[g - 1].inv();
        int hit = idx.find(m(idx.pts[id]), 1e-7);
        if (hit >= 0 && hit != id) {
          uf.unite(id, hit);
          arcs.push_back({id, hit, sgn * g});
        }
      }
    }

  // 3. vertex numbering: class representative = first node seen
  std::vector<int> node_vertex(N, -1);
  std::vector<int> class_root(N, -1);
  int V = 0;
  std::vector<int> canon_node;
  for (int f = 0; f < F; ++f)
    for (int s = 0; s < 3; ++s) {
      int id = face_node[f][s];
      int r = uf.find(id);
      if (class_root[r] < 0) {
        class_root[r] = V;
        canon_node.push_back(id);
        ++V;
      }
      node_vertex[id] = class_root[r];
    }

  // 4. per-node deck words to the canonical node of its class
  std::vector<std::vector<std::pair<int, int>>> adj(N);  // (neighbor, gen)
  for (const auto& a : arcs) {
    adj[a.from].push_back({a.to, a.gen});
    adj[a.to].push_back({a.from, -a.gen});
  }
  std::vector<std::vector<int>> word(N);
  std::vector<char> have_word(N, 0);
  for (int start : canon_node) {
    std::vector<int> queue = {start};
    have_word[start] = 1;
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      int cur = queue[qi];
      for (auto [nb, g] : adj[cur]) {
        if (have_word[nb]) continue;
        // g maps pos[cur] -> pos[nb]; word(cur) maps pos[cur] -> canonical.
        // word(nb) = word(cur) o g^-1.
        word[nb] = word[cur];
        word[nb].push_back(-g);
        have_word[nb] = 1;
        queue.push_back(nb);
      }
    }
  }
  for (int id = 0; id < N; ++id)
    if (!have_word[id]) throw Error("mesh weld: disconnected deck class");

  // 5. edges: group face sides by node pair, then merge glued pairs
  std::map<std::pair<int, int>, int> side_group;  // node pair -> group id
  std::vector<std::pair<int, int>> group_pair;
  auto norm_pair = [](int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  };
  std::vector<std::array<int, 3>> face_group(F);
  for (int f = 0; f < F; ++f)
    for (int s = 0; s < 3; ++s) {
      auto np = norm_pair(face_node[f][s], face_node[f][(s + 1) % 3]);
      auto it = side_group.find(np);
      if (it == side_group.end()) {
        it = side_group.emplace(np, int(group_pair.size())).first;
        group_pair.push_back(np);
      }
      face_group[f][s] = it->second;
    }
  detail::UnionFind eg(int(group_pair.size()));
  for (const auto& [np, gid] : side_group)
    for (int g = 1; g <= 4; ++g)
      for (int sgn : {+1, -1}) {
        Mobius m = sgn > 0 ? ob.gens[g - 1] : ob.gens[g - 1].inv();
        int ha = idx.find(m(idx.pts[np.first]), 1e-7);
        int hb = idx.find(m(idx.pts[np.second]), 1e-7);
        if (ha < 0 || hb < 0) continue;
        auto it = side_group.find(norm_pair(ha, hb));
        if (it != side_group.end()) eg.unite(gid, it->second);
      }

  TwistedSurfaceMesh mesh;
  mesh.V = V;
  mesh.chi = -2;
  mesh.n_fiber = n_fiber;
  std::vector<int> group_edge(group_pair.size(), -1);
  for (int f = 0; f < F; ++f) {
    MeshTri t;
    for (int s = 0; s < 3; ++s) t.v[s] = node_vertex[face_node[f][s]];
    for (int s = 0; s < 3; ++s) {
      int gid = eg.find(face_group[f][s]);
      if (group_edge[gid] < 0) {
        int na = face_node[f][s], nb = face_node[f][(s + 1) % 3];
        MeshEdge e;
        e.i = node_vertex[na];
        e.j = node_vertex[nb];
        e.len = hyp_dist_disk(idx.pts[na], idx.pts[nb]);
        // transport word j -> i:  delta_i o delta_j^-1
        e.word = word[na];
        for (auto it = word[nb].rbegin(); it != word[nb].rend(); ++it)
          e.word.push_back(-*it);
        e.transport = Mat::Identity(n_fiber, n_fiber);
        e.transport_inv = e.transport;
        group_edge[gid] = int(mesh.edges.size());
        mesh.edges.push_back(std::move(e));
      } else {
        // consistency of the two glued representatives
        int na = face_node[f][s], nb = face_node[f][(s + 1) % 3];
        double len = hyp_dist_disk(idx.pts[na], idx.pts[nb]);
        if (std::abs(len - mesh.edges[group_edge[gid]].len) > 1e-9)
          throw Error("mesh weld: glued edge length mismatch");
      }
      t.e[s] = group_edge[gid];
    }
    mesh.tris.push_back(t);
  }

  mesh.pos.resize(V);
  for (int id : canon_node) mesh.pos[node_vertex[id]] = idx.pts[id];
  mesh.is_cone.assign(V, 0);
  {  // the welded octagon corner: all 8 corner copies map to one vertex
    int cid = idx.find(ob.corner[0], 1e-7);
    if (cid >= 0) mesh.is_cone[node_vertex[cid]] = 1;
  }
  for (const Mobius& g : ob.gens) mesh.gen_sl2.push_back(su11_to_sl2(g));
  {  // deck relator a b a^-1 b^-1 c d c^-1 d^-1 = Id for the generators
    Mobius rel;
    auto cm = [&](int k, bool invf) {
      rel = rel.compose(invf ? ob.gens[k].inv() : ob.gens[k]);
    };
    cm(0, false); cm(1, false); cm(0, true); cm(1, true);
    cm(2, false); cm(3, false); cm(2, true); cm(3, true);
    if (std::abs(rel.a - Cx(1, 0)) + std::abs(rel.b) > 1e-9)
      throw Error("octagon side pairings do not satisfy the surface relator");
  }
  finalize_mesh(mesh);
  return mesh;
}

/// Uniformizing representation of the built-in genus-2 surface: the geometric
/// side-pairing maps as real Moebius matrices.
inline Representation uniformizing_representation(const TwistedSurfaceMesh& mesh) {
  if (mesh.gen_sl2.size() != 4)
    throw InvalidInput("mesh carries no uniformizing generators");
  Representation rep;
  const char* names[4] = {"a1", "b1", "a2", "b2"};
  for (int k = 0; k < 4; ++k) rep.gens[names[k]] = mesh.gen_sl2[k];
  return rep;
}

inline Representation trivial_representation(int n) {
  Representation rep;
  for (const char* name : {"a1", "b1", "a2", "b2"})
    rep.gens[name] = Mat::Identity(n, n);
  return rep;
}

inline Mat relator_product(const Representation& rep) {
  auto g = [&](const char* n) {
    auto it = rep.gens.find(n);
    if (it == rep.gens.end()) throw InvalidInput("representation missing generator");
    return it->second;
  };
  Mat a = g("a1"), b = g("b1"), c = g("a2"), d = g("b2");
  return a * b * a.inverse() * b.inverse() * c * d * c.inverse() * d.inverse();
}

/// Install the flat connection with monodromy rep: every stored deck word is
/// evaluated through the generator images.  Requires det = +-1 images and the
/// surface-group relator to hold.
inline void attach_representation(TwistedSurfaceMesh& mesh, const Representation& rep) {
  if (mesh.gen_sl2.size() != 4)
    throw InvalidInput(
        "mesh carries no deck words; file meshes must supply transports directly");
  int n = -1;
  std::array<Mat, 4> g;
  const char* names[4] = {"a1", "b1", "a2", "b2"};
  for (int k = 0; k < 4; ++k) {
    auto it = rep.gens.find(names[k]);
    if (it == rep.gens.end())
      throw InvalidInput("representation must provide a1, b1, a2, b2");
    g[k] = it->second;
    if (n < 0) n = int(g[k].rows());
    if (g[k].rows() != n || g[k].cols() != n)
      throw InvalidInput("generator images must be square of equal size");
    double det = g[k].determinant();
    if (std::abs(std::abs(det) - 1.0) > 1e-8)
      throw InvalidInput("generator determinant must be +-1");
  }
  Mat rel = relator_product(rep);
  double viol = (rel - Mat::Identity(n, n)).norm();
  if (viol > 1e-10)
    throw InvalidInput("relator violation: |rho(relator) - Id| = " +
                       std::to_string(viol));
  std::array<Mat, 4> gi;
  for (int k = 0; k < 4; ++k) gi[k] = g[k].inverse();
  for (auto& e : mesh.edges) {
    Mat t = Mat::Identity(n, n);
    for (int w : e.word) t = t * (w > 0 ? g[w - 1] : gi[-w - 1]);
    e.transport = t;
    e.transport_inv = t.inverse();
  }
  mesh.n_fiber = n;
  mesh.rep_attached = true;
  // face flatness of the installed connection
  for (const auto& t : mesh.tris) {
    Mat p = mesh.transport_to(t.e[0], t.v[0]) *
            mesh.transport_to(t.e[1], t.v[1]) *
            mesh.transport_to(t.e[2], t.v[2]);
    if ((p - Mat::Identity(n, n)).norm() > 1e-12 * std::max(1.0, p.norm()))
      throw Error("flatness violated around a face");
  }
}

/// Transport along a vertex path (right-to-left composition).
inline Mat path_transport(const TwistedSurfaceMesh& mesh, const std::vector<int>& edge_path,
                          int start_vertex) {
  int v = start_vertex;
  int n = mesh.n_fiber;
  Mat t = Mat::Identity(n, n);
  for (int e : edge_path) {
    int w = mesh.other_vertex(e, v);
    t = mesh.transport_to(e, w) * t;  // data moves from v into w's gauge
    v = w;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Flat torus factory (test and benchmark surface; Euclidean lengths)

/// nx-by-ny grid torus with square cells split into triangles; edges crossing
/// the x-seam carry the transport `seam` (identity elsewhere).
inline TwistedSurfaceMesh build_flat_torus(int nx, int ny, double dx, double dy,
                                           const Mat& seam) {
  if (nx < 3 || ny < 3) throw InvalidInput("torus grid must be at least 3x3");
  int n = int(seam.rows());
  TwistedSurfaceMesh mesh;
  mesh.V = nx * ny;
  mesh.chi = 0;
  mesh.n_fiber = n;
  mesh.rep_attached = true;
  auto vid = [&](int i, int j) { return ((j + ny) % ny) * nx + ((i + nx) % nx); };
  std::map<std::pair<int, int>, int> edge_id;
  Mat id = Mat::Identity(n, n);
  Mat seam_inv = seam.inverse();
  auto add_edge = [&](int i0, int j0, int i1, int j1, double len) {
    int a = vid(i0, j0), b = vid(i1, j1);
    // does the step cross the x seam (between i = nx-1 and i = 0)?
    int crossing = 0;
    if (i1 == nx && i0 == nx - 1) crossing = +1;   // moving right across seam
    if (i1 == -1 && i0 == 0) crossing = -1;        // moving left across seam
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = edge_id.find(key);
    if (it != edge_id.end()) return it->second;
    MeshEdge e;
    // orient the stored edge so transport carries data j -> i
    if (crossing == 0) {
      e.i = a;
      e.j = b;
      e.transport = id;
      e.transport_inv = id;
    } else {
      // smooth continuation of data at column 0 seen from column nx-1 is
      // seam * value, so store i = left vertex, j = wrapped vertex
      int left = crossing > 0 ? a : b;
      int wrapped = crossing > 0 ? b : a;
      e.i = left;
      e.j = wrapped;
      e.transport = seam;
      e.transport_inv = seam_inv;
    }
    e.len = len;
    int idn = int(mesh.edges.size());
    mesh.edges.push_back(e);
    edge_id[key] = idn;
    return idn;
  };
  double diag = std::hypot(dx, dy);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int e_right = add_edge(i, j, i + 1, j, dx);
      int e_up = add_edge(i, j, i, j + 1, dy);
      int e_diag = add_edge(i, j, i + 1, j + 1, diag);
      int e_right_up = add_edge(i, j + 1, i + 1, j + 1, dx);
      int e_up_right = add_edge(i + 1, j, i + 1, j + 1, dy);
      MeshTri t1;  // (i,j), (i+1,j), (i+1,j+1)
      t1.v = {vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)};
      t1.e = {e_right, e_up_right, e_diag};
      MeshTri t2;  // (i,j), (i+1,j+1), (i,j+1)
      t2.v = {vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)};
      t2.e = {e_diag, e_right_up, e_up};
      mesh.tris.push_back(t1);
      mesh.tris.push_back(t2);
    }
  finalize_mesh(mesh);
  return mesh;
}

}  // namespace solitonlab
