#pragma once

// JSON schemas for algebras, meshes, representations, fields, certificates
// and reports, plus the artifact hash chain used by the CLI stages.

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "solitonlab/assemble.hpp"

namespace solitonlab {

using json = nlohmann::json;

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("expected a matrix");
  int rows = int(j.size()), cols = int(j[0].size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (int(j[i].size()) != cols) throw InvalidInput("ragged matrix");
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[int(i)] = j[i].get<double>();
  return v;
}

// ---------------------------------------------------------------------------
// Algebra

/// { "version":1, "dim":n, "brackets":[{"i":1,"j":2,"k":3,"c":1.0},...] },
/// 1-indexed with i < j.
inline json algebra_to_json(const LieAlgebra& alg) {
  json out;
  out["version"] = 1;
  out["dim"] = alg.dim;
  json br = json::array();
  for (int i = 0; i < alg.dim; ++i)
    for (int j = i + 1; j < alg.dim; ++j)
      for (int k = 0; k < alg.dim; ++k)
        if (alg.c(i, j, k) != 0.0)
          br.push_back({{"i", i + 1}, {"j", j + 1}, {"k", k + 1}, {"c", alg.c(i, j, k)}});
  out["brackets"] = br;
  return out;
}

inline LieAlgebra algebra_from_json(const json& j) {
  if (!j.contains("dim")) throw InvalidInput("algebra JSON missing dim");
  int dim = j.at("dim").get<int>();
  std::vector<BracketEntry> br;
  for (const auto& e : j.value("brackets", json::array())) {
    BracketEntry b{e.at("i").get<int>(), e.at("j").get<int>(),
                   e.at("k").get<int>(), e.at("c").get<double>()};
    if (b.i >= b.j) throw InvalidInput("algebra JSON stores only i < j brackets");
    br.push_back(b);
  }
  return finalize_algebra(make_algebra(dim, br));
}

/// Built-in names: "abelian:n", "heis3", "heis3xR"; otherwise a file path.
inline LieAlgebra resolve_algebra(const std::string& name) {
  if (name.rfind("abelian:", 0) == 0) {
    int n = std::atoi(name.c_str() + 8);
    if (n < 1) throw InvalidInput("bad abelian dimension");
    return abelian_algebra(n);
  }
  if (name == "heis3") return heis3();
  if (name == "heis3xR") return heis3xR();
  std::ifstream in(name);
  if (!in) throw InvalidInput("cannot open algebra file: " + name);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InvalidInput(std::string("malformed algebra JSON: ") + e.what());
  }
  return algebra_from_json(j);
}

// ---------------------------------------------------------------------------
// Certificate

inline json certificate_to_json(const NilsolitonCertificate& cert) {
  json out;
  out["version"] = 1;
  out["lambda"] = cert.lambda;
  out["D"] = to_json(cert.D);
  out["beta"] = to_json(cert.beta);
  out["residual"] = cert.residual;
  out["trace_identity_gap"] = cert.trace_identity_gap;
  out["ric_scal_gap"] = cert.ric_scal_gap;
  out["scal"] = cert.scal;
  out["certified"] = cert.certified;
  out["conventions"] = {{"ric_sign", "lambda_id_minus_D"},
                        {"intro_derivation", "D_intro = -D"},
                        {"lambda2_inner_product", cert.lambda2_conv},
                        {"beta_normalization", "tr_beta = -1"}};
  return out;
}

// ---------------------------------------------------------------------------
// Mesh

/// 0-indexed vertices; "m" carries fibre data from j into i's gauge.
inline json mesh_to_json(const TwistedSurfaceMesh& mesh) {
  json out;
  out["version"] = 1;
  out["n"] = mesh.n_fiber;
  out["chi"] = mesh.chi;
  out["vertices"] = mesh.V;
  json tris = json::array();
  for (const auto& t : mesh.tris) tris.push_back({t.v[0], t.v[1], t.v[2]});
  out["triangles"] = tris;
  json lens = json::array();
  for (const auto& e : mesh.edges)
    lens.push_back({{"i", e.i}, {"j", e.j}, {"l", e.len}});
  out["edge_lengths"] = lens;
  json trans = json::array();
  int n = mesh.n_fiber;
  for (const auto& e : mesh.edges)
    if ((e.transport - Mat::Identity(n, n)).norm() > 0)
      trans.push_back({{"i", e.i}, {"j", e.j}, {"m", to_json(e.transport)}});
  out["edge_transport"] = trans;
  return out;
}

/// Omitted transports default to the identity.  Parallel edges (several edges
/// between one vertex pair) are not representable here and are rejected.
inline TwistedSurfaceMesh mesh_from_json(const json& j) {
  TwistedSurfaceMesh mesh;
  mesh.V = j.at("vertices").get<int>();
  mesh.chi = j.at("chi").get<int>();
  mesh.n_fiber = j.value("n", 2);
  int n = mesh.n_fiber;
  std::map<std::pair<int, int>, int> edge_id;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (const auto& e : j.at("edge_lengths")) {
    int a = e.at("i").get<int>(), b = e.at("j").get<int>();
    if (a == b || a < 0 || b < 0 || a >= mesh.V || b >= mesh.V)
      throw InvalidInput("bad edge endpoints");
    if (edge_id.count(key(a, b))) throw InvalidInput("duplicate edge in mesh file");
    MeshEdge me;
    me.i = a;
    me.j = b;
    me.len = e.at("l").get<double>();
    if (!(me.len > 0)) throw InvalidInput("edge length must be positive");
    me.transport = Mat::Identity(n, n);
    me.transport_inv = me.transport;
    edge_id[key(a, b)] = int(mesh.edges.size());
    mesh.edges.push_back(me);
  }
  for (const auto& e : j.value("edge_transport", json::array())) {
    int a = e.at("i").get<int>(), b = e.at("j").get<int>();
    auto it = edge_id.find(key(a, b));
    if (it == edge_id.end()) throw InvalidInput("transport on a missing edge");
    Mat m = mat_from_json(e.at("m"));
    if (m.rows() != n || m.cols() != n) throw InvalidInput("transport size mismatch");
    if (std::abs(std::abs(m.determinant()) - 1.0) > 1e-8)
      throw InvalidInput("transport determinant must be +-1");
    MeshEdge& me = mesh.edges[it->second];
    // stored orientation: data j -> i
    if (a == me.i) {
      me.transport = m;
    } else {
      me.transport = m.inverse();
    }
    me.transport_inv = me.transport.inverse();
  }
  for (const auto& t : j.at("triangles")) {
    MeshTri mt;
    for (int s = 0; s < 3; ++s) mt.v[s] = t[s].get<int>();
    for (int s = 0; s < 3; ++s) {
      auto it = edge_id.find(key(mt.v[s], mt.v[(s + 1) % 3]));
      if (it == edge_id.end()) throw InvalidInput("triangle side without edge entry");
      mt.e[s] = it->second;
    }
    mesh.tris.push_back(mt);
  }
  mesh.rep_attached = true;
  finalize_mesh(mesh);
  return mesh;
}

inline std::string mesh_hash(const TwistedSurfaceMesh& mesh) {
  return hash_hex(mesh_to_json(mesh).dump());
}

// ---------------------------------------------------------------------------
// Representation and fields

inline json representation_to_json(const Representation& rep) {
  json gens = json::array();
  for (const auto& [name, m] : rep.gens)
    gens.push_back({{"name", name}, {"m", to_json(m)}});
  return {{"version", 1}, {"generators", gens}};
}

inline Representation representation_from_json(const json& j) {
  Representation rep;
  for (const auto& g : j.at("generators"))
    rep.gens[g.at("name").get<std::string>()] = mat_from_json(g.at("m"));
  return rep;
}

inline json hfield_to_json(const HField& hf, const std::string& mesh_hash_str) {
  json vals = json::array();
  for (const Mat& m : hf.values) vals.push_back(to_json(m));
  return {{"version", 1},
          {"mesh_hash", mesh_hash_str},
          {"det_normalized", hf.on_slice},
          {"values", vals}};
}

inline HField hfield_from_json(const json& j, const TwistedSurfaceMesh& mesh) {
  if (j.at("mesh_hash").get<std::string>() != mesh_hash(mesh))
    throw InvalidInput("field was produced for a different mesh (hash mismatch)");
  HField hf;
  hf.mesh = &mesh;
  hf.on_slice = j.value("det_normalized", false);
  for (const auto& v : j.at("values")) hf.values.push_back(mat_from_json(v));
  check_field(hf);
  for (const Mat& m : hf.values) check_spd(m, "field value");
  return hf;
}

inline json scalar_field_to_json(const Vec& v, const std::string& mesh_hash_str) {
  return {{"version", 1}, {"mesh_hash", mesh_hash_str}, {"values", to_json(v)}};
}

inline Vec scalar_field_from_json(const json& j, const TwistedSurfaceMesh& mesh) {
  if (j.at("mesh_hash").get<std::string>() != mesh_hash(mesh))
    throw InvalidInput("scalar field was produced for a different mesh (hash mismatch)");
  Vec v = vec_from_json(j.at("values"));
  if (v.size() != mesh.V) throw InvalidInput("scalar field has wrong size");
  return v;
}

// ---------------------------------------------------------------------------
// Soliton report

inline json report_to_json(const SolitonReport& rep) {
  json out;
  out["version"] = 1;
  out["lambda"] = rep.lambda;
  out["vertical_residual"] = rep.vertical_residual;
  out["tension_residual"] = rep.tension_residual;
  out["horizontal_residual"] = rep.horizontal_residual;
  out["horizontal_residual_defect"] = rep.horizontal_residual_defect;
  out["mixed_residual"] = rep.mixed_residual;
  out["scal_g"] = to_json(rep.scal_g);
  out["scal_constancy_gap"] = rep.scal_constancy_gap;
  out["scal_closed_form"] = rep.scal_closed_form;
  out["gradient"] = rep.gradient_flag;
  out["conventions"] = rep.conventions;
  return out;
}

inline std::string report_to_csv(const SolitonReport& rep) {
  std::ostringstream os;
  os << "vertex,vertical,tension,horizontal,horizontal_defect,nu,u,scal_g\n";
  for (int v = 0; v < rep.scal_g.size(); ++v)
    os << v << "," << rep.vertical_v[v] << "," << rep.tension_v[v] << ","
       << rep.horizontal_v[v] << "," << rep.horizontal_defect_v[v] << ","
       << rep.nu_v[v] << "," << rep.u_v[v] << "," << rep.scal_g[v] << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// File helpers

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InvalidInput(std::string("malformed JSON in ") + path + ": " + e.what());
  }
  return j;
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write file: " + path);
  out << text;
}

}  // namespace solitonlab
