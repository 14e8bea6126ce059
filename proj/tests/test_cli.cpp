#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "solitonlab/json_io.hpp"

using namespace solitonlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("solitonlab_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  std::string cmd = std::string(SOLITONLAB_BIN) + " " + args + " > /dev/null 2>&1";
  int r = std::system(cmd.c_str());
  return WIFEXITED(r) ? WEXITSTATUS(r) : -1;
}

}  // namespace

TEST_CASE("nilsoliton command: certificates and exit codes") {
  TempDir td;
  std::string cert = td.path("cert.json");
  CHECK(run("nilsoliton --algebra heis3 --out " + cert) == 0);
  json j = load_json(cert);
  CHECK(j.at("certified").get<bool>());
  // eigenvalue ratios of D are 1:1:2
  Mat d = mat_from_json(j.at("D"));
  Mat h = mat_from_json(j.at("metric"));
  Vec ev = sym_eigenvalues_wrt(h, d);  // ascending, most negative first
  CHECK(ev[0] / ev[2] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(ev[1] / ev[2] == doctest::Approx(1.0).epsilon(1e-6));

  std::string cert2 = td.path("cert2.json");
  CHECK(run("nilsoliton --algebra abelian:4 --out " + cert2) == 0);
  json j2 = load_json(cert2);
  Mat d2 = mat_from_json(j2.at("D"));
  double lambda = j2.at("lambda").get<double>();
  CHECK((d2 - lambda * Mat::Identity(4, 4)).norm() <= 1e-12);

  // malformed algebra file
  std::string bad = td.path("bad.json");
  std::ofstream(bad) << "{\"version\":1,\"dim\":2,\"brackets\":[{\"i\":2,\"j\":1,\"k\":1,\"c\":1.0}]}";
  CHECK(run("nilsoliton --algebra " + bad) == 2);
  std::ofstream(td.path("garbage.json")) << "not json";
  CHECK(run("nilsoliton --algebra " + td.path("garbage.json")) == 2);

  // an algebra admitting no nilsoliton exits with the non-convergence code
  std::string nosol = td.path("nosol.json");
  {
    std::vector<BracketEntry> br = {
        {1, 2, 3, 1.0}, {1, 3, 4, 1.0}, {1, 4, 5, 1.0}, {1, 5, 6, 1.0},
        {1, 6, 7, 1.0}, {2, 3, 5, 1.0}, {2, 3, 6, 1.0}, {2, 4, 6, 1.0},
        {2, 4, 7, 1.0}, {2, 5, 7, 1.0}};
    save_json(nosol, algebra_to_json(make_algebra(7, br)));
  }
  CHECK(run("nilsoliton --algebra " + nosol + " --max-iters 3000") == 3);
}

TEST_CASE("mesh, harmonic, base and assemble stage chain") {
  TempDir td;
  std::string mesh = td.path("mesh.json");
  CHECK(run("mesh gen --subdiv 1 --rep uniformizing --out " + mesh) == 0);
  CHECK(run("mesh validate --in " + mesh) == 0);

  std::string hf = td.path("hf.json"), nu = td.path("nu.json");
  CHECK(run("harmonic --mesh " + mesh + " --out " + hf + " --nu-out " + nu) == 0);

  std::string u = td.path("u.json");
  CHECK(run("base --mesh " + mesh + " --nu " + nu + " --out " + u) == 0);

  std::string rep = td.path("rep.json"), csv = td.path("rep.csv");
  CHECK(run("assemble --mesh " + mesh + " --hfield " + hf + " --u " + u +
            " --out " + rep + " --csv " + csv) == 0);
  json r = load_json(rep);
  CHECK(r.at("horizontal_residual").get<double>() <= 1e-8);
  CHECK(r.at("tension_residual").get<double>() <= 1e-7);
  // one CSV row per vertex plus the header
  std::ifstream cf(csv);
  int lines = 0;
  for (std::string line; std::getline(cf, line);) ++lines;
  CHECK(lines == 30 + 1);

  // constant-nu run gives the constant solution
  std::string u0 = td.path("u0.json");
  CHECK(run("base --mesh " + mesh + " --nu zero --out " + u0) == 0);
  json ju = load_json(u0);
  Vec uv = vec_from_json(ju.at("values"));
  CHECK((uv.array() - 0.5 * std::log(2.0)).abs().maxCoeff() <= 1e-10);

  // artifacts from another mesh are rejected by the hash chain
  std::string mesh2 = td.path("mesh2.json");
  CHECK(run("mesh gen --subdiv 2 --rep uniformizing --out " + mesh2) == 0);
  CHECK(run("assemble --mesh " + mesh2 + " --hfield " + hf + " --u " + u +
            " --out " + td.path("r2.json")) == 2);
}

TEST_CASE("pipeline invocation and extension command") {
  TempDir td;
  std::string rep = td.path("rep.json");
  CHECK(run("assemble --subdiv 1 --pipeline --out " + rep) == 0);
  json r = load_json(rep);
  CHECK(r.at("horizontal_residual").get<double>() <= 1e-8);
  CHECK(std::abs(r.at("scal_closed_form").get<double>() + 1.0) <= 1e-12);

  std::string ext = td.path("ext.json");
  CHECK(run("extend --algebra heis3 --out " + ext) == 0);
  json je = load_json(ext);
  CHECK(je.at("einstein_gap").get<double>() <= 1e-8);
  CHECK(je.at("tr_alphaD2").get<double>() == doctest::Approx(0.5).epsilon(1e-12));

  // Heisenberg fibre through the lift: scalar curvature is the direct sum
  // -(dim B)/2 + scal_fibre = -7/6, constant across the surface
  std::string rep5 = td.path("rep5.json");
  CHECK(run("assemble --subdiv 1 --pipeline --algebra heis3 --out " + rep5) == 0);
  json r5 = load_json(rep5);
  CHECK(r5.at("mixed_residual").get<double>() <= 1e-10);
  CHECK(r5.at("scal_constancy_gap").get<double>() <= 1e-10);
  Vec scal5 = vec_from_json(r5.at("scal_g"));
  CHECK(scal5[0] == doctest::Approx(-7.0 / 6).epsilon(1e-7));
}

TEST_CASE("mesh JSON round trip preserves geometry, transports and hash") {
  auto mesh = build_genus2_mesh(1);
  attach_representation(mesh, uniformizing_representation(mesh));
  json j = mesh_to_json(mesh);
  auto mesh2 = mesh_from_json(j);
  CHECK(mesh_hash(mesh) == mesh_hash(mesh2));
  CHECK(mesh2.V == mesh.V);
  CHECK(mesh2.total_area == doctest::Approx(mesh.total_area).epsilon(1e-14));
  for (size_t e = 0; e < mesh.edges.size(); ++e)
    CHECK((mesh.edges[e].transport - mesh2.edges[e].transport).norm() <= 1e-14);

  // duplicate edges are rejected
  json bad = j;
  bad["edge_lengths"].push_back(bad["edge_lengths"][0]);
  CHECK_THROWS_AS(mesh_from_json(bad), InvalidInput);

  // file meshes carry no deck words, so re-attaching a representation is
  // rejected instead of silently wiping the stored transports
  CHECK_THROWS_AS(attach_representation(mesh2, trivial_representation(2)), InvalidInput);
}

TEST_CASE("tension is independent of the thread count") {
  auto mesh = build_genus2_mesh(1);
  attach_representation(mesh, uniformizing_representation(mesh));
  HField dev;
  dev.mesh = &mesh;
  dev.on_slice = true;
  for (int v = 0; v < mesh.V; ++v) dev.values.push_back(disk_to_spd(mesh.pos[v]));
  ::setenv("SOLITONLAB_THREADS", "1", 1);
  auto t1 = tension(dev);
  ::setenv("SOLITONLAB_THREADS", "4", 1);
  auto t4 = tension(dev);
  ::setenv("SOLITONLAB_THREADS", "1", 1);
  for (int v = 0; v < mesh.V; ++v) CHECK((t1[v] - t4[v]).norm() == 0.0);
}

TEST_CASE("artifacts are bit-identical for identical configs") {
  TempDir td;
  std::string r1 = td.path("r1.json"), r2 = td.path("r2.json");
  CHECK(run("assemble --subdiv 1 --pipeline --seed 7 --out " + r1) == 0);
  CHECK(run("assemble --subdiv 1 --pipeline --seed 7 --out " + r2) == 0);
  std::ifstream f1(r1), f2(r2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  CHECK(!s1.empty());
}
