// solitonlab command-line front end.
//
// Commands: nilsoliton, mesh gen|validate, harmonic, base, assemble, extend.
// Exit codes: 0 success, 2 invalid input, 3 non-convergence.
// SOLITONLAB_THREADS controls inner parallel loops (default 1).

#include <CLI11.hpp>
#include <iostream>

#include "solitonlab/json_io.hpp"

using namespace solitonlab;

namespace {

json config_echo(std::initializer_list<std::pair<std::string, json>> kv) {
  json c;
  for (auto& [k, v] : kv) c[k] = v;
  return c;
}

Representation resolve_representation(const std::string& spec,
                                      const TwistedSurfaceMesh& mesh) {
  if (spec == "uniformizing") return uniformizing_representation(mesh);
  if (spec == "trivial") return trivial_representation(mesh.n_fiber);
  return representation_from_json(load_json(spec));
}

TwistedSurfaceMesh load_mesh(const std::string& path) {
  return mesh_from_json(load_json(path));
}

struct PipelineArgs {
  std::string mesh_file, rep, algebra = "abelian:2";
  std::string out = "report.json", csv, hfield_out, u_out;
  std::string hfield_in, u_in;
  double flow_tol = 1e-8, base_tol = 1e-10;
  int flow_iters = 400000;
  std::uint64_t seed = 0;
  int subdiv = -1;  // construct instead of loading when >= 0
  bool pipeline = false;
  bool lift = false;
};

int run_assemble(const PipelineArgs& a) {
  TwistedSurfaceMesh mesh;
  if (a.subdiv >= 0) {
    mesh = build_genus2_mesh(a.subdiv);
    attach_representation(
        mesh, resolve_representation(a.rep.empty() ? "uniformizing" : a.rep, mesh));
  } else {
    mesh = load_mesh(a.mesh_file);
    if (!a.rep.empty())
      attach_representation(mesh, resolve_representation(a.rep, mesh));
  }
  std::string mh = mesh_hash(mesh);
  LieAlgebra alg = resolve_algebra(a.algebra);
  bool lift_fiber = a.lift || !alg.is_abelian();
  if (lift_fiber && alg.dim != 3)
    throw InvalidInput("non-abelian fibres are supported through the Heisenberg lift only");
  if (!lift_fiber && alg.dim != mesh.n_fiber)
    throw InvalidInput("fibre dimension does not match the mesh transports");

  LieAlgebra flow_alg = abelian_algebra(mesh.n_fiber);
  NilsolitonCertificate flow_cert =
      certify_nilsoliton(flow_alg, Mat::Identity(mesh.n_fiber, mesh.n_fiber));

  HField field;
  Vec u;
  if (!a.hfield_in.empty() && !a.u_in.empty()) {
    field = hfield_from_json(load_json(a.hfield_in), mesh);
    u = scalar_field_from_json(load_json(a.u_in), mesh);
  } else if (a.pipeline) {
    PipelineOptions opts;
    opts.flow.tol = a.flow_tol;
    opts.flow.max_iters = a.flow_iters;
    opts.base.tol = a.base_tol;
    opts.seed = a.seed;
    auto res = assemble_pipeline(mesh, flow_alg, flow_cert, opts);
    field = res.field;
    u = res.u;
  } else {
    throw InvalidInput("assemble needs --pipeline or both --hfield and --u");
  }

  SolitonReport rep;
  HeisenbergLift lifted;
  if (lift_fiber) {
    lifted = lift_to_heisenberg(mesh, field);
    rep = soliton_residual(lifted.mesh5, u, lifted.field5, heis3(), lifted.fiber_cert);
  } else {
    rep = soliton_residual(mesh, u, field, alg, flow_cert);
  }

  json out = report_to_json(rep);
  out["mesh_hash"] = mh;
  out["config"] = config_echo({{"algebra", a.algebra},
                               {"flow_tol", a.flow_tol},
                               {"base_tol", a.base_tol},
                               {"seed", a.seed},
                               {"lift", lift_fiber}});
  save_json(a.out, out);
  if (!a.csv.empty()) save_text(a.csv, report_to_csv(rep));
  if (!a.hfield_out.empty()) save_json(a.hfield_out, hfield_to_json(field, mh));
  if (!a.u_out.empty()) save_json(a.u_out, scalar_field_to_json(u, mh));
  std::cout << "vertical " << rep.vertical_residual << "  tension "
            << rep.tension_residual << "  horizontal " << rep.horizontal_residual
            << "  mixed " << rep.mixed_residual << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for twisted-bundle expanding solitons"};
  app.require_subcommand(1);

  std::string ns_algebra = "heis3", ns_out;
  double ns_tol = 1e-9;
  int ns_iters = 50000;
  auto* ns = app.add_subcommand("nilsoliton", "find and certify a nilsoliton metric");
  ns->add_option("--algebra", ns_algebra, "built-in name or JSON file");
  ns->add_option("--tol", ns_tol, "flow residual tolerance");
  ns->add_option("--max-iters", ns_iters, "iteration cap");
  ns->add_option("--out", ns_out, "certificate JSON output");

  auto* mesh_cmd = app.add_subcommand("mesh", "mesh generation and validation");
  mesh_cmd->require_subcommand(1);
  int mg_subdiv = 2;
  std::string mg_rep = "trivial", mg_out = "mesh.json";
  auto* mg = mesh_cmd->add_subcommand("gen", "build the genus-2 octagon mesh");
  mg->add_option("--subdiv", mg_subdiv, "subdivision level (>= 1 for file output)");
  mg->add_option("--rep", mg_rep, "trivial | uniformizing | rep JSON file");
  mg->add_option("--out", mg_out, "mesh JSON output");
  std::string mv_in;
  auto* mv = mesh_cmd->add_subcommand("validate", "validate a mesh file");
  mv->add_option("--in", mv_in, "mesh JSON input")->required();

  std::string ha_mesh, ha_out = "hfield.json", ha_init = "id", ha_nu_out;
  double ha_tol = 1e-8;
  int ha_iters = 400000;
  std::uint64_t ha_seed = 1;
  auto* ha = app.add_subcommand("harmonic", "run the twisted harmonic map flow");
  ha->add_option("--mesh", ha_mesh, "mesh JSON input")->required();
  ha->add_option("--init", ha_init, "id | random");
  ha->add_option("--seed", ha_seed, "seed for random init");
  ha->add_option("--tol", ha_tol, "tension tolerance");
  ha->add_option("--max-iters", ha_iters, "iteration cap");
  ha->add_option("--out", ha_out, "field JSON output");
  ha->add_option("--nu-out", ha_nu_out, "write the measured nu density");

  std::string ba_mesh, ba_nu = "zero", ba_out = "u.json";
  double ba_tol = 1e-10;
  auto* ba = app.add_subcommand("base", "solve the conformal-factor equation");
  ba->add_option("--mesh", ba_mesh, "mesh JSON input")->required();
  ba->add_option("--nu", ba_nu, "zero | const:c | scalar field JSON file");
  ba->add_option("--tol", ba_tol, "Newton tolerance");
  ba->add_option("--out", ba_out, "u JSON output");

  PipelineArgs pa;
  auto* as = app.add_subcommand("assemble", "assemble and certify the soliton metric");
  as->add_option("--mesh", pa.mesh_file, "mesh JSON input");
  as->add_option("--subdiv", pa.subdiv, "build the genus-2 mesh instead of loading");
  as->add_option("--rep", pa.rep, "trivial | uniformizing | rep JSON file (with --subdiv)");
  as->add_option("--algebra", pa.algebra, "fibre algebra (abelian:2, heis3)");
  as->add_flag("--pipeline", pa.pipeline, "run flow -> nu -> base -> report");
  as->add_flag("--lift", pa.lift, "lift 4D data to the Heisenberg fibre");
  as->add_option("--hfield", pa.hfield_in, "precomputed field artifact");
  as->add_option("--u", pa.u_in, "precomputed conformal factor artifact");
  as->add_option("--flow-tol", pa.flow_tol, "flow tension tolerance");
  as->add_option("--base-tol", pa.base_tol, "Newton tolerance");
  as->add_option("--seed", pa.seed, "random flow init (0: identity)");
  as->add_option("--out", pa.out, "report JSON output");
  as->add_option("--csv", pa.csv, "per-vertex residual CSV output");
  as->add_option("--hfield-out", pa.hfield_out, "write the flowed field");
  as->add_option("--u-out", pa.u_out, "write the conformal factor");

  std::string ex_algebra = "heis3", ex_metric, ex_out = "extension.json";
  auto* ex = app.add_subcommand("extend", "Einstein one-dimensional extension");
  ex->add_option("--algebra", ex_algebra, "built-in name or JSON file");
  ex->add_option("--metric", ex_metric, "metric JSON {\"H\":[[..]]} (default: run the finder)");
  ex->add_option("--out", ex_out, "extension report JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ns) {
      LieAlgebra alg = resolve_algebra(ns_algebra);
      FlowOptions opts;
      opts.tol = ns_tol;
      opts.max_iters = ns_iters;
      auto res = find_nilsoliton(alg, Mat::Identity(alg.dim, alg.dim), opts);
      json out = certificate_to_json(res.cert);
      out["metric"] = to_json(res.h);
      out["iters"] = res.iters;
      out["config"] = config_echo({{"algebra", ns_algebra}, {"tol", ns_tol}});
      if (!ns_out.empty()) save_json(ns_out, out);
      std::cout << "lambda " << res.cert.lambda << "  residual "
                << res.cert.residual << "  certified "
                << (res.cert.certified ? "yes" : "no") << "\n";
      return res.cert.certified ? 0 : 3;
    }
    if (*mg) {
      auto mesh = build_genus2_mesh(mg_subdiv);
      attach_representation(mesh, resolve_representation(mg_rep, mesh));
      if (mg_subdiv == 0)
        std::cerr << "warning: level 0 has parallel edges; the file format "
                     "cannot represent them faithfully\n";
      json out = mesh_to_json(mesh);
      out["config"] = config_echo({{"subdiv", mg_subdiv}, {"rep", mg_rep}});
      out["hash"] = mesh_hash(mesh);
      save_json(mg_out, out);
      std::cout << "V " << mesh.V << "  F " << mesh.tris.size() << "  E "
                << mesh.edges.size() << "  hash " << mesh_hash(mesh) << "\n";
      return 0;
    }
    if (*mv) {
      auto mesh = load_mesh(mv_in);
      double defect_sum = 0.0;
      for (double d : mesh.defect) defect_sum += d;
      std::cout << "valid: V " << mesh.V << " F " << mesh.tris.size() << " chi "
                << mesh.chi << " total defect " << defect_sum << " area "
                << mesh.total_area << " hash " << mesh_hash(mesh) << "\n";
      return 0;
    }
    if (*ha) {
      auto mesh = load_mesh(ha_mesh);
      HField init = ha_init == "random"
                        ? random_field(mesh, mesh.n_fiber, ha_seed)
                        : constant_field(mesh, Mat::Identity(mesh.n_fiber, mesh.n_fiber));
      HarmonicFlowOptions opts;
      opts.tol = ha_tol;
      opts.max_iters = ha_iters;
      auto res = harmonic_flow(init, opts);
      json out = hfield_to_json(res.field, mesh_hash(mesh));
      out["converged"] = res.converged;
      out["stalled"] = res.stalled;
      out["final_tension"] = res.final_tension;
      out["final_energy"] = res.final_energy;
      out["config"] = config_echo({{"init", ha_init}, {"seed", ha_seed}, {"tol", ha_tol}});
      save_json(ha_out, out);
      if (!ha_nu_out.empty()) {
        auto nu = nu_field(res.field);
        Vec nu_vec = Eigen::Map<const Vec>(nu.data(), nu.size());
        save_json(ha_nu_out, scalar_field_to_json(nu_vec, mesh_hash(mesh)));
      }
      std::cout << (res.converged ? "converged" : res.stalled ? "stalled" : "iteration cap")
                << "  tension " << res.final_tension << "  energy "
                << res.final_energy << "\n";
      return res.converged ? 0 : 3;
    }
    if (*ba) {
      auto mesh = load_mesh(ba_mesh);
      Vec nu;
      if (ba_nu == "zero") {
        nu = Vec::Zero(mesh.V);
      } else if (ba_nu.rfind("const:", 0) == 0) {
        nu = Vec::Constant(mesh.V, std::atof(ba_nu.c_str() + 6));
      } else {
        nu = scalar_field_from_json(load_json(ba_nu), mesh);
      }
      BaseSolveOptions opts;
      opts.tol = ba_tol;
      auto res = solve_base(mesh, nu, opts);
      json out = scalar_field_to_json(res.u, mesh_hash(mesh));
      out["residual"] = res.residual;
      out["uniqueness_gap"] = res.uniqueness_gap;
      out["gauss_bonnet_residual"] = gauss_bonnet_constraint(mesh, res.u, nu);
      out["config"] = config_echo({{"nu", ba_nu}, {"tol", ba_tol}});
      save_json(ba_out, out);
      std::cout << "residual " << res.residual << "  gauss-bonnet "
                << gauss_bonnet_constraint(mesh, res.u, nu) << "\n";
      return 0;
    }
    if (*as) {
      if (pa.subdiv < 0 && pa.mesh_file.empty())
        throw InvalidInput("assemble needs --mesh or --subdiv");
      return run_assemble(pa);
    }
    if (*ex) {
      LieAlgebra alg = resolve_algebra(ex_algebra);
      Mat h;
      NilsolitonCertificate cert;
      if (!ex_metric.empty()) {
        h = mat_from_json(load_json(ex_metric).at("H"));
        cert = certify_nilsoliton(alg, h);
        if (!cert.certified)
          throw InvalidInput("supplied metric is not a certified nilsoliton");
      } else if (alg.is_abelian()) {
        h = Mat::Identity(alg.dim, alg.dim);
        cert = certify_nilsoliton(alg, h);
      } else {
        auto res = find_nilsoliton(alg, Mat::Identity(alg.dim, alg.dim));
        h = res.h;
        cert = res.cert;
      }
      auto [ext, rep] = einstein_extension(alg, h, cert);
      json out;
      out["version"] = 1;
      out["einstein_gap"] = rep.einstein_gap;
      out["tr_alphaD2"] = rep.tr_alphaD2;
      out["trace_identity_gap"] = rep.trace_identity_gap;
      out["jacobi_gap"] = rep.jacobi_gap;
      out["alpha"] = ext.alpha;
      out["D"] = to_json(ext.D_used);
      out["ric_extension"] = to_json(rep.ric_ext);
      out["extension_algebra"] = algebra_to_json(ext.base_algebra);
      out["config"] = config_echo({{"algebra", ex_algebra}});
      save_json(ex_out, out);
      std::cout << "einstein gap " << rep.einstein_gap << "  tr((aD)^2) "
                << rep.tr_alphaD2 << "\n";
      return 0;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
