#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pcap/ansatz.hpp"
#include "pcap/config.hpp"
#include "pcap/experiments.hpp"
#include "pcap/selftest.hpp"

namespace fs = std::filesystem;
using namespace pcap;
using config::RunConfig;

namespace {

using Override = std::function<void(RunConfig&)>;

// Registers a flag whose value, when given, is written into the config after the file is read.
template <class T, class F>
void over(CLI::App* app, std::vector<Override>& ov, const std::string& name, const std::string& help, F set) {
  auto val = std::make_shared<T>();
  CLI::Option* o = app->add_option(name, *val, help);
  ov.push_back([o, val, set](RunConfig& c) {
    if (o->count() > 0) set(c, *val);
  });
}

void params_flags(CLI::App* app, std::vector<Override>& ov) {
  over<int>(app, ov, "--d", "dimension", [](RunConfig& c, int v) { c.params.d = v; });
  over<double>(app, ov, "--p", "exponent p in (1, d)", [](RunConfig& c, double v) { c.params.p = v; });
  over<double>(app, ov, "--R", "outer radius", [](RunConfig& c, double v) { c.params.R = v; });
  over<std::uint64_t>(app, ov, "--seed", "seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
}

void cavity_flags(CLI::App* app, std::vector<Override>& ov) {
  over<std::string>(app, ov, "--shape", "ball | square | polygon", [](RunConfig& c, const std::string& v) {
    try {
      c.cavity.shape = geometry::parse_shape(v);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("--shape: ") + e.what());
    }
  });
  over<std::string>(app, ov, "--rotation", "identity | radial | random", [](RunConfig& c, const std::string& v) {
    try {
      c.cavity.rotation = geometry::parse_rotation(v);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("--rotation: ") + e.what());
    }
  });
}

void domain_flags(CLI::App* app, std::vector<Override>& ov) {
  over<double>(app, ov, "--tau", "window parameter", [](RunConfig& c, double v) { c.params.tau = v; });
  over<std::string>(app, ov, "--anchors", "circle | greedy", [](RunConfig& c, const std::string& v) { c.anchors = v; });
  over<double>(app, ov, "--h-far", "far-field mesh size", [](RunConfig& c, double v) { c.mesh.h_far = v; });
  over<double>(app, ov, "--h-near", "cavity mesh size over cavity radius",
               [](RunConfig& c, double v) { c.mesh.h_near_factor = v; });
  over<double>(app, ov, "--growth", "mesh size growth rate", [](RunConfig& c, double v) { c.mesh.growth = v; });
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

const auto process_start = std::chrono::steady_clock::now();

struct Run {
  const RunConfig& cfg;
  fs::path dir;
  nlohmann::json files = nlohmann::json::array();

  explicit Run(const RunConfig& c) : cfg(c) {
    const fs::path base = fs::path(cfg.output_dir) / (cfg.experiment + "-" + timestamp());
    dir = base;
    for (int k = 1; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
    fs::create_directories(dir);
    write("config.json", config::serialize(cfg));
  }

  void write(const std::string& name, const std::string& content) {
    experiments::write_file(dir / name, content);
    files.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a", experiments::fnv1a_hex(content)}});
  }

  void finish() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - process_start).count();
    experiments::write_file(dir / "manifest.json",
                            experiments::manifest(config::to_json(cfg), cfg.experiment, files, s).dump(2) + "\n");
    std::cout << "outputs in " << dir.string() << "\n";
  }
};

geometry::PerforatedDomain perforation(const RunConfig& c) {
  const auto an = experiments::make_anchors(c.anchors, c.params.d, c.params.eps, c.seed);
  const double alpha = c.params.tau * std::pow(an.eps(), 1.0 / analytic::gamma_exponent(c.params.d, c.params.p));
  return geometry::build_perforation(an, alpha, c.cavity, c.params.R, c.params.d, c.params.p);
}

std::string fixed(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// --------------------------------------------------------------------------
// Subcommands

int cmd_verify() {
  const auto checks = selftest::run_analytic();
  int failed = 0;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.name;
    if (!c.detail.empty()) std::cout << "  [" << c.detail << "]";
    std::cout << "\n";
    failed += c.pass ? 0 : 1;
  }
  std::cout << checks.size() - failed << "/" << checks.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

int cmd_anchors(const RunConfig& c) {
  const auto an = experiments::make_anchors(c.anchors, c.params.d, c.params.eps, c.seed);
  Run run(c);
  run.write("anchors.csv", geometry::anchors_to_csv(an));
  const nlohmann::json s{{"N", an.size()},
                         {"eps", an.eps()},
                         {"min_separation", geometry::min_separation(an)},
                         {"sigma", geometry::sigma_estimate(an)},
                         {"max_norm_defect", geometry::max_norm_defect(an)},
                         {"discrepancy", geometry::equidistribution_discrepancy(an, 200, c.seed)}};
  run.write("anchors.json", s.dump(2) + "\n");
  std::cout << "N = " << an.size() << ", eps = " << fixed(an.eps()) << ", sigma = " << fixed(s["sigma"].get<double>())
            << ", discrepancy = " << fixed(s["discrepancy"].get<double>()) << "\n";
  run.finish();
  return 0;
}

int cmd_mesh(const RunConfig& c) {
  const auto pd = perforation(c);
  const auto m = mesh::mesh_perforated_ball(pd, c.mesh);
  const auto q = mesh::quality(m);
  Run run(c);
  run.write("perforation.json", geometry::perforation_to_json(pd).dump(2) + "\n");
  std::ostringstream os;
  mesh::write_mesh(os, m);
  run.write("mesh.txt", os.str());
  const nlohmann::json s{{"cells", m.cells.size()},
                         {"vertices", m.vertices.size()},
                         {"min_angle_deg", q.min_angle_deg},
                         {"max_angle_deg", q.max_angle_deg},
                         {"conforming", mesh::is_conforming(m)}};
  run.write("mesh.json", s.dump(2) + "\n");
  std::cout << m.cells.size() << " cells, " << m.vertices.size() << " vertices, min angle "
            << fixed(q.min_angle_deg, 4) << " deg\n";
  run.finish();
  return 0;
}

int cmd_capacity(const RunConfig& c) {
  const double r = c.capacity.r, R = c.params.R, p = c.params.p;
  const int d = c.params.d;
  const bool ball = c.cavity.shape == geometry::CavityShape::Ball;
  nlohmann::json out{{"shape", geometry::to_string(c.cavity.shape)}, {"r", r}, {"R", R}, {"p", p}, {"d", d}};
  double estimate = 0.0, error = 0.0;
  if (d != 2) {
    if (!ball) throw ConfigError("config /cavity/shape: non-ball shapes need d = 2");
    const auto prof = solver::radial_solve(r, R, d, p, c.capacity.radial_points, c.solver);
    if (!prof.converged) throw std::runtime_error("radial solve did not converge");
    const auto half = solver::radial_solve(r, R, d, p, (c.capacity.radial_points + 1) / 2, c.solver);
    estimate = prof.energy;
    error = std::abs(prof.energy - half.energy) / 3.0;
    out["method"] = "radial";
  } else {
    mesh::Domain2D dom;
    if (ball) {
      dom = mesh::annulus_domain(r, R, c.capacity.h_far_factor * R, c.capacity.h_inner_factor * r);
    } else {
      dom.outer_radius = R;
      dom.h_far = c.capacity.h_far_factor * R;
      mesh::Hole h;
      h.kind = mesh::Hole::Kind::Polygon;
      for (const auto& v : c.cavity.reference_polygon()) h.polygon.push_back({r * v[0], r * v[1]});
      for (const auto& v : h.polygon) h.radius = std::max(h.radius, std::hypot(v[0], v[1]));
      h.tag = mesh::BoundaryTag::cavity(0);
      h.h_boundary = c.capacity.h_inner_factor * r;
      dom.holes.push_back(h);
      dom.sources.push_back({{0.0, 0.0}, h.radius, h.h_boundary});
    }
    dom.min_angle_deg = c.mesh.min_angle_deg;
    dom.quality_floor_deg = c.mesh.quality_floor_deg;
    solver::CapacityOptions co;
    co.levels = c.capacity.levels;
    co.solve = c.solver;
    const auto est = solver::capacity(dom, p, co);
    if (!est.converged) throw std::runtime_error("capacity solve did not converge");
    estimate = est.extrapolated;
    error = est.error_estimate;
    out["method"] = "fem";
    out["estimate"] = est.to_json();
  }
  out["capacity"] = estimate;
  out["error_estimate"] = error;
  std::cout << "capacity = " << fixed(estimate, 8) << " +/- " << fixed(error, 2) << "\n";
  if (ball) {
    const double exact = analytic::ball_capacity(d, p, r, OuterRadius(R)).value;
    out["closed_form"] = exact;
    std::cout << "closed form = " << fixed(exact, 8) << " (rel. dev " << fixed(std::abs(estimate / exact - 1), 3)
              << ")\n";
  }
  Run run(c);
  run.write("capacity.json", out.dump(2) + "\n");
  run.finish();
  return 0;
}

int cmd_solve(const RunConfig& c) {
  const auto pd = perforation(c);
  const auto m = mesh::mesh_perforated_ball(pd, c.mesh);
  const auto rep = solver::solve_dirichlet(m, {}, c.params.p, c.solver);
  const int d = c.params.d;
  const double capK = experiments::whole_space_capacity(c.cavity, d, c.params.p);
  const double capB = analytic::ball_capacity(d, c.params.p, 1.0, OuterRadius(c.params.R)).value;
  const double sigma = geometry::sigma_estimate(pd.anchors);
  Run run(c);
  nlohmann::json summary{{"energy", rep.energy},
                         {"converged", rep.converged},
                         {"cells", m.cells.size()},
                         {"alpha", pd.alpha},
                         {"A_R_analytic", analytic::a_star(Tau(c.params.tau), sigma, capK, capB, c.params.p, d)},
                         {"cap_limit_analytic",
                          analytic::limit_capacity(Tau(c.params.tau), sigma, capK, capB, c.params.p, d)},
                         {"report", rep.to_json()}};
  run.write("solve.json", summary.dump(2) + "\n");
  std::ostringstream mo, fo;
  mesh::write_mesh(mo, m);
  solver::write_field(fo, rep.field);
  run.write("mesh.txt", mo.str());
  run.write("field.txt", fo.str());
  run.write("field.svg", experiments::field_svg(m, rep.field.values));
  std::cout << "energy = " << fixed(rep.energy, 8) << " (" << rep.message << ", " << rep.iterations
            << " iterations, " << m.cells.size() << " cells); limit capacity "
            << fixed(summary["cap_limit_analytic"].get<double>(), 8) << "\n";
  run.finish();
  return rep.converged ? 0 : 1;
}

int cmd_ansatz(const RunConfig& c) {
  const auto pd = perforation(c);
  mesh::MeshOptions mo = c.mesh;
  mo.ansatz_shells = true;
  const auto m = mesh::mesh_perforated_ball(pd, mo);
  const auto rep = solver::solve_dirichlet(m, {}, c.params.p, c.solver);
  ansatz::AnsatzSpec spec;
  spec.domain = pd;
  spec.mode = ansatz::parse_mode(c.ansatz.mode);
  spec.validate();
  std::vector<double> grid = c.ansatz.A_grid;
  if (grid.empty())
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  const auto gaps = ansatz::admissibility_gap(rep, grid, spec, m);
  std::ostringstream os;
  os << "A,ansatz_energy,closed_energy,gap\n";
  for (const auto& g : gaps) {
    ansatz::AnsatzSpec s = spec;
    s.A = g.A;
    os << experiments::num(g.A) << ',' << experiments::num(g.ansatz_energy) << ','
       << experiments::num(ansatz::ansatz_energy_closed(s)) << ',' << experiments::num(g.gap) << '\n';
  }
  const auto& best = ansatz::argmin(gaps);
  Run run(c);
  run.write("ansatz.csv", os.str());
  const nlohmann::json s{{"solved_energy", rep.energy},
                         {"converged", rep.converged},
                         {"argmin_A", best.A},
                         {"decomposition_a_star", ansatz::decomposition_a_star(spec)},
                         {"min_gap", best.gap}};
  run.write("ansatz.json", s.dump(2) + "\n");
  std::cout << "solved energy " << fixed(rep.energy, 8) << ", best ansatz A = " << best.A << " (gap "
            << fixed(best.gap, 4) << "), decomposition amplitude " << fixed(s["decomposition_a_star"].get<double>())
            << "\n";
  run.finish();
  return rep.converged ? 0 : 1;
}

int cmd_sweep(const RunConfig& c, int threads) {
  const auto rows = experiments::run_critical_sweep(config::sweep_config(c), threads);
  Run run(c);
  run.write("sweep.csv", experiments::sweep_csv(rows));
  run.write("cones.csv", experiments::cones_csv(rows));
  bool ok = true;
  std::printf("%10s %12s %12s %12s %12s %12s  %s\n", "eps", "tau", "cap", "limit", "bulk err", "cone margin",
              "status");
  for (const auto& r : rows) {
    std::printf("%10.5g %12.5g %12.6g %12.6g %12.4g %12.4g  %s\n", r.eps, r.tau, r.cap_numeric, r.cap_limit_analytic,
                r.sup_err_bulk, r.cone_min_margin_rel, r.status.c_str());
    ok = ok && r.status == "ok";
  }
  run.finish();
  return ok ? 0 : 1;
}

int cmd_separation(const RunConfig& c, int threads) {
  const auto rows = experiments::run_separation(config::separation_config(c), threads);
  Run run(c);
  run.write("separation.csv", experiments::separation_csv(rows));
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("delta %-6g D %-12.6g F %-12.6g G %-12.6g %s\n", r.delta, r.D, r.F, r.G, r.status.c_str());
    ok = ok && r.status == "ok";
  }
  if (rows.size() >= 2 && ok) {
    const auto f = experiments::fit_separation(rows, analytic::gamma_exponent(c.params.d, c.params.p));
    const nlohmann::json j{{"slope_origin", f.slope_origin}, {"r2_origin", f.r2_origin}, {"slope", f.slope},
                           {"intercept", f.intercept},       {"r2_affine", f.r2_affine}, {"increasing", f.increasing},
                           {"ordered", f.ordered},           {"c1", f.c1}};
    run.write("fit.json", j.dump(2) + "\n");
    std::printf("F ~ %.4g delta (R^2 %.4f); increasing %s; G <= F <= D %s\n", f.slope_origin, f.r2_origin,
                f.increasing ? "yes" : "no", f.ordered ? "yes" : "no");
  }
  run.finish();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-capacity of sphere-perforated domains: solver and experiment driver"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  int threads = 0;
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("-o,--out", out_dir, "output root (overrides output_dir)");
  app.add_option("-j,--threads", threads, "worker threads (default: PCAP_THREADS or all cores)")->check(CLI::PositiveNumber);

  std::vector<Override> ov;
  auto* verify = app.add_subcommand("verify", "run the closed-form self-test battery");

  auto* anchors = app.add_subcommand("anchors", "generate an eps-separated anchor set");
  params_flags(anchors, ov);
  over<double>(anchors, ov, "--eps", "separation", [](RunConfig& c, double v) { c.params.eps = v; });
  over<std::string>(anchors, ov, "--kind", "circle | greedy", [](RunConfig& c, const std::string& v) { c.anchors = v; });

  auto* meshc = app.add_subcommand("mesh", "mesh a perforated ball");
  auto* solve = app.add_subcommand("solve", "solve the capacity problem of a perforated ball");
  auto* ans = app.add_subcommand("ansatz", "compare the solved field with the ansatz family");
  for (auto* s : {meshc, solve, ans}) {
    params_flags(s, ov);
    cavity_flags(s, ov);
    domain_flags(s, ov);
    over<double>(s, ov, "--eps", "anchor separation", [](RunConfig& c, double v) { c.params.eps = v; });
  }
  over<std::string>(ans, ov, "--mode", "ball | whole_space", [](RunConfig& c, const std::string& v) { c.ansatz.mode = v; });

  auto* cap = app.add_subcommand("capacity", "capacity of one cavity with a refinement error bar");
  params_flags(cap, ov);
  cavity_flags(cap, ov);
  over<double>(cap, ov, "--r", "inner radius or shape scale", [](RunConfig& c, double v) { c.capacity.r = v; });
  over<int>(cap, ov, "--levels", "refinement levels (>= 3)", [](RunConfig& c, int v) { c.capacity.levels = v; });

  auto* sweep = app.add_subcommand("sweep", "critical-window sweep over eps and tau");
  params_flags(sweep, ov);
  cavity_flags(sweep, ov);
  domain_flags(sweep, ov);
  over<std::vector<double>>(sweep, ov, "--eps", "eps grid", [](RunConfig& c, const std::vector<double>& v) { c.sweep.eps = v; });
  over<std::vector<double>>(sweep, ov, "--taus", "tau grid", [](RunConfig& c, const std::vector<double>& v) { c.sweep.tau = v; });
  over<std::string>(sweep, ov, "--tau-mode", "window | absolute",
                    [](RunConfig& c, const std::string& v) { c.sweep.tau_mode = v; });

  auto* sep = app.add_subcommand("separation", "neck separation experiment over delta");
  params_flags(sep, ov);
  over<double>(sep, ov, "--tau1", "window parameter", [](RunConfig& c, double v) { c.separation.tau_1 = v; });
  over<double>(sep, ov, "--eps", "anchor separation", [](RunConfig& c, double v) { c.separation.eps = v; });
  over<std::vector<double>>(sep, ov, "--delta", "delta grid",
                            [](RunConfig& c, const std::vector<double>& v) { c.separation.delta = v; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (verify->parsed()) {
    try {
      return cmd_verify();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = config::load(config_path);
    for (auto* s : app.get_subcommands()) cfg.experiment = s->get_name();
    for (const auto& f : ov) f(cfg);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    config::validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (threads == 0) threads = experiments::thread_count();

  try {
    const std::string& x = cfg.experiment;
    if (x == "anchors") return cmd_anchors(cfg);
    if (x == "mesh") return cmd_mesh(cfg);
    if (x == "capacity") return cmd_capacity(cfg);
    if (x == "solve") return cmd_solve(cfg);
    if (x == "ansatz") return cmd_ansatz(cfg);
    if (x == "sweep") return cmd_sweep(cfg, threads);
    if (x == "separation") return cmd_separation(cfg, threads);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
