#include <gtest/gtest.h>

#include <cstdlib>
#include <numbers>
#include <set>

#include "pcap/experiments.hpp"

using namespace pcap;
using namespace pcap::experiments;

namespace {
constexpr double kPi = std::numbers::pi;

SweepConfig small_sweep() {
  SweepConfig c;
  c.p = 1.5;
  c.eps = {0.2};
  const double capK = analytic::ball_capacity(2, c.p, 1.0, OuterRadius::infinity()).value;
  const double capB = analytic::ball_capacity(2, c.p, 1.0, OuterRadius(c.R)).value;
  c.tau = {0.0, window_center(2 * kPi, capK, capB, c.p, 2)};
  c.probe_samples = 90;
  c.cones = 3;
  return c;
}

const std::vector<SweepRow>& small_rows() {
  static const std::vector<SweepRow> rows = run_critical_sweep(small_sweep(), 2);
  return rows;
}

SeparationRow fake_row(double delta, double D, double F, double G) {
  SeparationRow r;
  r.delta = delta;
  r.tau_1 = 0.01;
  r.eps = 0.025;
  r.D = D;
  r.F = F;
  r.G = G;
  return r;
}
}  // namespace

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (int threads : {1, 3, 8}) {
    std::vector<int> hits(101, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, threads);
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  parallel_for(0, [](std::size_t) { FAIL(); }, 4);
}

TEST(ThreadCount, ReadsEnvironment) {
  setenv("PCAP_THREADS", "3", 1);
  EXPECT_EQ(thread_count(), 3);
  setenv("PCAP_THREADS", "zero", 1);
  EXPECT_GE(thread_count(), 1);
  setenv("PCAP_THREADS", "0", 1);
  EXPECT_GE(thread_count(), 1);
  unsetenv("PCAP_THREADS");
}

TEST(MakeAnchors, Kinds) {
  EXPECT_EQ(make_anchors("circle", 2, 0.1, 0).size(), 63u);
  const auto g = make_anchors("greedy", 2, 0.1, 4);
  EXPECT_GE(geometry::min_separation(g), 0.1 * (1 - 1e-12));
  EXPECT_THROW(make_anchors("circle", 3, 0.1, 0), DomainError);
  EXPECT_THROW(make_anchors("lattice", 2, 0.1, 0), DomainError);
}

TEST(WindowCenter, GivesHalfAmplitude) {
  for (double p : {1.2, 1.5, 1.8}) {
    const double capK = analytic::ball_capacity(2, p, 1.0, OuterRadius::infinity()).value;
    const double capB = analytic::ball_capacity(2, p, 1.0, OuterRadius(2.0)).value;
    const double t = window_center(2 * kPi, capK, capB, p, 2);
    EXPECT_NEAR(analytic::a_star(Tau(t), 2 * kPi, capK, capB, p, 2), 0.5, 1e-12);
  }
}

TEST(WholeSpaceCapacity, BallAndSquare) {
  const double p = 1.5;
  geometry::CavitySpec ball;
  EXPECT_DOUBLE_EQ(whole_space_capacity(ball, 2, p), analytic::ball_capacity(2, p, 1.0, OuterRadius::infinity()).value);
  geometry::CavitySpec sq;
  sq.shape = geometry::CavityShape::Square;
  const double c = whole_space_capacity(sq, 2, p);
  EXPECT_GT(c, analytic::ball_capacity(2, p, std::sqrt(0.5), OuterRadius::infinity()).value);
  EXPECT_LT(c, analytic::ball_capacity(2, p, 1.0, OuterRadius::infinity()).value);
}

TEST(ConeDiagnostic, ZeroFieldHasZeroBound) {
  const mesh::Mesh m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.2, 0.05));
  solver::BoundaryValues bc;
  bc.cavity = 0.0;
  const auto rep = solver::solve_dirichlet(m, bc, 1.5);
  for (const auto& c : run_cone_diagnostic(rep, sample_cones(4, 1.0, 3))) {
    EXPECT_EQ(c.A_tilde, 0.0);
    EXPECT_EQ(c.bound, 0.0);
    EXPECT_EQ(c.energy, 0.0);
    EXPECT_GT(c.mu, 0.0);
    EXPECT_LE(c.mu, 1.0);
  }
  EXPECT_THROW(run_cone_diagnostic(rep, {{{1.0, 0.0}, 0.5, 2.5}}), DomainError);
}

TEST(ConeDiagnostic, RadialControlIsTight) {
  for (double p : {1.2, 1.5}) {
    const auto c = run_radial_control(p);
    EXPECT_NEAR(c.mu, 1.0, 1e-12);
    EXPECT_LT(std::abs(c.relative()), 5e-3) << "p=" << p;
  }
}

TEST(ConeDiagnostic, SampledConesAreReproducible) {
  const auto a = sample_cones(5, 1.2, 11), b = sample_cones(5, 1.2, 11);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].direction, b[i].direction);
    EXPECT_EQ(a[i].delta, b[i].delta);
    EXPECT_NEAR(std::hypot(a[i].direction[0], a[i].direction[1]), 1.0, 1e-14);
    EXPECT_GE(a[i].delta, 0.2);
    EXPECT_LE(a[i].delta, 1.0);
  }
}

TEST(Sweep, RowInvariants) {
  const auto& rows = small_rows();
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[0].tau, rows[1].tau);
  for (const auto& r : rows) {
    EXPECT_EQ(r.status, "ok");
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.N_anchors, 31u);
    EXPECT_GT(r.cap_numeric, 0.0);
    // Perforated capacity sits below that of the filled ball B(0, 1+eps).
    EXPECT_LE(r.cap_numeric, r.cap_ball_eps_rel * (1 + 1e-3));
    EXPECT_LE(r.max_principle_violation, 1e-9);
    EXPECT_EQ(r.cone_margins.size(), 3u);
  }
  // Vanishing cavities: negligible capacity and amplitude.
  EXPECT_LT(rows[0].cap_numeric, 0.05 * rows[0].cap_ball_rel);
  EXPECT_LT(rows[0].sup_err_bulk, 0.01);
  EXPECT_NEAR(rows[1].A_R_analytic, 0.5, 0.03);
  EXPECT_TRUE(std::isfinite(rows[1].sup_err_global));
  EXPECT_TRUE(std::isfinite(rows[1].ansatz_energy));
  EXPECT_GE(rows[1].ansatz_energy, rows[1].cap_numeric * (1 - 1e-9));
}

TEST(Sweep, ErrorsLandInStatus) {
  SweepConfig c = small_sweep();
  c.d = 3;
  const auto r = run_sweep_point(c, 0.2, 0.1);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.status.rfind("error:", 0), 0u);
}

TEST(Separation, SmallConfigOrdering) {
  SeparationConfig c;
  c.eps = 0.1;
  c.delta = {0.2, 0.05, 0.1};
  const auto rows = run_separation(c, 2);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].status, "ok");
    if (i) EXPECT_LT(rows[i - 1].delta, rows[i].delta);
    EXPECT_GE(rows[i].sup_omega_tenth, rows[i].G - 1e-12);
  }
  const auto f = fit_separation(rows, analytic::gamma_exponent(2, c.p));
  EXPECT_TRUE(f.increasing);
  EXPECT_TRUE(f.ordered);
  EXPECT_GT(f.slope_origin, 0.0);

  c.delta = {0.01};
  EXPECT_EQ(run_separation(c, 1)[0].status.rfind("error:", 0), 0u);
}

TEST(FitSeparation, SyntheticRows) {
  const std::vector<SeparationRow> lin{fake_row(0.05, 0.02, 0.015, 0.01), fake_row(0.1, 0.04, 0.03, 0.02),
                                       fake_row(0.2, 0.07, 0.06, 0.05)};
  const auto f = fit_separation(lin, 0.5);
  EXPECT_NEAR(f.slope_origin, 0.3, 1e-12);
  EXPECT_NEAR(f.r2_origin, 1.0, 1e-12);
  EXPECT_NEAR(f.slope, 0.3, 1e-12);
  EXPECT_NEAR(f.intercept, 0.0, 1e-12);
  EXPECT_TRUE(f.increasing);
  EXPECT_TRUE(f.ordered);
  EXPECT_NEAR(f.c1, 0.01 / (0.1 * 0.025 * 0.94), 1e-9);

  auto bad = lin;
  bad[2].F = 0.01;
  EXPECT_FALSE(fit_separation(bad, 0.5).increasing);
  bad = lin;
  bad[1].G = 0.05;
  EXPECT_FALSE(fit_separation(bad, 0.5).ordered);
  EXPECT_THROW(fit_separation({lin[0]}, 0.5), DomainError);
}

TEST(Export, CsvShapes) {
  EXPECT_EQ(sweep_csv({}), std::string(kSweepHeader) + "\n");
  EXPECT_EQ(cones_csv({}), std::string(kConeHeader) + "\n");
  EXPECT_EQ(separation_csv({}), std::string(kSeparationHeader) + "\n");
  const std::string csv = sweep_csv(small_rows());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto cols = [](const std::string& line) { return std::count(line.begin(), line.end(), ',') + 1; };
  const std::string second = csv.substr(csv.find('\n') + 1, csv.find('\n', csv.find('\n') + 1) - csv.find('\n') - 1);
  EXPECT_EQ(cols(second), cols(kSweepHeader));
  const std::string cones = cones_csv(small_rows());
  EXPECT_EQ(std::count(cones.begin(), cones.end(), '\n'), 7);
}

TEST(Export, SweepIsDeterministic) {
  EXPECT_EQ(sweep_csv(run_critical_sweep(small_sweep(), 1)), sweep_csv(small_rows()));
}

TEST(Export, NumbersAndEscaping) {
  EXPECT_EQ(num(std::nan("")), "nan");
  EXPECT_EQ(num(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(num(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(std::stod(num(0.1)), 0.1);
  EXPECT_EQ(std::stod(num(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(csv_escape("ok"), "ok");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"x\""), "\"say \"\"x\"\"\"");
}

TEST(Export, HashAndManifest) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  const nlohmann::json cfg{{"seed", 7}, {"p", 1.5}};
  const nlohmann::json files = nlohmann::json::array({{{"name", "sweep.csv"}, {"bytes", 3}, {"fnv1a", fnv1a_hex("x,y")}}});
  const auto m = manifest(cfg, "sweep", files, 1.5);
  EXPECT_EQ(m["experiment"], "sweep");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_EQ(m["config_hash"], fnv1a_hex(cfg.dump()));
  ASSERT_TRUE(m["files"].is_array());
  EXPECT_EQ(m["files"][0]["name"], "sweep.csv");
  EXPECT_EQ(m["seconds"], 1.5);
  EXPECT_TRUE(manifest(nlohmann::json::object(), "x", nlohmann::json::array(), 0)["seed"].is_null());
}

TEST(Export, WriteFileReportsPath) {
  try {
    write_file("/nonexistent-dir/out.csv", "x");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
  }
}

TEST(Export, FieldSvg) {
  const mesh::Mesh m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.1));
  const auto rep = solver::solve_dirichlet(m, {}, 1.5);
  const std::string svg = field_svg(m, rep.field.values, 5, 200);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t polys = 0;
  for (std::size_t k = svg.find("<polygon"); k != std::string::npos; k = svg.find("<polygon", k + 1)) ++polys;
  EXPECT_EQ(polys, m.cells.size());
  EXPECT_NE(svg.find("<line"), std::string::npos);
  EXPECT_THROW(field_svg(m, {0.0}), MismatchError);
}
