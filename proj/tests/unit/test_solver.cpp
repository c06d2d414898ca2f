#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pcap/analytic.hpp"
#include "pcap/geometry.hpp"
#include "pcap/mesh.hpp"
#include "pcap/solver.hpp"

using namespace pcap;
using namespace pcap::solver;

namespace {
constexpr double kPi = std::numbers::pi;

// n x n grid on the unit square, two triangles per square.
mesh::Mesh unit_square(int n) {
  mesh::Mesh m;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) m.vertices.push_back({double(i) / n, double(j) / n});
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      m.cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return m;
}

const mesh::Mesh& fine_annulus() {
  static const mesh::Mesh m = mesh::generate([] {
    auto d = mesh::annulus_domain(0.5, 2.0, 0.04, 0.004);
    d.growth = 0.2;
    return d;
  }());
  return m;
}

std::vector<double> interpolate_profile(const mesh::Mesh& m, double r, double R, double p) {
  const double g = analytic::gamma_exponent(2, p);
  std::vector<double> u(m.vertices.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = analytic::radial_profile_annulus(std::clamp(std::hypot(m.vertices[i][0], m.vertices[i][1]), r, R), r, R, g);
  return u;
}

}  // namespace

TEST(Energy, ConstantField) {
  const auto m = unit_square(8);
  std::vector<double> u(m.vertices.size(), 0.3);
  EXPECT_EQ(energy(m, u, 1.5), 0.0);
  EXPECT_NEAR(energy(m, u, 1.5, 0.2), std::pow(0.2, 1.5), 1e-14);
}

TEST(Energy, LinearFieldOnUnitSquare) {
  const auto m = unit_square(7);
  std::vector<double> u(m.vertices.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = -2.5 * m.vertices[i][0];
  for (double p : {1.2, 2.0, 3.0}) EXPECT_NEAR(energy(m, u, p), std::pow(2.5, p), 1e-12 * std::pow(2.5, p));
}

TEST(Energy, InterpolatedProfileNearClosedForm) {
  const auto& m = fine_annulus();
  for (double p : {1.5, 1.8}) {
    const double E = energy(m, interpolate_profile(m, 0.5, 2.0, p), p);
    const double c = analytic::ball_capacity(2, p, 0.5, OuterRadius(2.0)).value;
    EXPECT_NEAR(E, c, 0.01 * c);
  }
}

TEST(Energy, GradientMatchesFiniteDifferences) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.4, 0.15));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const double p = 1.1 + 1.8 * U(rng), mu = 0.05 + 0.5 * U(rng);
    std::vector<double> u(m.vertices.size());
    for (auto& x : u) x = U(rng);
    const auto ev = assemble_energy(m, u, p, mu);
    // Central differences along a random direction.
    std::vector<double> dir(u.size());
    for (auto& x : dir) x = U(rng) - 0.5;
    double exact = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) exact += ev.gradient[i] * dir[i];
    const double h = 1e-5;
    auto shifted = [&](double s) {
      std::vector<double> w(u);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += s * dir[i];
      return energy(m, w, p, mu);
    };
    const double fd = (shifted(h) - shifted(-h)) / (2 * h);
    EXPECT_NEAR(fd, exact, 1e-6 * std::abs(exact));
    // And along a handful of coordinate directions.
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = static_cast<std::size_t>(U(rng) * u.size());
      std::vector<double> a(u), b(u);
      a[i] += h;
      b[i] -= h;
      const double fdi = (energy(m, a, p, mu) - energy(m, b, p, mu)) / (2 * h);
      EXPECT_NEAR(fdi, ev.gradient[i], 1e-6 * std::max(std::abs(ev.gradient[i]), 1e-3));
    }
  }
}

TEST(Energy, RejectsMismatchedField) {
  const auto m = unit_square(2);
  EXPECT_THROW(energy(m, std::vector<double>(3, 0.0), 2.0), MismatchError);
  std::vector<double> u(m.vertices.size(), 0.0);
  u[0] = std::nan("");
  EXPECT_THROW(energy(m, u, 2.0), DomainError);
}

TEST(SolveDirichlet, AnnulusMatchesProfile) {
  const auto& m = fine_annulus();
  // p = 1.2 is much steeper at the cavity, so the same mesh only reaches a few 1e-3 there.
  for (auto [p, tol] : {std::pair{1.5, 1e-3}, {1.8, 1e-3}, {1.2, 4e-3}}) {
    const auto rep = solve_dirichlet(m, {}, p);
    ASSERT_TRUE(rep.converged) << rep.message;
    EXPECT_LE(rep.final_residual, 1e-10);
    EXPECT_LE(rep.max_principle_violation, 1e-9);
    EXPECT_LE(rep.flux_imbalance, 1e-6);
    const auto exact = interpolate_profile(m, 0.5, 2.0, p);
    double err = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) err = std::max(err, std::abs(exact[i] - rep.field.values[i]));
    EXPECT_LE(err, tol) << "p = " << p;
    for (double v : rep.field.values) {
      EXPECT_GE(v, -1e-9);
      EXPECT_LE(v, 1.0 + 1e-9);
    }
  }
}

TEST(SolveDirichlet, QuadraticCaseIsOneLinearSolve) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.2, 0.05));
  const auto rep = solve_dirichlet(m, {}, 2.0);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
}

TEST(SolveDirichlet, ConstantBoundaryData) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.1));
  BoundaryValues bc;
  bc.outer = 0.7;
  bc.cavity = 0.7;
  const auto rep = solve_dirichlet(m, bc, 1.5);
  EXPECT_TRUE(rep.converged);
  for (double v : rep.field.values) EXPECT_NEAR(v, 0.7, 1e-12);
  EXPECT_LE(rep.energy, 1e-20);
}

TEST(SolveDirichlet, PerforatedMaximumPrinciple) {
  const auto pd = geometry::build_perforation(geometry::anchors_circle(12), 0.02, {}, 2.0, 2, 1.2);
  const auto m = mesh::mesh_perforated_ball(pd, 0.2, 0.3);
  for (double p : {1.2, 2.5}) {
    const auto rep = solve_dirichlet(m, {}, p);
    EXPECT_TRUE(rep.converged) << rep.message;
    EXPECT_LE(rep.max_principle_violation, 1e-9);
    const auto [sup, inf] = field_sup_inf(rep.field, [](Vec2) { return true; });
    EXPECT_LE(sup, 1.0 + 1e-9);
    EXPECT_GE(inf, -1e-9);
    // Stage energies along the continuation never increase.
    for (std::size_t s = 1; s < rep.stages.size(); ++s)
      EXPECT_LE(rep.stages[s].energy, rep.stages[s - 1].energy * (1 + 1e-12));
  }
}

TEST(SolveDirichlet, PerCavityValues) {
  const auto pd = geometry::build_perforation(geometry::anchors_circle(4), 0.05, {}, 2.0, 2, 1.5);
  const auto m = mesh::mesh_perforated_ball(pd, 0.3, 0.5);
  BoundaryValues bc;
  bc.per_cavity[2] = 0.25;
  const auto rep = solve_dirichlet(m, bc, 1.5);
  for (const auto& e : m.boundary_edges)
    for (int v : e.v) EXPECT_DOUBLE_EQ(rep.field.values[v], bc.value(e.tag));
  EXPECT_LE(rep.max_principle_violation, 1e-9);
}

TEST(SolveDirichlet, ReportJson) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.4, 0.15));
  const auto j = solve_dirichlet(m, {}, 1.5).to_json();
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_EQ(j["n_cells"].get<std::size_t>(), m.cells.size());
  EXPECT_FALSE(j["mu_schedule"].empty());
}

TEST(Capacity, AnnulusWithinOnePercent) {
  const auto base = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.2, 0.05));
  for (double p : {1.2, 1.5, 1.8}) {
    const auto est = capacity(base, p);
    const double c = analytic::ball_capacity(2, p, 0.5, OuterRadius(2.0)).value;
    EXPECT_TRUE(est.monotone);
    EXPECT_TRUE(est.converged);
    EXPECT_EQ(est.energies.size(), 3u);
    EXPECT_NEAR(est.extrapolated, c, 0.01 * c);
    EXPECT_GE(est.order, 0.5);
    EXPECT_LE(est.order, 2.5);
    EXPECT_NEAR(est.error_estimate, std::abs(est.energies.back() - est.extrapolated), 1e-15);
  }
  EXPECT_NEAR(analytic::ball_capacity(2, 1.5, 0.5, OuterRadius(2.0)).value, 2 * kPi / std::sqrt(1.5), 1e-12);
}

TEST(Capacity, ScalingPair) {
  const double p = 1.5;
  const auto small = capacity(mesh::annulus_domain(0.5, 4.0, 0.4, 0.05), p);
  const auto big = capacity(mesh::annulus_domain(1.0, 8.0, 0.8, 0.1), p);
  const double scaled = analytic::capacity_scaling(small.extrapolated, 2.0, 2, p);
  EXPECT_NEAR(scaled, big.extrapolated, small.error_estimate + big.error_estimate + 1e-3 * big.extrapolated);
}

TEST(Capacity, WithinBracket) {
  const double p = 1.5, R = 2.0;
  const double g = analytic::gamma_exponent(2, p);
  const auto est = capacity(mesh::annulus_domain(0.5, R, 0.2, 0.05), p);
  const double whole = analytic::ball_capacity(2, p, 0.5, OuterRadius::infinity()).value;
  const auto [lo, hi] = analytic::capacity_bracket(whole, R, g, p);
  EXPECT_GE(est.extrapolated, lo);
  EXPECT_LE(est.extrapolated, hi);
}

TEST(Capacity, Extrapolate3) {
  // E_h = 3 + h^2 exactly.
  const auto [e, q] = extrapolate3(4.0, 3.25, 3.0625);
  EXPECT_NEAR(e, 3.0, 1e-14);
  EXPECT_NEAR(q, 2.0, 1e-14);
  EXPECT_NEAR(extrapolate3(4.0, 3.9999, 3.0).second, 0.5, 0.0);
  EXPECT_THROW(capacity(unit_square(2), 1.5, {.levels = 2}), DomainError);
}

TEST(RadialSolve, MatchesClosedForm) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    const int d = 2 + static_cast<int>(3 * U(rng));
    const double p = 1.1 + (std::min(d, 3) - 1.2) * U(rng);
    const double r = 0.1 + 0.9 * U(rng), R = r * (1.5 + 6 * U(rng));
    const auto prof = radial_solve(r, R, d, p, 1024);
    ASSERT_TRUE(prof.converged);
    const double g = analytic::gamma_exponent(d, p);
    double err = 0.0;
    for (std::size_t i = 0; i < prof.t.size(); ++i)
      err = std::max(err, std::abs(prof.values[i] - analytic::radial_profile_annulus(prof.t[i], r, R, g)));
    EXPECT_LE(err, 1e-3) << d << ' ' << p << ' ' << r << ' ' << R;
    const double c = analytic::ball_capacity(d, p, r, OuterRadius(R)).value;
    EXPECT_NEAR(prof.energy, c, 1e-3 * c);
  }
}

TEST(RadialSolve, SecondOrderConvergence) {
  // On the geometric grid the discrete constant-flux profile is nodally exact; the energy
  // carries the O(n^-2) error.
  const double p = 1.5, r = 0.5, R = 2.0, g = analytic::gamma_exponent(2, p);
  const double c = analytic::ball_capacity(2, p, r, OuterRadius(R)).value;
  std::vector<double> err;
  for (int n : {32, 64, 128}) {
    const auto prof = radial_solve(r, R, 2, p, n);
    double e = 0.0;
    for (std::size_t i = 0; i < prof.t.size(); ++i)
      e = std::max(e, std::abs(prof.values[i] - analytic::radial_profile_annulus(prof.t[i], r, R, g)));
    EXPECT_LE(e, 10.0 / (n * n));
    EXPECT_GT(prof.energy, c);
    err.push_back(prof.energy - c);
  }
  EXPECT_GT(std::log2(err[0] / err[1]), 1.8);
  EXPECT_GT(std::log2(err[1] / err[2]), 1.8);
}

TEST(RadialSolve, UnitBallInSpace) {
  const auto prof = radial_solve(1.0, 1e4, 3, 2.0, 4096);
  EXPECT_NEAR(prof.energy, 4 * kPi, 2e-3 * 4 * kPi);
  for (std::size_t i = 0; i < prof.t.size(); i += 256) EXPECT_NEAR(prof.values[i], 1.0 / prof.t[i], 1e-3);
}

TEST(RadialSolve, ThinAnnulus) {
  const auto prof = radial_solve(1.0 - 1e-6, 1.0, 2, 1.5, 32);
  EXPECT_TRUE(std::isfinite(prof.energy));
  // Closed form: 2 pi (1e-6)^{-1/2} / (2/3)^{1/2} ~ 7.7e3.
  EXPECT_GT(prof.energy, 5e3);
  EXPECT_THROW(radial_solve(1.0, 0.5, 2, 1.5, 32), DomainError);
  EXPECT_THROW(radial_solve(0.5, 1.0, 2, 1.5, 8), DomainError);
}

TEST(Regions, AdditivityAndCones) {
  const auto& m = fine_annulus();
  const double p = 1.5;
  const auto rep = solve_dirichlet(m, {}, p);
  EXPECT_NEAR(region_energy(rep, [](Vec2) { return true; }), rep.energy, 1e-12 * rep.energy);
  const double left = region_energy(rep, [](Vec2 x) { return x[0] < 0.3; });
  const double right = region_energy(rep, [](Vec2 x) { return x[0] >= 0.3; });
  EXPECT_NEAR(left + right, rep.energy, 1e-12 * rep.energy);
  for (double half : {0.2, 0.5, 1.0}) {
    const double c = std::cos(half);
    const double cone = region_energy(rep, [c](Vec2 x) { return x[0] >= c * std::hypot(x[0], x[1]); });
    EXPECT_NEAR(cone / rep.energy, half / kPi, 0.02 * half / kPi);
  }
}

TEST(Regions, SupInfOnShells) {
  const auto& m = fine_annulus();
  const double p = 1.5, g = analytic::gamma_exponent(2, p);
  const auto u = interpolate_profile(m, 0.5, 2.0, p);
  const Field f{&m, u};
  const auto [sup, inf] = field_sup_inf(f, [](Vec2 x) {
    const double t = std::hypot(x[0], x[1]);
    return t >= 0.8 && t <= 1.2;
  });
  EXPECT_NEAR(sup, analytic::radial_profile_annulus(0.8, 0.5, 2.0, g), 0.01);
  EXPECT_NEAR(inf, analytic::radial_profile_annulus(1.2, 0.5, 2.0, g), 0.01);
  EXPECT_LE(sup, analytic::radial_profile_annulus(0.8, 0.5, 2.0, g) + 1e-12);
  EXPECT_GE(inf, analytic::radial_profile_annulus(1.2, 0.5, 2.0, g) - 1e-12);
  const Field c{&m, std::vector<double>(m.vertices.size(), 0.4)};
  const auto [s2, i2] = field_sup_inf(c, [](Vec2) { return true; });
  EXPECT_EQ(s2, i2);
  EXPECT_THROW(field_sup_inf(f, [](Vec2) { return false; }), DomainError);

  const auto rep = solve_dirichlet(m, {}, p);
  const auto [s3, i3] = field_sup_inf(rep.field, [](Vec2 x) { return std::hypot(x[0], x[1]) < 0.5 + 1e-9; });
  EXPECT_EQ(s3, 1.0);
  EXPECT_EQ(i3, 1.0);
}

TEST(Distances, NormProperties) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.1));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto rnd = [&] {
    Field f{&m, std::vector<double>(m.vertices.size())};
    for (auto& x : f.values) x = U(rng);
    return f;
  };
  for (int k = 0; k < 10; ++k) {
    const double p = 1.1 + 2 * U(rng);
    const Field a = rnd(), b = rnd(), c = rnd();
    EXPECT_EQ(lp_gradient_distance(a, a, p), 0.0);
    EXPECT_LE(lp_gradient_distance(a, c, p), lp_gradient_distance(a, b, p) + lp_gradient_distance(b, c, p) + 1e-12);
    EXPECT_NEAR(lp_gradient_distance(a, b, p), lp_gradient_distance(b, a, p), 1e-12);
  }
  const auto other = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.4, 0.1));
  const Field x{&other, std::vector<double>(other.vertices.size(), 0.0)};
  EXPECT_THROW(lp_gradient_distance(rnd(), x, 1.5), MismatchError);
}

TEST(Distances, SolvedFieldApproachesProfile) {
  const double p = 1.5;
  const auto m0 = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.06));
  const auto m1 = mesh::refine_all(m0);
  const auto m2 = mesh::refine_all(m1);
  std::vector<double> d;
  for (const mesh::Mesh* m : {&m0, &m1, &m2}) {
    const auto rep = solve_dirichlet(*m, {}, p);
    d.push_back(lp_gradient_distance(rep.field, Field{m, interpolate_profile(*m, 0.5, 2.0, p)}, p));
  }
  EXPECT_LT(d[1], d[0]);
  EXPECT_LT(d[2], d[1]);
}

TEST(Clarkson, HoldsForSolvedAndRandomPairs) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.2, 0.05));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (double p : {1.2, 1.5, 1.9, 2.0, 3.0}) {
    if (p < 2.0) {
      const auto rep = solve_dirichlet(m, {}, p);
      const Field h{&m, interpolate_profile(m, 0.5, 2.0, p)};
      EXPECT_TRUE(clarkson(rep.field, h, p).holds(1e-12));
    }
    for (int k = 0; k < 5; ++k) {
      Field a{&m, std::vector<double>(m.vertices.size())}, b = a;
      for (auto& x : a.values) x = U(rng);
      for (auto& x : b.values) x = U(rng);
      const auto cc = clarkson(a, b, p);
      EXPECT_TRUE(cc.holds(1e-12)) << cc.lhs << " vs " << cc.rhs;
    }
  }
}

TEST(FieldDump, RoundTrip) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.4, 0.15));
  const auto rep = solve_dirichlet(m, {}, 1.5);
  std::stringstream ss;
  write_field(ss, rep.field);
  EXPECT_EQ(read_field(ss, m.vertices.size()), rep.field.values);
  std::stringstream bad("0 1.0\n");
  EXPECT_THROW(read_field(bad, m.vertices.size()), MismatchError);
}
