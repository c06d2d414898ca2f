// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pcap/analytic.hpp"
#include "pcap/ansatz.hpp"
#include "pcap/experiments.hpp"
#include "pcap/geometry.hpp"
#include "pcap/mesh.hpp"
#include "pcap/solver.hpp"

using namespace pcap;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string show(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

int failures = 0;

void criterion(const char* id, const char* what, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%-4s %s  %s  [%s] (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", what, o.detail.c_str(), s);
  std::fflush(stdout);
}

double ball_cap(int d, double p, double r, double R) { return analytic::ball_capacity(d, p, r, OuterRadius(R)).value; }
double whole_cap(int d, double p) { return analytic::ball_capacity(d, p, 1.0, OuterRadius::infinity()).value; }

double window_center(double p, double R) {
  return experiments::window_center(2 * kPi, whole_cap(2, p), ball_cap(2, p, 1.0, R), p, 2);
}

// Mesh for the critical-window trend: the bulk amplitude responds to relative cavity-capacity
// errors with gain 1/(p-1), so the cavities need a fine, slowly graded neighbourhood.
mesh::MeshOptions window_mesh() {
  mesh::MeshOptions m;
  m.h_far = 0.04;
  m.h_near_factor = 0.05;
  m.growth = 0.15;
  return m;
}

mesh::MeshOptions endpoint_mesh() {
  mesh::MeshOptions m;
  m.h_far = 0.04;
  m.h_near_factor = 0.1;
  m.growth = 0.25;
  return m;
}

std::vector<double> amplitude_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
  return g;
}

// One admissibility configuration: solved field plus the ansatz family on its mesh.
struct AdmissibilityCase {
  std::string name;
  ansatz::AnsatzSpec spec;
  mesh::Mesh mesh;
  solver::SolveReport rep;
  std::vector<ansatz::Gap> gaps;
};

// Heap-allocated: the solved field points at the mesh member.
std::unique_ptr<AdmissibilityCase> make_case(const std::string& name, const geometry::AnchorSet& an, double alpha,
                                             double p, mesh::MeshOptions mo) {
  auto owned = std::make_unique<AdmissibilityCase>();
  AdmissibilityCase& c = *owned;
  c.name = name;
  c.spec.domain = geometry::build_perforation(an, alpha, {}, 2.0, 2, p);
  mo.ansatz_shells = true;
  c.mesh = mesh::mesh_perforated_ball(c.spec.domain, mo);
  c.rep = solver::solve_dirichlet(c.mesh, {}, p);
  c.rep.field.mesh = &c.mesh;
  c.gaps = ansatz::admissibility_gap(c.rep, amplitude_grid(), c.spec, c.mesh);
  return owned;
}

}  // namespace

int main() {
  const auto t_start = std::chrono::steady_clock::now();

  criterion("A1", "amplitude for 12 anchors, tau = 1/40, p = 1.5 lies in [0.49, 0.51]", [] {
    const double sigma = 12 * 2 * std::sin(kPi / 12);
    const double A = analytic::a_star(Tau(1.0 / 40), sigma, 2 * kPi, 2 * kPi, 1.5, 2);
    return Outcome{A >= 0.49 && A <= 0.51, "A* = " + show(A)};
  });

  criterion("A2", "unit ball capacity in R^3 at p = 2 equals 4 pi to 1e-12", [] {
    const double c = whole_cap(3, 2.0), rel = std::abs(c / (4 * kPi) - 1);
    return Outcome{rel <= 1e-12, "rel dev " + show(rel, 3)};
  });

  criterion("A3", "annulus capacity r = 0.5, R = 2 within 1% after 3-level extrapolation", [] {
    const auto base = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.2, 0.05));
    bool ok = true;
    std::string d;
    for (double p : {1.2, 1.5, 1.8}) {
      const auto est = solver::capacity(base, p);
      const double exact = ball_cap(2, p, 0.5, 2.0), rel = std::abs(est.extrapolated / exact - 1);
      ok = ok && est.converged && est.energies.size() == 3 && rel <= 0.01;
      d += "p=" + show(p, 2) + ": " + show(rel, 3) + " ";
    }
    return Outcome{ok, d + "rel dev"};
  });

  criterion("A4", "radial solve at n = 1024 matches the annulus profile to 1e-3, 5 random tuples", [] {
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    bool ok = true;
    for (int k = 0; k < 5; ++k) {
      const int d = 2 + static_cast<int>(3 * U(rng));
      const double p = 1.1 + (std::min(d, 3) - 1.2) * U(rng);
      const double r = 0.1 + 0.9 * U(rng), R = r * (1.5 + 6 * U(rng));
      const auto prof = solver::radial_solve(r, R, d, p, 1024);
      const double g = analytic::gamma_exponent(d, p);
      ok = ok && prof.converged;
      for (std::size_t i = 0; i < prof.t.size(); ++i)
        worst = std::max(worst, std::abs(prof.values[i] - analytic::radial_profile_annulus(prof.t[i], r, R, g)));
    }
    return Outcome{ok && worst <= 1e-3, "max sup error " + show(worst, 3)};
  });

  criterion("A5", "grid minimum of phi_tau (step 1e-6) equals the closed form to 1e-9, 10 tuples", [] {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const double p = 1.1 + 0.8 * U(rng);
      const double sigma = 1.0 + 8.0 * U(rng), ck = 0.5 + 10.0 * U(rng), cb = 0.5 + 10.0 * U(rng);
      const double target = 0.05 + 0.9 * U(rng);
      const Tau tau(std::pow(std::pow(target / (1 - target), p - 1) * cb / (sigma * ck), 1.0 / (2 - p)));
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 1000000; ++i) best = std::min(best, analytic::phi_tau(i * 1e-6, tau, sigma, ck, cb, p, 2));
      worst = std::max(worst, std::abs(best - analytic::limit_capacity(tau, sigma, ck, cb, p, 2)));
    }
    return Outcome{worst <= 1e-9, "max abs dev " + show(worst, 3)};
  });

  criterion("A6", "assembled ansatz energy within 2% of the decomposition, cross energy exactly 0", [] {
    ansatz::AnsatzSpec s;
    s.domain = geometry::build_perforation(geometry::anchors_circle(12), 0.02, {}, 2.0, 2, 1.2);
    mesh::MeshOptions mo;
    mo.h_far = 0.1;
    mo.h_near_factor = 0.2;
    mo.ansatz_shells = true;
    const auto m = mesh::mesh_perforated_ball(s.domain, mo);
    double worst = 0.0;
    bool cross0 = true;
    for (double A : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      s.A = A;
      const auto e = ansatz::ansatz_energy_assembled(s, m, 2);
      const double c = ansatz::ansatz_energy_closed(s);
      worst = std::max(worst, std::abs(e.total / c - 1));
      cross0 = cross0 && e.cross == 0.0;
    }
    return Outcome{worst <= 0.02 && cross0,
                   "max rel dev " + show(worst, 3) + (cross0 ? ", cross = 0" : ", nonzero cross energy")};
  });

  // Shared by A7 and A12.
  std::vector<std::unique_ptr<AdmissibilityCase>> adm;
  criterion("A7", "solved capacity <= every ansatz energy on a 21-point grid; argmin within one step", [&] {
    adm.push_back(make_case("12 anchors p=1.5", geometry::anchors_circle(12), 0.046, 1.5, [] {
      mesh::MeshOptions m;
      m.h_far = 0.1;
      m.h_near_factor = 0.2;
      return m;
    }()));
    const auto an = experiments::make_anchors("circle", 2, 0.1, 0);
    const double alpha = window_center(1.2, 2.0) * std::pow(an.eps(), 1.0 / analytic::gamma_exponent(2, 1.2));
    adm.push_back(make_case("window p=1.2 eps=0.1", an, alpha, 1.2, window_mesh()));
    bool ok = true;
    std::string d;
    for (const auto& cp : adm) {
      const auto& c = *cp;
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& g : c.gaps) worst = std::min(worst, g.gap / c.rep.energy);
      const double astar = ansatz::decomposition_a_star(c.spec), best = ansatz::argmin(c.gaps).A;
      const bool here = c.rep.converged && worst >= -1e-9 && std::abs(best - astar) <= 0.05 + 1e-12;
      ok = ok && here;
      d += c.name + ": min gap " + show(worst, 3) + ", argmin " + show(best, 3) + " vs " + show(astar, 4) + "; ";
    }
    return Outcome{ok, d};
  });

  std::vector<experiments::SweepRow> window_rows;
  criterion("A8", "window sweep p = 1.2: bulk error improves >= 2x, capacity gap >= 1.5x", [&] {
    experiments::SweepConfig c;
    c.p = 1.2;
    c.R = 2.0;
    c.eps = {0.1, 0.05, 0.025};
    c.tau = {window_center(1.2, 2.0)};
    c.mesh = window_mesh();
    window_rows = experiments::run_critical_sweep(c);
    bool ok = window_rows.size() == 3;
    std::string d;
    for (const auto& r : window_rows) {
      ok = ok && r.status == "ok";
      d += "eps " + show(r.eps, 3) + ": bulk " + show(r.sup_err_bulk, 3) + ", gap " +
           show(std::abs(r.cap_numeric - r.cap_limit_analytic), 3) + "; ";
    }
    if (!ok) return Outcome{false, d};
    // Rows are sorted by increasing eps: the coarsest separation comes last.
    const auto& first = window_rows.back();
    const auto& mid = window_rows[1];
    const auto& last = window_rows.front();
    const bool strictly = last.sup_err_bulk < mid.sup_err_bulk && mid.sup_err_bulk < first.sup_err_bulk;
    const double bulk = first.sup_err_bulk / last.sup_err_bulk;
    const double gap = std::abs(first.cap_numeric - first.cap_limit_analytic) /
                       std::abs(last.cap_numeric - last.cap_limit_analytic);
    d += "ratios: bulk " + show(bulk, 3) + ", gap " + show(gap, 3);
    return Outcome{strictly && bulk >= 2.0 && gap >= 1.5, d};
  });

  criterion("A9", "end rows: tau_c/100 gives cap < 0.15 cap(B1); 100 tau_c gives cap in [0.85, 1.01] cap(B(1+eps))", [] {
    experiments::SweepConfig lo;
    lo.p = 1.2;
    lo.eps = {0.1};
    lo.tau = {window_center(1.2, 2.0) / 100};
    lo.mesh = endpoint_mesh();
    lo.cones = 0;
    const auto a = experiments::run_sweep_point(lo, 0.1, lo.tau[0]);
    // p = 1.2 cannot host 100 tau_c: alpha = 10 eps^{1/4} overlaps for every eps above 6e-6.
    experiments::SweepConfig hi = lo;
    hi.p = 1.5;
    hi.eps = {0.05};
    hi.tau = {100 * window_center(1.5, 2.0)};
    const auto b = experiments::run_sweep_point(hi, 0.05, hi.tau[0]);
    const double ra = a.cap_numeric / a.cap_ball_rel, rb = b.cap_numeric / b.cap_ball_eps_rel;
    const bool ok = a.status == "ok" && b.status == "ok" && ra < 0.15 && rb >= 0.85 && rb <= 1.01;
    return Outcome{ok, "low: " + show(ra, 4) + " (" + a.status + "), high p=1.5, alpha " + show(b.alpha, 3) + ": " +
                           show(rb, 4) + " (" + b.status + ")"};
  });

  criterion("A10", "cone energies >= closed-form bound - 1% on A8 fields; radial control within 0.5%", [&] {
    if (window_rows.empty()) return Outcome{false, "no window rows"};
    double worst = std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (const auto& r : window_rows)
      for (const auto& c : r.cone_margins) {
        worst = std::min(worst, c.relative());
        ++n;
      }
    const auto ctrl = experiments::run_radial_control(1.2);
    const bool ok = n == 8 * window_rows.size() && worst >= -0.01 && std::abs(ctrl.relative()) <= 0.005;
    return Outcome{ok, std::to_string(n) + " cones, min margin " + show(worst, 3) + ", radial control " +
                           show(ctrl.relative(), 3)};
  });

  criterion("A11", "separation: F increasing in delta, F ~ c delta with R^2 >= 0.9, G <= F <= D", [] {
    experiments::SeparationConfig c;
    c.p = 1.5;
    c.tau_1 = 0.01;
    c.eps = 0.025;
    c.delta = {0.05, 0.1, 0.2};
    const auto rows = experiments::run_separation(c);
    bool ok = rows.size() == 3;
    std::string d = "F:";
    for (const auto& r : rows) {
      ok = ok && r.status == "ok";
      d += " " + show(r.F, 4);
    }
    if (!ok) return Outcome{false, d};
    const auto f = experiments::fit_separation(rows, analytic::gamma_exponent(2, c.p));
    d += ", slope " + show(f.slope_origin, 4) + ", R^2 " + show(f.r2_origin, 4);
    return Outcome{f.increasing && f.ordered && f.r2_origin >= 0.9, d};
  });

  criterion("A12", "Clarkson on solved/ansatz pairs to 1e-12; energy gradient matches FD to 1e-6 on 20 fields", [&] {
    std::size_t pairs = 0;
    bool clark = !adm.empty();
    for (const auto& cp : adm) {
      const auto& c = *cp;
      const solver::ElementGeometry geom(c.mesh);
      for (double A : amplitude_grid()) {
        ansatz::AnsatzSpec s = c.spec;
        s.A = A;
        const auto w = ansatz::build_ansatz(s, c.mesh);
        clark = clark && solver::clarkson(c.rep.field, w, c.spec.domain.p, &geom).holds(1e-12);
        ++pairs;
      }
    }
    const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.4, 0.15));
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const double p = 1.1 + 1.8 * U(rng), mu = 0.05 + 0.5 * U(rng);
      std::vector<double> u(m.vertices.size()), dir(u.size());
      for (auto& x : u) x = U(rng);
      for (auto& x : dir) x = U(rng) - 0.5;
      const auto ev = solver::assemble_energy(m, u, p, mu);
      double exact = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) exact += ev.gradient[i] * dir[i];
      const double h = 1e-5;
      auto shifted = [&](double s) {
        std::vector<double> w(u);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += s * dir[i];
        return solver::energy(m, w, p, mu);
      };
      const double fd = (shifted(h) - shifted(-h)) / (2 * h);
      worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
    return Outcome{clark && worst <= 1e-6, std::to_string(pairs) + " Clarkson pairs " + (clark ? "hold" : "violated") +
                                             ", FD max rel dev " + show(worst, 3)};
  });

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  std::printf("%d of 12 criteria failed (%.0f s)\n", failures, total);
  return failures == 0 ? 0 : 1;
}
