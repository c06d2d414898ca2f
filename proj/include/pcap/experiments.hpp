#pragma once
// Sweeps over (eps, tau), the separation experiment, cone lower bounds and
// artifact export.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pcap/analytic.hpp"
#include "pcap/ansatz.hpp"
#include "pcap/error.hpp"
#include "pcap/geometry.hpp"
#include "pcap/mesh.hpp"
#include "pcap/solver.hpp"

namespace pcap::experiments {

inline constexpr const char* kVersion = "1.0.0";

using mesh::Vec2;

// --------------------------------------------------------------------------
// Task pool

/// Worker count from PCAP_THREADS, else the hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv("PCAP_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(std::min(n, 256L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs f(0..n-1) on at most `threads` workers. f must not throw.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f, int threads = thread_count()) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

// --------------------------------------------------------------------------
// Shared helpers

/// Anchors for a target spacing: equispaced on the circle, or greedy.
inline geometry::AnchorSet make_anchors(const std::string& kind, int d, double eps, std::uint64_t seed) {
  if (kind == "circle") {
    if (d != 2) throw DomainError("circle anchors need d = 2");
    const int n = std::max(2, static_cast<int>(std::lround(2.0 * std::numbers::pi / eps)));
    return geometry::anchors_circle(n);
  }
  if (kind == "greedy") return geometry::anchors_greedy(d, eps, seed);
  throw DomainError("unknown anchor kind '" + kind + "'");
}

/// Whole-space capacity of the reference cavity. Non-ball shapes use a local solve in
/// B(0, 1e4), which sits within the solver tolerance of the whole-space value.
inline double whole_space_capacity(const geometry::CavitySpec& c, int d, double p) {
  if (c.shape == geometry::CavityShape::Ball) return analytic::ball_capacity(d, p, 1.0, OuterRadius::infinity()).value;
  return ansatz::reference_capacity(c, 1e4, d, p);
}

/// tau at which the two window terms balance (A = 1/2).
inline double window_center(double sigma, double cap_K, double cap_ball_rel, double p, int d) {
  return std::pow(cap_ball_rel / (sigma * cap_K), 1.0 / (static_cast<double>(d) - p));
}

/// Largest deviation of the interpolated field from g(|x|) over circles of the given radii.
inline double shell_sup_error(const mesh::PointLocator& loc, const std::vector<double>& u,
                              const std::vector<double>& radii, int samples,
                              const std::function<double(double)>& g) {
  double err = 0.0;
  for (double r : radii)
    for (int k = 0; k < samples; ++k) {
      const double th = 2.0 * std::numbers::pi * (k + 0.5) / samples;
      const auto v = loc.interpolate(u, {r * std::cos(th), r * std::sin(th)}, 1e-9);
      if (v) err = std::max(err, std::abs(*v - g(r)));
    }
  return err;
}

/// Vertices at distance >= rho from every anchor.
inline std::vector<char> outside_anchor_balls(const mesh::Mesh& m, const geometry::PerforatedDomain& pd, double rho) {
  std::vector<char> out(m.vertices.size(), 1);
  for (std::size_t v = 0; v < m.vertices.size(); ++v)
    for (const auto& ci : pd.instances)
      if (std::hypot(m.vertices[v][0] - ci.center[0], m.vertices[v][1] - ci.center[1]) < rho * (1.0 - 1e-12)) {
        out[v] = 0;
        break;
      }
  return out;
}

// --------------------------------------------------------------------------
// Cone diagnostic

struct Cone {
  Vec2 direction{1.0, 0.0};  ///< unit vector y
  double delta = 0.5;        ///< Q = {q on the sphere : |q - y| < delta}
  double R0 = 1.2;           ///< inner radius; the cone runs to the mesh's outer radius
};

struct ConeMargin {
  Cone cone;
  double mu = 0.0;        ///< normalized measure of Q
  double A_tilde = 0.0;   ///< inf of u over R0 Q
  double energy = 0.0;    ///< E(u, cone)
  double bound = 0.0;     ///< radial minimizer energy with data A_tilde on R0 Q and 0 at R
  double margin = 0.0;    ///< energy - bound
  [[nodiscard]] double relative() const { return bound > 0.0 ? margin / bound : 0.0; }
};

inline std::vector<Cone> sample_cones(int n, double R0, std::uint64_t seed, double delta_lo = 0.2, double delta_hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Cone> out;
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * U(rng);
    out.push_back({{std::cos(th), std::sin(th)}, delta_lo + (delta_hi - delta_lo) * U(rng), R0});
  }
  return out;
}

inline std::vector<ConeMargin> run_cone_diagnostic(const solver::SolveReport& rep, const std::vector<Cone>& cones,
                                                   int arc_samples = 512) {
  if (!rep.field.mesh) throw MismatchError("run_cone_diagnostic: report has no mesh");
  const mesh::Mesh& m = *rep.field.mesh;
  const double R = m.outer_radius, p = rep.p, g = analytic::gamma_exponent(2, p);
  const mesh::PointLocator loc(m);
  const solver::ElementGeometry geom(m);
  std::vector<ConeMargin> out;
  for (const Cone& c : cones) {
    if (!(c.R0 > 0.0 && c.R0 < R)) throw DomainError("run_cone_diagnostic: need 0 < R0 < R");
    const Vec2 y = c.direction;
    auto in_cap = [&](Vec2 x, double t) { return std::hypot(x[0] / t - y[0], x[1] / t - y[1]) < c.delta; };
    ConeMargin cm;
    cm.cone = c;
    cm.mu = analytic::cap_measure(c.delta, 2);
    cm.energy = solver::region_energy(
        rep.field, p, [&](Vec2 x) {
          const double t = std::hypot(x[0], x[1]);
          return t > c.R0 && in_cap(x, t);
        },
        &geom);
    double inf = std::numeric_limits<double>::infinity();
    const double half = 2.0 * std::asin(std::min(1.0, 0.5 * c.delta));
    const double phi0 = std::atan2(y[1], y[0]);
    for (int k = 0; k < arc_samples; ++k) {
      const double th = phi0 - half + 2.0 * half * (k + 0.5) / arc_samples;
      const auto v = loc.interpolate(rep.field.values, {c.R0 * std::cos(th), c.R0 * std::sin(th)}, 1e-9);
      if (v) inf = std::min(inf, *v);
    }
    if (!std::isfinite(inf)) throw DomainError("run_cone_diagnostic: inner arc misses the mesh");
    cm.A_tilde = std::max(0.0, inf);
    cm.bound = analytic::cone_energy_truncated(cm.A_tilde, c.R0, OuterRadius(R), cm.mu, g, p, 2);
    cm.margin = cm.energy - cm.bound;
    out.push_back(cm);
  }
  return out;
}

/// Equality case: radial potential of B(0,r) in B(0,R), full cone from R0.
inline ConeMargin run_radial_control(double p, double r = 0.5, double R = 2.0, double R0 = 1.0, double h_far = 0.04,
                                     double h_inner = 0.004) {
  auto dom = mesh::annulus_domain(r, R, h_far, h_inner);
  dom.growth = 0.2;
  dom.rings.push_back({{0.0, 0.0}, R0, 0});
  const mesh::Mesh m = mesh::generate(dom);
  const auto rep = solver::solve_dirichlet(m, {}, p);
  if (!rep.converged) throw std::runtime_error("radial control: solve did not converge: " + rep.message);
  return run_cone_diagnostic(rep, {{{1.0, 0.0}, 2.0, R0}}).front();
}

// --------------------------------------------------------------------------
// Critical-window sweep

struct SweepConfig {
  int d = 2;
  double p = 1.2;
  double R = 2.0;
  geometry::CavitySpec cavity;
  std::string anchors = "circle";
  std::uint64_t seed = 1;
  std::vector<double> eps{0.1, 0.05, 0.025};
  std::vector<double> tau{0.1};
  double delta = 0.2;              ///< probe shells at 1 - delta, 1 + delta and (1 + R)/2
  double zero_tau_factor = 1e-6;   ///< tau = 0 runs with alpha = factor * eps^{1/gamma}
  mesh::MeshOptions mesh;
  solver::SolveOptions solve;
  int probe_samples = 720;
  int cones = 8;
};

struct SweepRow {
  double eps = 0.0;
  std::size_t N_anchors = 0;
  double tau = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;
  double A_R_analytic = 0.0;
  double cap_numeric = 0.0;
  double cap_limit_analytic = 0.0;
  double cap_ball_rel = 0.0;       ///< cap_p(B(0,1), B(0,R))
  double cap_ball_eps_rel = 0.0;   ///< cap_p(B(0,1+eps), B(0,R))
  double sup_err_bulk = 0.0;
  double sup_err_global = std::numeric_limits<double>::quiet_NaN();
  double grad_lp_err = std::numeric_limits<double>::quiet_NaN();
  double grad_lp_rel = std::numeric_limits<double>::quiet_NaN();
  double ansatz_energy = std::numeric_limits<double>::quiet_NaN();
  double cone_min_margin_rel = std::numeric_limits<double>::quiet_NaN();
  std::vector<ConeMargin> cone_margins;
  std::size_t cells = 0;
  std::size_t vertices = 0;
  int iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
  double flux_imbalance = 0.0;
  double max_principle_violation = 0.0;
  double seconds = 0.0;
  std::string status = "ok";
};

inline SweepRow run_sweep_point(const SweepConfig& cfg, double eps, double tau) {
  const auto t0 = std::chrono::steady_clock::now();
  SweepRow row;
  row.tau = tau;
  try {
    if (cfg.d != 2) throw DomainError("sweep: only d = 2 is meshed");
    const double g = analytic::gamma_exponent(cfg.d, cfg.p);
    const auto an = make_anchors(cfg.anchors, cfg.d, eps, cfg.seed);
    row.eps = an.eps();
    row.N_anchors = an.size();
    const double scale = std::pow(row.eps, 1.0 / g);
    row.alpha = tau > 0.0 ? tau * scale : cfg.zero_tau_factor * scale;
    row.sigma = geometry::sigma_estimate(an);
    const double capK = whole_space_capacity(cfg.cavity, cfg.d, cfg.p);
    row.cap_ball_rel = analytic::ball_capacity(cfg.d, cfg.p, 1.0, OuterRadius(cfg.R)).value;
    row.cap_ball_eps_rel = analytic::ball_capacity(cfg.d, cfg.p, 1.0 + row.eps, OuterRadius(cfg.R)).value;
    row.A_R_analytic = analytic::a_star(Tau(tau), row.sigma, capK, row.cap_ball_rel, cfg.p, cfg.d);
    row.cap_limit_analytic = analytic::limit_capacity(Tau(tau), row.sigma, capK, row.cap_ball_rel, cfg.p, cfg.d);

    const auto pd = geometry::build_perforation(an, row.alpha, cfg.cavity, cfg.R, cfg.d, cfg.p);
    mesh::MeshOptions mo = cfg.mesh;
    const bool shells = row.alpha < 0.08 && 1.0 + row.eps < cfg.R;
    mo.ansatz_shells = shells;
    const double r_cone = 1.0 + cfg.delta;
    if (r_cone < cfg.R && std::abs(r_cone - (1.0 + row.eps)) > 0.25 * mo.h_far) mo.extra_rings.push_back(r_cone);
    const mesh::Mesh m = mesh::mesh_perforated_ball(pd, mo);
    row.cells = m.cells.size();
    row.vertices = m.vertices.size();

    const auto rep = solver::solve_dirichlet(m, {}, cfg.p, cfg.solve);
    row.cap_numeric = rep.energy;
    row.iterations = rep.iterations;
    row.converged = rep.converged;
    row.final_residual = rep.final_residual;
    row.flux_imbalance = rep.flux_imbalance;
    row.max_principle_violation = rep.max_principle_violation;
    if (!rep.converged) row.status = "not converged: " + rep.message;

    const mesh::PointLocator loc(m);
    const double A = row.A_R_analytic;
    std::vector<double> probes{1.0 - cfg.delta, 1.0 + cfg.delta, 0.5 * (1.0 + cfg.R)};
    row.sup_err_bulk = shell_sup_error(loc, rep.field.values, probes, cfg.probe_samples,
                                       [&](double t) { return A * analytic::equilibrium_profile_ball(t, 0.0, cfg.R, g); });

    if (shells) {
      ansatz::AnsatzSpec spec;
      spec.A = A;
      spec.domain = pd;
      const auto w = ansatz::build_ansatz(spec, m);
      const auto outside = outside_anchor_balls(m, pd, row.eps / 10.0);
      double e = 0.0;
      for (std::size_t v = 0; v < m.vertices.size(); ++v)
        if (outside[v]) e = std::max(e, std::abs(rep.field.values[v] - w.values[v]));
      row.sup_err_global = e;
      row.grad_lp_err = solver::lp_gradient_distance(rep.field, w, cfg.p);
      row.grad_lp_rel = row.grad_lp_err / std::pow(rep.energy, 1.0 / cfg.p);
      row.ansatz_energy = solver::energy(m, w.values, cfg.p);
    }
    if (cfg.cones > 0 && r_cone < cfg.R) {
      row.cone_margins = run_cone_diagnostic(rep, sample_cones(cfg.cones, r_cone, cfg.seed));
      row.cone_min_margin_rel = std::numeric_limits<double>::infinity();
      for (const auto& c : row.cone_margins) row.cone_min_margin_rel = std::min(row.cone_min_margin_rel, c.relative());
    }
  } catch (const std::exception& ex) {
    row.status = std::string("error: ") + ex.what();
    row.converged = false;
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

/// One row per (eps, tau); rows sorted by (eps, tau). Failures are recorded in `status`.
inline std::vector<SweepRow> run_critical_sweep(const SweepConfig& cfg, int threads = thread_count()) {
  std::vector<std::pair<double, double>> jobs;
  for (double e : cfg.eps)
    for (double t : cfg.tau) jobs.emplace_back(e, t);
  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) { rows[i] = run_sweep_point(cfg, jobs[i].first, jobs[i].second); }, threads);
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.eps != b.eps ? a.eps < b.eps : a.tau < b.tau;
  });
  return rows;
}

// --------------------------------------------------------------------------
// Separation experiment

struct SeparationConfig {
  int d = 2;
  double p = 1.5;
  double tau_1 = 0.01;
  double eps = 0.025;
  std::vector<double> delta{0.05, 0.1, 0.2};
  std::string anchors = "circle";
  std::uint64_t seed = 1;
  mesh::MeshOptions mesh;
  solver::SolveOptions solve;
  int samples = 64;  ///< points per sampled circle
};

struct SeparationRow {
  double delta = 0.0;
  double tau_1 = 0.0;
  double eps = 0.0;
  double alpha = 0.0;
  std::size_t N_anchors = 0;
  double D = 0.0;  ///< sup over the circles |x - s| = eps/20
  double F = 0.0;  ///< sup over the circles |x - s| = eps/10
  double G = 0.0;  ///< sup over |x| = 1 + eps/5
  double sup_omega_tenth = 0.0;
  double energy = 0.0;
  std::size_t cells = 0;
  int iterations = 0;
  bool converged = false;
  double max_principle_violation = 0.0;
  double seconds = 0.0;
  std::string status = "ok";
};

inline SeparationRow run_separation_point(const SeparationConfig& cfg, double delta) {
  const auto t0 = std::chrono::steady_clock::now();
  SeparationRow row;
  row.delta = delta;
  row.tau_1 = cfg.tau_1;
  try {
    if (cfg.d != 2) throw DomainError("separation: only d = 2 is meshed");
    const double g = analytic::gamma_exponent(cfg.d, cfg.p);
    const auto an = make_anchors(cfg.anchors, cfg.d, cfg.eps, cfg.seed);
    row.eps = an.eps();
    row.N_anchors = an.size();
    if (!(row.eps / 5.0 < delta)) throw DomainError("separation: need eps/5 < delta");
    row.alpha = cfg.tau_1 * std::pow(row.eps, 1.0 / g);
    const auto pd = geometry::build_perforation(an, row.alpha, {}, 1.0 + delta, cfg.d, cfg.p);
    mesh::MeshOptions mo = cfg.mesh;
    mo.h_far = std::min(mo.h_far, 0.2 * (1.0 + delta));
    mo.ansatz_shells = true;
    mo.extra_rings.push_back(1.0 + row.eps / 5.0);
    const mesh::Mesh m = mesh::mesh_perforated_ball(pd, mo);
    row.cells = m.cells.size();
    const auto rep = solver::solve_dirichlet(m, {}, cfg.p, cfg.solve);
    row.energy = rep.energy;
    row.iterations = rep.iterations;
    row.converged = rep.converged;
    row.max_principle_violation = rep.max_principle_violation;
    if (!rep.converged) row.status = "not converged: " + rep.message;

    const mesh::PointLocator loc(m);
    const auto& u = rep.field.values;
    auto circle_sup = [&](Vec2 c, double r, int n) {
      double s = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) {
        const double th = 2.0 * std::numbers::pi * (k + 0.5) / n;
        const auto v = loc.interpolate(u, {c[0] + r * std::cos(th), c[1] + r * std::sin(th)}, 1e-9);
        if (v) s = std::max(s, *v);
      }
      return s;
    };
    row.D = row.F = -std::numeric_limits<double>::infinity();
    for (const auto& ci : pd.instances) {
      const Vec2 c{ci.center[0], ci.center[1]};
      row.D = std::max(row.D, circle_sup(c, row.eps / 20.0, cfg.samples));
      row.F = std::max(row.F, circle_sup(c, row.eps / 10.0, cfg.samples));
    }
    row.G = circle_sup({0.0, 0.0}, 1.0 + row.eps / 5.0, cfg.samples * static_cast<int>(an.size()));
    const auto outside = outside_anchor_balls(m, pd, row.eps / 10.0);
    row.sup_omega_tenth = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v)
      if (outside[v]) row.sup_omega_tenth = std::max(row.sup_omega_tenth, u[v]);
  } catch (const std::exception& ex) {
    row.status = std::string("error: ") + ex.what();
    row.converged = false;
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline std::vector<SeparationRow> run_separation(const SeparationConfig& cfg, int threads = thread_count()) {
  std::vector<SeparationRow> rows(cfg.delta.size());
  parallel_for(rows.size(), [&](std::size_t i) { rows[i] = run_separation_point(cfg, cfg.delta[i]); }, threads);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.delta < b.delta; });
  return rows;
}

/// Shape checks on separation rows: F against delta and the D inequality.
struct SeparationFit {
  double slope_origin = 0.0;  ///< F ~ c delta
  double r2_origin = 0.0;     ///< 1 - SS_res / SS_tot (centred)
  double slope = 0.0;         ///< affine fit F ~ a + b delta
  double intercept = 0.0;
  double r2_affine = 0.0;
  bool increasing = true;
  bool ordered = true;        ///< G <= F <= D on every row
  double c1 = 0.0;            ///< smallest c with D <= F + c tau_1^gamma eps (1 - F) on every row
};

inline SeparationFit fit_separation(const std::vector<SeparationRow>& rows, double gamma, double slack = 1e-9) {
  SeparationFit fit;
  const std::size_t n = rows.size();
  if (n < 2) throw DomainError("fit_separation: need at least two rows");
  double sxx = 0, sxy = 0, sx = 0, sy = 0;
  for (const auto& r : rows) {
    sxx += r.delta * r.delta;
    sxy += r.delta * r.F;
    sx += r.delta;
    sy += r.F;
  }
  const double my = sy / n, mx = sx / n;
  double sst = 0;
  for (const auto& r : rows) sst += (r.F - my) * (r.F - my);
  fit.slope_origin = sxy / sxx;
  double res0 = 0;
  for (const auto& r : rows) res0 += std::pow(r.F - fit.slope_origin * r.delta, 2);
  fit.r2_origin = sst > 0 ? 1.0 - res0 / sst : 0.0;
  const double cov = sxy - n * mx * my, var = sxx - n * mx * mx;
  fit.slope = cov / var;
  fit.intercept = my - fit.slope * mx;
  double res1 = 0;
  for (const auto& r : rows) res1 += std::pow(r.F - fit.intercept - fit.slope * r.delta, 2);
  fit.r2_affine = sst > 0 ? 1.0 - res1 / sst : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    if (i > 0) fit.increasing = fit.increasing && r.F > rows[i - 1].F;
    fit.ordered = fit.ordered && r.G <= r.F + slack && r.F <= r.D + slack && r.G >= -slack && r.D <= 1.0 + slack;
    const double scale = std::pow(r.tau_1, gamma) * r.eps * (1.0 - r.F);
    if (scale > 0) fit.c1 = std::max(fit.c1, (r.D - r.F) / scale);
  }
  return fit;
}

// --------------------------------------------------------------------------
// Export

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return solver::detail::fmt(v);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline constexpr const char* kSweepHeader =
    "eps,N_anchors,tau,alpha,sigma,A_R_analytic,cap_numeric,cap_limit_analytic,cap_ball_rel,cap_ball_eps_rel,"
    "sup_err_bulk,sup_err_global,grad_lp_err,grad_lp_rel,ansatz_energy,cone_min_margin_rel,cells,vertices,"
    "iterations,converged,final_residual,flux_imbalance,max_principle_violation,status";

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << kSweepHeader << '\n';
  for (const auto& r : rows)
    os << num(r.eps) << ',' << r.N_anchors << ',' << num(r.tau) << ',' << num(r.alpha) << ',' << num(r.sigma) << ','
       << num(r.A_R_analytic) << ',' << num(r.cap_numeric) << ',' << num(r.cap_limit_analytic) << ','
       << num(r.cap_ball_rel) << ',' << num(r.cap_ball_eps_rel) << ',' << num(r.sup_err_bulk) << ','
       << num(r.sup_err_global) << ',' << num(r.grad_lp_err) << ',' << num(r.grad_lp_rel) << ','
       << num(r.ansatz_energy) << ',' << num(r.cone_min_margin_rel) << ',' << r.cells << ',' << r.vertices << ','
       << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << num(r.final_residual) << ','
       << num(r.flux_imbalance) << ',' << num(r.max_principle_violation) << ',' << csv_escape(r.status) << '\n';
  return os.str();
}

inline constexpr const char* kConeHeader = "eps,tau,dir_x,dir_y,delta,R0,mu,A_tilde,energy,bound,margin,relative";

inline std::string cones_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << kConeHeader << '\n';
  for (const auto& r : rows)
    for (const auto& c : r.cone_margins)
      os << num(r.eps) << ',' << num(r.tau) << ',' << num(c.cone.direction[0]) << ',' << num(c.cone.direction[1])
         << ',' << num(c.cone.delta) << ',' << num(c.cone.R0) << ',' << num(c.mu) << ',' << num(c.A_tilde) << ','
         << num(c.energy) << ',' << num(c.bound) << ',' << num(c.margin) << ',' << num(c.relative()) << '\n';
  return os.str();
}

inline constexpr const char* kSeparationHeader =
    "delta,tau_1,eps,alpha,N_anchors,D,F,G,sup_omega_tenth,energy,cells,iterations,converged,"
    "max_principle_violation,status";

inline std::string separation_csv(const std::vector<SeparationRow>& rows) {
  std::ostringstream os;
  os << kSeparationHeader << '\n';
  for (const auto& r : rows)
    os << num(r.delta) << ',' << num(r.tau_1) << ',' << num(r.eps) << ',' << num(r.alpha) << ',' << r.N_anchors
       << ',' << num(r.D) << ',' << num(r.F) << ',' << num(r.G) << ',' << num(r.sup_omega_tenth) << ','
       << num(r.energy) << ',' << r.cells << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
       << num(r.max_principle_violation) << ',' << csv_escape(r.status) << '\n';
  return os.str();
}

/// 64-bit FNV-1a, hex.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// `files` is an array of names or of {"name", "bytes", "fnv1a"} records.
inline nlohmann::json manifest(const nlohmann::json& config, const std::string& experiment,
                               const nlohmann::json& files, double seconds) {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["version"] = kVersion;
  j["config"] = config;
  j["config_hash"] = fnv1a_hex(config.dump());
  j["seed"] = config.contains("seed") ? config["seed"] : nlohmann::json(nullptr);
  j["files"] = files;
  j["threads"] = thread_count();
  j["seconds"] = seconds;
  return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

/// Filled triangles coloured by the cell mean, with level lines at `levels` equal steps.
inline std::string field_svg(const mesh::Mesh& m, const std::vector<double>& u, int levels = 10, int size = 800) {
  if (u.size() != m.vertices.size()) throw MismatchError("field_svg: field does not match mesh");
  const double R = m.outer_radius > 0 ? m.outer_radius : 1.0;
  const double s = size / (2.0 * R);
  auto X = [&](const Vec2& v) { return (v[0] + R) * s; };
  auto Y = [&](const Vec2& v) { return (R - v[1]) * s; };
  auto colour = [](double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(255 * std::clamp(1.5 * t - 0.25, 0.0, 1.0));
    const int g = static_cast<int>(255 * std::clamp(1.0 - 2.0 * std::abs(t - 0.5), 0.0, 1.0));
    const int b = static_cast<int>(255 * std::clamp(1.25 - 1.5 * t, 0.0, 1.0));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto& t = m.cells[c];
    const double mean = (u[t[0]] + u[t[1]] + u[t[2]]) / 3.0;
    const auto col = colour(mean);
    os << "<polygon points=\"" << X(m.vertices[t[0]]) << ',' << Y(m.vertices[t[0]]) << ' ' << X(m.vertices[t[1]])
       << ',' << Y(m.vertices[t[1]]) << ' ' << X(m.vertices[t[2]]) << ',' << Y(m.vertices[t[2]]) << "\" fill=\""
       << col << "\" stroke=\"" << col << "\" stroke-width=\"0.3\"/>\n";
  }
  // Level lines: one segment per cell crossing.
  os << "<g stroke=\"black\" stroke-width=\"0.6\">\n";
  for (int l = 1; l < levels; ++l) {
    const double lv = static_cast<double>(l) / levels;
    for (const auto& t : m.cells) {
      Vec2 pts[3];
      int k = 0;
      for (int e = 0; e < 3; ++e) {
        const int a = t[e], b = t[(e + 1) % 3];
        const double ua = u[a] - lv, ub = u[b] - lv;
        if ((ua < 0) == (ub < 0)) continue;
        const double w = ua / (ua - ub);
        pts[k++] = {m.vertices[a][0] + w * (m.vertices[b][0] - m.vertices[a][0]),
                    m.vertices[a][1] + w * (m.vertices[b][1] - m.vertices[a][1])};
        if (k == 2) break;
      }
      if (k == 2)
        os << "<line x1=\"" << X(pts[0]) << "\" y1=\"" << Y(pts[0]) << "\" x2=\"" << X(pts[1]) << "\" y2=\""
           << Y(pts[1]) << "\"/>\n";
    }
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace pcap::experiments
