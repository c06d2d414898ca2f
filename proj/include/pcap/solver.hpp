#pragma once

// P1 minimization of the p-Dirichlet energy E(u) = sum_cells |T| |grad u|^p with
// Dirichlet data on tagged boundaries.
//
// Nonlinear strategy: lagged-diffusivity (Kacanov) steps until the update is
// small, then damped Newton, both with Armijo backtracking, on the regularized
// functional sum |T| (|grad u|^2 + mu^2)^{p/2}; mu is lowered by 10x per stage.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "pcap/analytic.hpp"
#include "pcap/error.hpp"
#include "pcap/mesh.hpp"

namespace pcap::solver {

using mesh::Vec2;

/// Per-vertex values on a mesh. The mesh must outlive the field.
struct Field {
  const mesh::Mesh* mesh = nullptr;
  std::vector<double> values;
};

/// Cell areas and constant basis-function gradients.
struct ElementGeometry {
  std::vector<double> area;
  std::vector<std::array<double, 6>> grad;  // (d phi_k/dx, d phi_k/dy) for k = 0, 1, 2

  explicit ElementGeometry(const mesh::Mesh& m) : area(m.cells.size()), grad(m.cells.size()) {
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
      const auto& t = m.cells[c];
      const Vec2 &a = m.vertices[t[0]], &b = m.vertices[t[1]], &d = m.vertices[t[2]];
      const double det = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]);
      if (!(det > 0.0)) throw QualityError("element geometry: inverted or degenerate cell");
      area[c] = 0.5 * det;
      grad[c] = {(b[1] - d[1]) / det, (d[0] - b[0]) / det, (d[1] - a[1]) / det,
                 (a[0] - d[0]) / det, (a[1] - b[1]) / det, (b[0] - a[0]) / det};
    }
  }

  [[nodiscard]] std::array<double, 2> gradient(const mesh::Mesh& m, std::size_t c, const std::vector<double>& u) const {
    const auto& t = m.cells[c];
    const auto& G = grad[c];
    // Difference form: exactly zero on constants.
    const double d1 = u[t[1]] - u[t[0]], d2 = u[t[2]] - u[t[0]];
    return {G[2] * d1 + G[4] * d2, G[3] * d1 + G[5] * d2};
  }
};

namespace detail {

/// Neumaier-compensated running sum; keeps cell-order reductions reproducible and tight.
struct Sum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  [[nodiscard]] double value() const { return s + c; }
};

/// (|g|^2 + mu^2)^{p/2}, with the mu = 0, g = 0 limit taken as 0.
inline double density(double g2, double mu, double p) {
  const double s = g2 + mu * mu;
  return s > 0.0 ? std::pow(s, 0.5 * p) : 0.0;
}

inline void require_field(const mesh::Mesh& m, const std::vector<double>& u) {
  if (u.size() != m.vertices.size()) throw MismatchError("field size does not match mesh vertex count");
  for (double v : u)
    if (!std::isfinite(v)) throw DomainError("field contains non-finite values");
}

inline std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

}  // namespace detail

// --------------------------------------------------------------------------
// Energy

struct EnergyEval {
  double energy = 0.0;
  std::vector<double> gradient;  ///< d energy / d u_i for every vertex
};

inline EnergyEval assemble_energy(const mesh::Mesh& m, const std::vector<double>& u, double p, double mu,
                                  const ElementGeometry* geom = nullptr) {
  if (!(p > 1.0)) throw DomainError("assemble_energy: need p > 1");
  if (mu < 0.0) throw DomainError("assemble_energy: mu must be >= 0");
  detail::require_field(m, u);
  std::optional<ElementGeometry> own;
  if (!geom) geom = &own.emplace(m);
  EnergyEval out;
  out.gradient.assign(m.vertices.size(), 0.0);
  detail::Sum e;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto g = geom->gradient(m, c, u);
    const double g2 = g[0] * g[0] + g[1] * g[1];
    const double s = g2 + mu * mu;
    const double A = geom->area[c];
    e.add(A * detail::density(g2, mu, p));
    if (s == 0.0) continue;
    const double a = A * p * std::pow(s, 0.5 * p - 1.0);
    const auto& G = geom->grad[c];
    const auto& t = m.cells[c];
    for (int k = 0; k < 3; ++k) out.gradient[t[k]] += a * (G[2 * k] * g[0] + G[2 * k + 1] * g[1]);
  }
  out.energy = e.value();
  if (!std::isfinite(out.energy)) throw DomainError("assemble_energy: non-finite energy");
  return out;
}

inline double energy(const mesh::Mesh& m, const std::vector<double>& u, double p, double mu = 0.0,
                     const ElementGeometry* geom = nullptr) {
  detail::require_field(m, u);
  std::optional<ElementGeometry> own;
  if (!geom) geom = &own.emplace(m);
  detail::Sum e;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto g = geom->gradient(m, c, u);
    e.add(geom->area[c] * detail::density(g[0] * g[0] + g[1] * g[1], mu, p));
  }
  return e.value();
}

// --------------------------------------------------------------------------
// Dirichlet problem

struct BoundaryValues {
  double outer = 0.0;
  double cavity = 1.0;
  std::map<int, double> per_cavity;  ///< overrides `cavity` for individual tags

  [[nodiscard]] double value(const mesh::BoundaryTag& tag) const {
    if (tag.kind == mesh::BoundaryKind::Outer) return outer;
    auto it = per_cavity.find(tag.index);
    return it == per_cavity.end() ? cavity : it->second;
  }
};

struct SolveOptions {
  double tolerance = 1e-10;            ///< relative energy decrease ending a stage
  double flux_tolerance = 1e-6;        ///< relative boundary flux imbalance
  int max_iterations = 600;
  int max_stage_iterations = 80;
  int max_kacanov_steps = 6;           ///< per stage, before switching to Newton
  double kacanov_switch = 0.05;        ///< switch to Newton once max |step| / range falls below this
  double mu_initial = 1.0;             ///< times the gradient scale
  double mu_final = 1e-8;              ///< times the gradient scale
  std::vector<double> mu_schedule;     ///< explicit absolute schedule (overrides the two above)
  std::vector<double> initial;         ///< optional initial guess (Dirichlet values are overwritten)
};

struct StageReport {
  double mu = 0.0;
  int kacanov_steps = 0;
  int newton_steps = 0;
  double energy = 0.0;
  double rel_decrease = 0.0;
  bool converged = false;
};

struct SolveReport {
  Field field;
  double energy = 0.0;               ///< unregularized discrete energy
  double energy_regularized = 0.0;   ///< at the final mu
  int iterations = 0;
  double final_residual = 0.0;       ///< last relative energy decrease (predicted, Newton decrement)
  std::vector<double> mu_schedule;
  bool converged = false;
  double flux_inner = 0.0;           ///< sum of nodal residuals over cavity boundaries
  double flux_outer = 0.0;
  double flux_imbalance = 0.0;
  double max_principle_violation = 0.0;
  double p = 0.0;
  std::vector<StageReport> stages;
  std::string message;
  double seconds = 0.0;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["energy"] = energy;
    j["energy_regularized"] = energy_regularized;
    j["iterations"] = iterations;
    j["final_residual"] = final_residual;
    j["mu_schedule"] = mu_schedule;
    j["converged"] = converged;
    j["flux_inner"] = flux_inner;
    j["flux_outer"] = flux_outer;
    j["flux_imbalance"] = flux_imbalance;
    j["max_principle_violation"] = max_principle_violation;
    j["p"] = p;
    j["n_vertices"] = field.mesh ? field.mesh->vertices.size() : 0;
    j["n_cells"] = field.mesh ? field.mesh->cells.size() : 0;
    j["message"] = message;
    j["seconds"] = seconds;
    auto& st = j["stages"] = nlohmann::json::array();
    for (const auto& s : stages)
      st.push_back({{"mu", s.mu},
                    {"kacanov_steps", s.kacanov_steps},
                    {"newton_steps", s.newton_steps},
                    {"energy", s.energy},
                    {"rel_decrease", s.rel_decrease},
                    {"converged", s.converged}});
    return j;
  }
};

namespace detail {

/// Free-vertex numbering, sparse pattern and cell-to-storage map for one mesh.
class Problem {
 public:
  Problem(const mesh::Mesh& m, const BoundaryValues& bc) : m_(m), geom_(m) {
    const std::size_t nv = m.vertices.size();
    dirichlet_.assign(nv, 0);
    bvalue_.assign(nv, 0.0);
    kind_.assign(nv, 0);
    for (const auto& e : m.boundary_edges)
      for (int v : e.v) {
        dirichlet_[v] = 1;
        bvalue_[v] = bc.value(e.tag);
        kind_[v] = e.tag.kind == mesh::BoundaryKind::Outer ? 1 : 2;
      }
    free_.assign(nv, -1);
    for (std::size_t v = 0; v < nv; ++v)
      if (!dirichlet_[v]) free_[v] = nfree_++;
    if (nfree_ == 0) return;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.cells.size() * 9);
    for (const auto& t : m.cells)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (free_[t[i]] >= 0 && free_[t[j]] >= 0) trip.emplace_back(free_[t[i]], free_[t[j]], 1.0);
    H_.resize(nfree_, nfree_);
    H_.setFromTriplets(trip.begin(), trip.end());
    H_.makeCompressed();
    slot_.assign(m.cells.size() * 9, -1);
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
      const auto& t = m.cells[c];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int r = free_[t[i]], col = free_[t[j]];
          if (r < 0 || col < 0) continue;
          const int* begin = H_.innerIndexPtr() + H_.outerIndexPtr()[col];
          const int* end = H_.innerIndexPtr() + H_.outerIndexPtr()[col + 1];
          slot_[c * 9 + i * 3 + j] = static_cast<int>(std::lower_bound(begin, end, r) - H_.innerIndexPtr());
        }
    }
    llt_.analyzePattern(H_);
  }

  [[nodiscard]] const ElementGeometry& geom() const { return geom_; }
  [[nodiscard]] int nfree() const { return nfree_; }
  [[nodiscard]] bool is_free(std::size_t v) const { return free_[v] >= 0; }
  [[nodiscard]] int kind(std::size_t v) const { return kind_[v]; }

  void apply_dirichlet(std::vector<double>& u) const {
    for (std::size_t v = 0; v < u.size(); ++v)
      if (dirichlet_[v]) u[v] = bvalue_[v];
  }
  [[nodiscard]] std::pair<double, double> data_range() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t v = 0; v < bvalue_.size(); ++v)
      if (dirichlet_[v]) {
        lo = std::min(lo, bvalue_[v]);
        hi = std::max(hi, bvalue_[v]);
      }
    return {lo, hi};
  }

  /// Assemble the free gradient and either the Newton Hessian or the Kacanov matrix.
  double assemble(const std::vector<double>& u, double p, double mu, bool newton, Eigen::VectorXd& g) {
    g.setZero(nfree_);
    double* val = H_.valuePtr();
    std::fill(val, val + H_.nonZeros(), 0.0);
    Sum e;
    for (std::size_t c = 0; c < m_.cells.size(); ++c) {
      const auto gu = geom_.gradient(m_, c, u);
      const double g2 = gu[0] * gu[0] + gu[1] * gu[1];
      const double s = g2 + mu * mu;
      const double A = geom_.area[c];
      e.add(A * density(g2, mu, p));
      const double w = A * p * std::pow(s, 0.5 * p - 1.0);
      const double b = newton ? w * (p - 2.0) / s : 0.0;
      const auto& G = geom_.grad[c];
      const auto& t = m_.cells[c];
      double dg[3];
      for (int k = 0; k < 3; ++k) dg[k] = G[2 * k] * gu[0] + G[2 * k + 1] * gu[1];
      for (int i = 0; i < 3; ++i) {
        const int r = free_[t[i]];
        if (r < 0) continue;
        g[r] += w * dg[i];
        for (int j = 0; j < 3; ++j) {
          const int sl = slot_[c * 9 + i * 3 + j];
          if (sl < 0) continue;
          val[sl] += w * (G[2 * i] * G[2 * j] + G[2 * i + 1] * G[2 * j + 1]) + b * dg[i] * dg[j];
        }
      }
    }
    return e.value();
  }

  /// |inner + outer| / max(|inner|, |outer|) for the nodal boundary residuals.
  [[nodiscard]] double flux_imbalance(const std::vector<double>& u, double p, double mu) const {
    const EnergyEval ev = assemble_energy(m_, u, p, mu, &geom_);
    double in = 0.0, out = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v)
      (kind_[v] == 1 ? out : in) += kind_[v] ? ev.gradient[v] : 0.0;
    const double scale = std::max(std::abs(in), std::abs(out));
    return scale > 1e-300 ? std::abs(in + out) / scale : 0.0;
  }

  bool solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    llt_.factorize(H_);
    if (llt_.info() != Eigen::Success) return false;
    x = llt_.solve(rhs);
    return llt_.info() == Eigen::Success && x.allFinite();
  }

  void add_step(std::vector<double>& u, const std::vector<double>& base, const Eigen::VectorXd& d, double t) const {
    for (std::size_t v = 0; v < u.size(); ++v) u[v] = free_[v] >= 0 ? base[v] + t * d[free_[v]] : base[v];
  }

 private:
  const mesh::Mesh& m_;
  ElementGeometry geom_;
  std::vector<char> dirichlet_;
  std::vector<double> bvalue_;
  std::vector<int> kind_;
  std::vector<int> free_;
  int nfree_ = 0;
  Eigen::SparseMatrix<double> H_;
  std::vector<int> slot_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

}  // namespace detail

/// Minimize the p-energy over P1 fields matching `bc` on the tagged boundary.
inline SolveReport solve_dirichlet(const mesh::Mesh& m, const BoundaryValues& bc, double p,
                                   const SolveOptions& opt = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!(p > 1.0)) throw DomainError("solve_dirichlet: need p > 1");
  if (m.boundary_edges.empty()) throw DomainError("solve_dirichlet: mesh has no tagged boundary");
  detail::Problem prob(m, bc);
  SolveReport rep;
  rep.p = p;
  rep.field.mesh = &m;
  std::vector<double>& u = rep.field.values;
  if (!opt.initial.empty()) {
    detail::require_field(m, opt.initial);
    u = opt.initial;
  } else {
    u.assign(m.vertices.size(), 0.0);
  }
  prob.apply_dirichlet(u);
  const auto [lo, hi] = prob.data_range();
  const double range = hi - lo;

  auto finish = [&](double mu_last) {
    rep.energy = energy(m, u, p, 0.0, &prob.geom());
    // Nodal residuals on the Dirichlet vertices give the boundary fluxes.
    const EnergyEval ev = assemble_energy(m, u, p, mu_last, &prob.geom());
    rep.energy_regularized = ev.energy;
    rep.flux_inner = rep.flux_outer = 0.0;
    double free_abs = 0.0;
    for (std::size_t v = 0; v < u.size(); ++v) {
      if (prob.kind(v) == 1) rep.flux_outer += ev.gradient[v];
      else if (prob.kind(v) == 2) rep.flux_inner += ev.gradient[v];
      else free_abs += std::abs(ev.gradient[v]);
    }
    const double scale = std::max(std::abs(rep.flux_inner), std::abs(rep.flux_outer));
    rep.flux_imbalance = scale > 1e-300 ? std::abs(rep.flux_inner + rep.flux_outer) / scale : 0.0;
    double viol = 0.0;
    for (double v : u) viol = std::max({viol, v - hi, lo - v});
    rep.max_principle_violation = viol;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  if (prob.nfree() == 0 || range == 0.0) {
    // Nothing to solve, or constant data whose minimizer is the constant.
    for (double& v : u) v = lo;
    prob.apply_dirichlet(u);
    rep.converged = true;
    rep.message = prob.nfree() == 0 ? "no free vertices" : "constant boundary data";
    finish(0.0);
    return rep;
  }

  Eigen::VectorXd g, d;
  std::vector<double> base(u.size()), trial(u.size());

  // p = 2 is quadratic: one linear solve from any start.
  if (p == 2.0) {
    prob.assemble(u, p, 0.0, false, g);
    if (!prob.solve(-g, d)) throw std::runtime_error("solve_dirichlet: linear solve failed");
    base = u;
    prob.add_step(u, base, d, 1.0);
    rep.iterations = 1;
    rep.converged = true;
    rep.stages.push_back({0.0, 1, 0, energy(m, u, p, 0.0, &prob.geom()), 0.0, true});
    rep.message = "linear";
    finish(0.0);
    rep.final_residual = 0.0;
    rep.converged = rep.flux_imbalance <= opt.flux_tolerance;
    return rep;
  }

  // Initial guess: harmonic extension of the data unless one was given.
  if (opt.initial.empty()) {
    prob.assemble(u, 2.0, 0.0, false, g);
    if (!prob.solve(-g, d)) throw std::runtime_error("solve_dirichlet: initial linear solve failed");
    base = u;
    prob.add_step(u, base, d, 1.0);
  }

  const double gscale = range / std::max(m.outer_radius, 1e-300);
  std::vector<double> schedule = opt.mu_schedule;
  if (schedule.empty()) {
    const int stages = static_cast<int>(std::lround(std::log10(opt.mu_initial / opt.mu_final)));
    for (int j = 0; j <= stages; ++j) schedule.push_back(gscale * opt.mu_initial * std::pow(10.0, -j));
  }
  rep.mu_schedule = schedule;

  bool all_ok = true;
  double last_pred = 0.0;
  for (std::size_t si = 0; si < schedule.size(); ++si) {
    const double mu = schedule[si];
    StageReport st;
    st.mu = mu;
    bool use_newton = si > 0;
    double E = 0.0;
    for (int it = 0; it < opt.max_stage_iterations && rep.iterations < opt.max_iterations; ++it) {
      E = prob.assemble(u, p, mu, use_newton, g);
      if (!prob.solve(-g, d)) {
        if (use_newton) {
          use_newton = false;
          continue;
        }
        throw std::runtime_error("solve_dirichlet: linear solve failed");
      }
      const double slope = g.dot(d);  // < 0 for a descent direction
      const double pred = -0.5 * slope / std::max(E, 1e-300);
      base = u;
      double t = 1.0, Et = E;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        prob.add_step(trial, base, d, t);
        Et = energy(m, trial, p, mu, &prob.geom());
        if (Et <= E + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      ++rep.iterations;
      use_newton ? ++st.newton_steps : ++st.kacanov_steps;
      if (!accepted) {
        // No representable decrease left along a descent direction: stationary to rounding.
        st.rel_decrease = 0.0;
        st.converged = use_newton && pred < 1e3 * opt.tolerance;
        last_pred = pred;
        break;
      }
      u.swap(trial);
      const double rel = (E - Et) / std::max(std::abs(Et), 1e-300);
      st.rel_decrease = rel;
      st.energy = Et;
      last_pred = pred;
      if (!use_newton) {
        const double step = d.lpNorm<Eigen::Infinity>() * t / range;
        if (step < opt.kacanov_switch || st.kacanov_steps >= opt.max_kacanov_steps) use_newton = true;
        continue;
      }
      if (rel < opt.tolerance && pred < opt.tolerance) {
        st.converged = true;
        // The energy test is blind to regions holding a tiny share of the energy (bulk fields
        // at small amplitude); keep iterating on the last stage until the boundary fluxes balance.
        if (si + 1 < schedule.size() || prob.flux_imbalance(u, p, mu) <= opt.flux_tolerance) break;
      }
    }
    if (st.energy == 0.0) st.energy = E;
    all_ok = all_ok && st.converged;
    rep.stages.push_back(st);
  }
  rep.final_residual = last_pred;
  finish(schedule.back());
  rep.converged = rep.stages.back().converged && rep.flux_imbalance <= opt.flux_tolerance;
  if (!rep.converged) {
    rep.message = !rep.stages.back().converged ? "final stage did not reach the energy tolerance"
                                                : "boundary flux imbalance above tolerance";
  } else {
    rep.message = all_ok ? "converged" : "converged (intermediate stage hit its iteration cap)";
  }
  return rep;
}

// --------------------------------------------------------------------------
// Capacity with refinement extrapolation

struct CapacityOptions {
  int levels = 3;
  SolveOptions solve;
  BoundaryValues bc;
  /// Snap refined boundary midpoints onto the exact curves. Off by default so
  /// the P1 spaces are nested and level energies decrease.
  bool snap = false;
};

struct CapacityEstimate {
  std::vector<double> energies;
  std::vector<std::size_t> cells;
  std::vector<double> h;  ///< relative mesh size (1, 1/2, 1/4, ...)
  double extrapolated = 0.0;
  double error_estimate = 0.0;
  double order = 0.0;
  bool monotone = true;
  bool converged = true;
  std::vector<nlohmann::json> reports;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"energies", energies}, {"cells", cells},   {"h", h},
            {"extrapolated", extrapolated}, {"error_estimate", error_estimate},
            {"order", order},       {"monotone", monotone}, {"converged", converged},
            {"reports", reports}};
  }
};

/// E_inf from three levels with h halving: q fitted and clamped to [0.5, 2.5].
inline std::pair<double, double> extrapolate3(double e0, double e1, double e2) {
  const double d01 = e0 - e1, d12 = e1 - e2;
  double q = 2.0;
  if (d01 != 0.0 && d12 != 0.0 && d01 / d12 > 0.0) q = std::log2(d01 / d12);
  q = std::clamp(q, 0.5, 2.5);
  return {e2 - d12 / (std::pow(2.0, q) - 1.0), q};
}

inline CapacityEstimate capacity(const mesh::Mesh& base, double p, const CapacityOptions& opt = {}) {
  if (opt.levels < 3) throw DomainError("capacity: need at least 3 refinement levels");
  CapacityEstimate est;
  mesh::Mesh cur = base;
  std::vector<double> guess;
  for (int l = 0; l < opt.levels; ++l) {
    SolveOptions so = opt.solve;
    so.initial = guess;
    const SolveReport rep = solve_dirichlet(cur, opt.bc, p, so);
    est.energies.push_back(rep.energy);
    est.cells.push_back(cur.cells.size());
    est.h.push_back(std::ldexp(1.0, -l));
    est.converged = est.converged && rep.converged;
    est.reports.push_back(rep.to_json());
    if (l + 1 == opt.levels) break;
    std::vector<std::array<int, 2>> parents;
    mesh::Mesh next = mesh::refine_all(cur, {.snap = opt.snap}, &parents);
    guess = rep.field.values;
    for (const auto& pr : parents) guess.push_back(0.5 * (guess[pr[0]] + guess[pr[1]]));
    cur = std::move(next);
  }
  for (std::size_t i = 1; i < est.energies.size(); ++i)
    est.monotone = est.monotone && est.energies[i] <= est.energies[i - 1] * (1.0 + 1e-12);
  const std::size_t n = est.energies.size();
  const auto [einf, q] = extrapolate3(est.energies[n - 3], est.energies[n - 2], est.energies[n - 1]);
  est.extrapolated = einf;
  est.order = q;
  est.error_estimate = std::abs(est.energies[n - 1] - einf);
  return est;
}

inline CapacityEstimate capacity(const mesh::Domain2D& dom, double p, const CapacityOptions& opt = {}) {
  return capacity(mesh::generate(dom), p, opt);
}

// --------------------------------------------------------------------------
// One-dimensional radial problem

struct RadialProfile {
  std::vector<double> t;
  std::vector<double> values;
  double energy = 0.0;  ///< omega_{d-1} int t^{d-1} |h'|^p dt
  int iterations = 0;
  bool converged = false;
};

/// Radial P1 minimization on a geometric grid of n_points nodes from r to R,
/// value 1 at r and 0 at R.
inline RadialProfile radial_solve(double r, double R, int d, double p, int n_points, const SolveOptions& opt = {}) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("radial_solve: need 0 < r < R");
  if (n_points < 16) throw DomainError("radial_solve: need n_points >= 16");
  if (d < 2) throw DomainError("radial_solve: need d >= 2");
  if (!(p > 1.0)) throw DomainError("radial_solve: need p > 1");
  const int n = n_points, ne = n - 1;
  RadialProfile out;
  out.t.resize(n);
  const double lr = std::log(R / r);
  for (int i = 0; i < n; ++i) out.t[i] = r * std::exp(lr * i / ne);
  out.t.front() = r;
  out.t.back() = R;
  // Element weight: mean of t^{d-1} over the element, times the element length.
  std::vector<double> len(ne), wt(ne);
  for (int e = 0; e < ne; ++e) {
    const double a = out.t[e], b = out.t[e + 1];
    len[e] = b - a;
    wt[e] = (std::pow(b, d) - std::pow(a, d)) / d;  // = len * mean(t^{d-1})
  }
  const double omega = analytic::sphere_area(d);
  std::vector<double>& u = out.values;
  u.resize(n);
  // Start from the p = 2 discrete profile (constant flux with unit exponent).
  {
    double total = 0.0;
    std::vector<double> s(ne);
    for (int e = 0; e < ne; ++e) {
      s[e] = len[e] / wt[e];
      total += s[e] * len[e];
    }
    u[0] = 1.0;
    for (int e = 0; e < ne; ++e) u[e + 1] = u[e] - s[e] * len[e] / total;
    u[ne] = 0.0;
  }
  auto energy1d = [&](const std::vector<double>& v, double mu) {
    detail::Sum sum;
    for (int e = 0; e < ne; ++e) {
      const double sl = (v[e + 1] - v[e]) / len[e];
      sum.add(wt[e] * detail::density(sl * sl, mu, p));
    }
    return omega * sum.value();
  };
  if (p == 2.0) {
    out.energy = energy1d(u, 0.0);
    out.iterations = 1;
    out.converged = true;
    return out;
  }

  std::vector<double> schedule = opt.mu_schedule;
  if (schedule.empty())
    for (int j = 0; j <= 8; ++j) schedule.push_back(std::pow(10.0, -j) / (R - r));
  std::vector<double> diag(n), off(n), g(n), dvec(n), trial(n), cp(n), dp(n);
  bool ok = true;
  for (double mu : schedule) {
    bool stage_ok = false;
    for (int it = 0; it < opt.max_stage_iterations && out.iterations < opt.max_iterations; ++it) {
      std::fill(diag.begin(), diag.end(), 0.0);
      std::fill(off.begin(), off.end(), 0.0);
      std::fill(g.begin(), g.end(), 0.0);
      const double E = energy1d(u, mu);
      for (int e = 0; e < ne; ++e) {
        const double sl = (u[e + 1] - u[e]) / len[e];
        const double s = sl * sl + mu * mu;
        const double w = omega * wt[e] * p * std::pow(s, 0.5 * p - 1.0);
        const double h2 = w * (1.0 + (p - 2.0) * sl * sl / s) / (len[e] * len[e]);
        const double ge = w * sl / len[e];
        g[e] -= ge;
        g[e + 1] += ge;
        diag[e] += h2;
        diag[e + 1] += h2;
        off[e] -= h2;  // coupling (e, e+1)
      }
      // Thomas algorithm on interior nodes 1..n-2
      const int m = n - 2;
      for (int i = 0; i < m; ++i) {
        const int k = i + 1;
        const double a = i > 0 ? off[k - 1] : 0.0;
        const double denom = diag[k] - (i > 0 ? a * cp[i - 1] : 0.0);
        cp[i] = off[k] / denom;
        dp[i] = (-g[k] - (i > 0 ? a * dp[i - 1] : 0.0)) / denom;
      }
      for (int i = m - 1; i >= 0; --i) dvec[i + 1] = dp[i] - (i + 1 < m ? cp[i] * dvec[i + 2] : 0.0);
      dvec[0] = dvec[n - 1] = 0.0;
      double slope = 0.0;
      for (int i = 1; i < n - 1; ++i) slope += g[i] * dvec[i];
      const double pred = -0.5 * slope / E;
      double t = 1.0, Et = E;
      bool acc = false;
      for (int ls = 0; ls < 40; ++ls) {
        for (int i = 0; i < n; ++i) trial[i] = u[i] + t * dvec[i];
        Et = energy1d(trial, mu);
        if (Et <= E + 1e-4 * t * slope) {
          acc = true;
          break;
        }
        t *= 0.5;
      }
      ++out.iterations;
      if (!acc) {
        stage_ok = pred < 1e3 * opt.tolerance;
        break;
      }
      u.swap(trial);
      if ((E - Et) / Et < opt.tolerance && pred < opt.tolerance) {
        stage_ok = true;
        break;
      }
    }
    ok = stage_ok;
  }
  out.energy = energy1d(u, 0.0);
  out.converged = ok;
  return out;
}

// --------------------------------------------------------------------------
// Field diagnostics

inline void require_same_mesh(const Field& a, const Field& b) {
  if (!a.mesh || a.mesh != b.mesh) throw MismatchError("fields live on different meshes");
  if (a.values.size() != b.values.size()) throw MismatchError("fields have different sizes");
}

/// Sum over cells whose centroid satisfies `in_region` of |T| |grad u|^p.
inline double region_energy(const Field& f, double p, const std::function<bool(Vec2)>& in_region,
                            const ElementGeometry* geom = nullptr) {
  if (!f.mesh) throw MismatchError("region_energy: field has no mesh");
  const mesh::Mesh& m = *f.mesh;
  detail::require_field(m, f.values);
  std::optional<ElementGeometry> own;
  if (!geom) geom = &own.emplace(m);
  detail::Sum e;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    if (!in_region(m.centroid(c))) continue;
    const auto g = geom->gradient(m, c, f.values);
    e.add(geom->area[c] * detail::density(g[0] * g[0] + g[1] * g[1], 0.0, p));
  }
  return e.value();
}

inline double region_energy(const SolveReport& r, const std::function<bool(Vec2)>& in_region) {
  return region_energy(r.field, r.p, in_region);
}

/// (sup, inf) over vertices satisfying `in_region`.
inline std::pair<double, double> field_sup_inf(const Field& f, const std::function<bool(Vec2)>& in_region) {
  if (!f.mesh) throw MismatchError("field_sup_inf: field has no mesh");
  double sup = -std::numeric_limits<double>::infinity(), inf = -sup;
  bool any = false;
  for (std::size_t v = 0; v < f.values.size(); ++v) {
    if (!in_region(f.mesh->vertices[v])) continue;
    any = true;
    sup = std::max(sup, f.values[v]);
    inf = std::min(inf, f.values[v]);
  }
  if (!any) throw DomainError("field_sup_inf: region contains no vertex");
  return {sup, inf};
}

/// (sum |T| |grad(a - b)|^p)^{1/p}.
inline double lp_gradient_distance(const Field& a, const Field& b, double p, const ElementGeometry* geom = nullptr) {
  require_same_mesh(a, b);
  if (!(p >= 1.0)) throw DomainError("lp_gradient_distance: need p >= 1");
  std::vector<double> diff(a.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.values[i] - b.values[i];
  return std::pow(energy(*a.mesh, diff, p, 0.0, geom), 1.0 / p);
}

/// Both sides of Clarkson's inequality for the cellwise gradient fields of a and b.
struct ClarksonCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  [[nodiscard]] bool holds(double slack) const { return lhs <= rhs + slack * std::max(1.0, std::abs(rhs)); }
};

inline ClarksonCheck clarkson(const Field& a, const Field& b, double p, const ElementGeometry* geom = nullptr) {
  require_same_mesh(a, b);
  if (!(p > 1.0)) throw DomainError("clarkson: need p > 1");
  const mesh::Mesh& m = *a.mesh;
  std::optional<ElementGeometry> own;
  if (!geom) geom = &own.emplace(m);
  detail::Sum nf, ng, nplus, nminus;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto f = geom->gradient(m, c, a.values);
    const auto g = geom->gradient(m, c, b.values);
    const double A = geom->area[c];
    auto pw = [p](double x, double y) { return std::pow(x * x + y * y, 0.5 * p); };
    nf.add(A * pw(f[0], f[1]));
    ng.add(A * pw(g[0], g[1]));
    nplus.add(A * pw(0.5 * (f[0] + g[0]), 0.5 * (f[1] + g[1])));
    nminus.add(A * pw(0.5 * (f[0] - g[0]), 0.5 * (f[1] - g[1])));
  }
  ClarksonCheck out;
  if (p >= 2.0) {
    out.lhs = nplus.value() + nminus.value();
    out.rhs = 0.5 * (nf.value() + ng.value());
  } else {
    const double q = p / (p - 1.0);
    out.lhs = std::pow(nplus.value(), q / p) + std::pow(nminus.value(), q / p);
    out.rhs = std::pow(0.5 * nf.value() + 0.5 * ng.value(), q / p);
  }
  return out;
}

// --------------------------------------------------------------------------
// Field dump: one "index value" line per vertex, aligned with the mesh file.

inline void write_field(std::ostream& os, const Field& f) {
  for (std::size_t i = 0; i < f.values.size(); ++i) os << i << ' ' << detail::fmt(f.values[i]) << '\n';
}

inline std::vector<double> read_field(std::istream& is, std::size_t n_vertices) {
  std::vector<double> v(n_vertices);
  std::vector<char> seen(n_vertices, 0);
  std::size_t idx = 0;
  std::string val;
  std::size_t count = 0;
  while (is >> idx >> val) {
    if (idx >= n_vertices) throw MismatchError("read_field: vertex index out of range");
    double x = 0.0;
    auto r = std::from_chars(val.data(), val.data() + val.size(), x);
    if (r.ec != std::errc()) throw std::invalid_argument("read_field: bad value '" + val + "'");
    v[idx] = x;
    seen[idx] = 1;
    ++count;
  }
  if (count != n_vertices || std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw MismatchError("read_field: field does not cover every vertex");
  return v;
}

}  // namespace pcap::solver
