#pragma once
// Ansatz fields u_A (whole space) and w_A (ball of radius R): a radial bulk
// profile plus one local capacitary potential per cavity, supported in
// B(s, eps/10).

#include <cmath>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcap/analytic.hpp"
#include "pcap/error.hpp"
#include "pcap/geometry.hpp"
#include "pcap/mesh.hpp"
#include "pcap/solver.hpp"

namespace pcap::ansatz {

using mesh::Vec2;

enum class Mode { WholeSpace, Ball };

inline std::string to_string(Mode m) { return m == Mode::Ball ? "ball" : "whole_space"; }
inline Mode parse_mode(const std::string& s) {
  if (s == "ball") return Mode::Ball;
  if (s == "whole_space") return Mode::WholeSpace;
  throw DomainError("unknown ansatz mode '" + s + "'");
}

struct AnsatzSpec {
  double A = 0.5;
  geometry::PerforatedDomain domain;
  Mode mode = Mode::Ball;

  [[nodiscard]] double cavity_potential_radius() const { return domain.eps / 10.0; }
  [[nodiscard]] double gamma() const { return analytic::gamma_exponent(domain.d, domain.p); }

  void validate() const {
    if (!(A >= 0.0 && A <= 1.0)) throw DomainError("ansatz: A must lie in [0,1]");
    if (domain.instances.empty()) throw DomainError("ansatz: domain has no cavities");
    if (!(domain.alpha < 0.1)) throw DomainError("ansatz: need alpha < 1/10 so cavities fit in B(s, eps/10)");
    if (mode == Mode::Ball && !(domain.R > 1.0 + domain.eps))
      throw DomainError("ansatz: ball mode needs R > 1 + eps");
  }
};

// --------------------------------------------------------------------------
// Local potential of a non-ball reference shape K in B(0, 1/(10 alpha)).

struct LocalProfile {
  mesh::Mesh mesh;
  std::vector<double> values;
  double outer_radius = 0.0;
  double capacity = 0.0;        ///< relative capacity of K in B(0, outer_radius), extrapolated
  double capacity_error = 0.0;
  std::vector<Vec2> polygon;
  std::unique_ptr<mesh::PointLocator> locator;

  [[nodiscard]] double value(Vec2 y) const {
    if (geometry::polygon_signed_distance(polygon, y) <= 1e-12) return 1.0;
    if (std::hypot(y[0], y[1]) >= outer_radius * (1.0 - 1e-12)) return 0.0;
    // Points between the inscribed outer polygon and the circle carry a value below the
    // solver tolerance; take 0.
    const auto v = locator->interpolate(values, y, 1e-12 * outer_radius);
    return v ? std::clamp(*v, 0.0, 1.0) : 0.0;
  }
};

namespace detail {

inline std::string profile_key(const geometry::CavitySpec& c, double rho, double p) {
  std::ostringstream os;
  os.precision(17);
  os << geometry::to_string(c.shape) << '|' << rho << '|' << p;
  for (const auto& v : c.reference_polygon()) os << '|' << v[0] << ',' << v[1];
  return os.str();
}

inline std::shared_ptr<const LocalProfile> compute_profile(const geometry::CavitySpec& c, double rho, double p) {
  auto out = std::make_shared<LocalProfile>();
  out->polygon = c.reference_polygon();
  out->outer_radius = rho;
  mesh::Domain2D dom;
  dom.outer_radius = rho;
  dom.h_far = rho / 10.0;
  dom.growth = 0.3;
  mesh::Hole h;
  h.kind = mesh::Hole::Kind::Polygon;
  h.polygon = out->polygon;
  h.radius = 0.0;
  for (const auto& v : h.polygon) h.radius = std::max(h.radius, std::hypot(v[0], v[1]));
  h.h_boundary = 0.04;
  dom.holes.push_back(h);
  dom.sources.push_back({{0.0, 0.0}, h.radius, h.h_boundary});
  const mesh::Mesh base = mesh::generate(dom);
  const auto est = solver::capacity(base, p);
  if (!est.converged) throw std::runtime_error("ansatz: local capacity solve did not converge");
  out->capacity = est.extrapolated;
  out->capacity_error = est.error_estimate;
  out->mesh = mesh::refine_all(base);
  const auto rep = solver::solve_dirichlet(out->mesh, {}, p);
  if (!rep.converged) throw std::runtime_error("ansatz: local potential solve did not converge: " + rep.message);
  out->values = rep.field.values;
  out->locator = std::make_unique<mesh::PointLocator>(out->mesh);
  return out;
}

}  // namespace detail

/// Cached per (shape, outer radius, p). Thread-safe; the first caller computes.
inline std::shared_ptr<const LocalProfile> local_profile(const geometry::CavitySpec& c, double rho, double p) {
  if (c.shape == geometry::CavityShape::Ball) throw DomainError("local_profile: balls use the closed form");
  static std::mutex mu;
  static std::map<std::string, std::shared_future<std::shared_ptr<const LocalProfile>>> cache;
  const std::string key = detail::profile_key(c, rho, p);
  std::shared_future<std::shared_ptr<const LocalProfile>> fut;
  std::promise<std::shared_ptr<const LocalProfile>> prom;
  bool owner = false;
  {
    std::lock_guard lk(mu);
    auto it = cache.find(key);
    if (it == cache.end()) {
      fut = prom.get_future().share();
      cache.emplace(key, fut);
      owner = true;
    } else {
      fut = it->second;
    }
  }
  if (owner) {
    try {
      prom.set_value(detail::compute_profile(c, rho, p));
    } catch (...) {
      {
        std::lock_guard lk(mu);
        cache.erase(key);
      }
      prom.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

/// Relative capacity of the reference shape in B(0, rho); closed form for balls.
inline double reference_capacity(const geometry::CavitySpec& c, double rho, int d, double p) {
  if (c.shape == geometry::CavityShape::Ball) return analytic::ball_capacity(d, p, 1.0, OuterRadius(rho)).value;
  if (d != 2) throw DomainError("reference_capacity: non-ball shapes need d = 2");
  return local_profile(c, rho, p)->capacity;
}

/// kappa_s = cap_p(alpha eps K_s, B(s, eps/10)); the same for every anchor.
inline double kappa(const geometry::PerforatedDomain& pd) {
  const double a = pd.cavity_radius();
  if (pd.cavity.shape == geometry::CavityShape::Ball)
    return analytic::ball_capacity(pd.d, pd.p, a, OuterRadius(pd.eps / 10.0)).value;
  return std::pow(a, pd.d - pd.p) * reference_capacity(pd.cavity, 1.0 / (10.0 * pd.alpha), pd.d, pd.p);
}

/// First coefficient of the decomposition: energy of the bulk profile at A = 1.
inline double bulk_energy(const AnsatzSpec& s) {
  const auto& pd = s.domain;
  if (s.mode == Mode::Ball) return analytic::ball_capacity(pd.d, pd.p, 1.0 + pd.eps, OuterRadius(pd.R)).value;
  return std::pow(1.0 + pd.eps, pd.d - pd.p) * analytic::ball_capacity(pd.d, pd.p, 1.0, OuterRadius::infinity()).value;
}

inline double ansatz_energy_closed(const AnsatzSpec& s) {
  s.validate();
  const double n = static_cast<double>(s.domain.instances.size());
  return std::pow(s.A, s.domain.p) * bulk_energy(s) + std::pow(1.0 - s.A, s.domain.p) * n * kappa(s.domain);
}

/// Minimizer of A^p Z + (1-A)^p C over A for the finite-eps coefficients.
inline double decomposition_a_star(const AnsatzSpec& s) {
  const double n = static_cast<double>(s.domain.instances.size());
  return analytic::a_star(Tau(1.0), n * kappa(s.domain), 1.0, bulk_energy(s), s.domain.p, s.domain.d);
}

// --------------------------------------------------------------------------
// Vertex evaluation

/// Bulk profile (W_{eps,R} or U_{1+eps}) and cavity sum, unweighted, per vertex.
struct AnsatzParts {
  std::vector<double> bulk;
  std::vector<double> cavities;
};

namespace detail {

inline void require_shells(const AnsatzSpec& s, const mesh::Mesh& m) {
  const double rho = s.cavity_potential_radius();
  std::vector<char> found(s.domain.instances.size(), 0);
  std::vector<char> used(m.curves.size(), 0);
  for (const auto& e : m.interface_edges) used[e.curve] = 1;
  for (std::size_t c = 0; c < m.curves.size(); ++c) {
    const auto& cv = m.curves[c];
    if (!used[c] || cv.kind != mesh::Curve::Kind::Circle || std::abs(cv.radius - rho) > 1e-12 * rho) continue;
    for (std::size_t i = 0; i < found.size(); ++i) {
      const auto& ci = s.domain.instances[i];
      if (std::hypot(cv.a[0] - ci.center[0], cv.a[1] - ci.center[1]) <= 1e-12) found[i] = 1;
    }
  }
  for (std::size_t i = 0; i < found.size(); ++i)
    if (!found[i]) throw DomainError("ansatz: mesh does not resolve the shell B(s, eps/10) of cavity " + std::to_string(i));
}

}  // namespace detail

inline AnsatzParts ansatz_parts(const AnsatzSpec& s, const mesh::Mesh& m) {
  s.validate();
  if (s.domain.d != 2) throw DomainError("ansatz: meshes are planar, need d = 2");
  detail::require_shells(s, m);
  const auto& pd = s.domain;
  const double g = s.gamma(), rho = s.cavity_potential_radius(), a = pd.cavity_radius();
  const double inner = 1.0 + pd.eps;
  std::shared_ptr<const LocalProfile> local;
  if (pd.cavity.shape != geometry::CavityShape::Ball) local = local_profile(pd.cavity, 1.0 / (10.0 * pd.alpha), pd.p);

  // Anchors bucketed on a grid of cell size rho for the neighbour query.
  std::map<std::pair<long, long>, std::vector<std::size_t>> grid;
  auto key = [rho](double x, double y) { return std::pair{std::lround(std::floor(x / rho)), std::lround(std::floor(y / rho))}; };
  for (std::size_t i = 0; i < pd.instances.size(); ++i)
    grid[key(pd.instances[i].center[0], pd.instances[i].center[1])].push_back(i);

  AnsatzParts out;
  out.bulk.resize(m.vertices.size());
  out.cavities.assign(m.vertices.size(), 0.0);
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    const Vec2 x = m.vertices[v];
    const double t = std::hypot(x[0], x[1]);
    if (t <= inner * (1.0 + 1e-12)) {
      out.bulk[v] = 1.0;
    } else if (s.mode == Mode::Ball) {
      out.bulk[v] = t >= pd.R * (1.0 - 1e-12) ? 0.0 : analytic::equilibrium_profile_ball(t, pd.eps, pd.R, g);
    } else {
      out.bulk[v] = analytic::radial_profile_U(t, g, inner);
    }
    const auto [kx, ky] = key(x[0], x[1]);
    for (long i = kx - 1; i <= kx + 1; ++i)
      for (long j = ky - 1; j <= ky + 1; ++j) {
        auto it = grid.find({i, j});
        if (it == grid.end()) continue;
        for (std::size_t c : it->second) {
          const auto& ci = pd.instances[c];
          const double r = std::hypot(x[0] - ci.center[0], x[1] - ci.center[1]);
          if (r >= rho * (1.0 - 1e-12)) continue;
          double val;
          if (local) {
            val = local->value(ci.to_reference(x));
          } else {
            val = r <= a * (1.0 + 1e-12) ? 1.0 : analytic::radial_profile_annulus(r, a, rho, g);
          }
          out.cavities[v] += val;
        }
      }
  }
  return out;
}

inline solver::Field build_ansatz(const AnsatzSpec& s, const mesh::Mesh& m) {
  const AnsatzParts parts = ansatz_parts(s, m);
  solver::Field f{&m, std::vector<double>(m.vertices.size())};
  for (std::size_t v = 0; v < f.values.size(); ++v)
    f.values[v] = std::clamp(s.A * parts.bulk[v] + (1.0 - s.A) * parts.cavities[v], 0.0, 1.0);
  return f;
}

// --------------------------------------------------------------------------
// Assembled energies

struct AssembledEnergy {
  double total = 0.0;
  double bulk_part = 0.0;     ///< energy of A * bulk
  double cavity_part = 0.0;   ///< energy of (1 - A) * cavity sum
  double cross = 0.0;         ///< sum |T| |grad bulk . grad cavities|
  std::vector<double> levels; ///< total per refinement level
  std::size_t cells = 0;
};

namespace detail {

inline AssembledEnergy assemble_once(const AnsatzSpec& s, const mesh::Mesh& m) {
  const AnsatzParts parts = ansatz_parts(s, m);
  const double p = s.domain.p;
  const solver::ElementGeometry geom(m);
  std::vector<double> u(m.vertices.size()), b(m.vertices.size()), c(m.vertices.size());
  for (std::size_t v = 0; v < u.size(); ++v) {
    b[v] = s.A * parts.bulk[v];
    c[v] = (1.0 - s.A) * parts.cavities[v];
    u[v] = std::clamp(b[v] + c[v], 0.0, 1.0);
  }
  AssembledEnergy out;
  out.total = solver::energy(m, u, p, 0.0, &geom);
  out.bulk_part = solver::energy(m, b, p, 0.0, &geom);
  out.cavity_part = solver::energy(m, c, p, 0.0, &geom);
  solver::detail::Sum cross;
  for (std::size_t k = 0; k < m.cells.size(); ++k) {
    const auto gb = geom.gradient(m, k, parts.bulk);
    const auto gc = geom.gradient(m, k, parts.cavities);
    cross.add(geom.area[k] * std::abs(gb[0] * gc[0] + gb[1] * gc[1]));
  }
  out.cross = cross.value();
  out.cells = m.cells.size();
  return out;
}

}  // namespace detail

/// Energy of the interpolated ansatz on `m` and on `levels` uniform refinements of it;
/// the fields of the result describe the finest level.
inline AssembledEnergy ansatz_energy_assembled(const AnsatzSpec& s, const mesh::Mesh& m, int levels = 0) {
  if (levels < 0) throw DomainError("ansatz_energy_assembled: levels must be >= 0");
  AssembledEnergy out = detail::assemble_once(s, m);
  out.levels.push_back(out.total);
  mesh::Mesh cur;
  for (int l = 1; l <= levels; ++l) {
    cur = mesh::refine_all(l == 1 ? m : cur);
    const auto lvl = detail::assemble_once(s, cur);
    auto hist = std::move(out.levels);
    out = lvl;
    out.levels = std::move(hist);
    out.levels.push_back(out.total);
  }
  return out;
}

struct Gap {
  double A = 0.0;
  double ansatz_energy = 0.0;
  double gap = 0.0;  ///< E(u_A) - E(u)
};

inline std::vector<Gap> admissibility_gap(const solver::SolveReport& rep, const std::vector<double>& A_grid,
                                          const AnsatzSpec& spec_template, const mesh::Mesh& m) {
  if (rep.field.mesh != &m) throw MismatchError("admissibility_gap: report was solved on a different mesh");
  std::vector<Gap> out;
  out.reserve(A_grid.size());
  for (double A : A_grid) {
    AnsatzSpec s = spec_template;
    s.A = A;
    const double e = detail::assemble_once(s, m).total;
    out.push_back({A, e, e - rep.energy});
  }
  return out;
}

/// Grid point with the smallest gap.
inline const Gap& argmin(const std::vector<Gap>& gaps) {
  if (gaps.empty()) throw DomainError("argmin: empty gap list");
  return *std::min_element(gaps.begin(), gaps.end(), [](const Gap& a, const Gap& b) { return a.gap < b.gap; });
}

}  // namespace pcap::ansatz
