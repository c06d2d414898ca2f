#pragma once

// Anchor sets on the unit sphere and their cavity perforations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcap/analytic.hpp"
#include "pcap/error.hpp"

namespace pcap::geometry {

using Vec2 = std::array<double, 2>;

/// Points on S^{d-1}, stored row-major, with their declared separation.
class AnchorSet {
 public:
  AnchorSet() = default;
  AnchorSet(int dim, double eps, std::vector<double> coords)
      : dim_(dim), eps_(eps), coords_(std::move(coords)) {
    if (dim_ < 2) throw DomainError("AnchorSet: dimension must be >= 2");
    if (coords_.size() % static_cast<std::size_t>(dim_) != 0)
      throw DomainError("AnchorSet: coordinate count not a multiple of the dimension");
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] std::size_t size() const { return coords_.size() / static_cast<std::size_t>(dim_); }
  [[nodiscard]] bool empty() const { return coords_.empty(); }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] const std::vector<double>& coords() const { return coords_; }

  void push_back(std::span<const double> x) { coords_.insert(coords_.end(), x.begin(), x.end()); }

  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;

 private:
  int dim_ = 2;
  double eps_ = 0.0;
  std::vector<double> coords_;
};

namespace detail {

inline double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform value in [0,1) determined by (seed, index).
inline double hash_unit(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Bucket grid over [-1,1]^d with cell size >= eps, for separation queries.
class SeparationGrid {
 public:
  SeparationGrid(int dim, double eps) : dim_(dim), eps2_(eps * eps) {
    cells_per_axis_ = std::max<long>(1, static_cast<long>(std::floor(2.0 / eps)));
    cell_ = 2.0 / static_cast<double>(cells_per_axis_);
  }

  /// True if x is at distance >= eps from every stored point.
  [[nodiscard]] bool admissible(std::span<const double> x, const std::vector<double>& coords) const {
    std::array<long, 3> c{};
    for (int k = 0; k < dim_; ++k) c[k] = cell_index(x[k]);
    std::array<long, 3> lo{}, hi{};
    for (int k = 0; k < 3; ++k) {
      lo[k] = k < dim_ ? std::max(0L, c[k] - 1) : 0;
      hi[k] = k < dim_ ? std::min(cells_per_axis_ - 1, c[k] + 1) : 0;
    }
    for (long i = lo[0]; i <= hi[0]; ++i)
      for (long j = lo[1]; j <= hi[1]; ++j)
        for (long l = lo[2]; l <= hi[2]; ++l) {
          auto it = buckets_.find(key(i, j, l));
          if (it == buckets_.end()) continue;
          for (std::size_t idx : it->second) {
            std::span<const double> y(coords.data() + idx * dim_, static_cast<std::size_t>(dim_));
            if (dist2(x, y) < eps2_) return false;
          }
        }
    return true;
  }

  void insert(std::span<const double> x, std::size_t index) {
    std::array<long, 3> c{};
    for (int k = 0; k < dim_; ++k) c[k] = cell_index(x[k]);
    buckets_[key(c[0], c[1], c[2])].push_back(index);
  }

 private:
  [[nodiscard]] long cell_index(double v) const {
    const long i = static_cast<long>(std::floor((v + 1.0) / cell_));
    return std::clamp(i, 0L, cells_per_axis_ - 1);
  }
  [[nodiscard]] std::uint64_t key(long i, long j, long l) const {
    return (static_cast<std::uint64_t>(i) * 1000003ULL + static_cast<std::uint64_t>(j)) * 1000033ULL +
           static_cast<std::uint64_t>(l);
  }

  int dim_;
  double eps2_;
  long cells_per_axis_ = 1;
  double cell_ = 2.0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

inline void push_unit(std::vector<double>& out, std::initializer_list<double> xs) {
  double n = 0.0;
  for (double x : xs) n += x * x;
  n = std::sqrt(n);
  for (double x : xs) out.push_back(x / n);
}

}  // namespace detail

/// N equally spaced points on the unit circle; eps is the chord 2 sin(pi/N).
inline AnchorSet anchors_circle(int N) {
  if (N < 2) throw DomainError("anchors_circle: need N >= 2");
  std::vector<double> c;
  c.reserve(2 * static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const double t = 2.0 * std::numbers::pi * k / N;
    c.push_back(std::cos(t));
    c.push_back(std::sin(t));
  }
  return {2, 2.0 * std::sin(std::numbers::pi / N), std::move(c)};
}

/// Dense deterministic point set on S^{d-1} with spacing at most `spacing`
/// (d=2: uniform angles; d=3: vertices of a subdivided icosahedron).
inline std::vector<double> sphere_test_grid(int d, double spacing) {
  std::vector<double> out;
  if (d == 2) {
    const int n = static_cast<int>(std::ceil(2.0 * std::numbers::pi / spacing));
    for (int k = 0; k < n; ++k) {
      const double t = 2.0 * std::numbers::pi * k / n;
      out.push_back(std::cos(t));
      out.push_back(std::sin(t));
    }
    return out;
  }
  if (d != 3) throw DomainError("sphere_test_grid: only d in {2,3}");
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  const std::array<std::array<double, 3>, 12> v{{{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                                 {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                                 {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}}};
  const std::array<std::array<int, 3>, 20> f{{{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
                                              {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                              {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
                                              {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}}};
  // Unit icosahedron edge is ~1.0515; central projection stretches by at most 1/0.7947.
  const int k = std::max(1, static_cast<int>(std::ceil(1.0515 * 1.2584 / spacing)));
  const double norm = std::sqrt(1.0 + phi * phi);
  for (const auto& face : f) {
    for (int i = 0; i <= k; ++i)
      for (int j = 0; j <= k - i; ++j) {
        const double a = static_cast<double>(i) / k, b = static_cast<double>(j) / k, c = 1.0 - a - b;
        std::array<double, 3> x{};
        for (int m = 0; m < 3; ++m)
          x[m] = (a * v[face[0]][m] + b * v[face[1]][m] + c * v[face[2]][m]) / norm;
        detail::push_unit(out, {x[0], x[1], x[2]});
      }
  }
  return out;
}

/// Number of test-grid points that could still be added to the set while
/// keeping it eps-separated. Zero means maximal against that grid.
inline std::size_t maximality_violations(const AnchorSet& s, const std::vector<double>& grid) {
  detail::SeparationGrid buckets(s.dim(), s.eps());
  for (std::size_t i = 0; i < s.size(); ++i) buckets.insert(s.point(i), i);
  std::size_t bad = 0;
  const auto d = static_cast<std::size_t>(s.dim());
  for (std::size_t i = 0; i < grid.size() / d; ++i)
    if (buckets.admissible({grid.data() + i * d, d}, s.coords())) ++bad;
  return bad;
}

/// Maximal eps-separated set on S^{d-1} built by greedy insertion from a
/// seeded Kronecker stream, closed off against a test grid of spacing eps/4.
inline AnchorSet anchors_greedy(int d, double eps, std::uint64_t seed) {
  if (d != 2 && d != 3) throw DomainError("anchors_greedy: d must be 2 or 3");
  if (!(eps > 0.0) || !(eps < 1.0)) throw DomainError("anchors_greedy: eps must lie in (0,1)");
  std::vector<double> coords;
  detail::SeparationGrid buckets(d, eps);
  auto try_add = [&](std::span<const double> x) {
    if (!buckets.admissible(x, coords)) return false;
    buckets.insert(x, coords.size() / static_cast<std::size_t>(d));
    coords.insert(coords.end(), x.begin(), x.end());
    return true;
  };

  const double shift0 = detail::hash_unit(seed, 0), shift1 = detail::hash_unit(seed, 1);
  const double expected = analytic::sphere_area(d) / std::pow(eps, d - 1);
  const auto n_stream = static_cast<std::size_t>(std::ceil(8.0 * expected)) + 16;
  std::vector<double> x(static_cast<std::size_t>(d));
  if (d == 2) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (std::size_t k = 0; k < n_stream; ++k) {
      const double u = std::fmod(shift0 + static_cast<double>(k) * g, 1.0);
      x[0] = std::cos(2.0 * std::numbers::pi * u);
      x[1] = std::sin(2.0 * std::numbers::pi * u);
      try_add(x);
    }
  } else {
    // R2 sequence based on the plastic number.
    const double pl = 1.32471795724474602596;
    const double a1 = 1.0 / pl, a2 = 1.0 / (pl * pl);
    for (std::size_t k = 0; k < n_stream; ++k) {
      const double u = std::fmod(shift0 + static_cast<double>(k) * a1, 1.0);
      const double v = std::fmod(shift1 + static_cast<double>(k) * a2, 1.0);
      const double z = 1.0 - 2.0 * u, r = std::sqrt(std::max(0.0, 1.0 - z * z));
      x[0] = r * std::cos(2.0 * std::numbers::pi * v);
      x[1] = r * std::sin(2.0 * std::numbers::pi * v);
      x[2] = z;
      try_add(x);
    }
  }
  const std::vector<double> grid = sphere_test_grid(d, 0.25 * eps);
  const auto du = static_cast<std::size_t>(d);
  for (std::size_t i = 0; i < grid.size() / du; ++i) try_add({grid.data() + i * du, du});
  return {d, eps, std::move(coords)};
}

/// Exact minimum pairwise Euclidean distance.
inline double min_separation(const AnchorSet& s) {
  if (s.size() < 2) throw DomainError("min_separation: need at least two points");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      best = std::min(best, detail::dist2(s.point(i), s.point(j)));
  return std::sqrt(best);
}

/// Largest deviation of a point's norm from 1.
inline double max_norm_defect(const AnchorSet& s) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double n = 0.0;
    for (double v : s.point(i)) n += v * v;
    worst = std::max(worst, std::abs(std::sqrt(n) - 1.0));
  }
  return worst;
}

/// eps^{d-1} |S| with the declared eps.
inline double sigma_estimate(const AnchorSet& s) {
  if (s.empty()) throw DomainError("sigma_estimate: empty anchor set");
  return std::pow(s.eps(), s.dim() - 1) * static_cast<double>(s.size());
}

/// Max over sampled caps of |fraction of anchors in the cap - mu(cap)|, with
/// cap radii 0.1, 0.2, 0.4 and centres drawn from a seeded uniform stream.
inline double equidistribution_discrepancy(const AnchorSet& s, int n_test_caps, std::uint64_t seed) {
  if (n_test_caps < 1) throw DomainError("equidistribution_discrepancy: need >= 1 cap");
  if (s.empty()) throw DomainError("equidistribution_discrepancy: empty anchor set");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = s.dim();
  constexpr std::array<double, 3> radii{0.1, 0.2, 0.4};
  double worst = 0.0;
  std::vector<double> y(static_cast<std::size_t>(d));
  for (int c = 0; c < n_test_caps; ++c) {
    double n = 0.0;
    do {
      n = 0.0;
      for (auto& v : y) {
        v = gauss(rng);
        n += v * v;
      }
    } while (n < 1e-20);
    n = std::sqrt(n);
    for (auto& v : y) v /= n;
    for (double delta : radii) {
      std::size_t inside = 0;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (detail::dist2(s.point(i), y) < delta * delta) ++inside;
      const double frac = static_cast<double>(inside) / static_cast<double>(s.size());
      worst = std::max(worst, std::abs(frac - analytic::cap_measure(delta, d)));
    }
  }
  return worst;
}

// --------------------------------------------------------------------------
// Cavities

enum class CavityShape { Ball, Square, Polygon };
enum class RotationRule { Identity, RadialAlign, SeededRandom };

inline std::string to_string(CavityShape s) {
  switch (s) {
    case CavityShape::Ball: return "ball";
    case CavityShape::Square: return "square";
    case CavityShape::Polygon: return "polygon";
  }
  return "?";
}
inline std::string to_string(RotationRule r) {
  switch (r) {
    case RotationRule::Identity: return "identity";
    case RotationRule::RadialAlign: return "radial-align";
    case RotationRule::SeededRandom: return "seeded-random";
  }
  return "?";
}
inline CavityShape parse_shape(const std::string& s) {
  if (s == "ball") return CavityShape::Ball;
  if (s == "square" || s == "cube") return CavityShape::Square;
  if (s == "polygon") return CavityShape::Polygon;
  throw DomainError("unknown cavity shape '" + s + "'");
}
inline RotationRule parse_rotation(const std::string& s) {
  if (s == "identity") return RotationRule::Identity;
  if (s == "radial-align") return RotationRule::RadialAlign;
  if (s == "seeded-random") return RotationRule::SeededRandom;
  throw DomainError("unknown rotation rule '" + s + "'");
}

/// Reference shape K inside the closed unit ball plus the per-anchor rotation rule.
struct CavitySpec {
  CavityShape shape = CavityShape::Ball;
  RotationRule rotation = RotationRule::Identity;
  std::uint64_t seed = 0;
  /// Counter-clockwise vertices for CavityShape::Polygon (d = 2 only).
  std::vector<Vec2> polygon;

  /// Reference polygon of K (square or user polygon); empty for balls.
  [[nodiscard]] std::vector<Vec2> reference_polygon() const {
    if (shape == CavityShape::Square) {
      const double h = std::sqrt(0.5);
      return {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
    }
    if (shape == CavityShape::Polygon) return polygon;
    return {};
  }

  void validate(int d) const {
    if (shape != CavityShape::Ball && d != 2)
      throw DomainError("non-ball cavities are supported in d = 2 only");
    if (shape == CavityShape::Polygon) {
      if (polygon.size() < 3) throw DomainError("polygon cavity needs >= 3 vertices");
      double area = 0.0;
      for (std::size_t i = 0; i < polygon.size(); ++i) {
        const auto& a = polygon[i];
        const auto& b = polygon[(i + 1) % polygon.size()];
        if (a[0] * a[0] + a[1] * a[1] > 1.0 + 1e-12)
          throw DomainError("polygon cavity must lie in the closed unit ball");
        area += a[0] * b[1] - a[1] * b[0];
      }
      if (!(area > 0.0)) throw DomainError("polygon cavity must be counter-clockwise with positive area");
    }
  }
};

/// Signed distance from y to a closed polygon (negative inside).
inline double polygon_signed_distance(const std::vector<Vec2>& poly, Vec2 y) {
  double best = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[j];
    const Vec2& b = poly[i];
    const double ex = b[0] - a[0], ey = b[1] - a[1];
    const double wx = y[0] - a[0], wy = y[1] - a[1];
    const double t = std::clamp((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0);
    const double dx = wx - t * ex, dy = wy - t * ey;
    best = std::min(best, dx * dx + dy * dy);
    if ((a[1] > y[1]) != (b[1] > y[1])) {
      const double xc = a[0] + (y[1] - a[1]) / (b[1] - a[1]) * ex;
      if (y[0] < xc) inside = !inside;
    }
  }
  return inside ? -std::sqrt(best) : std::sqrt(best);
}

/// One realized cavity s + scale * Rot(angle) K.
struct CavityInstance {
  std::size_t anchor = 0;
  std::array<double, 3> center{};
  double scale = 0.0;
  double angle = 0.0;

  /// Reference coordinates of a planar point.
  [[nodiscard]] Vec2 to_reference(Vec2 x) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = (x[0] - center[0]) / scale, dy = (x[1] - center[1]) / scale;
    return {c * dx + s * dy, -s * dx + c * dy};
  }
  [[nodiscard]] Vec2 from_reference(Vec2 y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {center[0] + scale * (c * y[0] - s * y[1]), center[1] + scale * (s * y[0] + c * y[1])};
  }
};

/// Anchors, cavity shape and scales: the set Gamma = U_s (s + alpha eps K_s).
struct PerforatedDomain {
  int d = 2;
  double p = 1.5;
  double alpha = 0.0;
  double eps = 0.0;
  double R = 2.0;
  AnchorSet anchors;
  CavitySpec cavity;
  std::vector<CavityInstance> instances;
  std::vector<std::string> warnings;

  [[nodiscard]] double cavity_radius() const { return alpha * eps; }

  /// Signed distance to cavity i (planar domains).
  [[nodiscard]] double signed_distance(std::size_t i, Vec2 x) const {
    const CavityInstance& c = instances.at(i);
    const Vec2 y = c.to_reference(x);
    if (cavity.shape == CavityShape::Ball) return c.scale * (std::hypot(y[0], y[1]) - 1.0);
    return c.scale * polygon_signed_distance(cavity.reference_polygon(), y);
  }
};

/// Realize the cavities; throws OverlapError if two bounding balls B(s, alpha eps) meet.
inline PerforatedDomain build_perforation(const AnchorSet& anchors, double alpha, const CavitySpec& cavity,
                                          double R, int d, double p) {
  analytic::gamma_exponent(d, p);
  if (anchors.dim() != d) throw DomainError("build_perforation: anchor dimension differs from d");
  if (!(alpha > 0.0) || !(alpha * anchors.eps() > 0.0))
    throw DomainError("build_perforation: cavity scale alpha*eps must be positive");
  if (!(R > 1.0 + alpha * anchors.eps())) throw DomainError("build_perforation: need R > 1 + alpha*eps");
  cavity.validate(d);
  PerforatedDomain dom;
  dom.d = d;
  dom.p = p;
  dom.alpha = alpha;
  dom.eps = anchors.eps();
  dom.R = R;
  dom.anchors = anchors;
  dom.cavity = cavity;
  const double scale = alpha * anchors.eps();
  if (alpha > 1.0 / 80.0) {
    std::ostringstream os;
    os << "alpha = " << alpha << " exceeds 1/80; cavities remain disjoint but the scale is outside the "
       << "asymptotic regime";
    dom.warnings.push_back(os.str());
  }
  if (anchors.size() >= 2 && min_separation(anchors) <= 2.0 * scale)
    throw OverlapError("build_perforation: cavity bounding balls intersect (min separation " +
                       std::to_string(min_separation(anchors)) + " <= 2 alpha eps = " +
                       std::to_string(2.0 * scale) + ")");
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    CavityInstance c;
    c.anchor = i;
    auto s = anchors.point(i);
    for (int k = 0; k < std::min(d, 3); ++k) c.center[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k)];
    c.scale = scale;
    if (d == 2) {
      switch (cavity.rotation) {
        case RotationRule::Identity: c.angle = 0.0; break;
        case RotationRule::RadialAlign: c.angle = std::atan2(s[1], s[0]); break;
        case RotationRule::SeededRandom:
          c.angle = 2.0 * std::numbers::pi * detail::hash_unit(cavity.seed, i);
          break;
      }
    }
    dom.instances.push_back(c);
  }
  return dom;
}

// --------------------------------------------------------------------------
// Serialization

inline std::string anchors_to_csv(const AnchorSet& s) {
  std::ostringstream os;
  os << "index";
  for (int k = 1; k <= s.dim(); ++k) os << ",x" << k;
  os << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << i;
    for (double v : s.point(i)) os << "," << v;
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json perforation_to_json(const PerforatedDomain& dom) {
  nlohmann::json j;
  j["d"] = dom.d;
  j["p"] = dom.p;
  j["alpha"] = dom.alpha;
  j["eps"] = dom.eps;
  j["R"] = dom.R;
  j["shape"] = to_string(dom.cavity.shape);
  j["rotation_rule"] = to_string(dom.cavity.rotation);
  j["rotation_seed"] = dom.cavity.seed;
  if (dom.cavity.shape == CavityShape::Polygon) {
    auto& poly = j["polygon"] = nlohmann::json::array();
    for (const auto& v : dom.cavity.polygon) poly.push_back({v[0], v[1]});
  }
  auto& anchors = j["anchors"] = nlohmann::json::array();
  auto& rot = j["rotations"] = nlohmann::json::array();
  for (std::size_t i = 0; i < dom.anchors.size(); ++i) {
    auto pt = dom.anchors.point(i);
    anchors.push_back(std::vector<double>(pt.begin(), pt.end()));
    rot.push_back(dom.instances[i].angle);
  }
  j["warnings"] = dom.warnings;
  return j;
}

}  // namespace pcap::geometry
