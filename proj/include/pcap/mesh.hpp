#pragma once

// Graded conforming triangulations of B(0,R) minus planar cavities.
//
// Generation is conforming Delaunay refinement: boundary curves are sampled,
// every boundary or interface segment is kept Gabriel (no vertex inside its
// diametral circle) by splitting it at its curve midpoint, and skinny or
// oversized triangles are removed by circumcentre insertion.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pcap/error.hpp"
#include "pcap/geometry.hpp"
#include "pcap/predicates.hpp"

namespace pcap::mesh {

using Vec2 = std::array<double, 2>;

enum class BoundaryKind { Outer, Cavity };

struct BoundaryTag {
  BoundaryKind kind = BoundaryKind::Outer;
  int index = -1;  ///< cavity (anchor) index; -1 for the outer circle

  static BoundaryTag outer() { return {BoundaryKind::Outer, -1}; }
  static BoundaryTag cavity(int i) { return {BoundaryKind::Cavity, i}; }

  [[nodiscard]] std::string str() const {
    return kind == BoundaryKind::Outer ? std::string("OUTER") : "CAVITY:" + std::to_string(index);
  }
  static BoundaryTag parse(const std::string& s) {
    if (s == "OUTER") return outer();
    if (s.rfind("CAVITY:", 0) == 0) return cavity(std::stoi(s.substr(7)));
    throw std::invalid_argument("bad boundary tag '" + s + "'");
  }
  friend bool operator==(const BoundaryTag&, const BoundaryTag&) = default;
  friend auto operator<=>(const BoundaryTag&, const BoundaryTag&) = default;
};

/// Exact geometry of a boundary or interface curve, used to place split points.
struct Curve {
  enum class Kind { Circle, Line };
  Kind kind = Kind::Circle;
  Vec2 a{};      ///< circle centre, or line start
  Vec2 b{};      ///< line end (unused for circles)
  double radius = 0.0;

  [[nodiscard]] Vec2 snap(Vec2 x) const {
    if (kind == Kind::Line) return x;
    const double dx = x[0] - a[0], dy = x[1] - a[1];
    const double n = std::hypot(dx, dy);
    return {a[0] + radius * dx / n, a[1] + radius * dy / n};
  }
  friend bool operator==(const Curve&, const Curve&) = default;
};

struct BoundaryEdge {
  std::array<int, 2> v{};  ///< oriented so that the adjacent cell lies to the left
  BoundaryTag tag;
  int curve = -1;
  friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

/// Internal edge lying on a prescribed circle (used to align cells with
/// interfaces of piecewise-defined fields).
struct InterfaceEdge {
  std::array<int, 2> v{};
  int ring = -1;
  int curve = -1;
  friend bool operator==(const InterfaceEdge&, const InterfaceEdge&) = default;
};

/// Record of the size function a mesh was generated with.
struct Grading {
  double h_far = 0.0;
  double h_near_factor = 0.0;
  double growth = 0.5;
  double min_angle_deg = 0.0;
  friend bool operator==(const Grading&, const Grading&) = default;
};

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;  ///< counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<InterfaceEdge> interface_edges;
  std::vector<Curve> curves;
  Grading grading;
  double outer_radius = 0.0;

  [[nodiscard]] std::size_t n_vertices() const { return vertices.size(); }
  [[nodiscard]] std::size_t n_cells() const { return cells.size(); }

  [[nodiscard]] double signed_area(std::size_t c) const {
    const auto& t = cells[c];
    const Vec2 &a = vertices[t[0]], &b = vertices[t[1]], &d = vertices[t[2]];
    return 0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]));
  }
  [[nodiscard]] Vec2 centroid(std::size_t c) const {
    const auto& t = cells[c];
    return {(vertices[t[0]][0] + vertices[t[1]][0] + vertices[t[2]][0]) / 3.0,
            (vertices[t[0]][1] + vertices[t[1]][1] + vertices[t[2]][1]) / 3.0};
  }
  /// Distinct cavity indices present in the boundary tags.
  [[nodiscard]] std::vector<int> cavity_tags() const {
    std::vector<int> out;
    for (const auto& e : boundary_edges)
      if (e.tag.kind == BoundaryKind::Cavity) out.push_back(e.tag.index);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

// --------------------------------------------------------------------------
// Domain description

/// A hole removed from the disk: circle or counter-clockwise polygon.
struct Hole {
  enum class Kind { Circle, Polygon };
  Kind kind = Kind::Circle;
  Vec2 center{};
  double radius = 0.0;          ///< circle radius, or circumradius of the polygon about `center`
  std::vector<Vec2> polygon;    ///< world coordinates, counter-clockwise
  BoundaryTag tag = BoundaryTag::cavity(0);
  double h_boundary = 0.0;      ///< target edge length on the hole boundary
};

struct Ring {
  Vec2 center{};
  double radius = 0.0;
  int id = 0;
};

/// Isotropic size source: target h0 on the disc of `radius` about `center`,
/// growing linearly with slope Domain2D::growth outside it.
struct SizeSource {
  Vec2 center{};
  double radius = 0.0;
  double h0 = 0.0;
};

struct Domain2D {
  double outer_radius = 1.0;
  std::vector<Hole> holes;
  std::vector<Ring> rings;
  std::vector<SizeSource> sources;
  double h_far = 0.1;
  double growth = 0.5;            ///< adjacent target lengths differ by at most 1 + growth
  double min_angle_deg = 22.0;    ///< refinement target
  double quality_floor_deg = 18.0;
  int min_circle_segments = 32;
  int min_polygon_side_segments = 8;
  int min_outer_segments = 64;
  double h_near_factor = 0.0;     ///< recorded in the grading, informational
};

struct MeshOptions {
  double h_far = 0.1;
  double h_near_factor = 0.2;
  double growth = 0.5;
  double min_angle_deg = 22.0;
  double quality_floor_deg = 18.0;
  /// Add interface rings at |x - s| = eps/10 for every anchor and |x| = 1 + eps.
  bool ansatz_shells = false;
  /// Extra interface circles centred at the origin.
  std::vector<double> extra_rings;
};

// --------------------------------------------------------------------------

namespace detail {

constexpr int kSuper = 3;  // super-triangle vertices occupy indices 0..2

inline double dist(Vec2 a, Vec2 b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

/// Piecewise-linear size field evaluated through a bucket grid of sources.
class SizeField {
 public:
  explicit SizeField(const Domain2D& dom) : h_far_(dom.h_far), growth_(dom.growth), sources_(dom.sources) {
    double reach = 0.0;
    for (const auto& s : sources_) reach = std::max(reach, s.radius + std::max(0.0, h_far_ - s.h0) / growth_);
    cell_ = std::max(reach, 1e-12);
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      const auto k = key(cell_of(sources_[i].center[0]), cell_of(sources_[i].center[1]));
      grid_[k].push_back(i);
    }
  }

  [[nodiscard]] double operator()(Vec2 x) const {
    double h = h_far_;
    const long ci = cell_of(x[0]), cj = cell_of(x[1]);
    for (long i = ci - 1; i <= ci + 1; ++i)
      for (long j = cj - 1; j <= cj + 1; ++j) {
        auto it = grid_.find(key(i, j));
        if (it == grid_.end()) continue;
        for (std::size_t s : it->second) {
          const auto& src = sources_[s];
          const double d = std::max(0.0, dist(x, src.center) - src.radius);
          h = std::min(h, src.h0 + growth_ * d);
        }
      }
    return h;
  }

 private:
  [[nodiscard]] long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static std::uint64_t key(long i, long j) {
    return (static_cast<std::uint64_t>(i + (1L << 30)) << 32) ^ static_cast<std::uint64_t>(j + (1L << 30));
  }
  double h_far_, growth_;
  std::vector<SizeSource> sources_;
  double cell_ = 1.0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid_;
};

/// Role of a curve during generation.
struct CurveInfo {
  Curve geom;
  enum class Role { Outer, Hole, Ring } role = Role::Outer;
  int owner = -1;  ///< hole or ring index
};

struct Segment {
  int curve = -1;
  double t0 = 0.0, t1 = 0.0;  ///< curve parameters of the endpoints (angle, or [0,1] on lines)
};

class Refiner {
 public:
  explicit Refiner(const Domain2D& dom) : dom_(dom), size_(dom) {
    const double M = 40.0 * dom_.outer_radius;
    pts_ = {{-M, -M}, {M, -M}, {0.0, M}};
    tris_.push_back({{0, 1, 2}, {-1, -1, -1}});
    alive_.push_back(1);
    version_.push_back(0);
    vtri_ = {0, 0, 0};
  }

  Mesh run() {
    build_curves();
    recover_segments();
    refine_triangles();
    recover_segments();
    return extract();
  }

 private:
  struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> n;  // n[i] across the edge opposite v[i]
  };

  // ---- geometry helpers ---------------------------------------------------

  [[nodiscard]] bool in_domain(Vec2 x) const {
    if (std::hypot(x[0], x[1]) >= dom_.outer_radius) return false;
    for (const auto& h : holes_near(x)) {
      const Hole& hole = dom_.holes[h];
      if (hole.kind == Hole::Kind::Circle) {
        if (dist(x, hole.center) <= hole.radius) return false;
      } else if (geometry::polygon_signed_distance(hole.polygon, x) <= 0.0) {
        return false;
      }
    }
    return true;
  }

  [[nodiscard]] std::vector<std::size_t> holes_near(Vec2 x) const {
    std::vector<std::size_t> out;
    const long ci = static_cast<long>(std::floor(x[0] / hole_cell_));
    const long cj = static_cast<long>(std::floor(x[1] / hole_cell_));
    for (long i = ci - 1; i <= ci + 1; ++i)
      for (long j = cj - 1; j <= cj + 1; ++j) {
        auto it = hole_grid_.find(grid_key(i, j));
        if (it != hole_grid_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
      }
    return out;
  }
  static std::uint64_t grid_key(long i, long j) {
    return (static_cast<std::uint64_t>(i + (1L << 30)) << 32) ^ static_cast<std::uint64_t>(j + (1L << 30));
  }

  [[nodiscard]] Vec2 curve_point(int c, double t) const {
    const Curve& g = curves_[c].geom;
    if (g.kind == Curve::Kind::Circle) return {g.a[0] + g.radius * std::cos(t), g.a[1] + g.radius * std::sin(t)};
    return {g.a[0] + t * (g.b[0] - g.a[0]), g.a[1] + t * (g.b[1] - g.a[1])};
  }

  static Vec2 circumcenter(Vec2 a, Vec2 b, Vec2 c) {
    const double bx = b[0] - a[0], by = b[1] - a[1];
    const double cx = c[0] - a[0], cy = c[1] - a[1];
    const double d = 2.0 * (bx * cy - by * cx);
    const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
    return {a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d};
  }

  // ---- curve sampling -----------------------------------------------------

  void build_curves() {
    // hole lookup grid
    double reach = 0.0;
    for (const auto& h : dom_.holes) reach = std::max(reach, h.radius);
    hole_cell_ = std::max(2.0 * reach, 1e-9);
    for (std::size_t i = 0; i < dom_.holes.size(); ++i) {
      const auto& c = dom_.holes[i].center;
      hole_grid_[grid_key(static_cast<long>(std::floor(c[0] / hole_cell_)),
                          static_cast<long>(std::floor(c[1] / hole_cell_)))]
          .push_back(i);
    }

    const double R = dom_.outer_radius;
    {
      const double h = size_({R, 0.0});
      const int n = std::max(dom_.min_outer_segments, static_cast<int>(std::ceil(2.0 * std::numbers::pi * R / h)));
      add_circle_curve({0.0, 0.0}, R, n, CurveInfo::Role::Outer, -1);
    }
    for (std::size_t i = 0; i < dom_.holes.size(); ++i) {
      const Hole& hole = dom_.holes[i];
      if (hole.kind == Hole::Kind::Circle) {
        const double h = hole.h_boundary > 0.0 ? hole.h_boundary : size_(hole.center);
        const int n = std::max(dom_.min_circle_segments,
                               static_cast<int>(std::ceil(2.0 * std::numbers::pi * hole.radius / h)));
        add_circle_curve(hole.center, hole.radius, n, CurveInfo::Role::Hole, static_cast<int>(i));
      } else {
        add_polygon_curves(hole, static_cast<int>(i));
      }
    }
    for (std::size_t i = 0; i < dom_.rings.size(); ++i) {
      const Ring& ring = dom_.rings[i];
      double h = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 64; ++k) {
        const double t = 2.0 * std::numbers::pi * k / 64.0;
        h = std::min(h, size_({ring.center[0] + ring.radius * std::cos(t), ring.center[1] + ring.radius * std::sin(t)}));
      }
      const int n = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * ring.radius / h)));
      add_circle_curve(ring.center, ring.radius, n, CurveInfo::Role::Ring, static_cast<int>(i));
    }
  }

  void add_circle_curve(Vec2 c, double r, int n, CurveInfo::Role role, int owner) {
    const int id = static_cast<int>(curves_.size());
    curves_.push_back({Curve{Curve::Kind::Circle, c, {}, r}, role, owner});
    std::vector<int> ids;
    for (int k = 0; k < n; ++k) ids.push_back(insert_point(curve_point(id, 2.0 * std::numbers::pi * k / n)));
    for (int k = 0; k < n; ++k) {
      const double t0 = 2.0 * std::numbers::pi * k / n, t1 = 2.0 * std::numbers::pi * (k + 1) / n;
      add_segment(ids[k], ids[(k + 1) % n], {id, t0, t1});
    }
  }

  void add_polygon_curves(const Hole& hole, int owner) {
    const auto& P = hole.polygon;
    std::vector<int> corner;
    for (const auto& v : P) corner.push_back(insert_point(v));
    for (std::size_t i = 0; i < P.size(); ++i) {
      const Vec2 a = P[i], b = P[(i + 1) % P.size()];
      const int id = static_cast<int>(curves_.size());
      curves_.push_back({Curve{Curve::Kind::Line, a, b, 0.0}, CurveInfo::Role::Hole, owner});
      const double h = hole.h_boundary > 0.0 ? hole.h_boundary : size_(a);
      const int n = std::max(dom_.min_polygon_side_segments, static_cast<int>(std::ceil(dist(a, b) / h)));
      int prev = corner[i];
      for (int k = 1; k <= n; ++k) {
        const int next = k == n ? corner[(i + 1) % P.size()] : insert_point(curve_point(id, static_cast<double>(k) / n));
        add_segment(prev, next, {id, static_cast<double>(k - 1) / n, static_cast<double>(k) / n});
        prev = next;
      }
    }
  }

  void add_segment(int a, int b, Segment s) {
    segments_[edge_key(a, b)] = s;
    seg_queue_.emplace_back(a, b);
  }

  // ---- triangulation kernel ----------------------------------------------

  [[nodiscard]] int locate(Vec2 p, int hint) const {
    int t = hint;
    if (t < 0 || !alive_[t]) t = last_;
    if (t < 0 || !alive_[t]) {
      for (std::size_t i = 0; i < tris_.size(); ++i)
        if (alive_[i]) {
          t = static_cast<int>(i);
          break;
        }
    }
    std::uint32_t rot = 0;
    for (std::size_t steps = 0; steps < 4 * tris_.size() + 16; ++steps) {
      const Tri& T = tris_[t];
      bool moved = false;
      rot = rot * 1103515245u + 12345u;
      const int off = static_cast<int>((rot >> 16) % 3);
      for (int k = 0; k < 3; ++k) {
        const int i = (off + k) % 3;
        const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
        if (predicates::orient(pts_[a], pts_[b], p) < 0) {
          if (T.n[i] < 0) return -1;
          t = T.n[i];
          moved = true;
          break;
        }
      }
      if (!moved) return t;
    }
    return -1;
  }

  [[nodiscard]] bool conflicts(int t, Vec2 p) const {
    const Tri& T = tris_[t];
    return predicates::incircle(pts_[T.v[0]], pts_[T.v[1]], pts_[T.v[2]], p) > 0;
  }

  /// Triangles whose circumcircle strictly contains p, grown from the one containing p.
  void cavity_of(Vec2 p, int t0, std::vector<int>& out) {
    out.clear();
    out.push_back(t0);
    mark_[t0] = stamp_;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Tri& T = tris_[out[k]];
      for (int i = 0; i < 3; ++i) {
        const int nb = T.n[i];
        if (nb < 0 || mark_[nb] == stamp_) continue;
        if (conflicts(nb, p)) {
          mark_[nb] = stamp_;
          out.push_back(nb);
        }
      }
    }
  }

  int new_tri_slot() {
    if (!free_.empty()) {
      const int t = free_.back();
      free_.pop_back();
      return t;
    }
    tris_.push_back({});
    alive_.push_back(0);
    version_.push_back(0);
    mark_.push_back(0);
    return static_cast<int>(tris_.size()) - 1;
  }

  /// Bowyer-Watson insertion of a new point. Returns the vertex index, or -1
  /// if the point duplicates an existing vertex or falls outside the hull.
  int insert_point(Vec2 p, int hint = -1) {
    const int t0 = locate(p, hint);
    if (t0 < 0) throw QualityError("mesh generation: point location failed");
    for (int v : tris_[t0].v)
      if (pts_[v] == p) return v;
    ++stamp_;
    if (mark_.size() < tris_.size()) mark_.resize(tris_.size(), 0);
    cavity_of(p, t0, cavity_);
    const int ip = static_cast<int>(pts_.size());
    pts_.push_back(p);
    vtri_.push_back(-1);

    bedges_.clear();
    for (int t : cavity_) {
      const Tri& T = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int nb = T.n[i];
        if (nb >= 0 && mark_[nb] == stamp_) continue;
        bedges_.push_back({T.v[(i + 1) % 3], T.v[(i + 2) % 3], nb});
      }
    }
    for (int t : cavity_) {
      alive_[t] = 0;
      free_.push_back(t);
    }
    if (start_of_.size() < pts_.size()) start_of_.resize(pts_.size() * 2, -1);
    new_tris_.clear();
    for (const auto& e : bedges_) {
      const int t = new_tri_slot();
      tris_[t] = {{e.a, e.b, ip}, {-1, -1, e.outer}};
      alive_[t] = 1;
      ++version_[t];
      if (e.outer >= 0) {
        Tri& O = tris_[e.outer];
        for (int j = 0; j < 3; ++j) {
          const int oa = O.v[(j + 1) % 3], ob = O.v[(j + 2) % 3];
          if (oa == e.b && ob == e.a) O.n[j] = t;
        }
      }
      start_of_[e.a] = t;
      new_tris_.push_back(t);
      vtri_[e.a] = t;
      vtri_[e.b] = t;
    }
    // Edge (b, ip) of (a, b, ip) is shared with the new triangle starting at b,
    // whose edge (ip, b) in turn points back.
    for (int t : new_tris_) tris_[t].n[0] = start_of_[tris_[t].v[1]];
    for (int t : new_tris_) {
      const int nb = tris_[t].n[0];
      tris_[nb].n[1] = t;
    }
    for (const auto& e : bedges_) start_of_[e.a] = -1;
    vtri_[ip] = new_tris_.front();
    last_ = new_tris_.front();
    return ip;
  }

  [[nodiscard]] bool edge_exists(int a, int b) const {
    int t = vtri_[a];
    if (t < 0 || !alive_[t]) return false;
    const int start = t;
    // walk counter-clockwise around a
    for (int guard = 0; guard < 10000; ++guard) {
      const Tri& T = tris_[t];
      int i = 0;
      while (T.v[i] != a) ++i;
      if (T.v[(i + 1) % 3] == b || T.v[(i + 2) % 3] == b) return true;
      const int nb = T.n[(i + 1) % 3];  // across edge (v[i+2], a)
      if (nb < 0) break;
      t = nb;
      if (t == start) return false;
    }
    // hull vertex: walk the other way
    t = start;
    for (int guard = 0; guard < 10000; ++guard) {
      const Tri& T = tris_[t];
      int i = 0;
      while (T.v[i] != a) ++i;
      if (T.v[(i + 1) % 3] == b || T.v[(i + 2) % 3] == b) return true;
      const int nb = T.n[(i + 2) % 3];
      if (nb < 0) return false;
      t = nb;
      if (t == start) return false;
    }
    return false;
  }

  /// Triangles incident to vertex a (interior vertices only).
  void star(int a, std::vector<int>& out) const {
    out.clear();
    const int start = vtri_[a];
    int t = start;
    for (int guard = 0; guard < 10000; ++guard) {
      out.push_back(t);
      const Tri& T = tris_[t];
      int i = 0;
      while (T.v[i] != a) ++i;
      const int nb = T.n[(i + 1) % 3];
      if (nb < 0 || nb == start) return;
      t = nb;
    }
  }

  // ---- segment handling ---------------------------------------------------

  [[nodiscard]] static bool encroaches(Vec2 a, Vec2 b, Vec2 p) {
    return (a[0] - p[0]) * (b[0] - p[0]) + (a[1] - p[1]) * (b[1] - p[1]) <= 0.0;
  }

  /// Segment (a,b) is missing or has a vertex inside its diametral circle.
  [[nodiscard]] bool segment_needs_split(int a, int b) const {
    if (!edge_exists(a, b)) return true;
    // check the apex of each adjacent triangle
    std::vector<int> st;
    star(a, st);
    for (int t : st) {
      const Tri& T = tris_[t];
      bool has_b = false;
      int apex = -1;
      for (int v : T.v) {
        if (v == b) has_b = true;
        else if (v != a) apex = v;
      }
      if (has_b && apex >= kSuper && encroaches(pts_[a], pts_[b], pts_[apex])) return true;
    }
    return false;
  }

  int split_segment(int a, int b) {
    auto it = segments_.find(edge_key(a, b));
    if (it == segments_.end()) return -1;
    Segment s = it->second;
    const double tm = 0.5 * (s.t0 + s.t1);
    const Vec2 m = curve_point(s.curve, tm);
    // endpoints in parameter order
    const Vec2 pa = curve_point(s.curve, s.t0);
    int first = a, second = b;
    if (dist(pts_[a], pa) > dist(pts_[b], pa)) std::swap(first, second);
    segments_.erase(it);
    const int im = insert_point(m, vtri_[a]);
    if (im == first || im == second) throw QualityError("mesh generation: segment split collapsed");
    segments_[edge_key(first, im)] = {s.curve, s.t0, tm};
    segments_[edge_key(im, second)] = {s.curve, tm, s.t1};
    seg_queue_.emplace_back(first, im);
    seg_queue_.emplace_back(im, second);
    after_insert(im);
    return im;
  }

  void after_insert(int v) {
    // New triangles around v may encroach segments or be skinny.
    for (int t : new_tris_) {
      tri_queue_.emplace_back(t, version_[t]);
      const Tri& T = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
        if (segments_.count(edge_key(a, b)) && T.v[i] >= kSuper && encroaches(pts_[a], pts_[b], pts_[T.v[i]]))
          seg_queue_.emplace_back(a, b);
      }
    }
    (void)v;
  }

  void recover_segments() {
    for (const auto& kv : segments_) {
      seg_queue_.emplace_back(static_cast<int>(kv.first >> 32), static_cast<int>(kv.first & 0xffffffffu));
    }
    drain_segments();
  }

  void drain_segments() {
    std::size_t guard = 0;
    while (!seg_queue_.empty()) {
      auto [a, b] = seg_queue_.front();
      seg_queue_.pop_front();
      if (!segments_.count(edge_key(a, b))) continue;
      if (!segment_needs_split(a, b)) continue;
      if (dist(pts_[a], pts_[b]) < 1e-9 * min_feature()) throw QualityError("mesh generation: segment split underflow");
      split_segment(a, b);
      if (++guard > 50'000'000) throw QualityError("mesh generation: segment recovery did not terminate");
    }
  }

  [[nodiscard]] double min_feature() const {
    double f = dom_.outer_radius;
    for (const auto& h : dom_.holes) f = std::min(f, h.radius);
    return f;
  }

  // ---- quality refinement -------------------------------------------------

  [[nodiscard]] bool triangle_is_bad(int t, Vec2& cc) const {
    const Tri& T = tris_[t];
    if (T.v[0] < kSuper || T.v[1] < kSuper || T.v[2] < kSuper) return false;
    const Vec2 &a = pts_[T.v[0]], &b = pts_[T.v[1]], &c = pts_[T.v[2]];
    const Vec2 g{(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0};
    if (!in_domain(g)) return false;
    const double la = dist(b, c), lb = dist(c, a), lc = dist(a, b);
    const double lmin = std::min({la, lb, lc});
    cc = circumcenter(a, b, c);
    const double rc = dist(cc, a);
    const double h = size_(g);
    if (rc > 0.62 * h) return true;
    return rc / lmin > ratio_bound_;
  }

  void refine_triangles() {
    ratio_bound_ = 1.0 / (2.0 * std::sin(dom_.min_angle_deg * std::numbers::pi / 180.0));
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (alive_[t]) tri_queue_.emplace_back(static_cast<int>(t), version_[t]);
    std::vector<int> cav;
    std::size_t guard = 0;
    while (!tri_queue_.empty() || !seg_queue_.empty()) {
      drain_segments();
      if (tri_queue_.empty()) break;
      auto [t, ver] = tri_queue_.front();
      tri_queue_.pop_front();
      if (!alive_[t] || version_[t] != ver) continue;
      Vec2 cc{};
      if (!triangle_is_bad(t, cc)) continue;
      if (++guard > 20'000'000) throw QualityError("mesh generation: refinement did not terminate");
      const int tc = locate(cc, t);
      if (tc < 0) continue;
      ++stamp_;
      if (mark_.size() < tris_.size()) mark_.resize(tris_.size(), 0);
      cavity_of(cc, tc, cav);
      encroached_.clear();
      for (int ct : cav) {
        const Tri& T = tris_[ct];
        for (int i = 0; i < 3; ++i) {
          const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
          if (segments_.count(edge_key(a, b)) && encroaches(pts_[a], pts_[b], cc)) encroached_.emplace_back(a, b);
        }
      }
      if (!encroached_.empty()) {
        for (auto [a, b] : encroached_)
          if (segments_.count(edge_key(a, b))) split_segment(a, b);
        drain_segments();
        tri_queue_.emplace_back(t, version_[t]);
        continue;
      }
      if (!in_domain(cc)) continue;
      bool dup = false;
      for (int v : tris_[tc].v)
        if (pts_[v] == cc) dup = true;
      if (dup) continue;
      const int iv = insert_point(cc, tc);
      after_insert(iv);
    }
  }

  // ---- extraction ---------------------------------------------------------

  Mesh extract() {
    const std::size_t nt = tris_.size();
    std::vector<int> comp(nt, -1);
    std::vector<int> comp_domain;
    int ncomp = 0;
    std::vector<int> stack;
    for (std::size_t s = 0; s < nt; ++s) {
      if (!alive_[s] || comp[s] >= 0) continue;
      int inside = 0, outside = 0;
      bool touches_super = false;
      stack.assign(1, static_cast<int>(s));
      comp[s] = ncomp;
      while (!stack.empty()) {
        const int t = stack.back();
        stack.pop_back();
        const Tri& T = tris_[t];
        if (T.v[0] < kSuper || T.v[1] < kSuper || T.v[2] < kSuper) touches_super = true;
        const Vec2 g{(pts_[T.v[0]][0] + pts_[T.v[1]][0] + pts_[T.v[2]][0]) / 3.0,
                     (pts_[T.v[0]][1] + pts_[T.v[1]][1] + pts_[T.v[2]][1]) / 3.0};
        (in_domain(g) ? inside : outside)++;
        for (int i = 0; i < 3; ++i) {
          const int nb = T.n[i];
          if (nb < 0 || comp[nb] >= 0) continue;
          const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
          auto it = segments_.find(edge_key(a, b));
          if (it != segments_.end() && curves_[it->second.curve].role != CurveInfo::Role::Ring) continue;
          comp[nb] = ncomp;
          stack.push_back(nb);
        }
      }
      comp_domain.push_back(!touches_super && inside >= outside ? 1 : 0);
      ++ncomp;
    }

    Mesh m;
    std::vector<int> remap(pts_.size(), -1);
    for (std::size_t t = 0; t < nt; ++t) {
      if (!alive_[t] || !comp_domain[comp[t]]) continue;
      const Tri& T = tris_[t];
      std::array<int, 3> c{};
      for (int i = 0; i < 3; ++i) {
        int& r = remap[T.v[i]];
        if (r < 0) {
          r = static_cast<int>(m.vertices.size());
          m.vertices.push_back(pts_[T.v[i]]);
        }
        c[i] = r;
      }
      m.cells.push_back(c);
    }
    for (const auto& ci : curves_) m.curves.push_back(ci.geom);

    // Oriented boundary and interface edges from the kept cells.
    std::unordered_map<std::uint64_t, std::pair<int, int>> oriented;
    for (const auto& c : m.cells)
      for (int i = 0; i < 3; ++i) oriented[edge_key(c[i], c[(i + 1) % 3])] = {c[i], c[(i + 1) % 3]};
    std::vector<std::pair<std::uint64_t, Segment>> segs(segments_.begin(), segments_.end());
    std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) {
      if (x.second.curve != y.second.curve) return x.second.curve < y.second.curve;
      return x.second.t0 < y.second.t0;
    });
    for (const auto& [key, seg] : segs) {
      const int a = remap[static_cast<int>(key >> 32)], b = remap[static_cast<int>(key & 0xffffffffu)];
      if (a < 0 || b < 0) throw QualityError("mesh generation: boundary segment lost during extraction");
      auto it = oriented.find(edge_key(a, b));
      if (it == oriented.end()) throw QualityError("mesh generation: boundary segment not a mesh edge");
      const auto& info = curves_[seg.curve];
      if (info.role == CurveInfo::Role::Ring) {
        m.interface_edges.push_back({{a, b}, dom_.rings[info.owner].id, seg.curve});
      } else {
        const BoundaryTag tag = info.role == CurveInfo::Role::Outer ? BoundaryTag::outer() : dom_.holes[info.owner].tag;
        m.boundary_edges.push_back({{it->second.first, it->second.second}, tag, seg.curve});
      }
    }
    m.grading = {dom_.h_far, dom_.h_near_factor, dom_.growth, dom_.min_angle_deg};
    m.outer_radius = dom_.outer_radius;
    return m;
  }

  const Domain2D& dom_;
  SizeField size_;
  std::vector<Vec2> pts_;
  std::vector<Tri> tris_;
  std::vector<char> alive_;
  std::vector<std::uint32_t> version_;
  std::vector<std::uint32_t> mark_ = std::vector<std::uint32_t>(1, 0);
  std::uint32_t stamp_ = 0;
  std::vector<int> free_;
  std::vector<int> vtri_;
  std::vector<int> start_of_;
  std::vector<int> cavity_;
  std::vector<int> new_tris_;
  struct BE {
    int a, b, outer;
  };
  std::vector<BE> bedges_;  // boundary edges of the current cavity
  std::vector<CurveInfo> curves_;
  std::unordered_map<std::uint64_t, Segment> segments_;
  std::deque<std::pair<int, int>> seg_queue_;
  std::vector<std::pair<int, int>> encroached_;
  std::deque<std::pair<int, std::uint32_t>> tri_queue_;
  double ratio_bound_ = 1.0;
  int last_ = 0;
  double hole_cell_ = 1.0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> hole_grid_;
};

}  // namespace detail

// --------------------------------------------------------------------------
// Quality and validation

struct QualityReport {
  double min_angle_deg = 180.0;
  double max_angle_deg = 0.0;
  std::size_t worst_cell = 0;
  double min_signed_area = std::numeric_limits<double>::infinity();
};

inline QualityReport quality(const Mesh& m) {
  QualityReport q;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto& t = m.cells[c];
    q.min_signed_area = std::min(q.min_signed_area, m.signed_area(c));
    for (int i = 0; i < 3; ++i) {
      const Vec2& o = m.vertices[t[i]];
      const Vec2& a = m.vertices[t[(i + 1) % 3]];
      const Vec2& b = m.vertices[t[(i + 2) % 3]];
      const double ux = a[0] - o[0], uy = a[1] - o[1], vx = b[0] - o[0], vy = b[1] - o[1];
      const double ang = std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy) * 180.0 / std::numbers::pi;
      if (ang < q.min_angle_deg) {
        q.min_angle_deg = ang;
        q.worst_cell = c;
      }
      q.max_angle_deg = std::max(q.max_angle_deg, ang);
    }
  }
  return q;
}

inline void require_quality(const Mesh& m, double floor_deg) {
  const QualityReport q = quality(m);
  if (!(q.min_signed_area > 0.0)) throw QualityError("mesh has inverted or degenerate cells");
  if (q.min_angle_deg < floor_deg) {
    const Vec2 g = m.centroid(q.worst_cell);
    std::ostringstream os;
    os << "mesh quality floor " << floor_deg << " deg not reached: worst cell " << q.worst_cell << " at (" << g[0]
       << ", " << g[1] << ") has angle " << q.min_angle_deg << " deg";
    throw QualityError(os.str());
  }
}

/// Each interior edge shared by exactly two cells, boundary edges by one.
inline bool is_conforming(const Mesh& m) {
  std::unordered_map<std::uint64_t, int> count;
  for (const auto& c : m.cells)
    for (int i = 0; i < 3; ++i) ++count[detail::edge_key(c[i], c[(i + 1) % 3])];
  std::unordered_map<std::uint64_t, int> boundary;
  for (const auto& e : m.boundary_edges) ++boundary[detail::edge_key(e.v[0], e.v[1])];
  for (const auto& [k, n] : count) {
    const bool on_boundary = boundary.count(k) > 0;
    if (on_boundary ? n != 1 : n != 2) return false;
  }
  for (const auto& [k, n] : boundary)
    if (n != 1 || !count.count(k)) return false;
  return true;
}

// --------------------------------------------------------------------------
// Generation entry points

inline Mesh generate(const Domain2D& dom) {
  if (!(dom.outer_radius > 0.0) || !(dom.h_far > 0.0)) throw DomainError("generate: bad domain sizes");
  for (const auto& h : dom.holes) {
    if (h.kind == Hole::Kind::Circle && !(h.radius > 0.0)) throw DomainError("generate: hole radius must be positive");
    if (std::hypot(h.center[0], h.center[1]) + h.radius >= dom.outer_radius)
      throw DomainError("generate: hole crosses the outer circle");
  }
  detail::Refiner r(dom);
  Mesh m = r.run();
  require_quality(m, dom.quality_floor_deg);
  return m;
}

/// Disk of radius R with one circular hole of radius r at the origin.
inline Domain2D annulus_domain(double r, double R, double h_far, double h_inner) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("annulus_domain: need 0 < r < R");
  Domain2D d;
  d.outer_radius = R;
  d.h_far = h_far;
  Hole hole;
  hole.kind = Hole::Kind::Circle;
  hole.center = {0.0, 0.0};
  hole.radius = r;
  hole.tag = BoundaryTag::cavity(0);
  hole.h_boundary = h_inner;
  d.holes.push_back(hole);
  d.sources.push_back({{0.0, 0.0}, r, h_inner});
  return d;
}

/// Planar domain description of a perforated ball.
inline Domain2D perforation_domain(const geometry::PerforatedDomain& pd, const MeshOptions& opt) {
  if (pd.d != 2) throw DomainError("mesh: only d = 2 domains can be meshed");
  if (!(opt.h_far < pd.R / 4.0)) throw DomainError("mesh: h_far must be < R/4");
  if (!(opt.h_near_factor > 0.0) || opt.h_near_factor > 1.0) throw DomainError("mesh: h_near_factor must lie in (0,1]");
  Domain2D d;
  d.outer_radius = pd.R;
  d.h_far = opt.h_far;
  d.growth = opt.growth;
  d.min_angle_deg = opt.min_angle_deg;
  d.quality_floor_deg = opt.quality_floor_deg;
  d.h_near_factor = opt.h_near_factor;
  const double rc = pd.cavity_radius();
  const double h0 = opt.h_near_factor * rc;
  const auto ref = pd.cavity.reference_polygon();
  for (std::size_t i = 0; i < pd.instances.size(); ++i) {
    const auto& ci = pd.instances[i];
    Hole h;
    h.center = {ci.center[0], ci.center[1]};
    h.radius = rc;
    h.tag = BoundaryTag::cavity(static_cast<int>(i));
    h.h_boundary = h0;
    if (pd.cavity.shape == geometry::CavityShape::Ball) {
      h.kind = Hole::Kind::Circle;
    } else {
      h.kind = Hole::Kind::Polygon;
      for (const auto& v : ref) h.polygon.push_back(ci.from_reference(v));
      double rad = 0.0;
      for (const auto& v : h.polygon) rad = std::max(rad, detail::dist(v, h.center));
      h.radius = rad;
    }
    d.holes.push_back(h);
    d.sources.push_back({h.center, rc, h0});
  }
  int ring_id = 0;
  if (opt.ansatz_shells) {
    for (std::size_t i = 0; i < pd.instances.size(); ++i) {
      const auto& ci = pd.instances[i];
      d.rings.push_back({{ci.center[0], ci.center[1]}, pd.eps / 10.0, ring_id++});
    }
    if (1.0 + pd.eps < pd.R) d.rings.push_back({{0.0, 0.0}, 1.0 + pd.eps, ring_id++});
  }
  for (double r : opt.extra_rings) d.rings.push_back({{0.0, 0.0}, r, ring_id++});
  return d;
}

/// Graded mesh of B(0,R) minus the cavities of `pd`.
inline Mesh mesh_perforated_ball(const geometry::PerforatedDomain& pd, const MeshOptions& opt) {
  return generate(perforation_domain(pd, opt));
}

inline Mesh mesh_perforated_ball(const geometry::PerforatedDomain& pd, double h_far, double h_near_factor) {
  MeshOptions opt;
  opt.h_far = h_far;
  opt.h_near_factor = h_near_factor;
  return mesh_perforated_ball(pd, opt);
}

// --------------------------------------------------------------------------
// Refinement

struct RefineOptions {
  /// Move midpoints of boundary and interface edges onto the exact curve.
  bool snap = true;
  double quality_floor_deg = 18.0;
};

/// Red refinement of the marked cells with red/green closure. New vertices are
/// appended after the old ones; `parents` (if given) receives the edge each was
/// created on.
inline Mesh refine(const Mesh& in, const std::vector<std::size_t>& marked, const RefineOptions& opt = {},
                   std::vector<std::array<int, 2>>* parents = nullptr) {
  if (marked.empty()) throw DomainError("refine: no cells marked");
  if (parents) parents->clear();
  const std::size_t nc = in.cells.size();
  std::vector<char> red(nc, 0);
  for (std::size_t c : marked) {
    if (c >= nc) throw DomainError("refine: marked cell out of range");
    red[c] = 1;
  }
  std::unordered_map<std::uint64_t, int> curve_of;  // edge -> curve id for snapping
  for (const auto& e : in.boundary_edges) curve_of[detail::edge_key(e.v[0], e.v[1])] = e.curve;
  for (const auto& e : in.interface_edges) curve_of[detail::edge_key(e.v[0], e.v[1])] = e.curve;

  Mesh out;
  out.vertices = in.vertices;
  out.curves = in.curves;
  out.grading = in.grading;
  out.outer_radius = in.outer_radius;
  std::unordered_map<std::uint64_t, int> mid;

  auto midpoint = [&](int a, int b) {
    const auto k = detail::edge_key(a, b);
    auto it = mid.find(k);
    if (it != mid.end()) return it->second;
    Vec2 m{0.5 * (in.vertices[a][0] + in.vertices[b][0]), 0.5 * (in.vertices[a][1] + in.vertices[b][1])};
    if (opt.snap) {
      auto c = curve_of.find(k);
      if (c != curve_of.end() && c->second >= 0) m = in.curves[c->second].snap(m);
    }
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(m);
    if (parents) parents->push_back({a, b});
    mid.emplace(k, id);
    return id;
  };
  auto angle_ok = [&](Vec2 a, Vec2 b, Vec2 c) {
    const std::array<Vec2, 3> p{a, b, c};
    for (int i = 0; i < 3; ++i) {
      const Vec2& o = p[i];
      const Vec2& u = p[(i + 1) % 3];
      const Vec2& v = p[(i + 2) % 3];
      const double ux = u[0] - o[0], uy = u[1] - o[1], vx = v[0] - o[0], vy = v[1] - o[1];
      const double ang = std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy) * 180.0 / std::numbers::pi;
      if (ang < opt.quality_floor_deg) return false;
    }
    return true;
  };
  auto provisional_mid = [&](int a, int b) {
    Vec2 m{0.5 * (in.vertices[a][0] + in.vertices[b][0]), 0.5 * (in.vertices[a][1] + in.vertices[b][1])};
    if (opt.snap) {
      auto c = curve_of.find(detail::edge_key(a, b));
      if (c != curve_of.end() && c->second >= 0) m = in.curves[c->second].snap(m);
    }
    return m;
  };

  // closure
  std::unordered_map<std::uint64_t, char> split;
  for (;;) {
    split.clear();
    for (std::size_t c = 0; c < nc; ++c)
      if (red[c])
        for (int i = 0; i < 3; ++i) split[detail::edge_key(in.cells[c][i], in.cells[c][(i + 1) % 3])] = 1;
    bool changed = false;
    for (std::size_t c = 0; c < nc; ++c) {
      if (red[c]) continue;
      const auto& t = in.cells[c];
      int cnt = 0, which = -1;
      for (int i = 0; i < 3; ++i)
        if (split.count(detail::edge_key(t[i], t[(i + 1) % 3]))) {
          ++cnt;
          which = i;
        }
      if (cnt >= 2) {
        red[c] = 1;
        changed = true;
      } else if (cnt == 1) {
        const int a = t[which], b = t[(which + 1) % 3], o = t[(which + 2) % 3];
        const Vec2 m = provisional_mid(a, b);
        if (!angle_ok(in.vertices[a], m, in.vertices[o]) || !angle_ok(m, in.vertices[b], in.vertices[o])) {
          red[c] = 1;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }

  for (std::size_t c = 0; c < nc; ++c) {
    const auto& t = in.cells[c];
    if (red[c]) {
      const int a = t[0], b = t[1], d = t[2];
      const int ab = midpoint(a, b), bd = midpoint(b, d), da = midpoint(d, a);
      out.cells.push_back({a, ab, da});
      out.cells.push_back({ab, b, bd});
      out.cells.push_back({da, bd, d});
      out.cells.push_back({ab, bd, da});
      continue;
    }
    int which = -1;
    for (int i = 0; i < 3; ++i)
      if (split.count(detail::edge_key(t[i], t[(i + 1) % 3]))) which = i;
    if (which < 0) {
      out.cells.push_back(t);
      continue;
    }
    const int a = t[which], b = t[(which + 1) % 3], o = t[(which + 2) % 3];
    const int m = midpoint(a, b);
    out.cells.push_back({a, m, o});
    out.cells.push_back({m, b, o});
  }
  for (const auto& e : in.boundary_edges) {
    auto it = mid.find(detail::edge_key(e.v[0], e.v[1]));
    if (it == mid.end()) {
      out.boundary_edges.push_back(e);
      continue;
    }
    out.boundary_edges.push_back({{e.v[0], it->second}, e.tag, e.curve});
    out.boundary_edges.push_back({{it->second, e.v[1]}, e.tag, e.curve});
  }
  for (const auto& e : in.interface_edges) {
    auto it = mid.find(detail::edge_key(e.v[0], e.v[1]));
    if (it == mid.end()) {
      out.interface_edges.push_back(e);
      continue;
    }
    out.interface_edges.push_back({{e.v[0], it->second}, e.ring, e.curve});
    out.interface_edges.push_back({{it->second, e.v[1]}, e.ring, e.curve});
  }
  for (std::size_t c = 0; c < out.cells.size(); ++c)
    if (!(out.signed_area(c) > 0.0)) throw QualityError("refine: inverted cell after boundary snapping");
  return out;
}

inline Mesh refine_all(const Mesh& in, const RefineOptions& opt = {},
                       std::vector<std::array<int, 2>>* parents = nullptr) {
  std::vector<std::size_t> all(in.cells.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return refine(in, all, opt, parents);
}

// --------------------------------------------------------------------------
// ASCII format

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}
inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}
}  // namespace detail

/// Header: `PCAPMESH 1`, then `d n_vertices n_cells n_boundary_edges n_interface_edges n_curves`,
/// followed by vertex, cell, boundary-edge (with tag string), interface-edge,
/// curve, grading and outer-radius lines. Doubles use shortest round-trip form.
inline void write_mesh(std::ostream& os, const Mesh& m) {
  using detail::fmt_double;
  os << "PCAPMESH 1\n";
  os << 2 << ' ' << m.vertices.size() << ' ' << m.cells.size() << ' ' << m.boundary_edges.size() << ' '
     << m.interface_edges.size() << ' ' << m.curves.size() << '\n';
  for (const auto& v : m.vertices) os << fmt_double(v[0]) << ' ' << fmt_double(v[1]) << '\n';
  for (const auto& c : m.cells) os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  for (const auto& e : m.boundary_edges) os << e.v[0] << ' ' << e.v[1] << ' ' << e.tag.str() << ' ' << e.curve << '\n';
  for (const auto& e : m.interface_edges) os << e.v[0] << ' ' << e.v[1] << " RING:" << e.ring << ' ' << e.curve << '\n';
  for (const auto& c : m.curves) {
    if (c.kind == Curve::Kind::Circle)
      os << "circle " << fmt_double(c.a[0]) << ' ' << fmt_double(c.a[1]) << ' ' << fmt_double(c.radius) << '\n';
    else
      os << "line " << fmt_double(c.a[0]) << ' ' << fmt_double(c.a[1]) << ' ' << fmt_double(c.b[0]) << ' '
         << fmt_double(c.b[1]) << '\n';
  }
  os << "grading " << fmt_double(m.grading.h_far) << ' ' << fmt_double(m.grading.h_near_factor) << ' '
     << fmt_double(m.grading.growth) << ' ' << fmt_double(m.grading.min_angle_deg) << '\n';
  os << "outer_radius " << fmt_double(m.outer_radius) << '\n';
}

inline Mesh read_mesh(std::istream& is) {
  using detail::parse_double;
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "PCAPMESH" || version != 1) throw std::invalid_argument("read_mesh: not a PCAPMESH 1 file");
  int dim = 0;
  std::size_t nv = 0, nc = 0, nb = 0, ni = 0, ncu = 0;
  is >> dim >> nv >> nc >> nb >> ni >> ncu;
  if (!is || dim != 2) throw std::invalid_argument("read_mesh: bad header");
  Mesh m;
  std::string a, b, c, d;
  m.vertices.resize(nv);
  for (auto& v : m.vertices) {
    is >> a >> b;
    v = {parse_double(a), parse_double(b)};
  }
  m.cells.resize(nc);
  for (auto& t : m.cells) is >> t[0] >> t[1] >> t[2];
  m.boundary_edges.resize(nb);
  for (auto& e : m.boundary_edges) {
    is >> e.v[0] >> e.v[1] >> a >> e.curve;
    e.tag = BoundaryTag::parse(a);
  }
  m.interface_edges.resize(ni);
  for (auto& e : m.interface_edges) {
    is >> e.v[0] >> e.v[1] >> a >> e.curve;
    if (a.rfind("RING:", 0) != 0) throw std::invalid_argument("read_mesh: bad interface tag");
    e.ring = std::stoi(a.substr(5));
  }
  m.curves.resize(ncu);
  for (auto& cv : m.curves) {
    std::string kind;
    is >> kind;
    if (kind == "circle") {
      is >> a >> b >> c;
      cv = {Curve::Kind::Circle, {parse_double(a), parse_double(b)}, {}, parse_double(c)};
    } else if (kind == "line") {
      is >> a >> b >> c >> d;
      cv = {Curve::Kind::Line, {parse_double(a), parse_double(b)}, {parse_double(c), parse_double(d)}, 0.0};
    } else {
      throw std::invalid_argument("read_mesh: bad curve kind '" + kind + "'");
    }
  }
  std::string key;
  is >> key >> a >> b >> c >> d;
  if (key != "grading") throw std::invalid_argument("read_mesh: missing grading line");
  m.grading = {parse_double(a), parse_double(b), parse_double(c), parse_double(d)};
  is >> key >> a;
  if (key != "outer_radius") throw std::invalid_argument("read_mesh: missing outer_radius line");
  m.outer_radius = parse_double(a);
  if (!is) throw std::invalid_argument("read_mesh: truncated file");
  return m;
}

// --------------------------------------------------------------------------
// Point location

/// Bucket grid over cell bounding boxes for point queries.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& m) : mesh_(&m) {
    lo_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    hi_ = {-lo_[0], -lo_[1]};
    for (const auto& v : m.vertices)
      for (int k = 0; k < 2; ++k) {
        lo_[k] = std::min(lo_[k], v[k]);
        hi_[k] = std::max(hi_[k], v[k]);
      }
    const double n = std::max(1.0, std::sqrt(static_cast<double>(m.cells.size())));
    nx_ = ny_ = static_cast<int>(std::ceil(n));
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
      double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
      for (int v : m.cells[c]) {
        x0 = std::min(x0, m.vertices[v][0]);
        x1 = std::max(x1, m.vertices[v][0]);
        y0 = std::min(y0, m.vertices[v][1]);
        y1 = std::max(y1, m.vertices[v][1]);
      }
      for (int i = bx(x0); i <= bx(x1); ++i)
        for (int j = by(y0); j <= by(y1); ++j) buckets_[static_cast<std::size_t>(i) * ny_ + j].push_back(c);
    }
  }

  struct Hit {
    std::size_t cell;
    std::array<double, 3> bary;
  };

  /// Cell containing x (with relative tolerance tol on barycentric coordinates).
  [[nodiscard]] std::optional<Hit> locate(Vec2 x, double tol = 1e-12) const {
    if (x[0] < lo_[0] || x[0] > hi_[0] || x[1] < lo_[1] || x[1] > hi_[1]) return std::nullopt;
    const auto& bucket = buckets_[static_cast<std::size_t>(bx(x[0])) * ny_ + by(x[1])];
    std::optional<Hit> best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (std::size_t c : bucket) {
      const auto& t = mesh_->cells[c];
      const Vec2 &a = mesh_->vertices[t[0]], &b = mesh_->vertices[t[1]], &d = mesh_->vertices[t[2]];
      const double det = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]);
      const double l1 = ((x[0] - a[0]) * (d[1] - a[1]) - (x[1] - a[1]) * (d[0] - a[0])) / det;
      const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
      const double l0 = 1.0 - l1 - l2;
      const double mn = std::min({l0, l1, l2});
      if (mn > best_min) {
        best_min = mn;
        best = Hit{c, {l0, l1, l2}};
      }
    }
    if (!best || best_min < -tol) return std::nullopt;
    return best;
  }

  /// P1 interpolation of vertex values at x, if x is inside the mesh.
  [[nodiscard]] std::optional<double> interpolate(const std::vector<double>& values, Vec2 x, double tol = 1e-12) const {
    auto hit = locate(x, tol);
    if (!hit) return std::nullopt;
    const auto& t = mesh_->cells[hit->cell];
    return hit->bary[0] * values[t[0]] + hit->bary[1] * values[t[1]] + hit->bary[2] * values[t[2]];
  }

 private:
  [[nodiscard]] int bx(double x) const {
    const double w = (hi_[0] - lo_[0]) / nx_;
    return std::clamp(static_cast<int>((x - lo_[0]) / w), 0, nx_ - 1);
  }
  [[nodiscard]] int by(double y) const {
    const double w = (hi_[1] - lo_[1]) / ny_;
    return std::clamp(static_cast<int>((y - lo_[1]) / w), 0, ny_ - 1);
  }
  const Mesh* mesh_;
  Vec2 lo_{}, hi_{};
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace pcap::mesh
