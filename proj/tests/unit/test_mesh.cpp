#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "pcap/analytic.hpp"
#include "pcap/geometry.hpp"
#include "pcap/mesh.hpp"

using namespace pcap;

namespace {

geometry::PerforatedDomain twelve_balls(double alpha = 0.02) {
  return geometry::build_perforation(geometry::anchors_circle(12), alpha, {}, 2.0, 2, 1.5);
}

// All boundary vertices sit on their curve; cavity vertices within 1e-6 * alpha eps.
void expect_on_boundary(const mesh::Mesh& m, const geometry::PerforatedDomain* pd) {
  for (const auto& e : m.boundary_edges) {
    for (int v : e.v) {
      const auto& x = m.vertices[v];
      if (e.tag.kind == mesh::BoundaryKind::Outer) {
        EXPECT_LE(std::abs(std::hypot(x[0], x[1]) - m.outer_radius), 1e-8 * m.outer_radius);
      } else if (pd) {
        EXPECT_LE(std::abs(pd->signed_distance(e.tag.index, x)), 1e-6 * pd->cavity_radius());
      }
    }
  }
}

// Boundary edges with a given tag form one closed loop.
bool closed_loop(const mesh::Mesh& m, const mesh::BoundaryTag& tag) {
  std::map<int, int> next;
  for (const auto& e : m.boundary_edges)
    if (e.tag == tag) {
      if (next.count(e.v[0])) return false;
      next[e.v[0]] = e.v[1];
    }
  if (next.empty()) return false;
  int v = next.begin()->first;
  std::size_t steps = 0;
  do {
    auto it = next.find(v);
    if (it == next.end()) return false;
    v = it->second;
    ++steps;
  } while (v != next.begin()->first && steps <= next.size());
  return steps == next.size();
}

std::size_t far_field_cells(const mesh::Mesh& m) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto g = m.centroid(c);
    const double r = std::hypot(g[0], g[1]);
    if (r < 0.4 || (r > 1.6 && r < 1.9)) ++n;
  }
  return n;
}

}  // namespace

TEST(Mesh, FullDiskHasOnlyOuterTags) {
  mesh::Domain2D dom;
  dom.outer_radius = 2.0;
  dom.h_far = 0.2;
  const auto m = mesh::generate(dom);
  EXPECT_GT(m.cells.size(), 100u);
  for (const auto& e : m.boundary_edges) EXPECT_EQ(e.tag, mesh::BoundaryTag::outer());
  EXPECT_TRUE(mesh::is_conforming(m));
  EXPECT_TRUE(closed_loop(m, mesh::BoundaryTag::outer()));
  expect_on_boundary(m, nullptr);
  EXPECT_GE(mesh::quality(m).min_angle_deg, 18.0);
  double area = 0.0;
  for (std::size_t c = 0; c < m.cells.size(); ++c) area += m.signed_area(c);
  EXPECT_NEAR(area, std::numbers::pi * 4.0, 0.01 * std::numbers::pi * 4.0);
}

TEST(Mesh, TwelveCavitiesGiveTwelveClosedTags) {
  const auto pd = twelve_balls();
  const auto m = mesh::mesh_perforated_ball(pd, 0.2, 0.3);
  const auto tags = m.cavity_tags();
  ASSERT_EQ(tags.size(), 12u);
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(tags[i], i);
    EXPECT_TRUE(closed_loop(m, mesh::BoundaryTag::cavity(i)));
    std::size_t n = 0;
    for (const auto& e : m.boundary_edges) n += e.tag == mesh::BoundaryTag::cavity(i);
    EXPECT_GE(n, 32u);
  }
  EXPECT_TRUE(closed_loop(m, mesh::BoundaryTag::outer()));
  EXPECT_TRUE(mesh::is_conforming(m));
  expect_on_boundary(m, &pd);
  const auto q = mesh::quality(m);
  EXPECT_GE(q.min_angle_deg, 18.0);
  EXPECT_GT(q.min_signed_area, 0.0);
}

TEST(Mesh, SquareCavitiesWithRotation) {
  geometry::CavitySpec spec;
  spec.shape = geometry::CavityShape::Square;
  spec.rotation = geometry::RotationRule::RadialAlign;
  const auto pd = geometry::build_perforation(geometry::anchors_circle(12), 0.02, spec, 2.0, 2, 1.5);
  const auto m = mesh::mesh_perforated_ball(pd, 0.2, 0.3);
  EXPECT_EQ(m.cavity_tags().size(), 12u);
  for (int i = 0; i < 12; ++i) {
    std::size_t n = 0;
    for (const auto& e : m.boundary_edges) n += e.tag == mesh::BoundaryTag::cavity(i);
    EXPECT_GE(n, 32u);  // >= 8 per side
  }
  EXPECT_TRUE(mesh::is_conforming(m));
  expect_on_boundary(m, &pd);
  EXPECT_GE(mesh::quality(m).min_angle_deg, 18.0);
}

TEST(Mesh, GradesOverThreeOrdersOfMagnitude) {
  // alpha eps ~ 1e-4 against R = 2.
  const auto pd = geometry::build_perforation(geometry::anchors_circle(63), 0.001, {}, 2.0, 2, 1.2);
  const auto m = mesh::mesh_perforated_ball(pd, 0.1, 0.3);
  EXPECT_EQ(m.cavity_tags().size(), 63u);
  EXPECT_TRUE(mesh::is_conforming(m));
  expect_on_boundary(m, &pd);
  EXPECT_GE(mesh::quality(m).min_angle_deg, 18.0);
  EXPECT_LT(m.cells.size(), 200000u);
}

TEST(Mesh, HalvingFarFieldSizeQuadruplesFarCells) {
  const auto pd = twelve_balls();
  const auto coarse = mesh::mesh_perforated_ball(pd, 0.2, 0.3);
  const auto fine = mesh::mesh_perforated_ball(pd, 0.1, 0.3);
  const double ratio = static_cast<double>(far_field_cells(fine)) / static_cast<double>(far_field_cells(coarse));
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 5.0);
}

TEST(Mesh, InterfaceRingsAreMeshEdges) {
  const auto pd = twelve_balls();
  mesh::MeshOptions opt;
  opt.h_far = 0.2;
  opt.h_near_factor = 0.3;
  opt.ansatz_shells = true;
  const auto m = mesh::mesh_perforated_ball(pd, opt);
  std::set<int> rings;
  for (const auto& e : m.interface_edges) {
    rings.insert(e.ring);
    const auto& c = m.curves[e.curve];
    for (int v : e.v) {
      const auto& x = m.vertices[v];
      EXPECT_NEAR(std::hypot(x[0] - c.a[0], x[1] - c.a[1]), c.radius, 1e-12);
    }
  }
  EXPECT_EQ(rings.size(), 13u);
  EXPECT_TRUE(mesh::is_conforming(m));
}

TEST(Mesh, RejectsBadOptions) {
  const auto pd = twelve_balls();
  EXPECT_THROW(mesh::mesh_perforated_ball(pd, 0.6, 0.3), DomainError);
  EXPECT_THROW(mesh::mesh_perforated_ball(pd, 0.1, 0.0), DomainError);
  EXPECT_THROW(mesh::mesh_perforated_ball(pd, 0.1, 1.5), DomainError);
}

TEST(Mesh, RoundTripIsIdentity) {
  const auto pd = twelve_balls();
  mesh::MeshOptions opt;
  opt.h_far = 0.3;
  opt.ansatz_shells = true;
  const auto m = mesh::mesh_perforated_ball(pd, opt);
  std::stringstream ss;
  mesh::write_mesh(ss, m);
  const std::string first = ss.str();
  const auto back = mesh::read_mesh(ss);
  EXPECT_EQ(back, m);
  std::stringstream again;
  mesh::write_mesh(again, back);
  EXPECT_EQ(again.str(), first);
}

TEST(Mesh, GenerationIsDeterministic) {
  const auto pd = twelve_balls();
  std::stringstream a, b;
  mesh::write_mesh(a, mesh::mesh_perforated_ball(pd, 0.3, 0.5));
  mesh::write_mesh(b, mesh::mesh_perforated_ball(pd, 0.3, 0.5));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Refine, MarkAllSplitsEveryCell) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.1));
  const auto r = mesh::refine_all(m);
  EXPECT_EQ(r.cells.size(), 4 * m.cells.size());
  EXPECT_EQ(r.boundary_edges.size(), 2 * m.boundary_edges.size());
  EXPECT_TRUE(mesh::is_conforming(r));
  for (const auto& e : r.boundary_edges)
    for (int v : e.v) {
      const double rad = std::hypot(r.vertices[v][0], r.vertices[v][1]);
      EXPECT_NEAR(rad, e.tag.kind == mesh::BoundaryKind::Outer ? 2.0 : 0.5, 1e-12);
    }
  EXPECT_GE(mesh::quality(r).min_angle_deg, 18.0);
}

TEST(Refine, PartialMarkingClosesConformingly) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.1));
  std::vector<std::size_t> marked;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto g = m.centroid(c);
    if (std::hypot(g[0], g[1]) < 0.8) marked.push_back(c);
  }
  const auto r = mesh::refine(m, marked);
  EXPECT_GT(r.cells.size(), m.cells.size());
  EXPECT_LE(r.cells.size(), 4 * m.cells.size());
  EXPECT_TRUE(mesh::is_conforming(r));
  EXPECT_GE(mesh::quality(r).min_angle_deg, 18.0);
  for (const auto& e : r.boundary_edges)
    for (int v : e.v)
      EXPECT_NEAR(std::hypot(r.vertices[v][0], r.vertices[v][1]),
                  e.tag.kind == mesh::BoundaryKind::Outer ? 2.0 : 0.5, 1e-12);
}

TEST(Refine, UnsnappedRefinementKeepsGeometry) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.3, 0.1));
  const auto r = mesh::refine_all(m, {.snap = false});
  double a0 = 0.0, a1 = 0.0;
  for (std::size_t c = 0; c < m.cells.size(); ++c) a0 += m.signed_area(c);
  for (std::size_t c = 0; c < r.cells.size(); ++c) a1 += r.signed_area(c);
  EXPECT_NEAR(a0, a1, 1e-12 * a0);
}

TEST(Refine, EmptyMarkingRejected) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.5, 0.2));
  EXPECT_THROW(mesh::refine(m, {}), DomainError);
}

TEST(PointLocator, InterpolatesLinearFieldsExactly) {
  const auto m = mesh::generate(mesh::annulus_domain(0.5, 2.0, 0.2, 0.1));
  const mesh::PointLocator loc(m);
  std::vector<double> f(m.vertices.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 3.0 * m.vertices[i][0] - 2.0 * m.vertices[i][1] + 1.0;
  for (double t = 0.0; t < 6.28; t += 0.1) {
    const mesh::Vec2 x{1.2 * std::cos(t), 1.2 * std::sin(t)};
    auto v = loc.interpolate(f, x);
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(*v, 3.0 * x[0] - 2.0 * x[1] + 1.0, 1e-12);
  }
  EXPECT_FALSE(loc.locate({0.0, 0.0}).has_value());
  EXPECT_FALSE(loc.locate({3.0, 0.0}).has_value());
}
