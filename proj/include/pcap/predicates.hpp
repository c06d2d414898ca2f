#pragma once

// Orientation and in-circle tests with a floating-point filter and an exact
// rational fallback. Input coordinates are doubles, hence exact rationals.

#include <array>
#include <cmath>
#include <limits>

#include <gmpxx.h>

namespace pcap::predicates {

using Pt = std::array<double, 2>;

namespace detail {
constexpr double kEps = std::numeric_limits<double>::epsilon() * 0.5;
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

inline int sign(const mpq_class& q) { return sgn(q); }
}  // namespace detail

/// +1 if a, b, c are counter-clockwise, -1 if clockwise, 0 if collinear.
inline int orient(const Pt& a, const Pt& b, const Pt& c) {
  const double l = (a[0] - c[0]) * (b[1] - c[1]);
  const double r = (a[1] - c[1]) * (b[0] - c[0]);
  const double det = l - r;
  const double bound = detail::kOrientBound * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const mpq_class ax(a[0]), ay(a[1]), bx(b[0]), by(b[1]), cx(c[0]), cy(c[1]);
  const mpq_class e = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx);
  return detail::sign(e);
}

/// +1 if d lies strictly inside the circle through counter-clockwise a, b, c;
/// -1 if strictly outside, 0 if cocircular.
inline int incircle(const Pt& a, const Pt& b, const Pt& c, const Pt& d) {
  const double adx = a[0] - d[0], ady = a[1] - d[1];
  const double bdx = b[0] - d[0], bdy = b[1] - d[1];
  const double cdx = c[0] - d[0], cdy = c[1] - d[1];
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double perm = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                      (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                      (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = detail::kInCircleBound * perm;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  const mpq_class dx(d[0]), dy(d[1]);
  const mpq_class qax = mpq_class(a[0]) - dx, qay = mpq_class(a[1]) - dy;
  const mpq_class qbx = mpq_class(b[0]) - dx, qby = mpq_class(b[1]) - dy;
  const mpq_class qcx = mpq_class(c[0]) - dx, qcy = mpq_class(c[1]) - dy;
  const mpq_class e = (qax * qax + qay * qay) * (qbx * qcy - qcx * qby) +
                      (qbx * qbx + qby * qby) * (qcx * qay - qax * qcy) +
                      (qcx * qcx + qcy * qcy) * (qax * qby - qbx * qay);
  return detail::sign(e);
}

}  // namespace pcap::predicates
