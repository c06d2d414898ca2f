#pragma once

// Self-test battery over the closed-form evaluators: identities, monotonicity,
// convexity and bracketing checked on fixed grids.

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pcap/analytic.hpp"

namespace pcap::selftest {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string show(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

struct Case {
  double p, sigma, cap_K, cap_B;
};

// Exponents and capacities spread over the interesting range, d = 2 and 3.
inline std::vector<std::pair<int, Case>> cases() {
  std::vector<std::pair<int, Case>> out;
  for (double p : {1.1, 1.2, 1.5, 1.8}) {
    const double cK = analytic::ball_capacity(2, p, 1.0, OuterRadius::infinity()).value;
    const double cB = analytic::ball_capacity(2, p, 1.0, OuterRadius(2.0)).value;
    out.push_back({2, {p, 2 * std::numbers::pi, cK, cB}});
  }
  for (double p : {1.5, 2.0, 2.5}) {
    const double cK = analytic::ball_capacity(3, p, 1.0, OuterRadius::infinity()).value;
    out.push_back({3, {p, 4 * std::numbers::pi, cK, cK}});
  }
  return out;
}

}  // namespace detail

inline std::vector<Check> run_analytic() {
  using namespace analytic;
  using detail::show;
  std::vector<Check> out;
  auto add = [&](std::string name, bool pass, std::string detail) { out.push_back({std::move(name), pass, std::move(detail)}); };
  const double pi = std::numbers::pi;

  {
    const double c = ball_capacity(3, 2.0, 1.0, OuterRadius::infinity()).value;
    add("unit ball in R^3, p = 2, has capacity 4 pi", std::abs(c / (4 * pi) - 1) <= 1e-12, show(c));
  }
  {
    const double c = ball_capacity(2, 1.5, 0.5, OuterRadius(2.0)).value, ref = 2 * pi / std::sqrt(1.5);
    add("annulus r = 1/2, R = 2, p = 1.5 has capacity 2 pi / sqrt(1.5)", std::abs(c / ref - 1) <= 1e-12, show(c));
  }
  {
    double worst = 0.0;
    for (int d : {2, 3, 5})
      for (double f : {0.3, 0.6, 0.9}) {
        const double p = 1.0 + f * (d - 1.0);
        const double c1 = ball_capacity(d, p, 1.0, OuterRadius::infinity()).value;
        const double c3 = ball_capacity(d, p, 3.0, OuterRadius::infinity()).value;
        worst = std::max(worst, std::abs(capacity_scaling(c1, 3.0, d, p) / c3 - 1));
      }
    add("capacity scales as a^{d-p}", worst <= 1e-12, "max rel dev " + show(worst));
  }
  {
    const double sigma = 12 * 2 * std::sin(pi / 12), c = 2 * pi;
    const double A = a_star(Tau(1.0 / 40), sigma, c, c, 1.5, 2);
    add("12 anchors, tau = 1/40, p = 1.5: amplitude near 1/2", A >= 0.49 && A <= 0.51, show(A));
  }
  {
    bool ok = true;
    std::string why;
    for (const auto& [d, k] : detail::cases()) {
      double prev = 0.0;
      if (a_star(Tau(0.0), k.sigma, k.cap_K, k.cap_B, k.p, d) != 0.0) ok = false;
      if (a_star(Tau::infinity(), k.sigma, k.cap_K, k.cap_B, k.p, d) != 1.0) ok = false;
      for (double lt = -6; lt <= 6; lt += 0.05) {
        const double A = a_star(Tau(std::pow(10.0, lt)), k.sigma, k.cap_K, k.cap_B, k.p, d);
        if (A < prev) {
          ok = false;
          why = "decrease at p=" + show(k.p);
        }
        prev = A;
      }
      // The approach to 1 goes like tau^{-(d-p)/(p-1)}, slow for p near d.
      const double far = a_star(Tau(1e40), k.sigma, k.cap_K, k.cap_B, k.p, d);
      if (!(far > 1.0 - 1e-9)) {
        ok = false;
        why = "a_star(1e40) = " + show(far);
      }
    }
    add("amplitude is 0 at tau = 0, nondecreasing, tends to 1", ok, why);
  }
  {
    bool ok = true;
    std::string why;
    for (const auto& [d, k] : detail::cases())
      for (double tau : {0.01, 0.1, 1.0, 10.0}) {
        const double h = 1e-3;
        for (int i = 1; i < 1000; ++i) {
          const double a = phi_tau((i - 1) * h, Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
          const double b = phi_tau(i * h, Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
          const double c = phi_tau((i + 1) * h, Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
          if (!(a - 2 * b + c > 0.0)) {
            ok = false;
            why = "p=" + show(k.p) + " tau=" + show(tau) + " A=" + show(i * h);
          }
        }
      }
    add("phi_tau has positive second differences on [0, 1]", ok, why);
  }
  {
    bool ok = true;
    double worst = 0.0;
    for (const auto& [d, k] : detail::cases())
      for (double tau : {0.01, 0.1, 1.0, 10.0}) {
        const double As = a_star(Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
        const double fs = phi_tau(As, Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
        const double lim = limit_capacity(Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
        worst = std::max(worst, std::abs(fs / lim - 1));
        if (fs > k.cap_B * (1 + 1e-12)) ok = false;
        for (int i = 0; i <= 200; ++i)
          if (fs > phi_tau(i / 200.0, Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d) * (1 + 1e-12)) ok = false;
      }
    add("phi_tau is minimal at the amplitude, equals the limit, is <= phi_tau(1)", ok && worst <= 1e-10,
        "max |phi/limit - 1| " + show(worst));
  }
  {
    bool ok = true;
    for (int d : {2, 3})
      for (double p : {1.2, 1.5, 1.8}) {
        const double g = gamma_exponent(d, p);
        const double inf = ball_capacity(d, p, 1.0, OuterRadius::infinity()).value;
        double prev = std::numeric_limits<double>::infinity();
        for (double R : {1.5, 2.0, 4.0, 16.0, 256.0, 1e6, 1e40}) {
          const double c = ball_capacity(d, p, 1.0, OuterRadius(R)).value;
          const auto [lo, hi] = capacity_bracket(inf, R, g, p);
          if (!(c <= prev) || c < lo * (1 - 1e-12) || c > hi * (1 + 1e-12)) ok = false;
          prev = c;
        }
        if (std::abs(prev / inf - 1) > 1e-3) ok = false;
      }
    add("ball capacity falls to the whole-space value inside the bracket", ok, "");
  }
  {
    // (t^{d-1} |h'|^{p-2} h')' = 0: the flux t^{d-1} |h'|^{p-1} is constant.
    double worst = 0.0;
    for (int d : {2, 3})
      for (double p : {1.2, 1.5, 1.8}) {
        const double g = gamma_exponent(d, p), r = 0.3, R = 2.0, s = 1e-4;
        auto flux = [&](double t) {
          const double dh = (radial_profile_annulus(t + s, r, R, g) - radial_profile_annulus(t - s, r, R, g)) / (2 * s);
          return std::pow(t, d - 1.0) * std::pow(std::abs(dh), p - 1.0);
        };
        const double f0 = flux(0.5);
        for (double t = 0.5; t < 1.9; t += 0.1) worst = std::max(worst, std::abs(flux(t) / f0 - 1));
      }
    add("annulus profile has constant radial flux", worst <= 1e-6, "max rel dev " + show(worst));
  }
  {
    bool ok = true;
    for (const auto& [d, k] : detail::cases())
      for (double tau : {1e-3, 0.01, 0.1, 1.0, 10.0, 100.0}) {
        const double lim = limit_capacity(Tau(tau), k.sigma, k.cap_K, k.cap_B, k.p, d);
        const double cav = k.sigma * std::pow(tau, d - k.p) * k.cap_K;
        if (lim > std::min(k.cap_B, cav) * (1 + 1e-12)) ok = false;
      }
    add("limit capacity is below both the bulk and the cavity terms", ok, "");
  }
  {
    double worst = 0.0;
    for (double p : {1.2, 1.5}) {
      const double g = gamma_exponent(2, p);
      const double a = cone_energy_closed(0.7, 1.3, 0.25, g, p, 2);
      const double b = cone_energy_truncated(0.7, 1.3, OuterRadius(1e9), 0.25, g, p, 2);
      worst = std::max(worst, std::abs(b / a - 1));
    }
    add("truncated cone energy tends to the untruncated one", worst <= 1e-3, "rel dev " + show(worst));
  }
  {
    double worst = 0.0;
    for (int d : {2, 3, 4, 6})
      for (double delta : {0.3, 1.0, 1.7}) {
        const double th = 2 * std::asin(delta / 2);
        const int n = 200000;
        double num = 0, den = 0;
        for (int i = 0; i < n; ++i) {
          const double x = pi * (i + 0.5) / n;
          const double w = std::pow(std::sin(x), d - 2);
          den += w;
          if (x < th) num += w;
        }
        worst = std::max(worst, std::abs(cap_measure(delta, d) - num / den));
      }
    add("spherical cap measure matches the polar integral", worst <= 1e-4, "max abs dev " + show(worst));
  }
  return out;
}

}  // namespace pcap::selftest
