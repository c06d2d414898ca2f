#pragma once

// Closed-form quantities of nonlinear potential theory for balls, annuli and
// sphere-anchored perforations. Everything here is a pure function of its
// arguments; the numerical modules use these as oracles.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "pcap/error.hpp"

namespace pcap {

/// Nonnegative real that may take the distinguished value +infinity.
/// Used for the window parameter tau and for outer radii, where a large
/// float would overflow in powers like tau^(d-p).
template <class Tag>
class Extended {
 public:
  constexpr Extended() = default;
  constexpr Extended(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)

  static constexpr Extended infinity() {
    Extended e;
    e.infinite_ = true;
    return e;
  }

  [[nodiscard]] constexpr bool is_infinite() const { return infinite_; }
  [[nodiscard]] constexpr bool is_zero() const { return !infinite_ && value_ == 0.0; }

  [[nodiscard]] double value() const {
    if (infinite_) throw DomainError("Extended::value() called on infinity");
    return value_;
  }

  /// Finite value, or +inf as a float. Only for printing and comparisons.
  [[nodiscard]] constexpr double as_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr bool operator==(const Extended& a, const Extended& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

struct TauTag {};
struct RadiusTag {};
using Tau = Extended<TauTag>;
using OuterRadius = Extended<RadiusTag>;

/// A p-capacity together with the outer radius it is relative to.
struct CapacityValue {
  double value = 0.0;
  OuterRadius relative_to = OuterRadius::infinity();
};

namespace analytic {

namespace detail {

inline void require_exponents(int d, double p) {
  if (d < 2) throw DomainError("dimension must be >= 2, got " + std::to_string(d));
  if (!(p > 1.0) || !(p < static_cast<double>(d)))
    throw DomainError("exponent p must satisfy 1 < p < d (p=" + std::to_string(p) +
                      ", d=" + std::to_string(d) + ")");
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// log of r^{-g} - R^{-g} for 0 < r < R, stable when r ~ R.
inline double log_power_gap(double r, double R, double g) {
  // r^{-g} - R^{-g} = r^{-g} (1 - (r/R)^g)
  return -g * std::log(r) + std::log(-std::expm1(g * std::log(r / R)));
}

}  // namespace detail

/// gamma = (d - p) / (p - 1), decay exponent of the exterior ball potential.
inline double gamma_exponent(int d, double p) {
  detail::require_exponents(d, p);
  return (static_cast<double>(d) - p) / (p - 1.0);
}

/// Surface area omega_{d-1} of the unit sphere in R^d.
inline double sphere_area(int d) {
  if (d < 2) throw DomainError("sphere_area: d must be >= 2");
  const double half = 0.5 * static_cast<double>(d);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

/// cap_p of the closed ball of radius r relative to B(0,R); R may be infinite.
inline CapacityValue ball_capacity(int d, double p, double r, OuterRadius R) {
  const double g = gamma_exponent(d, p);
  if (!(r > 0.0)) throw DomainError("ball_capacity: radius must be positive");
  const double base = sphere_area(d) * std::pow(g, p - 1.0);
  if (R.is_infinite()) return {base * std::pow(r, static_cast<double>(d) - p), R};
  if (!(r < R.value())) throw DomainError("ball_capacity: need r < R");
  const double log_gap = detail::log_power_gap(r, R.value(), g);
  return {base * std::exp((1.0 - p) * log_gap), R};
}

/// U(t/scale) with U = min(1, |x|^{-gamma}).
inline double radial_profile_U(double t, double gamma, double scale = 1.0) {
  if (t <= scale) return 1.0;
  return std::pow(t / scale, -gamma);
}

/// h_{r,R}(t): the p-harmonic radial profile equal to 1 at t=r and 0 at t=R.
inline double radial_profile_annulus(double t, double r, double R, double gamma) {
  if (!(r > 0.0) || !(r < R)) throw DomainError("radial_profile_annulus: need 0 < r < R");
  if (t < r || t > R) throw DomainError("radial_profile_annulus: t outside [r, R]");
  if (t == r) return 1.0;
  if (t == R) return 0.0;
  // (t^-g - R^-g) / (r^-g - R^-g), both factors written relative to R.
  const double num = -std::expm1(gamma * std::log(t / R));
  const double den = -std::expm1(gamma * std::log(r / R));
  return std::pow(r / t, gamma) * num / den;
}

/// W_{eps,R}(t): equilibrium potential of the ball of radius 1+eps inside B(0,R).
inline double equilibrium_profile_ball(double t, double eps, double R, double gamma) {
  const double inner = 1.0 + eps;
  if (!(eps >= 0.0)) throw DomainError("equilibrium_profile_ball: eps must be >= 0");
  if (!(R > inner)) throw DomainError("equilibrium_profile_ball: need R > 1 + eps");
  if (t <= inner) return 1.0;
  if (t >= R) return 0.0;
  return radial_profile_annulus(t, inner, R, gamma);
}

/// Weight of the cavity term, sigma * tau^{d-p} * cap_p(K), in log form.
/// Returns -inf for tau = 0.
inline double log_cavity_weight(Tau tau, double sigma, double cap_K, double p, int d) {
  if (tau.is_zero()) return -std::numeric_limits<double>::infinity();
  return std::log(sigma) + (static_cast<double>(d) - p) * std::log(tau.value()) +
         std::log(cap_K);
}

/// Limiting bulk amplitude X/(X+Y) with X = (sigma tau^{d-p} cap_K)^{1/(p-1)}
/// and Y = cap_ball_rel^{1/(p-1)}. cap_ball_rel is cap_p of the unit ball either
/// in R^d (whole-space amplitude) or relative to B(0,R) (ball amplitude).
inline double a_star(Tau tau, double sigma, double cap_K, double cap_ball_rel, double p,
                     int d) {
  detail::require_exponents(d, p);
  if (!(sigma > 0.0) || !(cap_K > 0.0) || !(cap_ball_rel > 0.0))
    throw DomainError("a_star: sigma and capacities must be positive");
  if (tau.is_infinite()) return 1.0;
  if (tau.value() < 0.0) throw DomainError("a_star: tau must be >= 0");
  if (tau.is_zero()) return 0.0;
  const double log_x = log_cavity_weight(tau, sigma, cap_K, p, d) / (p - 1.0);
  const double log_y = std::log(cap_ball_rel) / (p - 1.0);
  // X/(X+Y) = 1/(1+exp(log_y-log_x))
  const double t = log_y - log_x;
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

/// phi_tau(A) = A^p cap_ball_rel + (1-A)^p cap_K sigma tau^{d-p} for finite tau.
inline double phi_tau(double A, Tau tau, double sigma, double cap_K, double cap_ball_rel,
                      double p, int d) {
  detail::require_exponents(d, p);
  if (A < 0.0 || A > 1.0) throw DomainError("phi_tau: A must lie in [0,1]");
  if (tau.is_infinite())
    return A == 1.0 ? cap_ball_rel : std::numeric_limits<double>::infinity();
  const double w = tau.is_zero() ? 0.0 : std::exp(log_cavity_weight(tau, sigma, cap_K, p, d));
  return std::pow(A, p) * cap_ball_rel + std::pow(1.0 - A, p) * w;
}

/// Limit of the capacity: 0 at tau=0, the closed-form minimum of phi_tau in the
/// window, cap_ball_rel at tau=infinity.
inline double limit_capacity(Tau tau, double sigma, double cap_K, double cap_ball_rel,
                             double p, int d) {
  detail::require_exponents(d, p);
  if (tau.is_infinite()) return cap_ball_rel;
  if (tau.is_zero()) return 0.0;
  const double log_z = log_cavity_weight(tau, sigma, cap_K, p, d);
  const double log_c = std::log(cap_ball_rel);
  // Z C / (Z^{1/(p-1)} + C^{1/(p-1)})^{p-1}
  const double q = 1.0 / (p - 1.0);
  const double log_den = (p - 1.0) * detail::log_add_exp(q * log_z, q * log_c);
  return std::exp(log_z + log_c - log_den);
}

/// Lower and upper bounds on cap_p(K, B(0,R)) for K inside the closed unit ball,
/// given the whole-space capacity.
inline std::pair<double, double> capacity_bracket(double cap_whole_space, double R,
                                                  double gamma, double p) {
  if (!(R > 1.0)) throw DomainError("capacity_bracket: need R > 1");
  if (cap_whole_space < 0.0) throw DomainError("capacity_bracket: negative capacity");
  const double shrink = -std::expm1(-gamma * std::log(R));  // 1 - R^{-gamma}
  return {cap_whole_space, cap_whole_space * std::pow(shrink, -p)};
}

/// J(alpha) = (1 - (10 alpha)^gamma)^{-p} - 1.
inline double shrinkage_factor_J(double alpha, double gamma, double p) {
  if (!(alpha > 0.0)) throw DomainError("shrinkage_factor_J: alpha must be positive");
  if (!(10.0 * alpha < 1.0)) throw DomainError("shrinkage_factor_J: need 10 alpha < 1");
  const double x = std::pow(10.0 * alpha, gamma);
  return std::expm1(-p * std::log1p(-x));
}

/// Energy of A~ U(x/R) over the cone over Q outside radius R, with mu_Q the
/// probability mass of Q on the sphere.
inline double cone_energy_closed(double A_tilde, double R, double mu_Q, double gamma,
                                 double p, int d) {
  if (A_tilde == 0.0) return 0.0;
  return std::pow(A_tilde, p) * std::pow(R, static_cast<double>(d) - p) *
         std::pow(gamma, p - 1.0) * sphere_area(d) * mu_Q;
}

/// Minimal energy over the truncated cone {r q : q in Q, R0 < r < R1} of a
/// function that is >= A~ on the inner cap and 0 on the outer cap. Reduces to
/// cone_energy_closed as R1 -> infinity.
inline double cone_energy_truncated(double A_tilde, double R0, OuterRadius R1, double mu_Q,
                                    double gamma, double p, int d) {
  if (R1.is_infinite()) return cone_energy_closed(A_tilde, R0, mu_Q, gamma, p, d);
  if (!(R0 > 0.0) || !(R0 < R1.value())) throw DomainError("cone_energy_truncated: need 0 < R0 < R1");
  if (A_tilde == 0.0) return 0.0;
  const double log_gap = detail::log_power_gap(R0, R1.value(), gamma) - std::log(gamma);
  return std::pow(A_tilde, p) * sphere_area(d) * mu_Q * std::exp((1.0 - p) * log_gap);
}

/// cap_p(aK) = a^{d-p} cap_p(K).
inline double capacity_scaling(double cap, double a, int d, double p) {
  if (!(a > 0.0)) throw DomainError("capacity_scaling: scale must be positive");
  return std::pow(a, static_cast<double>(d) - p) * cap;
}

/// Probability mass of the open cap {x on S^{d-1} : |x - y| < delta}.
inline double cap_measure(double delta, int d) {
  if (d < 2) throw DomainError("cap_measure: d must be >= 2");
  if (delta <= 0.0) return 0.0;
  if (delta >= 2.0) return 1.0;
  const double theta = 2.0 * std::asin(0.5 * delta);
  if (d == 2) return theta / std::numbers::pi;
  if (d == 3) return 0.25 * delta * delta;
  // Ratio of integrals of sin^{d-2} on [0, theta] and [0, pi] by composite Simpson.
  auto integral = [d](double upper) {
    const int n = 2000;
    const double h = upper / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * std::pow(std::sin(i * h), d - 2);
    }
    return s * h / 3.0;
  };
  return integral(theta) / integral(std::numbers::pi);
}

}  // namespace analytic

/// Problem parameters shared by the geometric and numerical modules.
struct Params {
  int d = 2;
  double p = 1.5;
  double R = 2.0;
  double eps = 0.1;
  double alpha = 0.01;
  double sigma = 2.0 * std::numbers::pi;

  [[nodiscard]] double gamma() const { return analytic::gamma_exponent(d, p); }
  /// alpha_c = eps^{1/gamma}.
  [[nodiscard]] double alpha_critical() const { return std::pow(eps, 1.0 / gamma()); }
  [[nodiscard]] Tau tau() const { return Tau(alpha / alpha_critical()); }

  /// Params with alpha derived from tau as alpha = tau eps^{1/gamma}.
  static Params from_tau(int d, double p, double R, double eps, double tau, double sigma) {
    Params prm{d, p, R, eps, 0.0, sigma};
    prm.alpha = tau * prm.alpha_critical();
    prm.validate();
    return prm;
  }

  void validate() const {
    analytic::detail::require_exponents(d, p);
    if (!(R > 1.0)) throw DomainError("Params: R must exceed 1");
    if (!(eps > 0.0) || !(eps < 1.0)) throw DomainError("Params: eps must lie in (0,1)");
    if (!(alpha > 0.0)) throw DomainError("Params: alpha must be positive");
    if (!(sigma > 0.0)) throw DomainError("Params: sigma must be positive");
  }
};

}  // namespace pcap
