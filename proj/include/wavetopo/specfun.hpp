#pragma once

// Special functions: Bessel J of real order, real spherical harmonics on
// S^1 and S^2, Gegenbauer polynomials and the monochromatic covariance.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "wavetopo/errors.hpp"

namespace wavetopo::specfun {

// Below this argument J is summed from its power series in long double.
inline constexpr double kSeriesSwitch = 12.0;
// Above this the Hankel expansion is accurate to double precision for
// orders <= 3/2; in between Miller's backward recurrence is used.
inline constexpr double kHankelSwitch = 25.0;

namespace detail {

// sum_k (-1)^k (x/2)^{2k} / (k! Gamma(k+nu+1)) * 2^{-nu}, i.e. J_nu(x)/x^nu.
inline long double scaled_series(long double nu, long double x) {
  const long double q = x * x / 4.0L;
  long double term = std::exp(-nu * std::log(2.0L) - std::lgamma(nu + 1.0L));
  long double sum = term;
  for (int k = 0; k < 600; ++k) {
    term *= -q / ((k + 1.0L) * (k + 1.0L + nu));
    sum += term;
    if (k >= 30 && std::fabs(term) <= 1e-22L * std::fabs(sum)) break;
  }
  return sum;
}

// Hankel large-argument expansion; only used for |mu| <= 3/2 and x >= 25.
inline double hankel(double mu, double x) {
  const long double m4 = 4.0L * mu * mu;
  long double p = 0.0L, q = 0.0L, a = 1.0L, xk = 1.0L;
  long double last = std::numeric_limits<long double>::infinity();
  for (int k = 0; k < 80; ++k) {
    if (k > 0) {
      const long double odd = 2.0L * k - 1.0L;
      a *= (m4 - odd * odd) / (8.0L * k);
      xk *= x;
    }
    const long double t = a / xk;
    if (k > 2 && std::fabs(t) > last) break;  // asymptotic series turned
    last = std::fabs(t);
    const long double s = ((k / 2) % 2 == 0) ? t : -t;
    if (k % 2 == 0) p += s; else q += s;
    if (std::fabs(t) < 1e-19L) break;
  }
  const long double w = x - (mu / 2.0L + 0.25L) * std::numbers::pi_v<long double>;
  return static_cast<double>(std::sqrt(2.0L / (std::numbers::pi_v<long double> * x)) *
                             (p * std::cos(w) - q * std::sin(w)));
}

// Miller's backward recurrence from far above max(nu, x), normalized with
// the Neumann identity (x/2)^mu = sum_k (mu+2k) Gamma(mu+k)/k! J_{mu+2k}(x)
// for the base order mu in [0, 1).
inline double miller(double nu, double x) {
  const int steps = static_cast<int>(std::floor(nu));  // -1 for nu = -1/2
  const double mu0 = nu - steps;
  const int top = static_cast<int>(std::ceil(std::max(nu, x) + 40.0 + 0.4 * x));
  long double hi = 0.0L, cur = 1e-30L, sum = 0.0L, at_nu = 0.0L, base1 = 0.0L;
  for (int k = top; k >= 0; --k) {
    // cur holds the unnormalized J_{mu0+k}
    if (k % 2 == 0) {
      const int j = k / 2;
      const long double w = (j == 0) ? std::tgamma(mu0 + 1.0L)
                                     : (mu0 + 2.0L * j) * std::exp(std::lgamma(mu0 + j) -
                                                                   std::lgamma(j + 1.0L));
      sum += w * cur;
    }
    if (k == steps) at_nu = cur;
    if (k == 1) base1 = cur;
    if (k == 0) break;
    const long double lo = 2.0L * (mu0 + k) / x * cur - hi;
    hi = cur;
    cur = lo;
    if (std::fabs(cur) > 1e300L) {
      hi *= 1e-300L; cur *= 1e-300L; sum *= 1e-300L; at_nu *= 1e-300L; base1 *= 1e-300L;
    }
  }
  const long double scale = std::pow(x / 2.0L, (long double)mu0) / sum;
  if (steps < 0) {  // one more downward step to mu0 - 1
    return static_cast<double>((2.0L * mu0 / x * cur - base1) * scale);
  }
  return static_cast<double>(at_nu * scale);
}

}  // namespace detail

template <typename Scalar = double>
Scalar bessel_j(Scalar order, Scalar x) {
  if (!(order >= Scalar(-0.5)) || !std::isfinite(static_cast<double>(order)))
    throw DomainError("bessel_j: order must be >= -1/2");
  if (!(x >= Scalar(0))) throw DomainError("bessel_j: argument must be >= 0");
  const double nu = static_cast<double>(order);
  const double xd = static_cast<double>(x);
  if (xd == 0.0) {
    if (nu == 0.0) return Scalar(1);
    if (nu > 0.0) return Scalar(0);
    return std::numeric_limits<Scalar>::infinity();
  }
  if (xd < kSeriesSwitch) {
    const long double xl = xd;
    return static_cast<Scalar>(detail::scaled_series(nu, xl) * std::pow(xl, (long double)nu));
  }
  if (xd < kHankelSwitch) return Scalar(detail::miller(nu, xd));
  // Fractional base order mu0 in [-1/2, 1/2), then recur upward while the
  // order stays below the argument.
  const int steps = static_cast<int>(std::floor(nu + 0.5));
  const double mu0 = nu - steps;
  if (nu >= xd) return Scalar(detail::miller(nu, xd));
  double a = detail::hankel(mu0, xd);
  if (steps == 0) return Scalar(a);
  double b = detail::hankel(mu0 + 1.0, xd);
  for (int k = 1; k < steps; ++k) {
    const double c = 2.0 * (mu0 + k) / xd * b - a;
    a = b;
    b = c;
  }
  return Scalar(b);
}

// J_mu(r) / r^mu, smooth through r = 0.
template <typename Scalar = double>
Scalar bessel_j_scaled(Scalar order, Scalar r) {
  if (!(r >= Scalar(0))) throw DomainError("bessel_j_scaled: argument must be >= 0");
  if (static_cast<double>(r) < kSeriesSwitch)
    return static_cast<Scalar>(detail::scaled_series(static_cast<long double>(order),
                                                     static_cast<long double>(r)));
  return bessel_j<Scalar>(order, r) / std::pow(r, order);
}

// C_l^nu(t). For nu == 0 the n = 2 limit convention is used: Chebyshev T_l,
// so that C_l(t)/C_l(1) is the zonal function on the circle.
template <typename Scalar = double>
Scalar gegenbauer(int l, Scalar nu, Scalar t) {
  if (l < 0) throw DomainError("gegenbauer: degree must be >= 0");
  if (!(t >= Scalar(-1) && t <= Scalar(1))) throw DomainError("gegenbauer: t outside [-1,1]");
  if (nu < Scalar(0)) throw DomainError("gegenbauer: nu must be >= 0");
  if (l == 0) return Scalar(1);
  Scalar prev = Scalar(1);
  Scalar cur = nu == Scalar(0) ? t : Scalar(2) * nu * t;
  for (int k = 1; k < l; ++k) {
    Scalar next;
    if (nu == Scalar(0))
      next = Scalar(2) * t * cur - prev;
    else
      next = (Scalar(2) * t * (k + nu) * cur - (k + Scalar(2) * nu - Scalar(1)) * prev) / Scalar(k + 1);
    prev = cur;
    cur = next;
  }
  return cur;
}

// Unit-variance covariance 2^nu Gamma(nu+1) J_nu(r)/r^nu, nu = (n-2)/2.
template <typename Scalar = double>
Scalar covariance_kernel(int n, Scalar r) {
  if (n < 2) throw DomainError("covariance_kernel: n must be >= 2");
  if (!(r >= Scalar(0))) throw DomainError("covariance_kernel: r must be >= 0");
  if (r == Scalar(0)) return Scalar(1);
  const Scalar nu = Scalar(n - 2) / Scalar(2);
  return std::exp(std::lgamma(nu + Scalar(1)) + nu * std::log(Scalar(2))) *
         bessel_j_scaled<Scalar>(nu, r);
}

inline double order_for_dimension(int n) { return (n - 2) / 2.0; }

// Number of real harmonics of degree l on S^{n-1}.
int harmonic_dimension(int n, int l);

// r^l Y_lm(x/|x|), a homogeneous harmonic polynomial; grad is filled if given.
// Index convention (1-based m):
//   n = 2: m = 1 -> cos(l theta), m = 2 -> sin(l theta)
//   n = 3: m = 1 -> zonal, m = 2k -> cos(k phi), m = 2k+1 -> sin(k phi)
double solid_harmonic(int n, int l, int m, const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::VectorXd* grad = nullptr);

double real_spherical_harmonic(int n, int l, int m,
                               const Eigen::Ref<const Eigen::VectorXd>& dir);

// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int points);

}  // namespace wavetopo::specfun
