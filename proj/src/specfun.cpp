#include "wavetopo/specfun.hpp"

#include <complex>

namespace wavetopo::specfun {

namespace {

void check_index(int n, int l, int m) {
  if (n != 2 && n != 3) throw DomainError("spherical harmonics support n = 2, 3 only");
  if (l < 0) throw DomainError("harmonic degree must be >= 0");
  if (m < 1 || m > harmonic_dimension(n, l)) throw DomainError("harmonic index out of range");
}

double log_factorial(int k) { return std::lgamma(k + 1.0); }

}  // namespace

int harmonic_dimension(int n, int l) {
  if (l < 0) return 0;
  if (n == 2) return l == 0 ? 1 : 2;
  if (n == 3) return 2 * l + 1;
  throw DomainError("harmonic_dimension: n must be 2 or 3");
}

double solid_harmonic(int n, int l, int m, const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::VectorXd* grad) {
  check_index(n, l, m);
  if (x.size() != n) throw DomainError("solid_harmonic: dimension mismatch");
  const double pi = std::numbers::pi;

  if (n == 2) {
    if (l == 0) {
      if (grad) grad->setZero(2);
      return 1.0 / std::sqrt(2.0 * pi);
    }
    const double norm = 1.0 / std::sqrt(pi);
    const std::complex<double> z(x[0], x[1]);
    const std::complex<double> zl = std::pow(z, l);
    const bool use_sin = (m == 2);
    if (grad) {
      const std::complex<double> d = double(l) * std::pow(z, l - 1);
      grad->resize(2);
      // d/dx z^l = d, d/dy z^l = i d
      (*grad)[0] = norm * (use_sin ? d.imag() : d.real());
      (*grad)[1] = norm * (use_sin ? d.real() : -d.imag());
    }
    return norm * (use_sin ? zl.imag() : zl.real());
  }

  // n = 3: N_lM Re/Im[(x+iy)^M] Q_l^M(z, s), s = r^2.
  const int M = m / 2;
  const bool use_sin = (m > 1 && m % 2 == 1);
  double norm;
  if (M == 0)
    norm = std::sqrt((2 * l + 1) / (4.0 * pi));
  else
    norm = std::sqrt((2 * l + 1) / (2.0 * pi) *
                     std::exp(log_factorial(l - M) - log_factorial(l + M)));

  const double z = x[2];
  const double s = x.squaredNorm();
  // Q_M^M = (2M-1)!!, constant in z and s.
  double q_prev = 0.0, qz_prev = 0.0, qs_prev = 0.0;
  double q = 1.0, qz = 0.0, qs = 0.0;
  for (int k = 1; k <= M; ++k) q *= (2 * k - 1);
  for (int ll = M + 1; ll <= l; ++ll) {
    double qn, qzn, qsn;
    if (ll == M + 1) {
      qn = (2 * M + 1) * z * q;
      qzn = (2 * M + 1) * (q + z * qz);
      qsn = (2 * M + 1) * z * qs;
    } else {
      const double a = 2 * ll - 1, b = ll + M - 1, c = ll - M;
      qn = (a * z * q - b * s * q_prev) / c;
      qzn = (a * (q + z * qz) - b * s * qz_prev) / c;
      qsn = (a * z * qs - b * (q_prev + s * qs_prev)) / c;
    }
    q_prev = q; qz_prev = qz; qs_prev = qs;
    q = qn; qz = qzn; qs = qsn;
  }

  const std::complex<double> w(x[0], x[1]);
  const std::complex<double> wm = M == 0 ? std::complex<double>(1.0) : std::pow(w, M);
  const double A = use_sin ? wm.imag() : wm.real();
  if (grad) {
    grad->resize(3);
    double Ax = 0.0, Ay = 0.0;
    if (M > 0) {
      const std::complex<double> d = double(M) * (M == 1 ? std::complex<double>(1.0)
                                                          : std::pow(w, M - 1));
      Ax = use_sin ? d.imag() : d.real();
      Ay = use_sin ? d.real() : -d.imag();
    }
    (*grad)[0] = norm * (Ax * q + A * qs * 2.0 * x[0]);
    (*grad)[1] = norm * (Ay * q + A * qs * 2.0 * x[1]);
    (*grad)[2] = norm * A * (qz + qs * 2.0 * z);
  }
  return norm * A * q;
}

double real_spherical_harmonic(int n, int l, int m,
                               const Eigen::Ref<const Eigen::VectorXd>& dir) {
  check_index(n, l, m);
  if (dir.size() != n) throw DomainError("real_spherical_harmonic: dimension mismatch");
  if (std::fabs(dir.norm() - 1.0) > 1e-12)
    throw DomainError("real_spherical_harmonic: direction must be a unit vector");
  return solid_harmonic(n, l, m, dir);
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int points) {
  if (points < 1) throw DomainError("gauss_legendre: need at least one node");
  std::vector<double> nodes(points), weights(points);
  const double pi = std::numbers::pi;
  for (int i = 0; i < (points + 1) / 2; ++i) {
    double t = std::cos(pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= points; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = points * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::fabs(dt) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= points; ++k) {
      const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = points * (t * p1 - p0) / (t * t - 1.0);
    nodes[i] = -t;
    nodes[points - 1 - i] = t;
    weights[i] = weights[points - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return {nodes, weights};
}

}  // namespace wavetopo::specfun
