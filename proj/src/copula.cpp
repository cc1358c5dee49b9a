#include "redstress/copula.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "redstress/errors.hpp"
#include "redstress/specfun.hpp"

namespace redstress {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sine_map(double theta) { return std::sin(kPi * theta / (2.0 * theta + 4.0)); }

// Integral of g against the standard normal density. Gauss-Legendre on a
// truncated interval with node doubling; Gauss-Hermite converges too slowly
// here because normal-cdf integrands grow like exp(z^2/2) off the real axis.
double factor_integral(const std::function<double(double)>& g) {
  auto weighted = [&](double s) { return sf::norm_pdf(s) * g(s); };
  double prev = sf::gauss_legendre_integrate(weighted, -8.5, 8.5, 128);
  for (int n = 256; n <= 8192; n *= 2) {
    const double cur = sf::gauss_legendre_integrate(weighted, -8.5, 8.5, n);
    if (std::fabs(cur - prev) < 1e-11) return cur;
    prev = cur;
  }
  fail(errc::numerical, "normal copula quadrature did not stabilize");
}

double clayton_diagonal(double u, double n, double theta) {
  // (n u^-t - n + 1)^(-1/t) in logs: exp(ln u - log1p((n-1)(1-u^t))/t).
  const double x = (n - 1.0) * (-std::expm1(theta * std::log(u)));
  return std::exp(std::log(u) - std::log1p(x) / theta);
}

double clayton2(double u, double v, double theta) {
  if (u > v) std::swap(u, v);
  const double a = -theta * std::log(u);
  const double b = -theta * std::log(v);
  // u^-t + v^-t - 1 = e^a (1 + e^(b-a) - e^-a), with a >= b.
  return u * std::exp(-std::log1p(std::exp(b - a) - std::exp(-a)) / theta);
}

double normal_diagonal(double u, double n, double theta) {
  const double h = sf::norm_ppf(u);
  const double scale = std::sqrt(theta);
  const double residual = std::sqrt(1.0 - theta);
  return factor_integral([&](double s) {
    return std::pow(sf::norm_cdf((h - scale * s) / residual), n);
  });
}

// Bivariate normal copula via the Drezner-Wesolowsky correction integral,
// substituting r = sin(phi) so the integrand stays smooth up to theta = 1.
double normal2(double u, double v, double theta) {
  const double h = sf::norm_ppf(u);
  const double k = sf::norm_ppf(v);
  const double hk2 = 0.5 * (h * h + k * k);
  auto g = [&](double phi) {
    const double s = std::sin(phi);
    const double e = (hk2 - h * k * s) / (1.0 - s * s);
    return std::isfinite(e) ? std::exp(-e) : 0.0;
  };
  const double upper = std::asin(theta);
  double prev = sf::gauss_legendre_integrate(g, 0.0, upper, 64);
  for (int n = 128; n <= 2048; n *= 2) {
    const double cur = sf::gauss_legendre_integrate(g, 0.0, upper, n);
    if (std::fabs(cur - prev) < 2e-14) return u * v + cur / (2.0 * kPi);
    prev = cur;
  }
  fail(errc::numerical, "normal copula quadrature did not stabilize");
}

}  // namespace

CopulaSpec make_copula(CopFamily family, double theta) {
  if (!std::isfinite(theta)) fail(errc::parameter, "copula theta must be finite");
  switch (family) {
    case CopFamily::Product:
    case CopFamily::UpperFrechet:
      return {family, 0.0};
    case CopFamily::Clayton:
      if (theta < 0.0)
        fail(errc::unsupported_range, "clayton theta must be nonnegative");
      return {family, theta};
    case CopFamily::Normal:
      if (theta < 0.0 || theta > 1.0)
        fail(errc::unsupported_range, "normal theta must lie in [0,1]");
      return {family, theta};
  }
  fail(errc::parameter, "unknown copula family");
}

double diagonal(const CopulaSpec& c, double u, double n) {
  if (!(u > 0.0 && u <= 1.0)) fail(errc::domain, "diagonal: u must lie in (0,1]");
  if (!(n >= 1.0) || !std::isfinite(n))
    fail(errc::parameter, "diagonal: n must be a finite count >= 1");
  if (u == 1.0) return 1.0;
  double v = 0.0;
  switch (c.family) {
    case CopFamily::Product:
      v = std::pow(u, n);
      break;
    case CopFamily::UpperFrechet:
      v = u;
      break;
    case CopFamily::Clayton:
      v = c.theta == 0.0 ? std::pow(u, n) : clayton_diagonal(u, n, c.theta);
      break;
    case CopFamily::Normal:
      if (c.theta == 0.0)
        v = std::pow(u, n);
      else if (c.theta == 1.0)
        v = u;
      else
        v = normal_diagonal(u, n, c.theta);
      break;
  }
  return std::clamp(v, std::pow(u, n), u);
}

double copula2(const CopulaSpec& c, double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    fail(errc::domain, "copula2: arguments must lie in [0,1]");
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  double w = 0.0;
  switch (c.family) {
    case CopFamily::Product:
      w = u * v;
      break;
    case CopFamily::UpperFrechet:
      w = std::min(u, v);
      break;
    case CopFamily::Clayton:
      w = c.theta == 0.0 ? u * v : clayton2(u, v, c.theta);
      break;
    case CopFamily::Normal:
      if (c.theta == 0.0)
        w = u * v;
      else if (c.theta == 1.0)
        w = std::min(u, v);
      else
        w = normal2(u, v, c.theta);
      break;
  }
  return std::clamp(w, std::max(0.0, u + v - 1.0), std::min(u, v));
}

double survival2(const CopulaSpec& c, double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    fail(errc::domain, "survival2: arguments must lie in [0,1]");
  const double w = u + v - 1.0 + copula2(c, 1.0 - u, 1.0 - v);
  return std::clamp(w, std::max(0.0, u + v - 1.0), std::min(u, v));
}

double survival_diag2(const CopulaSpec& c, double u) { return survival2(c, u, u); }

CorrelationViews correlation_views(const CopulaSpec& c) {
  switch (c.family) {
    case CopFamily::Product:
      return {0.0, 0.0, 0.0};
    case CopFamily::UpperFrechet:
      return {1.0, 1.0, 1.0};
    case CopFamily::Clayton: {
      const double rho = sine_map(c.theta);
      return {c.theta / (c.theta + 2.0), 6.0 / kPi * std::asin(0.5 * rho), rho};
    }
    case CopFamily::Normal:
      return {2.0 / kPi * std::asin(c.theta), 6.0 / kPi * std::asin(0.5 * c.theta),
              c.theta};
  }
  fail(errc::parameter, "unknown copula family");
}

CopulaSpec theta_from_pearson(CopFamily family, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    fail(errc::domain, "theta_from_pearson: rho must lie in [0,1]");
  if (family == CopFamily::Normal) return make_copula(CopFamily::Normal, rho);
  if (family != CopFamily::Clayton)
    fail(errc::parameter, "theta_from_pearson: family must be Clayton or Normal");
  if (rho == 0.0) return make_copula(CopFamily::Clayton, 0.0);
  if (rho == 1.0) return make_copula(CopFamily::UpperFrechet);
  const double s = std::asin(rho);
  return make_copula(CopFamily::Clayton, 4.0 * s / (kPi - 2.0 * s));
}

FreqMoments freq_moments(double p_tilde, double h, const CopulaSpec& c) {
  if (!(p_tilde >= 0.0 && p_tilde <= 1.0))
    fail(errc::parameter, "freq_moments: p_tilde must lie in [0,1]");
  if (!(h > 0.0 && h <= 1.0)) fail(errc::parameter, "freq_moments: h must lie in (0,1]");
  const double joint = survival_diag2(c, p_tilde);
  const double var = p_tilde * (h - p_tilde) + joint * (1.0 - h);
  return {p_tilde, std::max(0.0, var)};
}

ThetaCalibration calibrate_theta(double mean_freq, double std_freq, double h,
                                 CopFamily family) {
  if (!(mean_freq > 0.0 && mean_freq < 1.0))
    fail(errc::parameter, "calibrate_theta: mean frequency must lie in (0,1)");
  if (!(std_freq >= 0.0)) fail(errc::parameter, "calibrate_theta: negative std");
  if (!(h > 0.0 && h < 1.0)) fail(errc::parameter, "calibrate_theta: h must lie in (0,1)");
  if (family != CopFamily::Clayton && family != CopFamily::Normal)
    fail(errc::parameter, "calibrate_theta: family must be Clayton or Normal");

  const double target =
      (std_freq * std_freq - mean_freq * (h - mean_freq)) / (1.0 - h);
  const double lo_bound = mean_freq * mean_freq;
  const double hi_bound = mean_freq;
  if (target < lo_bound - 1e-12)
    fail(errc::infeasible_correlation,
         "calibrate_theta: implied joint probability " + std::to_string(target) +
             " falls below the independence bound " + std::to_string(lo_bound));
  if (target > hi_bound + 1e-12)
    fail(errc::infeasible_correlation,
         "calibrate_theta: implied joint probability " + std::to_string(target) +
             " exceeds the comonotone bound " + std::to_string(hi_bound));

  if (target <= lo_bound)
    return {make_copula(family, 0.0), 0.0};
  if (target >= hi_bound - 1e-12) {
    if (family == CopFamily::Normal)
      return {make_copula(CopFamily::Normal, 1.0), sine_map(1.0)};
    return {make_copula(CopFamily::UpperFrechet), 1.0};
  }

  auto value = [&](double theta) {
    return survival_diag2(make_copula(family, theta), mean_freq);
  };

  double lo = 0.0, hi;
  if (family == CopFamily::Normal) {
    hi = 1.0;
  } else {
    hi = 1.0;
    while (value(hi) < target) {
      hi *= 2.0;
      if (hi > 1e6) return {make_copula(CopFamily::UpperFrechet), 1.0};
    }
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12 * (1.0 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (value(mid) < target ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  return {make_copula(family, theta), sine_map(theta)};
}

double cross_correlation(double p1, double p2, const CopulaSpec& between,
                         const CopulaSpec& intra1, double h1, const CopulaSpec& intra2,
                         double h2) {
  const double v1 = freq_moments(p1, h1, intra1).variance;
  const double v2 = freq_moments(p2, h2, intra2).variance;
  if (!(v1 > 0.0) || !(v2 > 0.0))
    fail(errc::undefined_correlation,
         "cross_correlation: a frequency has zero variance");
  if (between.family == CopFamily::Product) return 0.0;
  const double cov = survival2(between, p1, p2) - p1 * p2;
  return std::clamp(cov / std::sqrt(v1 * v2), -1.0, 1.0);
}

CMStats cm_stats(const IMModel& m, const CopulaSpec& c) {
  const double n = m.structure.n();
  if (!std::isfinite(n))
    fail(errc::parameter, "cm_stats: the liability structure needs a finite count");
  const double p = m.p_tilde;
  const double h = m.structure.herfindahl();
  CMStats out;
  out.prob_no_redemption = p == 1.0 ? 0.0 : diagonal(c, 1.0 - p, n);
  out.mean = p * m.mu_tilde;
  const double joint = survival_diag2(c, p);
  const double mu2 = m.mu_tilde * m.mu_tilde;
  const double var = (p * m.sigma_tilde * m.sigma_tilde + (p - joint) * mu2) * h +
                     (joint - p * p) * mu2;
  out.variance = std::max(0.0, var);
  return out;
}

}  // namespace redstress
