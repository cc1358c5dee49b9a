#include "redstress/severity.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "redstress/errors.hpp"
#include "redstress/specfun.hpp"

namespace redstress {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logit(double x) { return std::log(x / (1.0 - x)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Normalizer G(1) of the untruncated base law.
double trunc_mass(const SeverityDist& d) {
  if (d.family == SevFamily::TruncGamma) return sf::igamma_lower(d.a, 1.0 / d.b);
  // Log-logistic: F(x) = 1 / (1 + (x/a)^-b).
  return 1.0 / (1.0 + std::pow(1.0 / d.a, -d.b));
}

}  // namespace

SeverityDist make_severity(SevFamily family, double a, double b) {
  if (!(b > 0.0)) fail(errc::parameter, "severity: b must be positive");
  if (family != SevFamily::LogitNormal && !(a > 0.0))
    fail(errc::parameter, "severity: a must be positive");
  if (!std::isfinite(a) || !std::isfinite(b))
    fail(errc::parameter, "severity: parameters must be finite");
  return SeverityDist{family, a, b};
}

double cdf(const SeverityDist& d, double x) {
  if (x < 0.0 || x > 1.0) fail(errc::domain, "severity cdf: x must lie in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  switch (d.family) {
    case SevFamily::Beta:
      return sf::ibeta(d.a, d.b, x);
    case SevFamily::Kumaraswamy:
      return 1.0 - std::pow(1.0 - std::pow(x, d.a), d.b);
    case SevFamily::LogitNormal:
      return sf::norm_cdf((logit(x) - d.a) / d.b);
    case SevFamily::TruncGamma:
      return sf::igamma_lower(d.a, x / d.b) / trunc_mass(d);
    case SevFamily::TruncLogLogistic: {
      const double F = 1.0 / (1.0 + std::pow(x / d.a, -d.b));
      return F / trunc_mass(d);
    }
  }
  fail(errc::parameter, "severity cdf: unknown family");
}

double pdf(const SeverityDist& d, double x) {
  if (x < 0.0 || x > 1.0) fail(errc::domain, "severity pdf: x must lie in [0,1]");
  switch (d.family) {
    case SevFamily::Beta: {
      if (x == 0.0) return d.a < 1.0 ? kInf : (d.a == 1.0 ? std::exp(-sf::lbeta(d.a, d.b)) : 0.0);
      if (x == 1.0) return d.b < 1.0 ? kInf : (d.b == 1.0 ? std::exp(-sf::lbeta(d.a, d.b)) : 0.0);
      return std::exp((d.a - 1.0) * std::log(x) + (d.b - 1.0) * std::log1p(-x) -
                      sf::lbeta(d.a, d.b));
    }
    case SevFamily::Kumaraswamy: {
      if (x == 0.0) return d.a < 1.0 ? kInf : (d.a == 1.0 ? d.b : 0.0);
      if (x == 1.0) return d.b < 1.0 ? kInf : (d.b == 1.0 ? d.a : 0.0);
      return d.a * d.b * std::pow(x, d.a - 1.0) * std::pow(1.0 - std::pow(x, d.a), d.b - 1.0);
    }
    case SevFamily::LogitNormal: {
      if (x == 0.0 || x == 1.0) return 0.0;
      const double z = (logit(x) - d.a) / d.b;
      return sf::norm_pdf(z) / (d.b * x * (1.0 - x));
    }
    case SevFamily::TruncGamma: {
      if (x == 0.0) return d.a < 1.0 ? kInf : 0.0;
      const double lg = (d.a - 1.0) * std::log(x) - x / d.b - std::lgamma(d.a) -
                        d.a * std::log(d.b);
      return std::exp(lg) / trunc_mass(d);
    }
    case SevFamily::TruncLogLogistic: {
      if (x == 0.0) return d.b < 1.0 ? kInf : (d.b == 1.0 ? 1.0 / (d.a * trunc_mass(d)) : 0.0);
      const double t = std::pow(x / d.a, d.b);
      const double f = (d.b / x) * t / ((1.0 + t) * (1.0 + t));
      return f / trunc_mass(d);
    }
  }
  fail(errc::parameter, "severity pdf: unknown family");
}

double quantile(const SeverityDist& d, double u) {
  if (u < 0.0 || u > 1.0) fail(errc::domain, "severity quantile: u must lie in [0,1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  switch (d.family) {
    case SevFamily::Beta:
      return sf::ibeta_inv(d.a, d.b, u);
    case SevFamily::Kumaraswamy:
      return std::pow(1.0 - std::pow(1.0 - u, 1.0 / d.b), 1.0 / d.a);
    case SevFamily::LogitNormal:
      return sigmoid(d.a + d.b * sf::norm_ppf(u));
    case SevFamily::TruncLogLogistic: {
      const double q = u * trunc_mass(d);  // quantile of the base law
      return d.a * std::pow(q / (1.0 - q), 1.0 / d.b);
    }
    case SevFamily::TruncGamma: {
      auto f = [&](double x) { return cdf(d, x) - u; };
      auto df = [&](double x) { return pdf(d, x); };
      return sf::bracketed_newton(f, df, 0.0, 1.0, 1e-12, 200);
    }
  }
  fail(errc::parameter, "severity quantile: unknown family");
}

std::array<double, 4> raw_moments(const SeverityDist& d) {
  if (d.family == SevFamily::Beta) {
    std::array<double, 4> m;
    double acc = 1.0;
    for (int i = 0; i < 4; ++i) {
      acc *= (d.a + i) / (d.a + d.b + i);
      m[i] = acc;
    }
    return m;
  }
  if (d.family == SevFamily::Kumaraswamy) {
    // E[X^m] = b B(1 + m/a, b).
    std::array<double, 4> m;
    for (int i = 1; i <= 4; ++i)
      m[i - 1] = d.b * std::exp(sf::lbeta(1.0 + i / d.a, d.b));
    return m;
  }
  // E[X^m] = integral of Q(u)^m over [0,1]; the integrand is bounded even
  // when the density diverges at an endpoint. Node doubling to 1e-10.
  std::array<double, 4> prev{0, 0, 0, 0};
  for (int n = 64; n <= 4096; n *= 2) {
    const auto& rule = sf::gauss_legendre(n);
    std::array<double, 4> cur{0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
      const double u = 0.5 + 0.5 * rule.nodes[i];
      const double q = quantile(d, u);
      double p = 1.0;
      for (int k = 0; k < 4; ++k) {
        p *= q;
        cur[k] += 0.5 * rule.weights[i] * p;
      }
    }
    double diff = 0.0;
    for (int k = 0; k < 4; ++k) diff = std::max(diff, std::fabs(cur[k] - prev[k]));
    if (n > 64 && diff < 1e-10) return cur;
    prev = cur;
  }
  return prev;
}

SevMoments moments(const SeverityDist& d) {
  if (d.family == SevFamily::Beta) {
    const double a = d.a, b = d.b;
    const double s = a + b;
    SevMoments m;
    m.mean = a / s;
    m.variance = a * b / (s * s * (s + 1.0));
    m.skewness = 2.0 * (b - a) * std::sqrt(s + 1.0) / ((s + 2.0) * std::sqrt(a * b));
    m.excess_kurtosis =
        6.0 * ((a - b) * (a - b) * (s + 1.0) - a * b * (s + 2.0)) /
        (a * b * (s + 2.0) * (s + 3.0));
    return m;
  }
  const auto r = raw_moments(d);
  SevMoments m;
  m.mean = r[0];
  m.variance = r[1] - r[0] * r[0];
  const double c3 = r[2] - 3.0 * r[0] * r[1] + 2.0 * r[0] * r[0] * r[0];
  const double c4 = r[3] - 4.0 * r[0] * r[2] + 6.0 * r[0] * r[0] * r[1] -
                    3.0 * r[0] * r[0] * r[0] * r[0];
  m.skewness = c3 / std::pow(m.variance, 1.5);
  m.excess_kurtosis = c4 / (m.variance * m.variance) - 3.0;
  return m;
}

std::pair<double, double> beta_from_musigma(double mu, double sigma) {
  if (!(mu > 0.0 && mu < 1.0)) fail(errc::domain, "beta_from_musigma: mu must lie in (0,1)");
  if (!(sigma > 0.0))
    fail(errc::infeasible_moments, "beta_from_musigma: sigma must be positive");
  const double bound = mu * (1.0 - mu);
  if (!(sigma * sigma < bound))
    fail(errc::infeasible_moments,
         "beta_from_musigma: need sigma^2 < mu(1-mu) = " + std::to_string(bound));
  const double a = mu * mu * (1.0 - mu) / (sigma * sigma) - mu;
  const double b = a * (1.0 - mu) / mu;
  return {a, b};
}

}  // namespace redstress
