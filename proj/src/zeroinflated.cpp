#include "redstress/zeroinflated.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "redstress/errors.hpp"
#include "redstress/optim.hpp"
#include "redstress/specfun.hpp"

namespace redstress {

namespace {

constexpr double kDaysPerYear = 260.0;
constexpr double kOneClamp = 1e-10;  // observations at 1 become 1 - kOneClamp

}  // namespace

ZIModel make_zi(double p, SeverityDist severity) {
  if (!(p >= 0.0 && p <= 1.0)) fail(errc::parameter, "make_zi: p must lie in [0,1]");
  return ZIModel{p, severity};
}

ZIModel ZIFit::model() const {
  if (!severity) fail(errc::parameter, "ZIFit::model: severity was not fitted");
  return ZIModel{p, *severity};
}

double zi_cdf(const ZIModel& m, double x) {
  if (!(x >= 0.0 && x <= 1.0)) fail(errc::domain, "zi_cdf: x must lie in [0,1]");
  if (x == 0.0) return 1.0 - m.p;
  return 1.0 - m.p + m.p * cdf(m.severity, x);
}

ZIMoments zi_moments(const ZIModel& m) {
  ZIMoments out;
  if (m.p == 0.0) {
    out.higher_defined = false;
    return out;
  }
  const SevMoments s = moments(m.severity);
  const double p = m.p;
  const double mu = s.mean;
  const double var = s.variance;
  const double sd = std::sqrt(var);
  const double g1 = s.skewness;
  const double g2 = s.excess_kurtosis;
  const double q = 1.0 - p;

  out.mean = p * mu;
  out.variance = p * var + p * q * mu * mu;
  const double th1 = p * g1 * sd * sd * sd + 3.0 * p * q * var * mu +
                     p * q * (1.0 - 2.0 * p) * mu * mu * mu;
  const double th2 = (p * g2 + 3.0 * p * q) * var * var +
                     4.0 * p * q * g1 * sd * sd * sd * mu +
                     6.0 * p * q * (1.0 - 2.0 * p) * var * mu * mu +
                     p * q * (1.0 - 6.0 * p + 6.0 * p * p) * mu * mu * mu * mu;
  out.skewness = th1 / std::pow(out.variance, 1.5);
  out.excess_kurtosis = th2 / (out.variance * out.variance);
  return out;
}

double zi_quantile(const ZIModel& m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::domain, "zi_quantile: alpha must lie in (0,1)");
  if (m.p <= 1.0 - alpha) return 0.0;
  return quantile(m.severity, (alpha + m.p - 1.0) / m.p);
}

double zi_cvar(const ZIModel& m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::domain, "zi_cvar: alpha must lie in (0,1)");
  if (m.p <= 1.0 - alpha) {
    // The quantile vanishes below u = 1-p, and substituting out the remaining
    // integral gives exactly p E[severity] / (1-alpha).
    return m.p * moments(m.severity).mean / (1.0 - alpha);
  }
  double prev = 0.0;
  for (int n = 256; n <= 16384; n *= 2) {
    const double integral = sf::gauss_legendre_integrate(
        [&](double u) { return quantile(m.severity, (u + m.p - 1.0) / m.p); }, alpha, 1.0, n);
    const double est = integral / (1.0 - alpha);
    if (n > 256 && std::fabs(est - prev) < 1e-9) return est;
    prev = est;
  }
  fail(errc::numerical, "zi_cvar: quadrature did not converge");
}

double zi_stress(const ZIModel& m, double t_years) {
  if (!(t_years > 0.0)) fail(errc::domain, "zi_stress: horizon must be positive");
  const double t_days = kDaysPerYear * t_years;
  if (m.p * t_days <= 1.0) return 0.0;
  return quantile(m.severity, 1.0 - 1.0 / (m.p * t_days));
}

double implied_return_time(const ZIModel& m, double alpha) {
  if (!(m.p > 0.0)) fail(errc::parameter, "implied_return_time: requires p > 0");
  const double c = zi_cvar(m, alpha);
  if (c >= 1.0)
    fail(errc::unbounded_return_time, "implied_return_time: conditional value-at-risk is 1");
  const double g = cdf(m.severity, c);
  if (g >= 1.0)
    fail(errc::unbounded_return_time,
         "implied_return_time: severity cdf saturates at the conditional value-at-risk");
  return 1.0 / (m.p * (1.0 - g)) / kDaysPerYear;
}

namespace {

struct PositivePart {
  std::vector<double> y;
  int clamped = 0;
};

PositivePart positives(const RedemptionSample& sample) {
  PositivePart out;
  for (double v : sample.values)
    if (v > 0.0) {
      if (v >= 1.0) {
        v = 1.0 - kOneClamp;
        ++out.clamped;
      }
      out.y.push_back(v);
    }
  return out;
}

void mean_sd(const std::vector<double>& y, double& mu, double& sd) {
  mu = 0.0;
  for (double v : y) mu += v;
  mu /= y.size();
  double ss = 0.0;
  for (double v : y) ss += (v - mu) * (v - mu);
  sd = std::sqrt(ss / (y.size() - 1));
}

}  // namespace

ZIFit fit_mle(const RedemptionSample& sample) {
  if (sample.empty()) fail(errc::empty_sample, "fit_mle: sample is empty");
  ZIFit fit;
  fit.p = double(sample.n1) / sample.n();
  if (sample.n1 < 2) return fit;  // severity unfittable, frequency still valid

  PositivePart pos = positives(sample);
  fit.clamped = pos.clamped;
  const double n1 = double(pos.y.size());
  double s1 = 0.0, s2 = 0.0;  // mean log x, mean log(1-x)
  for (double v : pos.y) {
    s1 += std::log(v);
    s2 += std::log1p(-v);
  }
  s1 /= n1;
  s2 /= n1;

  // Mean log-likelihood of a beta severity and its gradient in
  // (log a, log b), which keeps both shapes positive.
  auto negll = [&](const std::vector<double>& t) {
    const double a = std::exp(t[0]), b = std::exp(t[1]);
    return -(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * s1 +
             (b - 1.0) * s2);
  };
  auto grad = [&](const std::vector<double>& t) {
    const double a = std::exp(t[0]), b = std::exp(t[1]);
    const double dab = sf::digamma(a + b);
    return std::vector<double>{-a * (dab - sf::digamma(a) + s1),
                               -b * (dab - sf::digamma(b) + s2)};
  };

  double a0 = 1.0, b0 = 1.0;
  double mu, sd;
  mean_sd(pos.y, mu, sd);
  if (sd > 0.0 && sd * sd < mu * (1.0 - mu)) {
    auto [am, bm] = beta_from_musigma(mu, sd);
    a0 = am;
    b0 = bm;
  }
  OptimResult res = minimize_bfgs(negll, grad, {std::log(a0), std::log(b0)});
  // The line search cannot resolve improvements below double noise, so a few
  // Newton steps on the concave likelihood finish the last digits.
  double a = std::exp(res.x[0]), b = std::exp(res.x[1]);
  int newton_its = 0;
  for (; newton_its < 50; ++newton_its) {
    const double ga = sf::digamma(a + b) - sf::digamma(a) + s1;
    const double gb = sf::digamma(a + b) - sf::digamma(b) + s2;
    if (std::max(std::fabs(a * ga), std::fabs(b * gb)) < 1e-10) break;
    const double tab = sf::trigamma(a + b);
    const double haa = tab - sf::trigamma(a);
    const double hbb = tab - sf::trigamma(b);
    const double det = haa * hbb - tab * tab;
    if (!(std::fabs(det) > 1e-300)) break;
    double da = -(hbb * ga - tab * gb) / det;
    double db = -(haa * gb - tab * ga) / det;
    const double scale = std::max({1.0, std::fabs(da) / (0.5 * a), std::fabs(db) / (0.5 * b)});
    a += da / scale;
    b += db / scale;
  }
  fit.severity = make_severity(SevFamily::Beta, a, b);
  fit.loglik =
      n1 * (std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * s1 + (b - 1.0) * s2);
  fit.iterations = res.iterations + newton_its;
  const double ga = sf::digamma(a + b) - sf::digamma(a) + s1;
  const double gb = sf::digamma(a + b) - sf::digamma(b) + s2;
  fit.converged = std::max(std::fabs(a * ga), std::fabs(b * gb)) < 1e-8;
  return fit;
}

ZIFit fit_mm(const RedemptionSample& sample) {
  if (sample.empty()) fail(errc::empty_sample, "fit_mm: sample is empty");
  ZIFit fit;
  fit.p = double(sample.n1) / sample.n();
  if (sample.n1 < 2) return fit;

  PositivePart pos = positives(sample);
  fit.clamped = pos.clamped;
  double mu, sd;
  mean_sd(pos.y, mu, sd);
  const auto [lo, hi] = std::minmax_element(pos.y.begin(), pos.y.end());
  if (*lo == *hi) sd = 0.0;  // cancellation can leave an O(eps) residue
  if (!(sd > 0.0) || !(sd * sd < mu * (1.0 - mu)))
    fail(errc::infeasible_moments,
         "fit_mm: positive-part moments mu=" + std::to_string(mu) + " sigma=" +
             std::to_string(sd) + " need 0 < sigma^2 < mu(1-mu)");
  auto [a, b] = beta_from_musigma(mu, sd);
  fit.severity = make_severity(SevFamily::Beta, a, b);
  fit.loglik = std::numeric_limits<double>::quiet_NaN();
  return fit;
}

}  // namespace redstress
