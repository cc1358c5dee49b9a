#include "redstress/riskmeasures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "redstress/errors.hpp"
#include "redstress/specfun.hpp"

namespace redstress {

MeasureReport empirical_measures(const std::vector<double>& values, double c, double alpha,
                                 std::size_t reliability_floor) {
  if (values.empty()) fail(errc::empty_sample, "empirical_measures: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::domain, "empirical_measures: alpha in (0,1)");
  const std::size_t n = values.size();

  MeasureReport r;
  r.n = n;
  r.low_confidence = n < reliability_floor;

  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  r.sd_measure = r.mean + c * sd;

  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  std::size_t idx = static_cast<std::size_t>(std::floor(alpha * n)) + 1;  // 1-based
  if (idx > n) idx = n;
  r.var = sorted[idx - 1];

  double tail_sum = 0.0;
  std::size_t tail_n = 0;
  for (double v : sorted)
    if (v >= r.var) {
      tail_sum += v;
      ++tail_n;
    }
  r.cvar = tail_sum / tail_n;

  if (r.var > 0.0)
    r.ratio = r.cvar / r.var;
  else
    r.ratio = r.cvar > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return r;
}

MeasureReport empirical_measures(const RedemptionSample& sample, double c, double alpha,
                                 std::size_t reliability_floor) {
  return empirical_measures(sample.values, c, alpha, reliability_floor);
}

double gaussian_ratio(double alpha) {
  if (!(alpha > 0.5 && alpha < 1.0))
    fail(errc::domain, "gaussian_ratio: alpha must lie in (0.5, 1)");
  const double z = sf::norm_ppf(alpha);
  return sf::norm_pdf(z) / ((1.0 - alpha) * z);
}

double x_statistic(const std::vector<double>& per_fund_maxima) {
  if (per_fund_maxima.empty()) fail(errc::empty_sample, "x_statistic: empty input");
  return *std::max_element(per_fund_maxima.begin(), per_fund_maxima.end());
}

double x_granularity(double x1, double n) {
  if (x1 < 0.0 || x1 > 1.0) fail(errc::domain, "x_granularity: x1 must lie in [0,1]");
  if (!(n >= 1.0)) fail(errc::domain, "x_granularity: n must be >= 1");
  return 1.0 - std::pow(1.0 - x1, n);
}

double max_vs_sum_ratio(double p, double n) {
  if (!(p > 0.0 && p <= 1.0)) fail(errc::domain, "max_vs_sum_ratio: p must lie in (0,1]");
  if (!(n >= 1.0)) fail(errc::domain, "max_vs_sum_ratio: n must be >= 1");
  return (1.0 - std::pow(1.0 - p, n)) / p;
}

ShockMatrix coherency_shocks(const std::vector<double>& investor_anchors,
                             const std::vector<double>& fund_anchors,
                             const std::vector<double>& fund_multipliers,
                             const std::vector<double>& investor_multipliers,
                             CoherencyRule rule) {
  if (fund_anchors.size() != fund_multipliers.size() ||
      investor_anchors.size() != investor_multipliers.size())
    fail(errc::domain, "coherency_shocks: anchor/multiplier size mismatch");
  for (double v : investor_anchors)
    if (v < 0.0) fail(errc::domain, "coherency_shocks: negative anchor");
  for (double v : fund_anchors)
    if (v < 0.0) fail(errc::domain, "coherency_shocks: negative anchor");
  for (double v : fund_multipliers)
    if (v < 0.0) fail(errc::domain, "coherency_shocks: negative multiplier");
  for (double v : investor_multipliers)
    if (v < 0.0) fail(errc::domain, "coherency_shocks: negative multiplier");

  const std::size_t nj = fund_anchors.size();
  const std::size_t nk = investor_anchors.size();
  ShockMatrix m;
  m.shocks.assign(nj, std::vector<double>(nk, 0.0));
  for (std::size_t j = 0; j < nj; ++j)
    for (std::size_t k = 0; k < nk; ++k) {
      double s;
      switch (rule) {
        case CoherencyRule::C1: s = fund_multipliers[j] * investor_anchors[k]; break;
        case CoherencyRule::C2: s = investor_multipliers[k] * fund_anchors[j]; break;
        default:
          s = 0.5 * (fund_multipliers[j] * investor_anchors[k] +
                     investor_multipliers[k] * fund_anchors[j]);
      }
      if (s > 1.0) {
        s = 1.0;
        ++m.clipped;
      }
      m.shocks[j][k] = s;
    }
  return m;
}

}  // namespace redstress
