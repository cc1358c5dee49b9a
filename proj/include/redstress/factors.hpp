#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "redstress/flowdata.hpp"

namespace redstress {

struct RegressionResult {
  std::vector<double> coefficients;  // intercept first when included
  std::vector<double> std_errors;
  double centered_r2 = 0.0;  // 1 - SSR / sum((y - mean)^2), clamped to [0,1]
  double residual_variance = 0.0;
  std::size_t n_obs = 0;
};

// Least squares via the normal equations with partial pivoting.
RegressionResult ols(const std::vector<double>& y,
                     const std::vector<std::vector<double>>& columns,
                     bool include_intercept = true);

// Rate explained by frequency alone, severity alone, and both. Uses the days
// with a defined severity.
struct DecompositionFits {
  RegressionResult frequency_only;
  RegressionResult severity_only;
  RegressionResult joint;
};
DecompositionFits decomposition_fits(const CategorySeries& s);

struct DatedValue {
  std::string date;
  double value;
};

// CSV schema: date,value with a header line.
std::vector<DatedValue> read_series_csv(std::istream& in);
std::vector<DatedValue> read_series_csv_file(const std::string& path);

struct FactorSeries {
  std::vector<std::string> dates;
  std::vector<double> bond_return;   // h-day total return
  std::vector<double> stock_return;  // h-day total return
  std::vector<double> vol_change;    // h-day volatility index difference
  std::size_t horizon_days = 1;
};

// Joins the three level series on common dates (sorted), then computes the
// h-day total returns and the volatility difference.
FactorSeries build_factor_series(const std::vector<DatedValue>& bond_levels,
                                 const std::vector<DatedValue>& stock_levels,
                                 const std::vector<DatedValue>& vix_levels,
                                 std::size_t horizon_days);

// Rate on (bond, stock, vol), joined on dates.
RegressionResult macro_fit(const CategorySeries& s, const FactorSeries& f);

struct FlowPerformanceFit {
  RegressionResult market;  // full-sample market model: {alpha, beta}
  // Stage 2 coefficients: intercept, then per lag h the triple
  // (rate lag h, alpha lag h, fund return lag h).
  RegressionResult flow;
  std::vector<double> alpha;  // rolling intercepts, NaN before the first window
  bool relative_performance_effect = false;  // lag-1 alpha slope negative, |t| > 2
  bool absolute_performance_effect = false;  // lag-1 return slope negative, |t| > 2
};

// Stage 1: rolling regression of the fund return on the market return
// estimates the relative performance alpha(t). Stage 2: redemption rate on
// lagged rate, alpha, and fund return.
FlowPerformanceFit flow_performance_fit(const std::vector<double>& rates,
                                        const std::vector<double>& fund_returns,
                                        const std::vector<double>& market_returns,
                                        std::size_t lags, std::size_t window = 60);

// mean(rate | vix >= threshold) / mean(rate) - 1, joined on dates.
double vix_conditional(const CategorySeries& s, const std::vector<DatedValue>& vix,
                       double threshold = 30.0);

struct AutocorrResult {
  std::vector<double> rho;      // orders 1..max_order
  std::vector<double> p_value;  // two-sided asymptotic normal, sqrt(n) scaling
  double max_rho = 0.0;         // signed max over orders
  std::size_t max_order = 1;
  bool significant = false;  // p-value of the max order below 5%
};

// Sample autocorrelations with lagged products averaged over their overlap
// count, so a deterministic alternating series scores exactly -1.
AutocorrResult autocorrelation(const std::vector<double>& series,
                               std::size_t max_order = 2);

}  // namespace redstress
