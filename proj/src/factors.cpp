#include "redstress/factors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "redstress/errors.hpp"
#include "redstress/specfun.hpp"

namespace redstress {

namespace {

// Solves G x = b for each right-hand side by Gauss-Jordan with partial
// pivoting, returning G^{-1}. G is the Gram matrix of the design, so a pivot
// collapsing below tol * max_diag flags a rank-deficient design.
std::vector<std::vector<double>> invert_gram(std::vector<std::vector<double>> g) {
  const std::size_t k = g.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) scale = std::max(scale, std::fabs(g[i][i]));
  if (!(scale > 0.0)) fail(errc::singular_design, "ols: design has no variation");
  std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::fabs(g[r][col]) > std::fabs(g[piv][col])) piv = r;
    if (std::fabs(g[piv][col]) < 1e-12 * scale)
      fail(errc::singular_design, "ols: rank-deficient design");
    std::swap(g[piv], g[col]);
    std::swap(inv[piv], inv[col]);
    const double d = g[col][col];
    for (std::size_t j = 0; j < k; ++j) {
      g[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = g[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) {
        g[r][j] -= f * g[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) fail(errc::domain, std::string(what) + " contains a non-finite value");
}

}  // namespace

RegressionResult ols(const std::vector<double>& y,
                     const std::vector<std::vector<double>>& columns, bool include_intercept) {
  const std::size_t n = y.size();
  for (const auto& c : columns)
    if (c.size() != n) fail(errc::parameter, "ols: column length does not match y");
  const std::size_t k = columns.size() + (include_intercept ? 1 : 0);
  if (k == 0) fail(errc::parameter, "ols: empty design");
  if (n < k + 2) fail(errc::sample_size, "ols: needs more observations than coefficients plus one");
  require_finite(y, "ols: y");
  for (const auto& c : columns) require_finite(c, "ols: design");

  auto design_at = [&](std::size_t row, std::size_t j) {
    if (include_intercept) return j == 0 ? 1.0 : columns[j - 1][row];
    return columns[j][row];
  };
  std::vector<std::vector<double>> gram(k, std::vector<double>(k, 0.0));
  std::vector<double> rhs(k, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      const double xi = design_at(t, i);
      rhs[i] += xi * y[t];
      for (std::size_t j = i; j < k; ++j) gram[i][j] += xi * design_at(t, j);
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j) gram[i][j] = gram[j][i];

  const auto inv = invert_gram(gram);
  RegressionResult r;
  r.coefficients.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) r.coefficients[i] += inv[i][j] * rhs[j];

  double ssr = 0.0;
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double tss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double fit = 0.0;
    for (std::size_t j = 0; j < k; ++j) fit += r.coefficients[j] * design_at(t, j);
    const double e = y[t] - fit;
    ssr += e * e;
    tss += (y[t] - ybar) * (y[t] - ybar);
  }
  r.n_obs = n;
  r.residual_variance = ssr / static_cast<double>(n - k);
  r.centered_r2 = tss > 0.0 ? std::clamp(1.0 - ssr / tss, 0.0, 1.0) : 0.0;
  r.std_errors.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    r.std_errors[i] = std::sqrt(std::max(0.0, r.residual_variance * inv[i][i]));
  return r;
}

DecompositionFits decomposition_fits(const CategorySeries& s) {
  std::vector<double> rate, freq, sev;
  for (std::size_t t = 0; t < s.dates.size(); ++t) {
    if (!s.severity_defined(t)) continue;
    rate.push_back(s.rate[t]);
    freq.push_back(s.frequency[t]);
    sev.push_back(s.severity[t]);
  }
  if (rate.size() < 30)
    fail(errc::sample_size, "decomposition_fits: fewer than 30 days with a defined severity");
  DecompositionFits out;
  out.frequency_only = ols(rate, {freq});
  out.severity_only = ols(rate, {sev});
  out.joint = ols(rate, {freq, sev});
  return out;
}

namespace {

bool parse_value(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

std::map<std::string, double> to_map(const std::vector<DatedValue>& v, const char* what) {
  std::map<std::string, double> m;
  for (const auto& d : v)
    if (!m.emplace(d.date, d.value).second)
      fail(errc::ingest, std::string(what) + ": duplicate date " + d.date);
  return m;
}

}  // namespace

std::vector<DatedValue> read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(errc::ingest, "series csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "date,value") fail(errc::ingest, "series csv: header must be exactly 'date,value'");
  std::vector<DatedValue> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      fail(errc::ingest, "series csv: expected 2 fields at line " + std::to_string(lineno));
    DatedValue d;
    d.date = line.substr(0, comma);
    if (!parse_value(line.substr(comma + 1), d.value))
      fail(errc::ingest, "series csv: unparseable value at line " + std::to_string(lineno));
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DatedValue> read_series_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::ingest, "series csv: cannot open " + path);
  return read_series_csv(in);
}

FactorSeries build_factor_series(const std::vector<DatedValue>& bond_levels,
                                 const std::vector<DatedValue>& stock_levels,
                                 const std::vector<DatedValue>& vix_levels,
                                 std::size_t horizon_days) {
  if (horizon_days < 1) fail(errc::parameter, "build_factor_series: horizon_days must be >= 1");
  const auto bond = to_map(bond_levels, "bond series");
  const auto stock = to_map(stock_levels, "stock series");
  const auto vix = to_map(vix_levels, "volatility series");
  std::vector<std::string> dates;
  for (const auto& [date, value] : bond) {
    (void)value;
    if (stock.count(date) && vix.count(date)) dates.push_back(date);
  }
  if (dates.size() <= horizon_days)
    fail(errc::sample_size, "build_factor_series: not enough common dates for the horizon");
  for (const auto& d : dates) {
    if (!(bond.at(d) > 0.0)) fail(errc::domain, "build_factor_series: bond level must be positive");
    if (!(stock.at(d) > 0.0))
      fail(errc::domain, "build_factor_series: stock level must be positive");
  }
  FactorSeries f;
  f.horizon_days = horizon_days;
  for (std::size_t t = horizon_days; t < dates.size(); ++t) {
    const auto& cur = dates[t];
    const auto& prev = dates[t - horizon_days];
    f.dates.push_back(cur);
    f.bond_return.push_back(bond.at(cur) / bond.at(prev) - 1.0);
    f.stock_return.push_back(stock.at(cur) / stock.at(prev) - 1.0);
    f.vol_change.push_back(vix.at(cur) - vix.at(prev));
  }
  return f;
}

RegressionResult macro_fit(const CategorySeries& s, const FactorSeries& f) {
  std::map<std::string, std::size_t> frow;
  for (std::size_t i = 0; i < f.dates.size(); ++i)
    if (!frow.emplace(f.dates[i], i).second)
      fail(errc::ingest, "macro_fit: duplicate factor date " + f.dates[i]);
  std::vector<double> rate, bond, stock, vol;
  for (std::size_t t = 0; t < s.dates.size(); ++t) {
    const auto it = frow.find(s.dates[t]);
    if (it == frow.end()) continue;
    rate.push_back(s.rate[t]);
    bond.push_back(f.bond_return[it->second]);
    stock.push_back(f.stock_return[it->second]);
    vol.push_back(f.vol_change[it->second]);
  }
  if (rate.size() < 6) fail(errc::sample_size, "macro_fit: fewer than 6 aligned observations");
  return ols(rate, {bond, stock, vol});
}

FlowPerformanceFit flow_performance_fit(const std::vector<double>& rates,
                                        const std::vector<double>& fund_returns,
                                        const std::vector<double>& market_returns,
                                        std::size_t lags, std::size_t window) {
  const std::size_t n = rates.size();
  if (fund_returns.size() != n || market_returns.size() != n)
    fail(errc::parameter, "flow_performance_fit: series lengths differ");
  if (window < 3) fail(errc::parameter, "flow_performance_fit: window must be >= 3");
  require_finite(rates, "flow_performance_fit: rates");
  require_finite(fund_returns, "flow_performance_fit: fund returns");
  require_finite(market_returns, "flow_performance_fit: market returns");
  const std::size_t k2 = 1 + 3 * lags;
  if (n < window + lags + k2 + 2)
    fail(errc::sample_size, "flow_performance_fit: not enough observations for the lag order");

  FlowPerformanceFit out;
  out.market = ols(fund_returns, {market_returns});

  out.alpha.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = window - 1; t < n; ++t) {
    const std::size_t lo = t + 1 - window;
    double mx = 0.0, my = 0.0;
    for (std::size_t s = lo; s <= t; ++s) {
      mx += market_returns[s];
      my += fund_returns[s];
    }
    mx /= static_cast<double>(window);
    my /= static_cast<double>(window);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t s = lo; s <= t; ++s) {
      const double dx = market_returns[s] - mx;
      sxx += dx * dx;
      sxy += dx * (fund_returns[s] - my);
    }
    if (!(sxx > 0.0))
      fail(errc::singular_design, "flow_performance_fit: market return constant within a window");
    out.alpha[t] = my - (sxy / sxx) * mx;
  }

  const std::size_t start = window - 1 + lags;
  std::vector<double> y(rates.begin() + static_cast<std::ptrdiff_t>(start), rates.end());
  std::vector<std::vector<double>> cols(3 * lags);
  for (std::size_t h = 1; h <= lags; ++h) {
    for (std::size_t t = start; t < n; ++t) {
      cols[3 * (h - 1) + 0].push_back(rates[t - h]);
      cols[3 * (h - 1) + 1].push_back(out.alpha[t - h]);
      cols[3 * (h - 1) + 2].push_back(fund_returns[t - h]);
    }
  }
  out.flow = ols(y, cols);
  if (lags >= 1) {
    const double da = out.flow.coefficients[2], sa = out.flow.std_errors[2];
    const double dr = out.flow.coefficients[3], sr = out.flow.std_errors[3];
    out.relative_performance_effect = da < 0.0 && std::fabs(da) > 2.0 * sa;
    out.absolute_performance_effect = dr < 0.0 && std::fabs(dr) > 2.0 * sr;
  }
  return out;
}

double vix_conditional(const CategorySeries& s, const std::vector<DatedValue>& vix,
                       double threshold) {
  if (!std::isfinite(threshold)) fail(errc::parameter, "vix_conditional: threshold not finite");
  const auto vm = to_map(vix, "volatility series");
  double sum_all = 0.0, sum_high = 0.0;
  std::size_t n_all = 0, n_high = 0;
  for (std::size_t t = 0; t < s.dates.size(); ++t) {
    const auto it = vm.find(s.dates[t]);
    if (it == vm.end()) continue;
    sum_all += s.rate[t];
    ++n_all;
    if (it->second >= threshold) {
      sum_high += s.rate[t];
      ++n_high;
    }
  }
  if (n_all == 0) fail(errc::sample_size, "vix_conditional: no dates in common");
  if (n_high == 0) fail(errc::regime_empty, "vix_conditional: no dates at or above the threshold");
  const double mean_all = sum_all / static_cast<double>(n_all);
  if (!(mean_all > 0.0))
    fail(errc::invalid_denominator, "vix_conditional: average rate is zero");
  const double mean_high = sum_high / static_cast<double>(n_high);
  return mean_high / mean_all - 1.0;
}

AutocorrResult autocorrelation(const std::vector<double>& series, std::size_t max_order) {
  const std::size_t n = series.size();
  if (n < 30) fail(errc::sample_size, "autocorrelation: needs at least 30 observations");
  if (max_order < 1 || max_order >= n)
    fail(errc::parameter, "autocorrelation: max_order must be in [1, n)");
  require_finite(series, "autocorrelation: series");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) fail(errc::undefined_autocorrelation, "autocorrelation: constant series");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : series) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) fail(errc::undefined_autocorrelation, "autocorrelation: constant series");

  AutocorrResult out;
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t k = 1; k <= max_order; ++k) {
    double cov = 0.0;
    for (std::size_t t = k; t < n; ++t) cov += (series[t] - mean) * (series[t - k] - mean);
    cov /= static_cast<double>(n - k);
    const double rho = std::clamp(cov / var, -1.0, 1.0);
    out.rho.push_back(rho);
    out.p_value.push_back(2.0 * (1.0 - sf::norm_cdf(std::fabs(rho) * root_n)));
  }
  out.max_order = 1;
  out.max_rho = out.rho[0];
  for (std::size_t k = 2; k <= max_order; ++k) {
    if (out.rho[k - 1] > out.max_rho) {
      out.max_rho = out.rho[k - 1];
      out.max_order = k;
    }
  }
  out.significant = out.p_value[out.max_order - 1] < 0.05;
  return out;
}

}  // namespace redstress
