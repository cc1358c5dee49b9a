#pragma once

#include <cstddef>
#include <vector>

#include "redstress/flowdata.hpp"

namespace redstress {

struct MeasureReport {
  double mean = 0.0;
  double sd_measure = 0.0;  // mean + c * std
  double var = 0.0;         // empirical quantile at alpha
  double cvar = 0.0;        // mean of values >= var
  double ratio = 1.0;       // cvar / var, +inf when var = 0 < cvar
  std::size_t n = 0;
  bool low_confidence = false;  // n below the reliability floor
};

// Empirical quantile convention: the lower order statistic at index
// floor(alpha*n)+1 (1-based, clamped to n), so the tail set {x >= var} is
// never empty. Fixed for reproducibility.
MeasureReport empirical_measures(const RedemptionSample& sample, double c, double alpha,
                                 std::size_t reliability_floor = 200);

// Same measures over a raw vector of rates.
MeasureReport empirical_measures(const std::vector<double>& values, double c, double alpha,
                                 std::size_t reliability_floor = 200);

// Gaussian CVaR/VaR ratio phi(Phi^-1(a)) / ((1-a) Phi^-1(a)).
double gaussian_ratio(double alpha);

double x_statistic(const std::vector<double>& per_fund_maxima);

// 1 - (1 - x1)^n: the one-fund maximum statistic scaled to n funds.
double x_granularity(double x1, double n);

// (1 - (1-p)^n) / p: expected-max versus expected-sum Bernoulli ratio.
double max_vs_sum_ratio(double p, double n);

enum class CoherencyRule { C1, C2, C3 };

struct ShockMatrix {
  std::vector<std::vector<double>> shocks;  // [fund j][investor k]
  std::size_t clipped = 0;                  // entries clipped to 100%
};

// C1: S(j,k) = m_j * S_k.  C2: S(j,k) = m_k * S_j.  C3: mean of both.
ShockMatrix coherency_shocks(const std::vector<double>& investor_anchors,
                             const std::vector<double>& fund_anchors,
                             const std::vector<double>& fund_multipliers,
                             const std::vector<double>& investor_multipliers,
                             CoherencyRule rule);

}  // namespace redstress
