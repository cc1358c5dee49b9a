#pragma once

#include <optional>

#include "redstress/flowdata.hpp"
#include "redstress/severity.hpp"

namespace redstress {

// Redemption rate as redemption event times redemption severity: an atom
// 1-p at zero and density p*g on (0,1].
struct ZIModel {
  double p;
  SeverityDist severity;
};

ZIModel make_zi(double p, SeverityDist severity);

struct ZIMoments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool higher_defined = true;  // false when p = 0: skewness/kurtosis undefined
};

struct ZIFit {
  double p = 0.0;
  std::optional<SeverityDist> severity;  // absent when fewer than 2 positives
  double loglik = 0.0;                   // severity log-likelihood (MLE only)
  int iterations = 0;
  int clamped = 0;  // observations at 1 moved to 1-eps before taking logs
  bool converged = true;
  ZIModel model() const;
};

double zi_cdf(const ZIModel& m, double x);
ZIMoments zi_moments(const ZIModel& m);
double zi_quantile(const ZIModel& m, double alpha);
double zi_cvar(const ZIModel& m, double alpha);

// Parametric stress scenario for a horizon in years (260 market days each):
// the loss whose return time equals the horizon.
double zi_stress(const ZIModel& m, double t_years);

// Horizon in years whose stress scenario equals the conditional value-at-risk.
double implied_return_time(const ZIModel& m, double alpha);

ZIFit fit_mle(const RedemptionSample& sample);
ZIFit fit_mm(const RedemptionSample& sample);

}  // namespace redstress
