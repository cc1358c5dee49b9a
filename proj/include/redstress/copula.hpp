#pragma once

#include "redstress/liability.hpp"

namespace redstress {

// Exchangeable dependence between unitholder redemption decisions. Clayton
// takes theta >= 0, Normal theta in [0,1]; theta = 0 is the product copula in
// both families and Normal theta = 1 is the upper Frechet bound.
enum class CopFamily { Product, Clayton, Normal, UpperFrechet };

struct CopulaSpec {
  CopFamily family = CopFamily::Product;
  double theta = 0.0;
};

CopulaSpec make_copula(CopFamily family, double theta = 0.0);

// C(u,...,u) with n identical arguments. Bounded by [u^n, u], nonincreasing
// in n, nondecreasing in theta. n may be fractional.
double diagonal(const CopulaSpec& c, double u, double n);

// Bivariate C(u,v).
double copula2(const CopulaSpec& c, double u, double v);

// Bivariate joint exceedance Pr{U > 1-u, V > 1-v} = u+v-1+C(1-u,1-v).
double survival2(const CopulaSpec& c, double u, double v);

// survival2 on the diagonal: the probability that two unitholders both
// redeem when each redeems with probability u.
double survival_diag2(const CopulaSpec& c, double u);

struct CorrelationViews {
  double kendall_tau;
  double spearman_rho;
  double pearson_rho;
};

// Rank and linear correlation equivalents of the copula parameter. The
// Clayton Spearman value is the arcsin approximation, not an exact integral.
CorrelationViews correlation_views(const CopulaSpec& c);

// Inverse of correlation_views in the pearson coordinate. Clayton rho = 1
// has no finite theta and maps to the UpperFrechet family.
CopulaSpec theta_from_pearson(CopFamily family, double rho);

struct FreqMoments {
  double mean;
  double variance;
};

// Moments of the weighted redemption frequency sum(w_i 1{E_i}) when each
// indicator has probability p_tilde and pairs are coupled by c.
FreqMoments freq_moments(double p_tilde, double h, const CopulaSpec& c);

struct ThetaCalibration {
  CopulaSpec spec;
  double pearson;
};

// Solves survival_diag2(mean_freq) = (std^2 - mean(h - mean)) / (1 - h) for
// theta by bisection. The reported pearson applies the sine mapping
// sin(pi*theta/(2*theta+4)) to the solved parameter for both families; the
// Normal parameter itself sits in spec.theta.
ThetaCalibration calibrate_theta(double mean_freq, double std_freq, double h,
                                 CopFamily family);

// Pearson correlation between the redemption frequencies of two investor
// categories coupled by `between`, each with its own intra-category copula
// and Herfindahl index.
double cross_correlation(double p1, double p2, const CopulaSpec& between,
                         const CopulaSpec& intra1, double h1,
                         const CopulaSpec& intra2, double h2);

struct CMStats {
  double prob_no_redemption;
  double mean;
  double variance;
};

// Aggregate redemption-rate statistics when the unitholder model is extended
// with a frequency copula. The mean does not depend on the copula.
CMStats cm_stats(const IMModel& m, const CopulaSpec& c);

}  // namespace redstress
