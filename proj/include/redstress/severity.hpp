#pragma once

#include <array>
#include <utility>

namespace redstress {

enum class SevFamily { Beta, Kumaraswamy, LogitNormal, TruncGamma, TruncLogLogistic };

// Parametric severity distribution on [0,1]. TruncGamma and TruncLogLogistic
// are the base laws (shape a, scale b) truncated to [0,1] and renormalized by
// G(1); LogitNormal takes any real a (location on the logit scale) and b > 0.
struct SeverityDist {
  SevFamily family = SevFamily::Beta;
  double a = 1.0;
  double b = 1.0;
};

SeverityDist make_severity(SevFamily family, double a, double b);

double cdf(const SeverityDist& d, double x);

// Density on (0,1); at an endpoint where the density diverges (Beta-type
// shape below 1) returns +infinity.
double pdf(const SeverityDist& d, double x);

// Inverse CDF. Closed form where available, otherwise bracketed Newton with
// iteration cap 200 and tolerance 1e-12 on the probability scale.
double quantile(const SeverityDist& d, double u);

struct SevMoments {
  double mean;
  double variance;
  double skewness;
  double excess_kurtosis;
};

// Beta uses closed forms; other families integrate the quantile function
// (Gauss-Legendre, node doubling to 1e-10).
SevMoments moments(const SeverityDist& d);

// Raw moments E[X], E[X^2], E[X^3], E[X^4].
std::array<double, 4> raw_moments(const SeverityDist& d);

// Beta(a,b) with mean mu and standard deviation sigma.
std::pair<double, double> beta_from_musigma(double mu, double sigma);

}  // namespace redstress
