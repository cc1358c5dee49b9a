#pragma once

#include <functional>
#include <vector>

namespace redstress::sf {

// Regularized incomplete beta I_x(a,b). Relative accuracy ~1e-14 away from
// the endpoints; exact 0/1 at x=0/1.
double ibeta(double a, double b, double x);

// Inverse of ibeta in x for fixed (a,b).
double ibeta_inv(double a, double b, double p);

// Regularized lower incomplete gamma P(a,x).
double igamma_lower(double a, double x);

double lbeta(double a, double b);
double digamma(double x);
double trigamma(double x);

// Standard normal CDF and its inverse.
double norm_cdf(double x);
double norm_pdf(double x);
double norm_ppf(double p);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1,1].
const QuadratureRule& gauss_legendre(int n);

// Gauss-Hermite rule with weight exp(-x^2) (physicists' convention).
const QuadratureRule& gauss_hermite(int n);

// Integral of f against the standard normal density over the real line,
// n-node Gauss-Hermite.
double gauss_hermite_normal(const std::function<double(double)>& f, int n);

// Integral of f over [lo,hi], n-node Gauss-Legendre.
double gauss_legendre_integrate(const std::function<double(double)>& f,
                                double lo, double hi, int n);

// Root of f on [lo,hi] (f(lo), f(hi) of opposite sign or zero at an end).
// Newton steps guarded by the bracket, bisection fallback; `df` may be null.
double bracketed_newton(const std::function<double(double)>& f,
                        const std::function<double(double)>& df,
                        double lo, double hi, double tol, int max_iter);

}  // namespace redstress::sf
