#include "redstress/specfun.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "redstress/errors.hpp"

namespace redstress::sf {

namespace {

// Lentz's continued fraction for the incomplete beta, valid for
// x < (a+1)/(a+b+2); the caller applies the symmetry reduction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  fail(errc::numerical, "incomplete beta continued fraction did not converge");
}

// Series for P(a,x), x < a+1.
double igamma_series(double a, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  fail(errc::numerical, "incomplete gamma series did not converge");
}

// Continued fraction for Q(a,x), x >= a+1.
double igamma_cf(double a, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  constexpr double kFpMin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  fail(errc::numerical, "incomplete gamma continued fraction did not converge");
}

}  // namespace

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double ibeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) fail(errc::parameter, "ibeta requires a,b > 0");
  if (x < 0.0 || x > 1.0) fail(errc::domain, "ibeta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double lfront =
      a * std::log(x) + b * std::log1p(-x) - lbeta(a, b);
  const double front = std::exp(lfront);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double ibeta_inv(double a, double b, double p) {
  if (p < 0.0 || p > 1.0) fail(errc::domain, "ibeta_inv requires p in [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  if (p > 0.5) return 1.0 - ibeta_inv(b, a, 1.0 - p);
  // Mean-anchored start, switching to the x^a power-law start deep in the
  // lower tail, then bracket-guarded Newton on I_x(a,b)-p with the analytic
  // density as derivative.
  const double lB = lbeta(a, b);
  double x = a / (a + b);
  const double ltail = (std::log(p) + std::log(a) + lB) / a;
  if (ltail < std::log(0.1)) x = std::exp(ltail);
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double f = ibeta(a, b, x) - p;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    if (std::fabs(f) <= 1e-13 * p) return x;
    const double lpdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lB;
    double step = f / std::exp(lpdf);
    double xn = x - step;
    if (!(xn > lo) || !(xn < hi)) xn = 0.5 * (lo + hi);
    if (std::fabs(xn - x) < 1e-16 * std::fabs(x)) return xn;
    x = xn;
  }
  return x;
}

double igamma_lower(double a, double x) {
  if (!(a > 0.0)) fail(errc::parameter, "igamma_lower requires a > 0");
  if (x < 0.0) fail(errc::domain, "igamma_lower requires x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return igamma_series(a, x);
  return 1.0 - igamma_cf(a, x);
}

double digamma(double x) {
  if (!(x > 0.0)) fail(errc::parameter, "digamma requires x > 0");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Asymptotic expansion through the x^-12 Bernoulli term.
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 -
                    inv2 * (691.0 / 32760.0))))));
  return result;
}

double trigamma(double x) {
  if (!(x > 0.0)) fail(errc::parameter, "trigamma requires x > 0");
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv + 0.5 * inv2 +
            inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 -
                          inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
  return result;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double norm_ppf(double p) {
  if (!(p > 0.0) || !(p < 1.0)) fail(errc::domain, "norm_ppf requires p in (0,1)");
  // Reflect the upper half so the Halley correction below works on a small
  // cdf value instead of a difference of numbers near one.
  if (p > 0.5) return -norm_ppf(1.0 - p);
  // Acklam's rational approximation, then one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = norm_cdf(x) - p;
  const double u = e / norm_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

QuadratureRule build_gauss_legendre(int n) {
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) < 1e-15) break;
    }
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

QuadratureRule build_gauss_hermite(int n) {
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const int m = (n + 1) / 2;
  double z = 0.0, pp = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * r.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * r.nodes[1];
    else
      z = 2.0 * z - r.nodes[i - 2];
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 -
             std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) < 1e-14) break;
    }
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = 2.0 / (pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

std::mutex rule_mutex;

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(rule_mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
  return it->second;
}

const QuadratureRule& gauss_hermite(int n) {
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(rule_mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gauss_hermite(n)).first;
  return it->second;
}

double gauss_hermite_normal(const std::function<double(double)>& f, int n) {
  const QuadratureRule& r = gauss_hermite(n);
  const double s = std::sqrt(2.0);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += r.weights[i] * f(s * r.nodes[i]);
  return acc / std::sqrt(M_PI);
}

double gauss_legendre_integrate(const std::function<double(double)>& f,
                                double lo, double hi, int n) {
  const QuadratureRule& r = gauss_legendre(n);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += r.weights[i] * f(mid + half * r.nodes[i]);
  return acc * half;
}

double bracketed_newton(const std::function<double(double)>& f,
                        const std::function<double(double)>& df,
                        double lo, double hi, double tol, int max_iter) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    fail(errc::numerical, "bracketed_newton: root not bracketed");
  if (flo > 0.0) std::swap(lo, hi);  // keep f(lo) < 0 < f(hi)
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double fx = f(x);
    if (std::fabs(fx) < tol) return x;
    if (fx < 0.0)
      lo = x;
    else
      hi = x;
    double xn;
    if (df) {
      const double d = df(x);
      xn = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
      if (!((xn > std::min(lo, hi)) && (xn < std::max(lo, hi))))
        xn = 0.5 * (lo + hi);
    } else {
      xn = 0.5 * (lo + hi);
    }
    if (std::fabs(xn - x) < 1e-16 * (1.0 + std::fabs(x))) return xn;
    x = xn;
  }
  fail(errc::numerical, "bracketed_newton: iteration cap reached");
}

}  // namespace redstress::sf
