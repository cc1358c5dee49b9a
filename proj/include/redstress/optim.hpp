#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace redstress {

struct OptimResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Dense BFGS with Armijo backtracking. Small problems only (2-3 variables);
// the Hessian approximation is kept as a full matrix.
inline OptimResult minimize_bfgs(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad,
    std::vector<double> x, double grad_tol = 1e-8, int max_iter = 200) {
  const size_t n = x.size();
  std::vector<double> h(n * n, 0.0);  // inverse Hessian approximation
  for (size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;

  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::fabs(e));
    return m;
  };

  OptimResult res;
  double fx = f(x);
  std::vector<double> g = grad(x);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    res.grad_norm = inf_norm(g);
    if (res.grad_norm < grad_tol) {
      res.converged = true;
      break;
    }
    std::vector<double> d(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) d[i] -= h[i * n + j] * g[j];
    double slope = 0.0;
    for (size_t i = 0; i < n; ++i) slope += d[i] * g[i];
    if (!(slope < 0.0)) {  // reset a corrupted Hessian to steepest descent
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) h[i * n + j] = (i == j) ? 1.0 : 0.0;
        d[i] = -g[i];
      }
      slope = 0.0;
      for (size_t i = 0; i < n; ++i) slope += d[i] * g[i];
      if (!(slope < 0.0)) break;  // zero gradient, handled by tolerance above
    }
    double t = 1.0;
    std::vector<double> xn(n);
    double fn = fx;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (size_t i = 0; i < n; ++i) xn[i] = x[i] + t * d[i];
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * slope) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;  // no descent at machine-small steps
    std::vector<double> gn = grad(xn);
    std::vector<double> s(n), y(n);
    double sy = 0.0;
    for (size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
    }
    if (sy > 1e-12) {
      // BFGS update of the inverse Hessian.
      std::vector<double> hy(n, 0.0);
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) hy[i] += h[i * n + j] * y[j];
      double yhy = 0.0;
      for (size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
      const double r = 1.0 / sy;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
          h[i * n + j] += (1.0 + yhy * r) * r * s[i] * s[j] -
                          r * (hy[i] * s[j] + s[i] * hy[j]);
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  res.x = x;
  res.f = fx;
  res.grad_norm = inf_norm(g);
  return res;
}

}  // namespace redstress
