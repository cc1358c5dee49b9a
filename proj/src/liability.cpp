#include "redstress/liability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "redstress/errors.hpp"
#include "redstress/optim.hpp"

namespace redstress {

LiabilityStructure LiabilityStructure::from_weights(std::vector<double> weights) {
  if (weights.empty()) fail(errc::empty_sample, "liability weights are empty");
  double sum = 0.0, sq = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) fail(errc::constraint_violation, "liability weights must be positive");
    sum += w;
    sq += w * w;
  }
  if (std::fabs(sum - 1.0) > 1e-10)
    fail(errc::normalization, "liability weights sum to " + std::to_string(sum));
  LiabilityStructure s;
  s.w_ = std::move(weights);
  s.n_ = double(s.w_.size());
  s.h_ = sq;
  return s;
}

LiabilityStructure LiabilityStructure::from_summary(double n, double herfindahl) {
  if (!(n >= 1.0)) fail(errc::constraint_violation, "summary count must be at least 1");
  const double floor_h = std::isinf(n) ? 0.0 : 1.0 / n;
  if (!(herfindahl >= floor_h - 1e-12 && herfindahl <= 1.0 + 1e-12))
    fail(errc::constraint_violation, "herfindahl must lie in [1/n, 1]");
  LiabilityStructure s;
  s.n_ = n;
  s.h_ = std::clamp(herfindahl, std::isinf(n) ? herfindahl : floor_h, 1.0);
  return s;
}

const std::vector<double>& LiabilityStructure::weights() const {
  if (w_.empty()) fail(errc::parameter, "structure holds only a summary, no explicit weights");
  return w_;
}

HerfindahlStats herfindahl(const std::vector<double>& weights) {
  const LiabilityStructure s = LiabilityStructure::from_weights(weights);
  return {s.herfindahl(), s.effective_n()};
}

LiabilityStructure geometric_structure(double q, std::size_t n) {
  if (!(q > 0.0 && q < 1.0)) fail(errc::parameter, "geometric ratio must lie in (0,1)");
  if (n == 0) fail(errc::parameter, "geometric structure needs at least one holder");
  std::vector<double> w(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::pow(q, double(i + 1));
    sum += w[i];
  }
  for (double& e : w) e /= sum;
  return LiabilityStructure::from_weights(std::move(w));
}

LiabilityStructure geometric_structure(double q) {
  if (!(q > 0.0 && q < 1.0)) fail(errc::parameter, "geometric ratio must lie in (0,1)");
  return LiabilityStructure::from_summary(std::numeric_limits<double>::infinity(),
                                          (1.0 - q) / (1.0 + q));
}

HerfindahlBound herfindahl_upper_bound(const std::vector<double>& top_weights) {
  if (top_weights.empty()) fail(errc::empty_sample, "no weights supplied");
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < top_weights.size(); ++i) {
    const double w = top_weights[i];
    if (!(w > 0.0 && w <= 1.0))
      fail(errc::constraint_violation, "weights must lie in (0,1]");
    if (i > 0 && w > top_weights[i - 1] + 1e-12)
      fail(errc::ordering, "weights must be sorted in descending order");
    sum += w;
    sq += w * w;
  }
  if (sum > 1.0 + 1e-10)
    fail(errc::constraint_violation, "partial weight sum exceeds 1");
  const double h = sq + std::max(0.0, 1.0 - sum) * top_weights.back();
  return {h, 1.0 / h};
}

IMModel make_im(LiabilityStructure structure, double p_tilde, double mu_tilde,
                double sigma_tilde) {
  if (!(p_tilde >= 0.0 && p_tilde <= 1.0))
    fail(errc::parameter, "make_im: p_tilde must lie in [0,1]");
  if (!(mu_tilde >= 0.0) || !(sigma_tilde >= 0.0))
    fail(errc::parameter, "make_im: mu_tilde and sigma_tilde must be nonnegative");
  return IMModel{std::move(structure), p_tilde, mu_tilde, sigma_tilde};
}

SeverityDist IMModel::severity() const {
  auto [a, b] = beta_from_musigma(mu_tilde, sigma_tilde);
  return make_severity(SevFamily::Beta, a, b);
}

double prob_no_redemption(double n, double p_tilde) {
  if (!(n >= 1.0)) fail(errc::parameter, "prob_no_redemption: n must be at least 1");
  if (!(p_tilde >= 0.0 && p_tilde <= 1.0))
    fail(errc::parameter, "prob_no_redemption: p_tilde must lie in [0,1]");
  if (p_tilde == 1.0) return 0.0;
  if (std::isinf(n)) return p_tilde > 0.0 ? 0.0 : 1.0;
  return std::pow(1.0 - p_tilde, n);
}

IMMoments im_moments(const IMModel& m) {
  const double v = m.p_tilde * (m.sigma_tilde * m.sigma_tilde +
                                (1.0 - m.p_tilde) * m.mu_tilde * m.mu_tilde);
  return {m.p_tilde * m.mu_tilde, v * m.structure.herfindahl()};
}

ZIMatch match_zi_from_im(const IMModel& m) {
  ZIMatch out;
  out.p = 1.0 - prob_no_redemption(m.structure.n(), m.p_tilde);
  if (m.p_tilde == 0.0) {
    out.defined = false;
    return out;
  }
  out.mu = m.p_tilde * m.mu_tilde / out.p;
  // Equate the matched variance p s^2 + p(1-p) m^2 with the aggregate one.
  const double var = im_moments(m).variance;
  const double s2 = (var - out.p * (1.0 - out.p) * out.mu * out.mu) / out.p;
  if (s2 < -1e-15) fail(errc::infeasible_moments, "matched sigma^2 is negative");
  out.sigma = std::sqrt(std::max(0.0, s2));
  return out;
}

IMMatch match_im_from_zi(double p, double mu, double sigma, double n, double h) {
  if (!(p > 0.0 && p < 1.0)) fail(errc::parameter, "match_im_from_zi: p must lie in (0,1)");
  if (!(n >= 1.0)) fail(errc::parameter, "match_im_from_zi: n must be at least 1");
  if (!(h >= 1.0 / n - 1e-12 && h <= 1.0 + 1e-12))
    fail(errc::constraint_violation, "match_im_from_zi: herfindahl must lie in [1/n, 1]");
  IMMatch out{};
  out.p_tilde = 1.0 - std::pow(1.0 - p, 1.0 / n);
  out.mu_tilde = p * mu / out.p_tilde;
  const double var = p * sigma * sigma + p * (1.0 - p) * mu * mu;
  const double s2 =
      var / (out.p_tilde * h) - (1.0 - out.p_tilde) * out.mu_tilde * out.mu_tilde;
  if (s2 < 0.0)
    fail(errc::infeasible_moments,
         "match_im_from_zi: implied sigma_tilde^2 = " + std::to_string(s2) + " is negative");
  out.sigma_tilde = std::sqrt(s2);
  out.unrealistic = out.mu_tilde > 1.0 || out.sigma_tilde > 1.0;
  return out;
}

double largest_holder_stress(const LiabilityStructure& structure, std::size_t m) {
  const std::vector<double>& w = structure.weights();
  if (m < 1 || m > w.size()) fail(errc::domain, "largest_holder_stress: m out of range");
  std::vector<double> sorted = w;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += sorted[i];
  return std::min(s, 1.0);
}

namespace {

struct CalibProblem {
  const std::vector<FundMomentEstimates>& funds;
  std::vector<double> fw;
  std::array<double, 3> mw;

  // x = (p_tilde, mu_tilde, sigma_tilde)
  double criterion(const double* x) const {
    double c = 0.0;
    for (std::size_t f = 0; f < funds.size(); ++f) {
      const auto& e = funds[f];
      const double base = std::max(1.0 - x[0], 1e-15);
      const double r1 = e.p - 1.0 + std::pow(base, e.effective_n);
      const double r2 = e.p * e.mu - x[0] * x[1];
      const double hf = 1.0 / e.effective_n;
      const double r3 = e.p * (e.sigma * e.sigma + (1.0 - e.p) * e.mu * e.mu) -
                        x[0] * (x[2] * x[2] + (1.0 - x[0]) * x[1] * x[1]) * hf;
      c += fw[f] * (mw[0] * r1 * r1 + mw[1] * r2 * r2 + mw[2] * r3 * r3);
    }
    return c;
  }

  void add_grad(const double* x, double* g) const {
    g[0] = g[1] = g[2] = 0.0;
    for (std::size_t f = 0; f < funds.size(); ++f) {
      const auto& e = funds[f];
      const double base = std::max(1.0 - x[0], 1e-15);
      const double r1 = e.p - 1.0 + std::pow(base, e.effective_n);
      const double r2 = e.p * e.mu - x[0] * x[1];
      const double hf = 1.0 / e.effective_n;
      const double r3 = e.p * (e.sigma * e.sigma + (1.0 - e.p) * e.mu * e.mu) -
                        x[0] * (x[2] * x[2] + (1.0 - x[0]) * x[1] * x[1]) * hf;
      const double d1p = -e.effective_n * std::pow(base, e.effective_n - 1.0);
      const double d3p = -hf * (x[2] * x[2] + (1.0 - 2.0 * x[0]) * x[1] * x[1]);
      const double d3m = -hf * 2.0 * x[0] * (1.0 - x[0]) * x[1];
      const double d3s = -hf * 2.0 * x[0] * x[2];
      g[0] += fw[f] * 2.0 * (mw[0] * r1 * d1p + mw[1] * r2 * (-x[1]) + mw[2] * r3 * d3p);
      g[1] += fw[f] * 2.0 * (mw[1] * r2 * (-x[0]) + mw[2] * r3 * d3m);
      g[2] += fw[f] * 2.0 * mw[2] * r3 * d3s;
    }
  }
};

constexpr double kUpperBound = 10.0;
constexpr double kPenaltyScale = 1e3;

}  // namespace

IMCalibration calibrate_im(const std::vector<FundMomentEstimates>& funds,
                           std::vector<double> fund_weights,
                           const std::array<double, 3>& moment_weights) {
  if (funds.empty()) fail(errc::empty_sample, "calibrate_im: no funds supplied");
  for (const auto& e : funds)
    if (!(e.effective_n >= 1.0))
      fail(errc::parameter, "calibrate_im: effective_n must be at least 1");
  if (fund_weights.empty()) fund_weights.assign(funds.size(), 1.0);
  if (fund_weights.size() != funds.size())
    fail(errc::parameter, "calibrate_im: fund weight count mismatch");
  for (double w : fund_weights)
    if (!(w >= 0.0)) fail(errc::parameter, "calibrate_im: fund weights must be nonnegative");

  // One fund seen by every unitholder: the criterion root is the ZI estimate itself.
  if (funds.size() == 1 && funds[0].effective_n == 1.0) {
    const auto& e = funds[0];
    return {e.p, e.mu, e.sigma, 0.0, e.mu > 1.0 || e.sigma > 1.0};
  }

  CalibProblem prob{funds, std::move(fund_weights), moment_weights};

  // Parameterization: p_tilde through a logistic map (it is a probability),
  // mu and sigma through exp, with a smooth penalty above the upper bound.
  auto unpack = [](const std::vector<double>& t, double* x) {
    x[0] = 1.0 / (1.0 + std::exp(-t[0]));
    x[1] = std::exp(t[1]);
    x[2] = std::exp(t[2]);
  };
  auto obj = [&](const std::vector<double>& t) {
    double x[3];
    unpack(t, x);
    double pen = 0.0;
    for (int i = 1; i < 3; ++i) {
      const double ex = std::max(0.0, x[i] - kUpperBound);
      pen += kPenaltyScale * ex * ex;
    }
    return prob.criterion(x) + pen;
  };
  auto grad = [&](const std::vector<double>& t) {
    double x[3], g[3];
    unpack(t, x);
    prob.add_grad(x, g);
    for (int i = 1; i < 3; ++i) {
      const double ex = std::max(0.0, x[i] - kUpperBound);
      g[i] += 2.0 * kPenaltyScale * ex;
    }
    return std::vector<double>{g[0] * x[0] * (1.0 - x[0]), g[1] * x[1], g[2] * x[2]};
  };

  // Deterministic starts plus per-fund exact inversions where feasible.
  std::vector<std::array<double, 3>> starts = {{0.01, 0.30, 0.30},
                                               {0.05, 0.50, 0.30},
                                               {0.30, 0.30, 0.20},
                                               {0.001, 0.80, 0.80},
                                               {0.10, 0.10, 0.10}};
  for (const auto& e : funds) {
    if (starts.size() >= 8) break;
    if (!(e.p > 0.0 && e.p < 1.0)) continue;
    try {
      IMMatch w = match_im_from_zi(e.p, e.mu, e.sigma, e.effective_n, 1.0 / e.effective_n);
      if (w.p_tilde > 0.0 && w.mu_tilde > 0.0 && w.sigma_tilde > 0.0)
        starts.push_back({w.p_tilde, w.mu_tilde, w.sigma_tilde});
    } catch (const error&) {
    }
  }

  IMCalibration best{};
  double best_obj = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  for (const auto& s : starts) {
    const std::vector<double> t0 = {std::log(s[0] / (1.0 - s[0])),
                                    std::log(std::min(s[1], kUpperBound)),
                                    std::log(std::min(s[2], kUpperBound))};
    OptimResult r = minimize_bfgs(obj, grad, t0, 1e-10, 500);
    if (r.f < best_obj) {
      best_obj = r.f;
      double x[3];
      unpack(r.x, x);
      // The feasible region is (0, 10]; the penalty only enforces it softly.
      x[1] = std::min(x[1], kUpperBound);
      x[2] = std::min(x[2], kUpperBound);
      best.p_tilde = x[0];
      best.mu_tilde = x[1];
      best.sigma_tilde = x[2];
      best.criterion = prob.criterion(x);
      any_converged = r.converged || r.grad_norm < 1e-6;
    } else if (r.f == best_obj) {
      any_converged = any_converged || r.converged || r.grad_norm < 1e-6;
    }
  }
  if (!any_converged && best.criterion > 1e-12)
    fail(errc::numerical,
         "calibrate_im did not converge; best criterion " + std::to_string(best.criterion));
  best.unrealistic = best.mu_tilde > 1.0 || best.sigma_tilde > 1.0;
  return best;
}

}  // namespace redstress
