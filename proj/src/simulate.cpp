#include "redstress/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "redstress/errors.hpp"
#include "redstress/severity.hpp"
#include "redstress/specfun.hpp"

namespace redstress {

namespace {

constexpr double kDaysPerYear = 260.0;
// Calibration draws live in the upper stream half so they never collide with
// simulation indices.
constexpr std::uint64_t kCalibStreamBase = 1ull << 63;

unsigned thread_count_from_env() {
  const char* s = std::getenv("REDSTRESS_THREADS");
  if (s == nullptr || *s == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(s, &end, 10);
  if (end == s || *end != '\0' || v < 1) return 1;
  return static_cast<unsigned>(std::min(v, 256ul));
}

void validate_config(const SimConfig& cfg) {
  if (cfg.n_sims < 1) fail(errc::parameter, "simulation count must be at least 1");
  if (cfg.chunk_size < 1) fail(errc::parameter, "chunk size must be at least 1");
}

// Runs work(lo, hi) over [0, n) in chunks; single-threaded unless
// REDSTRESS_THREADS asks for more. Output slots are disjoint per chunk, so
// scheduling never affects results.
void run_chunks(std::size_t n, std::size_t chunk,
                const std::function<void(std::size_t, std::size_t)>& work) {
  const unsigned threads = thread_count_from_env();
  if (threads <= 1 || n <= chunk) {
    for (std::size_t lo = 0; lo < n; lo += chunk) work(lo, std::min(n, lo + chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t lo = next.fetch_add(chunk);
      if (lo >= n) return;
      try {
        work(lo, std::min(n, lo + chunk));
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

const char* family_name(CopFamily f) {
  switch (f) {
    case CopFamily::Product: return "product";
    case CopFamily::Clayton: return "clayton";
    case CopFamily::Normal: return "normal";
    case CopFamily::UpperFrechet: return "upper-frechet";
  }
  return "?";
}

std::string copula_label(const CopulaSpec& c) {
  std::ostringstream os;
  os << family_name(c.family);
  if (c.family == CopFamily::Clayton || c.family == CopFamily::Normal)
    os << "(" << c.theta << ")";
  return os.str();
}

std::string severity_label(const SeverityDist& d) {
  std::ostringstream os;
  switch (d.family) {
    case SevFamily::Beta: os << "beta"; break;
    case SevFamily::Kumaraswamy: os << "kumaraswamy"; break;
    case SevFamily::LogitNormal: os << "logit-normal"; break;
    case SevFamily::TruncGamma: os << "trunc-gamma"; break;
    case SevFamily::TruncLogLogistic: os << "trunc-log-logistic"; break;
  }
  os << "(" << d.a << "," << d.b << ")";
  return os.str();
}

// Prepared state for one correlated-unitholder draw.
struct CMKernel {
  std::vector<double> weights;  // empty for equal weights
  std::size_t n = 0;
  double equal_w = 0.0;
  double p = 0.0;
  SeverityDist sev;
  CopulaSpec cop;

  double draw(rng_stream& rng, std::vector<double>& u) const {
    sample_copula(cop, n, rng, u);
    double rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] >= 1.0 - p)
        rate += (weights.empty() ? equal_w : weights[i]) * quantile(sev, rng.next_uniform());
    }
    return std::min(rate, 1.0);
  }
};

CMKernel make_kernel(const IMModel& m, const CopulaSpec& c) {
  CMKernel k;
  const double n = m.structure.n();
  if (!std::isfinite(n))
    fail(errc::parameter, "simulation needs a finite unitholder count");
  if (m.structure.has_weights()) {
    k.weights = m.structure.weights();
    k.n = k.weights.size();
  } else {
    const double h = m.structure.herfindahl();
    if (std::fabs(h * n - 1.0) > 1e-9)
      fail(errc::parameter,
           "summary structures are simulable only with equal weights (h = 1/n)");
    k.n = static_cast<std::size_t>(std::llround(n));
    k.equal_w = 1.0 / static_cast<double>(k.n);
  }
  k.p = m.p_tilde;
  k.sev = m.severity();
  k.cop = c;
  return k;
}

// Order-statistic index of the empirical quantile: floor(alpha*n)+1,
// 1-based, clamped to n. Matches the riskmeasures convention.
std::size_t quantile_index(double alpha, std::size_t n) {
  const std::size_t r = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n))) + 1;
  return std::min(r, n) - 1;  // 0-based
}

}  // namespace

void sample_copula(const CopulaSpec& c, std::size_t n, rng_stream& rng,
                   std::vector<double>& out) {
  if (n < 1) fail(errc::parameter, "sample_copula: need at least one component");
  out.resize(n);
  switch (c.family) {
    case CopFamily::Product:
      for (auto& u : out) u = rng.next_uniform();
      return;
    case CopFamily::UpperFrechet: {
      const double u = rng.next_uniform();
      std::fill(out.begin(), out.end(), u);
      return;
    }
    case CopFamily::Clayton: {
      if (c.theta == 0.0) {
        for (auto& u : out) u = rng.next_uniform();
        return;
      }
      const double v = rng.next_gamma(1.0 / c.theta);
      for (auto& u : out)
        u = std::pow(1.0 - std::log(rng.next_uniform()) / v, -1.0 / c.theta);
      return;
    }
    case CopFamily::Normal: {
      if (c.theta == 0.0) {
        for (auto& u : out) u = rng.next_uniform();
        return;
      }
      if (c.theta == 1.0) {
        const double u = rng.next_uniform();
        std::fill(out.begin(), out.end(), u);
        return;
      }
      const double z0 = rng.next_normal();
      const double scale = std::sqrt(c.theta);
      const double residual = std::sqrt(1.0 - c.theta);
      for (auto& u : out)
        u = sf::norm_cdf(scale * z0 + residual * rng.next_normal());
      return;
    }
  }
  fail(errc::parameter, "unknown copula family");
}

std::vector<double> sample_copula(const CopulaSpec& c, std::size_t n, rng_stream& rng) {
  std::vector<double> out;
  sample_copula(c, n, rng, out);
  return out;
}

SimSample simulate_cm(const IMModel& m, const CopulaSpec& c, const SimConfig& cfg) {
  validate_config(cfg);
  const CMKernel kernel = make_kernel(m, c);
  SimSample out;
  out.values.resize(cfg.n_sims);
  run_chunks(cfg.n_sims, cfg.chunk_size, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> u;
    for (std::size_t i = lo; i < hi; ++i) {
      rng_stream rng(cfg.seed, i);
      out.values[i] = kernel.draw(rng, u);
    }
  });
  std::ostringstream os;
  os << "cm(n=" << kernel.n << ", p=" << m.p_tilde << ", "
     << severity_label(kernel.sev) << ", " << copula_label(c) << ")";
  out.model = os.str();
  return out;
}

SimSample simulate_zi(const ZIModel& m, const SimConfig& cfg) {
  validate_config(cfg);
  SimSample out;
  out.values.resize(cfg.n_sims);
  run_chunks(cfg.n_sims, cfg.chunk_size, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      rng_stream rng(cfg.seed, i);
      const double u = rng.next_uniform();
      out.values[i] = u >= 1.0 - m.p ? quantile(m.severity, rng.next_uniform()) : 0.0;
    }
  });
  std::ostringstream os;
  os << "zi(p=" << m.p << ", " << severity_label(m.severity) << ")";
  out.model = os.str();
  return out;
}

DailySampler make_daily_sampler(const IMModel& m, const CopulaSpec& c) {
  const CMKernel kernel = make_kernel(m, c);
  return [kernel, u = std::vector<double>()](rng_stream& rng) mutable {
    return kernel.draw(rng, u);
  };
}

DailySampler make_daily_sampler(const ZIModel& m) {
  return [m](rng_stream& rng) {
    const double u = rng.next_uniform();
    return u >= 1.0 - m.p ? quantile(m.severity, rng.next_uniform()) : 0.0;
  };
}

std::vector<double> empirical_quantile_table(const DailySampler& daily,
                                             std::uint64_t seed, std::size_t n_draws) {
  if (n_draws < 2) fail(errc::parameter, "quantile table needs at least 2 draws");
  std::vector<double> table(n_draws);
  for (std::size_t j = 0; j < n_draws; ++j) {
    rng_stream rng(seed, kCalibStreamBase + j);
    table[j] = daily(rng);
  }
  std::sort(table.begin(), table.end());
  return table;
}

double table_quantile(const std::vector<double>& sorted, double u) {
  if (sorted.empty()) fail(errc::empty_sample, "table_quantile: empty table");
  const double n = static_cast<double>(sorted.size());
  const double t = u * n - 0.5;
  if (t <= 0.0) return sorted.front();
  if (t >= n - 1.0) return sorted.back();
  const std::size_t i = static_cast<std::size_t>(t);
  const double frac = t - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

SimSample aggregate_over_horizon(const DailySampler& daily, std::size_t n_h,
                                 double rho_time, const SimConfig& cfg,
                                 HorizonDiagnostics* diag) {
  if (n_h < 1) fail(errc::domain, "horizon must cover at least one day");
  if (!(rho_time >= 0.0 && rho_time <= 1.0))
    fail(errc::parameter, "time autocorrelation must lie in [0,1]");
  validate_config(cfg);

  const std::vector<double> table = empirical_quantile_table(daily, cfg.seed);
  SimSample out;
  out.values.resize(cfg.n_sims);
  if (diag != nullptr) {
    diag->max_daily.assign(cfg.n_sims, 0.0);
    diag->sum_daily.assign(cfg.n_sims, 0.0);
  }
  const double innovation = std::sqrt(1.0 - rho_time * rho_time);
  run_chunks(cfg.n_sims, cfg.chunk_size, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      rng_stream rng(cfg.seed, i);
      double z = rng.next_normal();
      double survive = 1.0, mx = 0.0, sm = 0.0;
      for (std::size_t h = 0; h < n_h; ++h) {
        if (h > 0) z = rho_time * z + innovation * rng.next_normal();
        const double r = table_quantile(table, sf::norm_cdf(z));
        survive *= 1.0 - r;
        mx = std::max(mx, r);
        sm += r;
      }
      out.values[i] = std::clamp(1.0 - survive, 0.0, 1.0);
      if (diag != nullptr) {
        diag->max_daily[i] = mx;
        diag->sum_daily[i] = sm;
      }
    }
  });
  std::ostringstream os;
  os << "horizon(n_h=" << n_h << ", rho_time=" << rho_time << ")";
  out.model = os.str();
  return out;
}

McMeasures mc_risk_measures(const SimSample& s, double alpha, double c_sd,
                            double t_years) {
  const std::size_t n = s.values.size();
  if (n == 0) fail(errc::empty_sample, "mc_risk_measures: empty sample");
  if (!(t_years > 0.0)) fail(errc::parameter, "stress horizon must be positive");

  McMeasures out;
  out.report = empirical_measures(s.values, c_sd, alpha);

  double mean = 0.0;
  for (double x : s.values) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : s.values) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  const double sd = std::sqrt(m2);
  out.mean_se = sd / std::sqrt(static_cast<double>(n));
  out.sd_se = sd > 0.0
                  ? std::sqrt(std::max(0.0, m4 - m2 * m2)) /
                        (2.0 * sd * std::sqrt(static_cast<double>(n)))
                  : 0.0;

  std::vector<double> sorted(s.values);
  std::sort(sorted.begin(), sorted.end());
  const double spread = std::sqrt(static_cast<double>(n) * alpha * (1.0 - alpha));
  const double rank = alpha * static_cast<double>(n);
  auto at_rank = [&](double r) {
    const double clamped = std::clamp(r, 1.0, static_cast<double>(n));
    return sorted[static_cast<std::size_t>(clamped) - 1];
  };
  out.quantile_se = 0.5 * (at_rank(rank + spread) - at_rank(rank - spread));
  out.quantile_degenerate = static_cast<double>(n) * (1.0 - alpha) < 1.0;

  double tail_sum = 0.0, tail_sq = 0.0;
  std::size_t tail_n = 0;
  for (double x : s.values) {
    if (x >= out.report.var) {
      tail_sum += x;
      tail_sq += x * x;
      ++tail_n;
    }
  }
  if (tail_n > 0) {
    const double tm = tail_sum / static_cast<double>(tail_n);
    const double tv = std::max(0.0, tail_sq / static_cast<double>(tail_n) - tm * tm);
    out.cvar_se = std::sqrt(tv) / std::sqrt(static_cast<double>(tail_n));
  }

  const auto first_pos = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
  const std::size_t n_pos = static_cast<std::size_t>(sorted.end() - first_pos);
  const double p_eff = static_cast<double>(n_pos) / static_cast<double>(n);
  const double t_days = kDaysPerYear * t_years;
  if (p_eff * t_days > 1.0) {
    const double alpha_s = 1.0 - 1.0 / (p_eff * t_days);
    out.stress = *(first_pos + quantile_index(alpha_s, n_pos));
  }
  return out;
}

KSResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) fail(errc::empty_sample, "ks_two_sample: empty sample");
  std::vector<double> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      x = sa[i];
    else
      x = sb[j];
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KSResult out;
  out.statistic = d;
  out.pass_at_99 = d < 1.628 * std::sqrt((na + nb) / (na * nb));
  return out;
}

Spillover spillover_scaling(double phi1, double phi2, double r_bar) {
  if (!std::isfinite(phi1) || !std::isfinite(phi2))
    fail(errc::parameter, "spillover sensitivities must be finite");
  if (!(r_bar >= 0.0 && r_bar <= 1.0))
    fail(errc::parameter, "baseline redemption rate must lie in [0,1]");
  const double phi = phi1 * phi2;
  if (std::fabs(phi) >= 1.0)
    fail(errc::nonstationary, "spillover feedback |phi1*phi2| must stay below 1");
  return {phi, r_bar / (1.0 - phi), r_bar};
}

SpilloverPath Spillover::path(std::size_t n_steps, double noise_std,
                              rng_stream& rng) const {
  if (n_steps < 1) fail(errc::domain, "spillover path needs at least one step");
  if (!(noise_std >= 0.0)) fail(errc::parameter, "noise scale must be nonnegative");
  SpilloverPath out;
  out.values.resize(n_steps);
  double prev = std::clamp(long_run_mean, 0.0, 1.0);
  for (std::size_t t = 0; t < n_steps; ++t) {
    double x = r_bar + phi * prev + noise_std * rng.next_normal();
    if (x < 0.0) {
      x = 0.0;
      ++out.clipped;
    } else if (x > 1.0) {
      x = 1.0;
      ++out.clipped;
    }
    out.values[t] = x;
    prev = x;
  }
  return out;
}

}  // namespace redstress
