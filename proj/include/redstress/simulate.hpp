#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "redstress/copula.hpp"
#include "redstress/liability.hpp"
#include "redstress/riskmeasures.hpp"
#include "redstress/rng.hpp"
#include "redstress/zeroinflated.hpp"

namespace redstress {

// Simulation k always consumes the counter-based stream (seed, k), so the
// output is bit-identical for a fixed (seed, n_sims) whatever the chunking
// or thread count. chunk_size only batches work for the scheduler.
struct SimConfig {
  std::size_t n_sims = 100000;
  std::uint64_t seed = 0;
  std::size_t chunk_size = 4096;
};

struct SimSample {
  std::vector<double> values;  // redemption rates in [0,1], one per simulation
  std::string model;           // human-readable descriptor of the generator
};

// One joint draw of n uniforms with the given dependence. Clayton uses the
// shared gamma-frailty transform, Normal the one-factor construction,
// UpperFrechet a common uniform.
void sample_copula(const CopulaSpec& c, std::size_t n, rng_stream& rng,
                   std::vector<double>& out);
std::vector<double> sample_copula(const CopulaSpec& c, std::size_t n, rng_stream& rng);

// Redemption rate draws for the correlated unitholder model: per simulation,
// joint uniforms -> redemption events u_i >= 1-p, severities by quantile
// transform, rate = sum of w_i * E_i * X_i. The structure needs explicit
// weights, or a summary whose herfindahl equals 1/n (equal weights).
SimSample simulate_cm(const IMModel& m, const CopulaSpec& c, const SimConfig& cfg);

// Zero-inflated reduction: event times severity, single unitholder.
SimSample simulate_zi(const ZIModel& m, const SimConfig& cfg);

// One daily redemption rate drawn from the given stream.
using DailySampler = std::function<double(rng_stream&)>;
DailySampler make_daily_sampler(const IMModel& m, const CopulaSpec& c);
DailySampler make_daily_sampler(const ZIModel& m);

// Per-path daily maxima and sums, for compounding diagnostics.
struct HorizonDiagnostics {
  std::vector<double> max_daily;
  std::vector<double> sum_daily;
};

// Multi-day redemption rate R = 1 - prod(1 - R_h). Daily rates are the
// empirical quantile table of a 1e5-draw calibration run, driven through a
// Gaussian AR(1) path with autocorrelation rho_time (equivalently the
// Toeplitz Normal copula with entries rho^|i-j|).
SimSample aggregate_over_horizon(const DailySampler& daily, std::size_t n_h,
                                 double rho_time, const SimConfig& cfg,
                                 HorizonDiagnostics* diag = nullptr);

// Sorted order statistics of n_draws daily rates, the table behind
// aggregate_over_horizon.
std::vector<double> empirical_quantile_table(const DailySampler& daily,
                                             std::uint64_t seed,
                                             std::size_t n_draws = 100000);

// Quantile of a sorted table at level u: midpoint (Hazen) positions, linear
// interpolation between adjacent order statistics, flat beyond the ends.
double table_quantile(const std::vector<double>& sorted, double u);

struct McMeasures {
  MeasureReport report;  // empirical mean / sd-measure / quantile / cvar
  double mean_se = 0.0;
  double sd_se = 0.0;
  double quantile_se = 0.0;  // order-statistic bracket at one sigma
  double cvar_se = 0.0;      // tail std / sqrt(tail count)
  double stress = 0.0;       // empirical quantile matching the return time
  bool quantile_degenerate = false;  // expected tail count below one point
};

// Empirical risk measures with standard errors; stress for a horizon of
// t_years (260 market days per year) is the positive-part quantile at
// 1 - 1/(p_eff * t_days), zero when the horizon is below one expected event.
McMeasures mc_risk_measures(const SimSample& s, double alpha, double c_sd,
                            double t_years);

struct KSResult {
  double statistic = 0.0;
  bool pass_at_99 = false;
};

// Two-sample Kolmogorov-Smirnov: sup-distance of the empirical CDFs, pass
// iff statistic < 1.628 * sqrt((n_a + n_b) / (n_a * n_b)).
KSResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

struct SpilloverPath {
  std::vector<double> values;
  std::size_t clipped = 0;  // steps clipped to keep the rate in [0,1]
};

// AR(1) feedback of redemptions through performance: phi = phi1 * phi2,
// long-run mean r_bar / (1 - phi).
struct Spillover {
  double phi = 0.0;
  double long_run_mean = 0.0;
  double r_bar = 0.0;

  // R(t) = r_bar + phi R(t-1) + u(t), Gaussian noise, started at the
  // long-run mean.
  SpilloverPath path(std::size_t n_steps, double noise_std, rng_stream& rng) const;
};

Spillover spillover_scaling(double phi1, double phi2, double r_bar);

}  // namespace redstress
