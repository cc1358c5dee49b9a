#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "redstress/flowdata.hpp"

namespace redstress {

enum class FitModel { zi, im, copula };

struct RunConfig {
  // inputs
  std::string input;  // flow csv
  std::string bond_series, stock_series, vix_series;
  std::string fund_returns, market_returns;
  std::vector<CategoryCell> cells;  // empty: every cell present in the data
  PoolFilter filter;

  // model choices
  std::string severity_family = "beta";
  std::string copula_family = "product";
  double theta = 0.0;

  // measure parameters
  double alpha = 0.99;
  double c_sd = 3.0;
  std::vector<double> t_grid = {0.25, 0.5, 1.0, 2.0, 5.0, 10.0};  // years, kept sorted

  // user-supplied model parameters; has_param set once p/mu/sigma are given
  bool has_param = false;
  double p = 0.0, mu = 0.0, sigma = 0.0;
  double n_units = 0.0;
  double herfindahl = 0.0;          // 0: equal weights 1/n
  double sev_a = 0.0, sev_b = 0.0;  // direct severity parameters, bypass mu/sigma

  // simulation
  std::size_t n_sims = 100000;
  std::uint64_t seed = 0;
  std::size_t horizon_days = 1;
  double rho_time = 0.0;
  bool dump_samples = false;

  // factor analysis
  std::size_t factor_horizon = 1;
  std::size_t lags = 1;
  std::size_t window = 60;
  double vix_threshold = 30.0;

  // coherency shock matrices, emitted by stress when all four lists are set
  std::vector<double> investor_anchors, fund_anchors;
  std::vector<double> fund_multipliers, investor_multipliers;
  std::string coherency_rule = "C3";

  // output
  std::string out_dir = ".";
  std::string format = "csv";  // which table is echoed to stdout
};

// Applies one key = value pair; unknown keys and unparseable values are
// config errors. Keys are globally unique across sections.
void set_config(RunConfig& cfg, const std::string& key, const std::string& value);

// Key-value file with optional [section] headers and #/; comment lines.
// Precedence: built-in defaults, then the file, then command-line flags.
RunConfig load_config_file(const std::string& path);

// Observation-count confidence code with the bucket legend
// 0–10, 11–50, 51–200, 201–1000, 1001–10000, 10000+.
std::string bucket_label(std::size_t n);

// Each command writes <out_dir>/<command>.csv and .json and echoes the
// format selected by cfg.format to stdout. Returns the process exit code:
// 0 unless a fatal error aborts the whole run; per-cell failures are
// recorded in the report's note column and never abort a batch.
int cmd_stats(const RunConfig& cfg);
int cmd_fit(const RunConfig& cfg, FitModel model);
int cmd_stress(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);
int cmd_factors(const RunConfig& cfg);

}  // namespace redstress
