#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "redstress/cli.hpp"
#include "redstress/errors.hpp"

using redstress::RunConfig;

namespace {

// Flags override file values, so the file is loaded before CLI11 binds the
// option defaults onto the config.
RunConfig preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") return redstress::load_config_file(argv[i + 1]);
  return RunConfig{};
}

void add_cells(RunConfig& cfg, const std::vector<std::string>& specs) {
  for (const auto& s : specs) {
    const auto bar = s.find('|');
    if (bar == std::string::npos || s.find('|', bar + 1) != std::string::npos)
      redstress::fail(redstress::errc::config, "--cell expects investor|fund, got '" + s + "'");
    cfg.cells.push_back({s.substr(0, bar), s.substr(bar + 1)});
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::vector<std::string> cell_flags;
  std::vector<double> param;
  std::string t_grid_flag;
  try {
    cfg = preload_config(argc, argv);

    CLI::App app{"liability redemption stress engine"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "configuration file (already applied)");
    app.add_option("--input", cfg.input, "flow CSV path");
    app.add_option("--out", cfg.out_dir, "output directory");
    app.add_option("--seed", cfg.seed, "simulation seed");
    app.add_option("--alpha", cfg.alpha, "measure confidence level")->check(CLI::Range(1e-12, 1.0));
    app.add_option("--format", cfg.format, "stdout format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--c", cfg.c_sd, "standard deviation multiple");
    app.add_option("--cell", cell_flags, "restrict to a cell, investor|fund (repeatable)");
    app.add_option("--min-tna", cfg.filter.min_tna, "minimum holding size");
    app.add_flag("--exclude-mandates", cfg.filter.exclude_mandates,
                 "drop mandate and dedicated funds");
    app.add_option("--date-from", cfg.filter.date_from, "first date, inclusive");
    app.add_option("--date-to", cfg.filter.date_to, "last date, inclusive");
    app.add_option("--severity", cfg.severity_family, "severity family");
    app.add_option("--copula", cfg.copula_family, "copula family");
    app.add_option("--theta", cfg.theta, "copula parameter");
    app.add_option("--param", param, "user-supplied p,mu,sigma")->delimiter(',');
    app.add_option("--n-units", cfg.n_units, "effective number of unitholders");
    app.add_option("--herfindahl", cfg.herfindahl, "liability concentration index");
    app.add_option("--t-grid", t_grid_flag, "stress horizons in years, comma-separated");
    app.add_option("--n-sims", cfg.n_sims, "number of simulations");
    app.add_option("--horizon-days", cfg.horizon_days, "aggregation horizon in days");
    app.add_option("--rho-time", cfg.rho_time, "daily autocorrelation of the horizon copula");
    app.add_flag("--dump-samples", cfg.dump_samples, "write raw samples.csv");
    app.add_option("--bond", cfg.bond_series, "bond index level CSV");
    app.add_option("--stock", cfg.stock_series, "stock index level CSV");
    app.add_option("--vix", cfg.vix_series, "volatility index level CSV");
    app.add_option("--fund-returns", cfg.fund_returns, "fund return CSV");
    app.add_option("--market-returns", cfg.market_returns, "market return CSV");
    app.add_option("--lags", cfg.lags, "flow-performance lag order");
    app.add_option("--window", cfg.window, "rolling regression window");
    app.add_option("--factor-horizon", cfg.factor_horizon, "factor return horizon in days");
    app.add_option("--vix-threshold", cfg.vix_threshold, "high-volatility regime cutoff");

    auto* stats = app.add_subcommand("stats", "per-cell empirical risk measures");
    auto* fit_zi = app.add_subcommand("fit-zi", "zero-inflated severity calibration");
    auto* fit_im = app.add_subcommand("fit-im", "unitholder model calibration");
    auto* fit_cop = app.add_subcommand("fit-copula", "frequency correlation calibration");
    auto* stress = app.add_subcommand("stress", "parametric stress scenarios");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo redemption sampling");
    auto* factors = app.add_subcommand("factors", "factor and performance regressions");
    for (auto* sub : {stats, fit_zi, fit_im, fit_cop, stress, simulate, factors})
      sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    add_cells(cfg, cell_flags);
    if (!param.empty()) {
      if (param.size() != 3)
        redstress::fail(redstress::errc::config, "--param expects exactly p,mu,sigma");
      cfg.p = param[0];
      cfg.mu = param[1];
      cfg.sigma = param[2];
      cfg.has_param = true;
    }
    if (!t_grid_flag.empty()) redstress::set_config(cfg, "t_grid", t_grid_flag);
    redstress::set_config(cfg, "format", cfg.format);
    redstress::set_config(cfg, "severity_family", cfg.severity_family);
    redstress::set_config(cfg, "copula_family", cfg.copula_family);

    if (stats->parsed()) return redstress::cmd_stats(cfg);
    if (fit_zi->parsed()) return redstress::cmd_fit(cfg, redstress::FitModel::zi);
    if (fit_im->parsed()) return redstress::cmd_fit(cfg, redstress::FitModel::im);
    if (fit_cop->parsed()) return redstress::cmd_fit(cfg, redstress::FitModel::copula);
    if (stress->parsed()) return redstress::cmd_stress(cfg);
    if (simulate->parsed()) return redstress::cmd_simulate(cfg);
    if (factors->parsed()) return redstress::cmd_factors(cfg);
    std::fprintf(stderr, "error: no command selected\n");
    return 1;
  } catch (const redstress::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
