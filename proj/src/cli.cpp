#include "redstress/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "redstress/copula.hpp"
#include "redstress/errors.hpp"
#include "redstress/factors.hpp"
#include "redstress/liability.hpp"
#include "redstress/riskmeasures.hpp"
#include "redstress/severity.hpp"
#include "redstress/simulate.hpp"
#include "redstress/zeroinflated.hpp"

namespace redstress {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

bool numeric_token(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

// Free-text fields (labels, error notes) may carry CSV control characters;
// they are mapped to spaces so every emitted row keeps its column count.
std::string sanitize_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') c = ';';
  return s;
}

// Data-driven key fields are rejected instead of silently rewritten.
void check_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") != std::string::npos)
    fail(errc::config, "category name contains CSV control characters: " + sanitize_field(s));
}

std::size_t env_thread_count() {
  const char* s = std::getenv("REDSTRESS_THREADS");
  if (s == nullptr || *s == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(s, &end, 10);
  if (end == s || *end != '\0' || v == 0)
    fail(errc::config, "REDSTRESS_THREADS must be a positive integer");
  return std::min<unsigned long>(v, 256);
}

// Cell-indexed work with a fixed output slot per index, so the emitted row
// order never depends on the thread count.
template <class F>
void for_each_index(std::size_t n, F fn) {
  const std::size_t threads = std::min(env_thread_count(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

ordered_json base_meta(const char* command) {
  ordered_json j;
  j["schema_version"] = "1";
  j["command"] = command;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::config, "cannot write " + path.string());
  out << content;
}

void emit(const RunConfig& cfg, const std::string& command, const Table& t, ordered_json meta) {
  std::filesystem::create_directories(cfg.out_dir);
  std::string csv;
  auto append_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) csv += ',';
      csv += row[i];
    }
    csv += '\n';
  };
  append_row(t.columns);
  for (const auto& row : t.rows) append_row(row);

  meta["columns"] = t.columns;
  auto rows = ordered_json::array();
  for (const auto& row : t.rows) {
    ordered_json o;
    for (std::size_t i = 0; i < row.size(); ++i) {
      double v = 0.0;
      if (numeric_token(row[i], v))
        o[t.columns[i]] = v;
      else
        o[t.columns[i]] = row[i];
    }
    rows.push_back(std::move(o));
  }
  meta["rows"] = std::move(rows);
  std::string json = meta.dump(2);
  json += '\n';

  const auto dir = std::filesystem::path(cfg.out_dir);
  write_file(dir / (command + ".csv"), csv);
  write_file(dir / (command + ".json"), json);
  std::cout << (cfg.format == "json" ? json : csv);
}

std::vector<FlowRecord> filtered(const std::vector<FlowRecord>& records, const PoolFilter& f) {
  std::vector<FlowRecord> out;
  for (const auto& r : records) {
    if (f.exclude_mandates && r.fund_kind == FundKind::mandate_or_dedicated) continue;
    if (r.tna_held < f.min_tna) continue;
    if (!f.date_from.empty() && r.date < f.date_from) continue;
    if (!f.date_to.empty() && r.date > f.date_to) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<CategoryCell> derive_cells(const std::vector<FlowRecord>& records) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records) seen.emplace(r.investor_category, r.fund_category);
  std::vector<CategoryCell> cells;
  for (const auto& [inv, fund] : seen) cells.push_back({inv, fund});
  return cells;
}

std::vector<CategoryCell> select_cells(const RunConfig& cfg,
                                       const std::vector<FlowRecord>& records) {
  auto cells = cfg.cells.empty() ? derive_cells(filtered(records, cfg.filter)) : cfg.cells;
  for (const auto& c : cells) {
    check_field(c.investor_category);
    check_field(c.fund_category);
  }
  return cells;
}

SevFamily sev_family_from(const std::string& name) {
  if (name == "beta") return SevFamily::Beta;
  if (name == "kumaraswamy") return SevFamily::Kumaraswamy;
  if (name == "logitnormal") return SevFamily::LogitNormal;
  if (name == "truncgamma") return SevFamily::TruncGamma;
  if (name == "truncloglogistic") return SevFamily::TruncLogLogistic;
  fail(errc::config, "unknown severity family: " + name);
}

CopFamily cop_family_from(const std::string& name) {
  if (name == "product") return CopFamily::Product;
  if (name == "clayton") return CopFamily::Clayton;
  if (name == "normal") return CopFamily::Normal;
  if (name == "upperfrechet") return CopFamily::UpperFrechet;
  fail(errc::config, "unknown copula family: " + name);
}

const char* sev_name(SevFamily f) {
  switch (f) {
    case SevFamily::Beta: return "beta";
    case SevFamily::Kumaraswamy: return "kumaraswamy";
    case SevFamily::LogitNormal: return "logitnormal";
    case SevFamily::TruncGamma: return "truncgamma";
    case SevFamily::TruncLogLogistic: return "truncloglogistic";
  }
  return "?";
}

IngestReport load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) fail(errc::config, "no input file configured");
  return read_flow_csv_file(cfg.input);
}

void add_ingest_meta(ordered_json& meta, const RunConfig& cfg, const IngestReport& ingest) {
  meta["input"] = cfg.input;
  meta["records"] = ingest.records.size();
  auto errs = ordered_json::array();
  for (const auto& e : ingest.row_errors) {
    ordered_json o;
    o["line"] = e.line;
    o["message"] = e.message;
    errs.push_back(std::move(o));
  }
  meta["row_errors"] = std::move(errs);
}

// Per-fund daily gross rates within one cell, after filters. Duplicate rows
// for a (fund, date) are merged before the rate is taken, matching pool().
std::map<std::string, std::pair<std::vector<double>, FundKind>> rates_by_fund(
    const std::vector<FlowRecord>& records, const CategoryCell& cell, const PoolFilter& f) {
  struct Holding {
    double tna = 0.0, outflow = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Holding> grouped;
  std::map<std::string, FundKind> kinds;
  for (const auto& r : filtered(records, f)) {
    if (r.investor_category != cell.investor_category || r.fund_category != cell.fund_category)
      continue;
    auto& h = grouped[{r.fund_id, r.date}];
    h.tna += r.tna_held;
    h.outflow += r.outflow;
    kinds.emplace(r.fund_id, r.fund_kind);
  }
  std::map<std::string, std::pair<std::vector<double>, FundKind>> out;
  for (const auto& [key, h] : grouped) {
    if (!(h.tna > 0.0)) continue;
    auto& slot = out[key.first];
    slot.first.push_back(gross_rate(h.outflow, h.tna));
    slot.second = kinds.at(key.first);
  }
  return out;
}

// Mirrors the zero-inflated fitters' moment conventions: observations at one
// clamped just below it, positive-part sample standard deviation.
bool fund_zi_moments(const std::vector<double>& rates, double& p, double& mu, double& sd) {
  std::vector<double> y;
  for (double v : rates)
    if (v > 0.0) y.push_back(std::min(v, 1.0 - 1e-10));
  p = static_cast<double>(y.size()) / static_cast<double>(rates.size());
  if (y.size() < 2) return false;
  mu = 0.0;
  for (double v : y) mu += v;
  mu /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mu) * (v - mu);
  sd = std::sqrt(ss / static_cast<double>(y.size() - 1));
  return true;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<std::string> measure_fields(const MeasureReport& r) {
  return {fmt(r.mean), fmt(r.sd_measure), fmt(r.var), fmt(r.cvar),
          std::isfinite(r.ratio) ? fmt(r.ratio) : std::string("inf")};
}

SeverityDist severity_from_config(const RunConfig& cfg) {
  if (cfg.sev_a != 0.0 || cfg.sev_b != 0.0)
    return make_severity(sev_family_from(cfg.severity_family), cfg.sev_a, cfg.sev_b);
  if (cfg.severity_family != "beta")
    fail(errc::config,
         "severity from (mu, sigma) needs the beta family; pass sev_a/sev_b for others");
  const auto [a, b] = beta_from_musigma(cfg.mu, cfg.sigma);
  return make_severity(SevFamily::Beta, a, b);
}

}  // namespace

std::string bucket_label(std::size_t n) {
  if (n <= 10) return "0–10";
  if (n <= 50) return "11–50";
  if (n <= 200) return "51–200";
  if (n <= 1000) return "201–1000";
  if (n <= 10000) return "1001–10000";
  return "10000+";
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!numeric_token(value, v)) fail(errc::config, key + ": expected a number, got '" + value + "'");
  return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v < 0.0 || v != std::floor(v) || v > 9e15)
    fail(errc::config, key + ": expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(errc::config, key + ": expected a boolean, got '" + value + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  if (out.empty()) fail(errc::config, key + ": expected a comma-separated list");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "input") cfg.input = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "format") {
    if (value != "csv" && value != "json") fail(errc::config, "format must be csv or json");
    cfg.format = value;
  } else if (key == "cells") {
    cfg.cells.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ';')) {
      const auto bar = item.find('|');
      if (bar == std::string::npos || item.find('|', bar + 1) != std::string::npos)
        fail(errc::config, "cells: each entry must be investor|fund");
      cfg.cells.push_back({trim(item.substr(0, bar)), trim(item.substr(bar + 1))});
    }
    if (cfg.cells.empty()) fail(errc::config, "cells: empty list");
  } else if (key == "min_tna") cfg.filter.min_tna = to_double(key, value);
  else if (key == "exclude_mandates") cfg.filter.exclude_mandates = to_bool(key, value);
  else if (key == "date_from") cfg.filter.date_from = value;
  else if (key == "date_to") cfg.filter.date_to = value;
  else if (key == "severity_family") {
    sev_family_from(value);  // validates the name
    cfg.severity_family = value;
  } else if (key == "copula_family") {
    cop_family_from(value);
    cfg.copula_family = value;
  }
  else if (key == "theta") cfg.theta = to_double(key, value);
  else if (key == "alpha") {
    cfg.alpha = to_double(key, value);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail(errc::config, "alpha must lie in (0,1)");
  } else if (key == "c") {
    cfg.c_sd = to_double(key, value);
    if (!(cfg.c_sd > 0.0)) fail(errc::config, "c must be positive");
  } else if (key == "t_grid") {
    auto grid = to_list(key, value);
    for (double t : grid)
      if (!(t > 0.0)) fail(errc::config, "t_grid entries must be positive years");
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    cfg.t_grid = std::move(grid);
  } else if (key == "p") {
    cfg.p = to_double(key, value);
    cfg.has_param = true;
  } else if (key == "mu") {
    cfg.mu = to_double(key, value);
    cfg.has_param = true;
  } else if (key == "sigma") {
    cfg.sigma = to_double(key, value);
    cfg.has_param = true;
  } else if (key == "n_units") cfg.n_units = to_double(key, value);
  else if (key == "herfindahl") cfg.herfindahl = to_double(key, value);
  else if (key == "sev_a") cfg.sev_a = to_double(key, value);
  else if (key == "sev_b") cfg.sev_b = to_double(key, value);
  else if (key == "n_sims") {
    cfg.n_sims = to_size(key, value);
    if (cfg.n_sims == 0) fail(errc::config, "n_sims must be positive");
  } else if (key == "seed") {
    const double v = to_double(key, value);
    if (v < 0.0 || v != std::floor(v)) fail(errc::config, "seed must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(v);
  } else if (key == "horizon_days") {
    cfg.horizon_days = to_size(key, value);
    if (cfg.horizon_days == 0) fail(errc::config, "horizon_days must be positive");
  } else if (key == "rho_time") cfg.rho_time = to_double(key, value);
  else if (key == "dump_samples") cfg.dump_samples = to_bool(key, value);
  else if (key == "bond_series") cfg.bond_series = value;
  else if (key == "stock_series") cfg.stock_series = value;
  else if (key == "vix_series") cfg.vix_series = value;
  else if (key == "fund_returns") cfg.fund_returns = value;
  else if (key == "market_returns") cfg.market_returns = value;
  else if (key == "factor_horizon") {
    cfg.factor_horizon = to_size(key, value);
    if (cfg.factor_horizon == 0) fail(errc::config, "factor_horizon must be positive");
  } else if (key == "lags") cfg.lags = to_size(key, value);
  else if (key == "window") {
    cfg.window = to_size(key, value);
    if (cfg.window < 3) fail(errc::config, "window must be at least 3");
  } else if (key == "vix_threshold") cfg.vix_threshold = to_double(key, value);
  else if (key == "investor_anchors") cfg.investor_anchors = to_list(key, value);
  else if (key == "fund_anchors") cfg.fund_anchors = to_list(key, value);
  else if (key == "fund_multipliers") cfg.fund_multipliers = to_list(key, value);
  else if (key == "investor_multipliers") cfg.investor_multipliers = to_list(key, value);
  else if (key == "coherency_rule") {
    if (value != "C1" && value != "C2" && value != "C3")
      fail(errc::config, "coherency_rule must be C1, C2, or C3");
    cfg.coherency_rule = value;
  } else {
    fail(errc::config, "unknown config key: " + key);
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::config, "cannot open config file " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        fail(errc::config, "config line " + std::to_string(lineno) + ": unterminated section");
      continue;  // sections organize the file; keys are globally unique
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      fail(errc::config, "config line " + std::to_string(lineno) + ": expected key = value");
    set_config(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

int cmd_stats(const RunConfig& cfg) {
  const auto ingest = load_input(cfg);
  const auto cells = select_cells(cfg, ingest.records);

  Table t;
  t.columns = {"investor_category", "fund_category", "n",    "n_zero", "n_positive",
               "confidence",        "low_confidence", "mean", "sd_measure", "var",
               "cvar",              "ratio",          "note"};
  t.rows.resize(cells.size());
  for_each_index(cells.size(), [&](std::size_t i) {
    const auto sample = pool(ingest.records, cells[i], cfg.filter);
    std::vector<std::string> row{cells[i].investor_category, cells[i].fund_category,
                                 std::to_string(sample.n()), std::to_string(sample.n0),
                                 std::to_string(sample.n1), bucket_label(sample.n())};
    try {
      const auto r = empirical_measures(sample, cfg.c_sd, cfg.alpha);
      row.push_back(r.low_confidence ? "1" : "0");
      for (auto& f : measure_fields(r)) row.push_back(std::move(f));
      row.emplace_back();
    } catch (const error& e) {
      row.insert(row.end(), {"", "", "", "", "", ""});
      row.push_back(sanitize_field(e.what()));
    }
    t.rows[i] = std::move(row);
  });

  auto meta = base_meta("stats");
  meta["alpha"] = cfg.alpha;
  meta["c"] = cfg.c_sd;
  add_ingest_meta(meta, cfg, ingest);
  emit(cfg, "stats", t, std::move(meta));
  return 0;
}

namespace {

int cmd_fit_zi(const RunConfig& cfg) {
  const auto ingest = load_input(cfg);
  const auto cells = select_cells(cfg, ingest.records);

  Table t;
  t.columns = {"investor_category", "fund_category", "n",       "n_zero",   "n_positive",
               "p",                 "family",        "mle_a",   "mle_b",    "mle_mu",
               "mle_sigma",         "loglik",        "iterations", "clamped", "converged",
               "mm_a",              "mm_b",          "mm_mu",   "mm_sigma", "note"};
  t.rows.resize(cells.size());
  for_each_index(cells.size(), [&](std::size_t i) {
    const auto sample = pool(ingest.records, cells[i], cfg.filter);
    std::vector<std::string> row{cells[i].investor_category, cells[i].fund_category,
                                 std::to_string(sample.n()), std::to_string(sample.n0),
                                 std::to_string(sample.n1)};
    std::string note;
    auto blank = [&](std::size_t k) { row.insert(row.end(), k, ""); };
    if (sample.empty()) {
      blank(14);
      row.push_back("empty sample");
      t.rows[i] = std::move(row);
      return;
    }
    try {
      const auto mle = fit_mle(sample);
      row.push_back(fmt(mle.p));
      if (mle.severity) {
        const auto mom = moments(*mle.severity);
        row.push_back(sev_name(mle.severity->family));
        row.push_back(fmt(mle.severity->a));
        row.push_back(fmt(mle.severity->b));
        row.push_back(fmt(mom.mean));
        row.push_back(fmt(std::sqrt(mom.variance)));
        row.push_back(fmt(mle.loglik));
        row.push_back(std::to_string(mle.iterations));
        row.push_back(std::to_string(mle.clamped));
        row.push_back(mle.converged ? "1" : "0");
      } else {
        blank(9);
        note = "severity undetermined: fewer than 2 positive observations";
      }
    } catch (const error& e) {
      blank(10);
      note = sanitize_field(e.what());
    }
    try {
      const auto mm = fit_mm(sample);
      if (mm.severity) {
        const auto mom = moments(*mm.severity);
        row.push_back(fmt(mm.severity->a));
        row.push_back(fmt(mm.severity->b));
        row.push_back(fmt(mom.mean));
        row.push_back(fmt(std::sqrt(mom.variance)));
      } else {
        blank(4);
      }
    } catch (const error& e) {
      blank(4);
      if (!note.empty()) note += "; ";
      note += sanitize_field(e.what());
    }
    row.push_back(note);
    t.rows[i] = std::move(row);
  });

  auto meta = base_meta("fit-zi");
  add_ingest_meta(meta, cfg, ingest);
  emit(cfg, "fit-zi", t, std::move(meta));
  return 0;
}

int cmd_fit_im(const RunConfig& cfg) {
  const auto ingest = load_input(cfg);
  const auto cells = select_cells(cfg, ingest.records);

  Table t;
  t.columns = {"investor_category", "fund_category", "funds",     "used_funds",
               "skipped_funds",     "p_tilde",       "mu_tilde",  "sigma_tilde",
               "criterion",         "unrealistic",   "note"};
  t.rows.resize(cells.size());
  for_each_index(cells.size(), [&](std::size_t i) {
    const auto by_fund = rates_by_fund(ingest.records, cells[i], cfg.filter);
    std::vector<FundMomentEstimates> funds;
    std::vector<double> weights;  // observation counts
    for (const auto& [fund_id, data] : by_fund) {
      const auto& [rates, kind] = data;
      double p = 0.0, mu = 0.0, sd = 0.0;
      if (!fund_zi_moments(rates, p, mu, sd)) continue;
      double eff_n = 1.0;
      if (kind == FundKind::pooled) {
        if (!(cfg.n_units >= 1.0)) continue;  // pooled funds need a configured size
        eff_n = cfg.n_units;
      }
      funds.push_back({p, mu, sd, eff_n});
      weights.push_back(static_cast<double>(rates.size()));
    }
    std::vector<std::string> row{cells[i].investor_category, cells[i].fund_category,
                                 std::to_string(by_fund.size()), std::to_string(funds.size()),
                                 std::to_string(by_fund.size() - funds.size())};
    if (funds.empty()) {
      row.insert(row.end(), {"", "", "", "", ""});
      row.push_back(
          "no usable funds: need 2 positive observations and a unitholder count per fund");
    } else {
      try {
        const auto cal = calibrate_im(funds, weights);
        row.push_back(fmt(cal.p_tilde));
        row.push_back(fmt(cal.mu_tilde));
        row.push_back(fmt(cal.sigma_tilde));
        row.push_back(fmt(cal.criterion));
        row.push_back(cal.unrealistic ? "1" : "0");
        row.emplace_back();
      } catch (const error& e) {
        row.insert(row.end(), {"", "", "", "", ""});
        row.push_back(sanitize_field(e.what()));
      }
    }
    t.rows[i] = std::move(row);
  });

  auto meta = base_meta("fit-im");
  meta["n_units"] = cfg.n_units;
  add_ingest_meta(meta, cfg, ingest);
  emit(cfg, "fit-im", t, std::move(meta));
  return 0;
}

int cmd_fit_copula(const RunConfig& cfg) {
  const auto family = cop_family_from(cfg.copula_family);
  if (family != CopFamily::Clayton && family != CopFamily::Normal)
    fail(errc::config, "fit-copula needs copula_family clayton or normal");
  const auto ingest = load_input(cfg);
  const auto records = filtered(ingest.records, cfg.filter);
  const auto cells = select_cells(cfg, ingest.records);

  Table t;
  t.columns = {"investor_category", "fund_category", "days",  "mean_freq", "sd_freq",
               "herfindahl",        "family",        "theta", "pearson",   "note"};
  t.rows.resize(cells.size());
  for_each_index(cells.size(), [&](std::size_t i) {
    const auto series = daily_series(records, cells[i]);
    std::vector<std::string> row{cells[i].investor_category, cells[i].fund_category,
                                 std::to_string(series.dates.size())};
    if (series.dates.size() < 2) {
      row.insert(row.end(), {"", "", "", "", "", ""});
      row.push_back("needs at least 2 days of observations");
      t.rows[i] = std::move(row);
      return;
    }
    double mean = 0.0;
    for (double f : series.frequency) mean += f;
    mean /= static_cast<double>(series.frequency.size());
    const double sd = sample_sd(series.frequency);

    std::map<std::string, double> tna_by_fund;
    {
      std::map<std::pair<std::string, std::string>, double> tna_fd;
      for (const auto& r : records)
        if (r.investor_category == cells[i].investor_category &&
            r.fund_category == cells[i].fund_category)
          tna_fd[{r.fund_id, r.date}] += r.tna_held;
      for (const auto& [key, tna] : tna_fd) tna_by_fund[key.first] += tna;
    }
    std::vector<double> w;
    double total = 0.0;
    for (const auto& [fund_id, tna] : tna_by_fund)
      if (tna > 0.0) {
        w.push_back(tna);
        total += tna;
      }
    for (double& x : w) x /= total;  // from_weights expects ownership shares
    row.push_back(fmt(mean));
    row.push_back(fmt(sd));
    try {
      const double h = LiabilityStructure::from_weights(w).herfindahl();
      row.push_back(fmt(h));
      row.push_back(cfg.copula_family);
      const auto cal = calibrate_theta(mean, sd, h, family);
      row.push_back(fmt(cal.spec.theta));
      row.push_back(fmt(cal.pearson));
      row.emplace_back();
    } catch (const error& e) {
      while (row.size() + 1 < t.columns.size()) row.emplace_back();
      row.push_back(sanitize_field(e.what()));
    }
    t.rows[i] = std::move(row);
  });

  auto meta = base_meta("fit-copula");
  meta["copula_family"] = cfg.copula_family;
  add_ingest_meta(meta, cfg, ingest);
  emit(cfg, "fit-copula", t, std::move(meta));
  return 0;
}

void emit_coherency(const RunConfig& cfg) {
  CoherencyRule rule = CoherencyRule::C3;
  if (cfg.coherency_rule == "C1") rule = CoherencyRule::C1;
  if (cfg.coherency_rule == "C2") rule = CoherencyRule::C2;
  const auto m = coherency_shocks(cfg.investor_anchors, cfg.fund_anchors, cfg.fund_multipliers,
                                  cfg.investor_multipliers, rule);
  Table t;
  t.columns = {"fund", "investor", "shock"};
  for (std::size_t j = 0; j < m.shocks.size(); ++j)
    for (std::size_t k = 0; k < m.shocks[j].size(); ++k)
      t.rows.push_back({std::to_string(j), std::to_string(k), fmt(m.shocks[j][k])});
  auto meta = base_meta("coherency");
  meta["rule"] = cfg.coherency_rule;
  meta["clipped"] = m.clipped;
  emit(cfg, "coherency", t, std::move(meta));
}

}  // namespace

int cmd_fit(const RunConfig& cfg, FitModel model) {
  switch (model) {
    case FitModel::zi: return cmd_fit_zi(cfg);
    case FitModel::im: return cmd_fit_im(cfg);
    case FitModel::copula: return cmd_fit_copula(cfg);
  }
  fail(errc::config, "unknown fit model");
}

int cmd_stress(const RunConfig& cfg) {
  Table t;
  t.columns = {"investor_category", "fund_category", "p", "mu", "sigma", "t_years", "stress",
               "note"};
  auto meta = base_meta("stress");
  meta["alpha"] = cfg.alpha;

  if (cfg.has_param) {
    const auto severity = severity_from_config(cfg);
    const auto m = make_zi(cfg.p, severity);
    meta["p"] = cfg.p;
    meta["mu"] = cfg.mu;
    meta["sigma"] = cfg.sigma;
    for (double ty : cfg.t_grid)
      t.rows.push_back({"configured", "configured", fmt(cfg.p), fmt(cfg.mu), fmt(cfg.sigma),
                        fmt(ty), fmt(zi_stress(m, ty)), ""});
  } else {
    const auto ingest = load_input(cfg);
    const auto cells = select_cells(cfg, ingest.records);
    add_ingest_meta(meta, cfg, ingest);
    std::vector<std::vector<std::vector<std::string>>> cell_rows(cells.size());
    for_each_index(cells.size(), [&](std::size_t i) {
      const auto& cell = cells[i];
      const auto sample = pool(ingest.records, cell, cfg.filter);
      try {
        const auto fit = fit_mle(sample);
        if (!fit.severity)
          fail(errc::sample_size, "severity undetermined: fewer than 2 positive observations");
        const auto m = make_zi(fit.p, *fit.severity);
        const auto mom = moments(*fit.severity);
        for (double ty : cfg.t_grid)
          cell_rows[i].push_back({cell.investor_category, cell.fund_category, fmt(fit.p),
                                  fmt(mom.mean), fmt(std::sqrt(mom.variance)), fmt(ty),
                                  fmt(zi_stress(m, ty)), ""});
      } catch (const error& e) {
        cell_rows[i].push_back({cell.investor_category, cell.fund_category, "", "", "", "", "",
                                sanitize_field(e.what())});
      }
    });
    for (auto& rows : cell_rows)
      for (auto& r : rows) t.rows.push_back(std::move(r));
  }

  emit(cfg, "stress", t, std::move(meta));
  if (!cfg.investor_anchors.empty() && !cfg.fund_anchors.empty() &&
      !cfg.fund_multipliers.empty() && !cfg.investor_multipliers.empty())
    emit_coherency(cfg);
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  if (!cfg.has_param) fail(errc::config, "simulate needs p, mu, sigma");
  if (!(cfg.n_units >= 1.0)) fail(errc::config, "simulate needs n_units >= 1");
  if (cfg.severity_family != "beta")
    fail(errc::config, "the unitholder model derives a beta severity; set severity_family = beta");
  const double h = cfg.herfindahl > 0.0 ? cfg.herfindahl : 1.0 / cfg.n_units;
  const auto structure = LiabilityStructure::from_summary(cfg.n_units, h);
  const auto m = make_im(structure, cfg.p, cfg.mu, cfg.sigma);
  const auto c = make_copula(cop_family_from(cfg.copula_family), cfg.theta);
  const SimConfig sim{cfg.n_sims, cfg.seed, 4096};

  const SimSample s = cfg.horizon_days == 1
                          ? simulate_cm(m, c, sim)
                          : aggregate_over_horizon(make_daily_sampler(m, c), cfg.horizon_days,
                                                   cfg.rho_time, sim);
  const auto mc = mc_risk_measures(s, cfg.alpha, cfg.c_sd, cfg.t_grid.front());

  Table t;
  t.columns = {"key", "value"};
  auto kv = [&](const std::string& k, const std::string& v) { t.rows.push_back({k, v}); };
  kv("seed", std::to_string(cfg.seed));
  kv("n_sims", std::to_string(cfg.n_sims));
  kv("model", sanitize_field(s.model));
  kv("horizon_days", std::to_string(cfg.horizon_days));
  kv("rho_time", fmt(cfg.rho_time));
  kv("alpha", fmt(cfg.alpha));
  kv("c", fmt(cfg.c_sd));
  kv("mean", fmt(mc.report.mean));
  kv("mean_se", fmt(mc.mean_se));
  kv("sd", fmt((mc.report.sd_measure - mc.report.mean) / cfg.c_sd));
  kv("sd_se", fmt(mc.sd_se));
  kv("sd_measure", fmt(mc.report.sd_measure));
  kv("var", fmt(mc.report.var));
  kv("quantile_se", fmt(mc.quantile_se));
  kv("quantile_degenerate", mc.quantile_degenerate ? "1" : "0");
  kv("cvar", fmt(mc.report.cvar));
  kv("cvar_se", fmt(mc.cvar_se));
  kv("ratio", std::isfinite(mc.report.ratio) ? fmt(mc.report.ratio) : "inf");
  kv("low_confidence", mc.report.low_confidence ? "1" : "0");

  std::size_t zeros = 0;
  double mean_emp = 0.0;
  for (double v : s.values) {
    if (v == 0.0) ++zeros;
    mean_emp += v;
  }
  mean_emp /= static_cast<double>(s.values.size());
  const double sd_emp = sample_sd(s.values);
  kv("pnr_empirical", fmt(static_cast<double>(zeros) / static_cast<double>(s.values.size())));
  kv("variance_empirical", fmt(sd_emp * sd_emp));
  if (cfg.horizon_days == 1) {
    const auto an = cm_stats(m, c);
    kv("pnr_analytic", fmt(an.prob_no_redemption));
    kv("mean_analytic", fmt(an.mean));
    kv("variance_analytic", fmt(an.variance));
  }
  for (double ty : cfg.t_grid)
    kv("stress_" + fmt(ty), fmt(mc_risk_measures(s, cfg.alpha, cfg.c_sd, ty).stress));

  auto meta = base_meta("simulate");
  emit(cfg, "simulate", t, std::move(meta));

  if (cfg.dump_samples) {
    std::string csv = "date,value\n";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      csv += std::to_string(i);
      csv += ',';
      csv += fmt(s.values[i]);
      csv += '\n';
    }
    write_file(std::filesystem::path(cfg.out_dir) / "samples.csv", csv);
  }
  return 0;
}

int cmd_factors(const RunConfig& cfg) {
  const auto ingest = load_input(cfg);
  const auto records = filtered(ingest.records, cfg.filter);
  const auto cells = select_cells(cfg, ingest.records);
  if (cells.empty()) fail(errc::empty_sample, "factors: no category cells in the input");
  const auto& cell = cells.front();
  const auto series = daily_series(records, cell);

  Table t;
  t.columns = {"analysis", "key", "value"};
  auto kv = [&](const char* analysis, const std::string& k, const std::string& v) {
    t.rows.push_back({analysis, k, v});
  };
  auto soft = [&](const char* analysis, const std::function<void()>& body) {
    try {
      body();
    } catch (const error& e) {
      kv(analysis, "note", sanitize_field(e.what()));
    }
  };

  soft("decomposition", [&] {
    const auto d = decomposition_fits(series);
    kv("decomposition", "frequency_r2", fmt(d.frequency_only.centered_r2));
    kv("decomposition", "severity_r2", fmt(d.severity_only.centered_r2));
    kv("decomposition", "joint_r2", fmt(d.joint.centered_r2));
    kv("decomposition", "n_obs", std::to_string(d.joint.n_obs));
  });

  soft("autocorrelation", [&] {
    const auto a = autocorrelation(series.rate, 2);
    for (std::size_t k = 0; k < a.rho.size(); ++k) {
      kv("autocorrelation", "rho_" + std::to_string(k + 1), fmt(a.rho[k]));
      kv("autocorrelation", "p_value_" + std::to_string(k + 1), fmt(a.p_value[k]));
    }
    kv("autocorrelation", "max_rho", fmt(a.max_rho));
    kv("autocorrelation", "max_order", std::to_string(a.max_order));
    kv("autocorrelation", "significant", a.significant ? "1" : "0");
  });

  if (!cfg.bond_series.empty() && !cfg.stock_series.empty() && !cfg.vix_series.empty())
    soft("macro", [&] {
      const auto f = build_factor_series(read_series_csv_file(cfg.bond_series),
                                         read_series_csv_file(cfg.stock_series),
                                         read_series_csv_file(cfg.vix_series),
                                         cfg.factor_horizon);
      const auto r = macro_fit(series, f);
      const char* names[] = {"intercept", "bond", "stock", "vol"};
      for (std::size_t j = 0; j < 4; ++j) {
        kv("macro", names[j], fmt(r.coefficients[j]));
        kv("macro", std::string("se_") + names[j], fmt(r.std_errors[j]));
      }
      kv("macro", "r2", fmt(r.centered_r2));
      kv("macro", "n_obs", std::to_string(r.n_obs));
      kv("macro", "horizon_days", std::to_string(cfg.factor_horizon));
    });

  if (!cfg.vix_series.empty())
    soft("vix_regime", [&] {
      const double uplift =
          vix_conditional(series, read_series_csv_file(cfg.vix_series), cfg.vix_threshold);
      kv("vix_regime", "threshold", fmt(cfg.vix_threshold));
      kv("vix_regime", "uplift", fmt(uplift));
    });

  if (!cfg.fund_returns.empty() && !cfg.market_returns.empty())
    soft("flow_performance", [&] {
      std::map<std::string, double> fr, mr;
      for (const auto& d : read_series_csv_file(cfg.fund_returns)) fr[d.date] = d.value;
      for (const auto& d : read_series_csv_file(cfg.market_returns)) mr[d.date] = d.value;
      std::vector<double> rates, fund, mkt;
      for (std::size_t i = 0; i < series.dates.size(); ++i) {
        const auto fi = fr.find(series.dates[i]);
        const auto mi = mr.find(series.dates[i]);
        if (fi == fr.end() || mi == mr.end()) continue;
        rates.push_back(series.rate[i]);
        fund.push_back(fi->second);
        mkt.push_back(mi->second);
      }
      const auto r = flow_performance_fit(rates, fund, mkt, cfg.lags, cfg.window);
      kv("flow_performance", "market_alpha", fmt(r.market.coefficients[0]));
      kv("flow_performance", "market_beta", fmt(r.market.coefficients[1]));
      kv("flow_performance", "market_r2", fmt(r.market.centered_r2));
      kv("flow_performance", "intercept", fmt(r.flow.coefficients[0]));
      for (std::size_t hlag = 1; hlag <= cfg.lags; ++hlag) {
        const std::size_t base = 1 + 3 * (hlag - 1);
        const std::string suffix = "_lag_" + std::to_string(hlag);
        kv("flow_performance", "rate" + suffix, fmt(r.flow.coefficients[base]));
        kv("flow_performance", "se_rate" + suffix, fmt(r.flow.std_errors[base]));
        kv("flow_performance", "alpha" + suffix, fmt(r.flow.coefficients[base + 1]));
        kv("flow_performance", "se_alpha" + suffix, fmt(r.flow.std_errors[base + 1]));
        kv("flow_performance", "return" + suffix, fmt(r.flow.coefficients[base + 2]));
        kv("flow_performance", "se_return" + suffix, fmt(r.flow.std_errors[base + 2]));
      }
      kv("flow_performance", "r2", fmt(r.flow.centered_r2));
      kv("flow_performance", "n_obs", std::to_string(r.flow.n_obs));
      kv("flow_performance", "relative_performance_effect",
         r.relative_performance_effect ? "1" : "0");
      kv("flow_performance", "absolute_performance_effect",
         r.absolute_performance_effect ? "1" : "0");
    });

  auto meta = base_meta("factors");
  meta["investor_category"] = cell.investor_category;
  meta["fund_category"] = cell.fund_category;
  add_ingest_meta(meta, cfg, ingest);
  emit(cfg, "factors", t, std::move(meta));
  return 0;
}

}  // namespace redstress
