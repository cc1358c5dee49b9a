#include "redstress/flowdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "redstress/errors.hpp"

namespace redstress {

RedemptionSample make_sample(CategoryCell cell, std::vector<double> values) {
  RedemptionSample s;
  s.cell = std::move(cell);
  for (double v : values) {
    if (v < 0.0 || v > 1.0) fail(errc::domain, "redemption rate outside [0,1]");
    if (v > 0.0)
      ++s.n1;
    else
      ++s.n0;
  }
  s.values = std::move(values);
  return s;
}

double gross_rate(double outflow, double tna) {
  if (!(tna > 0.0)) fail(errc::invalid_denominator, "gross_rate: tna must be positive");
  if (outflow < 0.0 || outflow > tna)
    fail(errc::constraint_violation, "gross_rate: outflow must lie in [0, tna]");
  return outflow / tna;
}

NetRates net_rates(double inflow, double outflow, double tna) {
  if (!(tna > 0.0)) fail(errc::invalid_denominator, "net_rates: tna must be positive");
  if (inflow < 0.0) fail(errc::constraint_violation, "net_rates: inflow must be >= 0");
  if (outflow < 0.0 || outflow > tna)
    fail(errc::constraint_violation, "net_rates: outflow must lie in [0, tna]");
  NetRates r;
  r.net_flow_rate = (inflow - outflow) / tna;
  r.net_redemption_rate = std::max(0.0, (outflow - inflow) / tna);
  return r;
}

double implied_net_flow(double tna_t1, double tna_t0, double nav_t1, double nav_t0) {
  if (!(nav_t0 > 0.0)) fail(errc::invalid_denominator, "implied_net_flow: nav_t0 must be positive");
  if (tna_t0 < 0.0) fail(errc::constraint_violation, "implied_net_flow: tna_t0 must be >= 0");
  return tna_t1 - (nav_t1 / nav_t0) * tna_t0;
}

double fund_rate_from_categories(const std::vector<double>& weights,
                                 const std::vector<double>& rates) {
  if (weights.size() != rates.size())
    fail(errc::normalization, "fund_rate_from_categories: size mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) fail(errc::normalization, "fund_rate_from_categories: negative weight");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-10)
    fail(errc::normalization, "fund_rate_from_categories: weights must sum to 1");
  double r = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (rates[i] < 0.0 || rates[i] > 1.0)
      fail(errc::domain, "fund_rate_from_categories: rate outside [0,1]");
    r += weights[i] * rates[i];
  }
  return r;
}

namespace {

bool in_cell(const FlowRecord& r, const CategoryCell& c) {
  return r.investor_category == c.investor_category && r.fund_category == c.fund_category;
}

bool in_date_range(const std::string& d, const PoolFilter& f) {
  if (!f.date_from.empty() && d < f.date_from) return false;
  if (!f.date_to.empty() && d > f.date_to) return false;
  return true;
}

struct Holding {
  double tna = 0.0;
  double outflow = 0.0;
};

// One aggregated holding per (fund, date); duplicate rows for the same key
// are merged so the rate stays one-per-fund-per-day.
std::map<std::pair<std::string, std::string>, Holding> group_by_fund_date(
    const std::vector<FlowRecord>& records, const CategoryCell& cell,
    const PoolFilter* filter) {
  std::map<std::pair<std::string, std::string>, Holding> grouped;
  for (const FlowRecord& r : records) {
    if (!in_cell(r, cell)) continue;
    if (filter) {
      if (filter->exclude_mandates && r.fund_kind == FundKind::mandate_or_dedicated) continue;
      if (r.tna_held < filter->min_tna) continue;
      if (!in_date_range(r.date, *filter)) continue;
    }
    Holding& h = grouped[{r.fund_id, r.date}];
    h.tna += r.tna_held;
    h.outflow += r.outflow;
  }
  return grouped;
}

}  // namespace

RedemptionSample pool(const std::vector<FlowRecord>& records, const CategoryCell& cell,
                      const PoolFilter& filter) {
  auto grouped = group_by_fund_date(records, cell, &filter);
  std::vector<double> rates;
  rates.reserve(grouped.size());
  for (const auto& [key, h] : grouped) {
    if (!(h.tna > 0.0)) continue;
    rates.push_back(gross_rate(h.outflow, h.tna));
  }
  return make_sample(cell, std::move(rates));
}

CategorySeries daily_series(const std::vector<FlowRecord>& records, const CategoryCell& cell) {
  auto grouped = group_by_fund_date(records, cell, nullptr);
  // date -> per-fund rates; std::map keeps dates ordered.
  std::map<std::string, std::vector<double>> by_date;
  for (const auto& [key, h] : grouped) {
    if (!(h.tna > 0.0)) continue;
    by_date[key.second].push_back(gross_rate(h.outflow, h.tna));
  }
  CategorySeries s;
  for (const auto& [date, rates] : by_date) {
    double sum = 0.0, pos_sum = 0.0;
    std::size_t pos = 0;
    for (double r : rates) {
      sum += r;
      if (r > 0.0) {
        pos_sum += r;
        ++pos;
      }
    }
    s.dates.push_back(date);
    s.rate.push_back(sum / rates.size());
    s.frequency.push_back(static_cast<double>(pos) / rates.size());
    s.severity.push_back(pos > 0 ? pos_sum / pos : std::nan(""));
    s.support_n.push_back(rates.size());
    s.support_pos_n.push_back(pos);
  }
  return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

bool iso_date_like(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace

IngestReport read_flow_csv(std::istream& in) {
  static const std::string kHeader =
      "date,fund_id,investor_category,fund_category,fund_kind,tna_held,inflow,outflow";
  IngestReport report;
  std::string line;
  if (!std::getline(in, line)) fail(errc::ingest, "flow csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    fail(errc::ingest, "flow csv: header must be exactly '" + kHeader + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 8) {
      report.row_errors.push_back({lineno, "expected 8 fields"});
      continue;
    }
    FlowRecord r;
    r.date = fields[0];
    r.fund_id = fields[1];
    r.investor_category = fields[2];
    r.fund_category = fields[3];
    if (!iso_date_like(r.date)) {
      report.row_errors.push_back({lineno, "date not ISO-8601 (YYYY-MM-DD)"});
      continue;
    }
    if (fields[4] == "pooled") {
      r.fund_kind = FundKind::pooled;
    } else if (fields[4] == "mandate_or_dedicated") {
      r.fund_kind = FundKind::mandate_or_dedicated;
    } else {
      report.row_errors.push_back({lineno, "fund_kind must be pooled|mandate_or_dedicated"});
      continue;
    }
    if (!parse_double(fields[5], r.tna_held) || !parse_double(fields[6], r.inflow) ||
        !parse_double(fields[7], r.outflow)) {
      report.row_errors.push_back({lineno, "unparseable numeric field"});
      continue;
    }
    if (r.tna_held < 0.0 || r.inflow < 0.0 || r.outflow < 0.0) {
      report.row_errors.push_back({lineno, "negative amount"});
      continue;
    }
    if (r.outflow > r.tna_held) {
      // Covers tna_held = 0 with outflow > 0: a holder cannot redeem more
      // than it holds. Rejected per row, never a batch abort.
      report.row_errors.push_back({lineno, "outflow exceeds tna_held"});
      continue;
    }
    report.records.push_back(std::move(r));
  }
  return report;
}

IngestReport read_flow_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::ingest, "flow csv: cannot open " + path);
  return read_flow_csv(in);
}

}  // namespace redstress
