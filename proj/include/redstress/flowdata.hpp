#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace redstress {

enum class FundKind { pooled, mandate_or_dedicated };

struct FlowRecord {
  std::string date;  // ISO-8601 calendar day
  std::string fund_id;
  std::string investor_category;
  std::string fund_category;
  FundKind fund_kind = FundKind::pooled;
  double tna_held = 0.0;
  double inflow = 0.0;
  double outflow = 0.0;
};

struct CategoryCell {
  std::string investor_category;
  std::string fund_category;
};

struct RedemptionSample {
  CategoryCell cell;
  std::vector<double> values;  // gross rates in [0,1]
  std::size_t n0 = 0;          // zero observations
  std::size_t n1 = 0;          // strictly positive observations
  std::size_t n() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

RedemptionSample make_sample(CategoryCell cell, std::vector<double> values);

// Daily per-cell series. A day with no positive rate has no severity; the
// severity slot holds NaN and severity_defined(t) is false.
struct CategorySeries {
  std::vector<std::string> dates;
  std::vector<double> rate;
  std::vector<double> frequency;
  std::vector<double> severity;
  std::vector<std::size_t> support_n;      // |S(t)|: funds with positive TNA
  std::vector<std::size_t> support_pos_n;  // |S*(t)|: funds with positive rate
  bool severity_defined(std::size_t t) const { return support_pos_n[t] > 0; }
};

struct PoolFilter {
  bool exclude_mandates = false;
  double min_tna = 5e6;
  std::string date_from;  // inclusive, empty = open
  std::string date_to;    // inclusive, empty = open
};

double gross_rate(double outflow, double tna);

struct NetRates {
  double net_flow_rate;        // signed
  double net_redemption_rate;  // in [0,1]
};
NetRates net_rates(double inflow, double outflow, double tna);

double implied_net_flow(double tna_t1, double tna_t0, double nav_t1, double nav_t0);

double fund_rate_from_categories(const std::vector<double>& weights,
                                 const std::vector<double>& rates);

RedemptionSample pool(const std::vector<FlowRecord>& records, const CategoryCell& cell,
                      const PoolFilter& filter);

CategorySeries daily_series(const std::vector<FlowRecord>& records, const CategoryCell& cell);

struct RowError {
  std::size_t line;  // 1-based, header is line 1
  std::string message;
};

struct IngestReport {
  std::vector<FlowRecord> records;
  std::vector<RowError> row_errors;
};

// CSV schema: date,fund_id,investor_category,fund_category,fund_kind,tna_held,inflow,outflow
// Invalid rows are reported per row; only a bad header or unreadable file aborts.
IngestReport read_flow_csv(std::istream& in);
IngestReport read_flow_csv_file(const std::string& path);

}  // namespace redstress
