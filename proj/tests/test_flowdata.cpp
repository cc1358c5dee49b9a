#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "redstress/errors.hpp"
#include "redstress/flowdata.hpp"

using namespace redstress;

TEST_CASE("gross rate") {
  CHECK(gross_rate(100, 5000) == doctest::Approx(0.02));
  CHECK(gross_rate(0, 100) == 0.0);
  CHECK(gross_rate(100, 100) == 1.0);
  CHECK_THROWS_AS(gross_rate(1, 0), error);
  CHECK_THROWS_AS(gross_rate(101, 100), error);
  try {
    gross_rate(1, 0);
  } catch (const error& e) {
    CHECK(e.code() == errc::invalid_denominator);
  }
}

TEST_CASE("net rates") {
  auto r = net_rates(0, 10, 100);
  CHECK(r.net_flow_rate == doctest::Approx(-0.10));
  CHECK(r.net_redemption_rate == doctest::Approx(0.10));
  CHECK(r.net_redemption_rate == doctest::Approx(gross_rate(10, 100)));

  r = net_rates(30, 10, 100);
  CHECK(r.net_flow_rate == doctest::Approx(0.20));
  CHECK(r.net_redemption_rate == 0.0);

  r = net_rates(10, 30, 100);
  CHECK(r.net_flow_rate == doctest::Approx(-0.20));
  CHECK(r.net_redemption_rate == doctest::Approx(0.20));
  CHECK_THROWS_AS(net_rates(1, 1, 0), error);
}

TEST_CASE("net redemption never exceeds gross") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double tna = 1.0 + 99.0 * u(gen);
    const double outflow = tna * u(gen);
    const double inflow = 50.0 * u(gen);
    const auto r = net_rates(inflow, outflow, tna);
    CHECK(r.net_redemption_rate <= gross_rate(outflow, tna) + 1e-15);
  }
}

TEST_CASE("implied net flow") {
  CHECK(implied_net_flow(110, 100, 1.10, 1.00) == doctest::Approx(0.0));
  CHECK(implied_net_flow(100, 100, 1.00, 1.00) == doctest::Approx(0.0));
  CHECK(implied_net_flow(95, 100, 1.00, 1.00) == doctest::Approx(-5.0));
  CHECK_THROWS_AS(implied_net_flow(1, 1, 1, 0), error);
}

TEST_CASE("fund rate from category weights") {
  CHECK(fund_rate_from_categories({0.5, 0.5}, {0.02, 0.04}) == doctest::Approx(0.03));
  CHECK(fund_rate_from_categories({1.0}, {0.07}) == doctest::Approx(0.07));
  CHECK(fund_rate_from_categories({0.25, 0.75}, {0.0, 0.08}) == doctest::Approx(0.06));
  CHECK_THROWS_AS(fund_rate_from_categories({0.5, 0.4}, {0.1, 0.1}), error);
}

namespace {

FlowRecord rec(const std::string& date, const std::string& fund, double tna, double out,
               FundKind kind = FundKind::pooled) {
  FlowRecord r;
  r.date = date;
  r.fund_id = fund;
  r.investor_category = "institutional";
  r.fund_category = "equity";
  r.fund_kind = kind;
  r.tna_held = tna;
  r.outflow = out;
  return r;
}

const CategoryCell kCell{"institutional", "equity"};

}  // namespace

TEST_CASE("pool groups per fund-date and counts zeros") {
  std::vector<FlowRecord> records = {rec("2024-01-02", "A", 100, 0),
                                     rec("2024-01-02", "B", 100, 5)};
  PoolFilter f;
  f.min_tna = 0;
  auto s = pool(records, kCell, f);
  REQUIRE(s.n() == 2);
  CHECK(s.n0 == 1);
  CHECK(s.n1 == 1);
  std::vector<double> v = s.values;
  std::sort(v.begin(), v.end());
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx(0.05));
}

TEST_CASE("pool merges duplicate fund-date rows") {
  std::vector<FlowRecord> records = {rec("2024-01-02", "A", 60, 3),
                                     rec("2024-01-02", "A", 40, 1)};
  PoolFilter f;
  f.min_tna = 0;
  auto s = pool(records, kCell, f);
  REQUIRE(s.n() == 1);
  CHECK(s.values[0] == doctest::Approx(0.04));
}

TEST_CASE("pool filters mandates, small holdings, and date range") {
  std::vector<FlowRecord> records = {
      rec("2024-01-02", "A", 10e6, 1e5),
      rec("2024-01-02", "M", 20e6, 1e6, FundKind::mandate_or_dedicated),
      rec("2024-01-02", "S", 1e6, 1e5),
      rec("2025-06-01", "A", 10e6, 2e5),
  };
  PoolFilter f;
  f.exclude_mandates = true;
  f.date_to = "2024-12-31";
  auto s = pool(records, kCell, f);
  REQUIRE(s.n() == 1);
  CHECK(s.values[0] == doctest::Approx(0.01));

  f.exclude_mandates = false;
  s = pool(records, kCell, f);
  CHECK(s.n() == 2);
}

TEST_CASE("pool of empty result is a marker, not an error") {
  auto s = pool({}, kCell, PoolFilter{});
  CHECK(s.empty());
  CHECK(s.n0 == 0);
  CHECK(s.n1 == 0);
}

TEST_CASE("pool is permutation invariant") {
  std::vector<FlowRecord> records;
  for (int i = 0; i < 30; ++i)
    records.push_back(rec("2024-01-0" + std::to_string(1 + i % 9), "F" + std::to_string(i % 7),
                          100 + i, i % 5));
  PoolFilter f;
  f.min_tna = 0;
  auto base = pool(records, kCell, f);
  std::mt19937 gen(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(records.begin(), records.end(), gen);
    auto s = pool(records, kCell, f);
    CHECK(s.values == base.values);
  }
}

TEST_CASE("daily series and the rate = frequency * severity identity") {
  std::vector<FlowRecord> records = {
      rec("2024-01-02", "A", 100, 0),   rec("2024-01-02", "B", 100, 10),
      rec("2024-01-03", "A", 100, 4),   rec("2024-01-03", "B", 100, 0),
      rec("2024-01-03", "C", 100, 0),   rec("2024-01-04", "A", 100, 0),
  };
  auto s = daily_series(records, kCell);
  REQUIRE(s.dates.size() == 3);

  CHECK(s.rate[0] == doctest::Approx(0.05));
  CHECK(s.frequency[0] == doctest::Approx(0.5));
  CHECK(s.severity[0] == doctest::Approx(0.10));

  CHECK(s.frequency[1] == doctest::Approx(1.0 / 3.0));
  CHECK(s.severity[1] == doctest::Approx(0.04));

  CHECK(s.rate[2] == 0.0);
  CHECK(s.frequency[2] == 0.0);
  CHECK_FALSE(s.severity_defined(2));
  CHECK(std::isnan(s.severity[2]));

  for (std::size_t t = 0; t < s.dates.size(); ++t)
    if (s.severity_defined(t))
      CHECK(s.rate[t] == doctest::Approx(s.frequency[t] * s.severity[t]).epsilon(1e-12));
}

TEST_CASE("single fund daily series") {
  auto s = daily_series({rec("2024-01-02", "A", 100, 4)}, kCell);
  REQUIRE(s.dates.size() == 1);
  CHECK(s.rate[0] == doctest::Approx(0.04));
  CHECK(s.frequency[0] == 1.0);
  CHECK(s.severity[0] == doctest::Approx(0.04));
}

TEST_CASE("csv ingest accepts the exact schema and reports row errors") {
  std::stringstream ss;
  ss << "date,fund_id,investor_category,fund_category,fund_kind,tna_held,inflow,outflow\n"
     << "2024-01-02,F1,institutional,equity,pooled,1000000,0,25000\n"
     << "2024-01-02,F2,institutional,equity,mandate_or_dedicated,500000,100,0\n"
     << "2024-01-03,F1,institutional,equity,pooled,0,0,100\n"      // redeems from nothing
     << "bad-date,F1,institutional,equity,pooled,100,0,0\n"
     << "2024-01-04,F1,institutional,equity,tontine,100,0,0\n"     // unknown kind
     << "2024-01-05,F1,institutional,equity,pooled,100,0,abc\n";
  auto rep = read_flow_csv(ss);
  CHECK(rep.records.size() == 2);
  REQUIRE(rep.row_errors.size() == 4);
  CHECK(rep.row_errors[0].line == 4);
  CHECK(rep.records[0].tna_held == doctest::Approx(1e6));
  CHECK(rep.records[1].fund_kind == FundKind::mandate_or_dedicated);
}

TEST_CASE("csv ingest rejects a wrong header outright") {
  std::stringstream ss;
  ss << "date,fund,inv,cat,kind,tna,in,out\n";
  CHECK_THROWS_AS(read_flow_csv(ss), error);
}
