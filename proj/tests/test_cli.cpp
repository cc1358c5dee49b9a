#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "redstress/cli.hpp"
#include "redstress/copula.hpp"
#include "redstress/errors.hpp"
#include "redstress/factors.hpp"
#include "redstress/flowdata.hpp"
#include "redstress/liability.hpp"
#include "redstress/riskmeasures.hpp"
#include "redstress/rng.hpp"
#include "redstress/simulate.hpp"
#include "redstress/zeroinflated.hpp"

namespace fs = std::filesystem;
using namespace redstress;

namespace {

std::string g_bin;
fs::path g_dir;

std::string fmt17(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  const fs::path so = g_dir / "stdout.txt", se = g_dir / "stderr.txt";
  const std::string cmd =
      env + g_bin + " " + args + " >" + so.string() + " 2>" + se.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(so);
  r.err = slurp(se);
  return r;
}

double d(const std::string& s) {
  REQUIRE_FALSE(s.empty());
  return std::stod(s);
}

using CsvRows = std::vector<std::map<std::string, std::string>>;

CsvRows parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  REQUIRE(std::getline(in, line));
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) cols.push_back(f);
  }
  CsvRows rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    REQUIRE(fields.size() == cols.size());
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cols.size(); ++i) row[cols[i]] = fields[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

// factors reports are (analysis, key, value) triples.
std::map<std::string, std::string> triple_map(const CsvRows& rows) {
  std::map<std::string, std::string> m;
  for (const auto& r : rows) m[r.at("analysis") + "/" + r.at("key")] = r.at("value");
  return m;
}

std::string iso_date(int i) {
  char b[16];
  std::snprintf(b, sizeof b, "2024-%02d-%02d", 1 + i / 28, 1 + i % 28);
  return b;
}

// Deterministic multi-cell fixture: varied sparsity, one mandate-only cell,
// one five-fund cell with common redemption days, one near-empty cell.
void write_flow_fixture(const fs::path& file) {
  std::ostringstream os;
  os << "date,fund_id,investor_category,fund_category,fund_kind,tna_held,inflow,outflow\n";
  auto row = [&](const std::string& date, const char* fund, const char* inv, const char* cat,
                 const char* kind, double rate) {
    os << date << ',' << fund << ',' << inv << ',' << cat << ',' << kind << ",10000000,0,"
       << fmt17(1e7 * rate) << "\n";
  };
  for (int day = 0; day < 60; ++day) {
    const std::string dt = iso_date(day);
    row(dt, "F1", "retail", "equity", "pooled", day % 5 == 0 ? 0.01 + 0.002 * (day % 7) : 0.0);
    row(dt, "F2", "retail", "equity", "pooled", day % 4 == 1 ? 0.02 + 0.001 * (day % 5) : 0.0);
    row(dt, "M1", "retail", "equity", "mandate_or_dedicated",
        day % 6 == 2 ? 0.05 + 0.003 * (day % 4) : 0.0);
    row(dt, "G1", "institutional", "bond", "pooled", day % 3 == 0 ? 0.015 : 0.0);
    row(dt, "G2", "institutional", "bond", "pooled", day % 7 == 3 ? 0.03 : 0.0);
    const bool all = day % 4 == 0;
    const char* funds[] = {"A", "B", "C", "D", "E"};
    for (int k = 0; k < 5; ++k)
      row(dt, funds[k], "club", "multi", "pooled",
          (all || day % 5 == k) ? 0.01 + 0.001 * k : 0.0);
    row(dt, "MM1", "solo", "mandate", "mandate_or_dedicated",
        day % 4 == 0 ? 0.02 * (1 + day % 3) : 0.0);
    row(dt, "S1", "sparse", "money", "pooled", day == 10 ? 0.04 : 0.0);
  }
  spit(file, os.str());
}

// Factor-analysis fixture: one cell whose two funds redeem every day, plus
// matching market-level and return series.
void write_factor_fixture(const fs::path& dir) {
  const int n = 80;
  std::ostringstream flow, bond, stock, vix, fret, mret;
  flow << "date,fund_id,investor_category,fund_category,fund_kind,tna_held,inflow,outflow\n";
  bond << "date,value\n";
  stock << "date,value\n";
  vix << "date,value\n";
  fret << "date,value\n";
  mret << "date,value\n";
  for (int t = 0; t < n; ++t) {
    rng_stream rng(77, static_cast<std::uint64_t>(t));
    const std::string dt = iso_date(t);
    const double r1 = 0.01 + 0.02 * rng.next_uniform();
    const double r2 = t % 3 == 0 ? 0.0 : 0.01 + 0.02 * rng.next_uniform();
    flow << dt << ",P,macro,test,pooled,10000000,0," << fmt17(1e7 * r1) << "\n";
    flow << dt << ",Q,macro,test,pooled,10000000,0," << fmt17(1e7 * r2) << "\n";
    bond << dt << ',' << fmt17(100.0 + 0.4 * t + rng.next_uniform()) << "\n";
    stock << dt << ',' << fmt17(200.0 + 1.5 * t + 4.0 * rng.next_uniform()) << "\n";
    vix << dt << ',' << fmt17(15.0 + 30.0 * rng.next_uniform()) << "\n";
    fret << dt << ',' << fmt17(0.002 * rng.next_normal()) << "\n";
    mret << dt << ',' << fmt17(0.002 * rng.next_normal()) << "\n";
  }
  spit(dir / "flow.csv", flow.str());
  spit(dir / "bond.csv", bond.str());
  spit(dir / "stock.csv", stock.str());
  spit(dir / "vix.csv", vix.str());
  spit(dir / "fund_returns.csv", fret.str());
  spit(dir / "market_returns.csv", mret.str());
}

errc thrown_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return errc::numerical;
}

}  // namespace

TEST_CASE("bucket labels follow the observation-count legend") {
  CHECK(bucket_label(0) == "0–10");
  CHECK(bucket_label(10) == "0–10");
  CHECK(bucket_label(11) == "11–50");
  CHECK(bucket_label(50) == "11–50");
  CHECK(bucket_label(51) == "51–200");
  CHECK(bucket_label(150) == "51–200");
  CHECK(bucket_label(200) == "51–200");
  CHECK(bucket_label(201) == "201–1000");
  CHECK(bucket_label(1000) == "201–1000");
  CHECK(bucket_label(1001) == "1001–10000");
  CHECK(bucket_label(10000) == "1001–10000");
  CHECK(bucket_label(10001) == "10000+");
}

TEST_CASE("config files parse with sections, comments, and typed values") {
  const fs::path p = g_dir / "run.ini";
  spit(p,
       "# comment\n"
       "[input]\n"
       "input = flows.csv\n"
       "cells = retail|equity ; solo|mandate\n"
       "[filters]\n"
       "min_tna = 2.5e6\n"
       "exclude_mandates = yes\n"
       "date_from = 2024-01-03\n"
       "[measures]\n"
       "alpha = 0.95\n"
       "t_grid = 2,1,0.5,1\n"
       "[simulation]\n"
       "n_sims = 5000\n"
       "seed = 42\n"
       "p = 0.02\n");
  const RunConfig cfg = load_config_file(p.string());
  CHECK(cfg.input == "flows.csv");
  REQUIRE(cfg.cells.size() == 2);
  CHECK(cfg.cells[0].investor_category == "retail");
  CHECK(cfg.cells[1].fund_category == "mandate");
  CHECK(cfg.filter.min_tna == 2.5e6);
  CHECK(cfg.filter.exclude_mandates);
  CHECK(cfg.filter.date_from == "2024-01-03");
  CHECK(cfg.alpha == 0.95);
  CHECK(cfg.t_grid == std::vector<double>{0.5, 1.0, 2.0});  // sorted, deduplicated
  CHECK(cfg.n_sims == 5000);
  CHECK(cfg.seed == 42);
  CHECK(cfg.has_param);

  RunConfig c2;
  CHECK(thrown_code([&] { set_config(c2, "no_such_key", "1"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "alpha", "1.5"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "alpha", "abc"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "n_sims", "-3"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "format", "xml"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "severity_family", "cauchy"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "cells", "missing-bar"); }) == errc::config);
  CHECK(thrown_code([&] { set_config(c2, "t_grid", "1,-2"); }) == errc::config);
  CHECK(thrown_code([] { load_config_file("/nonexistent/run.ini"); }) == errc::config);

  const fs::path bad = g_dir / "bad.ini";
  spit(bad, "alpha 0.9\n");
  CHECK(thrown_code([&] { load_config_file(bad.string()); }) == errc::config);
}

TEST_CASE("stats output is a pass-through of the empirical measures") {
  const fs::path flow = g_dir / "flow.csv";
  write_flow_fixture(flow);
  const fs::path out = g_dir / "stats_out";
  const auto r = run_cli("stats --input " + flow.string() + " --out " + out.string());
  REQUIRE(r.exit_code == 0);

  const auto rows = parse_csv(slurp(out / "stats.csv"));
  const auto ingest = read_flow_csv_file(flow.string());
  REQUIRE(rows.size() == 5);  // five cells in the fixture
  for (const auto& row : rows) {
    const CategoryCell cell{row.at("investor_category"), row.at("fund_category")};
    const auto sample = pool(ingest.records, cell, PoolFilter{});
    CHECK(std::stoul(row.at("n")) == sample.n());
    CHECK(row.at("confidence") == bucket_label(sample.n()));
    const auto m = empirical_measures(sample, 3.0, 0.99);
    CHECK(d(row.at("mean")) == m.mean);
    CHECK(d(row.at("sd_measure")) == m.sd_measure);
    CHECK(d(row.at("var")) == m.var);
    CHECK(d(row.at("cvar")) == m.cvar);
    CHECK(row.at("note").empty());
  }

  SUBCASE("json mirror carries the schema version and the same numbers") {
    const auto j = nlohmann::ordered_json::parse(slurp(out / "stats.json"));
    CHECK(j.at("schema_version") == "1");
    CHECK(j.at("command") == "stats");
    REQUIRE(j.at("rows").size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      CHECK(j.at("rows")[i].at("var").get<double>() == d(rows[i].at("var")));
  }

  SUBCASE("empty filter results keep exit code zero") {
    const auto empty =
        run_cli("stats --input " + flow.string() + " --out " + (g_dir / "e1").string() +
                " --min-tna 1e15");
    CHECK(empty.exit_code == 0);
    CHECK(parse_csv(slurp(g_dir / "e1" / "stats.csv")).empty());

    const auto marked =
        run_cli("stats --input " + flow.string() + " --out " + (g_dir / "e2").string() +
                " --min-tna 1e15 --cell 'retail|equity'");
    CHECK(marked.exit_code == 0);
    const auto mrows = parse_csv(slurp(g_dir / "e2" / "stats.csv"));
    REQUIRE(mrows.size() == 1);
    CHECK(mrows[0].at("mean").empty());
    CHECK_FALSE(mrows[0].at("note").empty());
  }

  SUBCASE("bucket code for a 150-observation cell") {
    // Fixture has no 150-observation cell; the acceptance value is pinned on
    // the function directly.
    CHECK(bucket_label(150) == "51–200");
  }
}

TEST_CASE("fit-zi emits both estimators and flags thin severities") {
  const fs::path flow = g_dir / "flow.csv";
  write_flow_fixture(flow);
  const fs::path out = g_dir / "fitzi_out";
  const auto r = run_cli("fit-zi --input " + flow.string() + " --out " + out.string());
  REQUIRE(r.exit_code == 0);

  const auto rows = parse_csv(slurp(out / "fit-zi.csv"));
  const auto ingest = read_flow_csv_file(flow.string());
  for (const auto& row : rows) {
    const CategoryCell cell{row.at("investor_category"), row.at("fund_category")};
    const auto sample = pool(ingest.records, cell, PoolFilter{});
    const auto mle = fit_mle(sample);
    CHECK(d(row.at("p")) == mle.p);
    if (cell.investor_category == "sparse") {
      CHECK(row.at("mle_a").empty());
      CHECK(row.at("mm_a").empty());
      CHECK(row.at("note") ==
            "severity undetermined: fewer than 2 positive observations");
      continue;
    }
    REQUIRE(mle.severity.has_value());
    CHECK(d(row.at("mle_a")) == mle.severity->a);
    CHECK(d(row.at("mle_b")) == mle.severity->b);
    CHECK(d(row.at("loglik")) == mle.loglik);
    const auto mm = fit_mm(sample);
    REQUIRE(mm.severity.has_value());
    CHECK(d(row.at("mm_a")) == mm.severity->a);
    CHECK(d(row.at("mm_b")) == mm.severity->b);
  }
}

TEST_CASE("fit-im on a mandate-only cell equals the zero-inflated fit") {
  const fs::path flow = g_dir / "flow.csv";
  write_flow_fixture(flow);
  const fs::path out = g_dir / "fitim_out";
  const auto r =
      run_cli("fit-im --input " + flow.string() + " --out " + out.string() +
              " --cell 'solo|mandate'");
  REQUIRE(r.exit_code == 0);

  const auto rows = parse_csv(slurp(out / "fit-im.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].at("funds") == "1");
  CHECK(rows[0].at("used_funds") == "1");

  const auto ingest = read_flow_csv_file(flow.string());
  const auto sample = pool(ingest.records, {"solo", "mandate"}, PoolFilter{});
  const auto mm = fit_mm(sample);
  REQUIRE(mm.severity.has_value());
  const auto mom = moments(*mm.severity);
  CHECK(d(rows[0].at("p_tilde")) == doctest::Approx(mm.p).epsilon(1e-9));
  CHECK(d(rows[0].at("mu_tilde")) == doctest::Approx(mom.mean).epsilon(1e-9));
  CHECK(d(rows[0].at("sigma_tilde")) ==
        doctest::Approx(std::sqrt(mom.variance)).epsilon(1e-9));
  CHECK(rows[0].at("unrealistic") == "0");

  SUBCASE("pooled funds without a configured size are skipped") {
    const auto r2 =
        run_cli("fit-im --input " + flow.string() + " --out " + (g_dir / "fitim2").string() +
                " --cell 'sparse|money'");
    REQUIRE(r2.exit_code == 0);
    const auto rows2 = parse_csv(slurp(g_dir / "fitim2" / "fit-im.csv"));
    REQUIRE(rows2.size() == 1);
    CHECK(rows2[0].at("used_funds") == "0");
    CHECK_FALSE(rows2[0].at("note").empty());
  }
}

TEST_CASE("fit-copula reproduces the library calibration per cell") {
  const fs::path flow = g_dir / "flow.csv";
  write_flow_fixture(flow);
  const fs::path out = g_dir / "fitcop_out";
  const auto r = run_cli("fit-copula --input " + flow.string() + " --out " + out.string() +
                         " --copula clayton --cell 'club|multi'");
  REQUIRE(r.exit_code == 0);

  const auto rows = parse_csv(slurp(out / "fit-copula.csv"));
  REQUIRE(rows.size() == 1);
  const auto& row = rows[0];
  CHECK(row.at("note").empty());

  const auto ingest = read_flow_csv_file(flow.string());
  const auto series = daily_series(ingest.records, {"club", "multi"});
  double mean = 0.0;
  for (double f : series.frequency) mean += f;
  mean /= static_cast<double>(series.frequency.size());
  double ss = 0.0;
  for (double f : series.frequency) ss += (f - mean) * (f - mean);
  const double sd = std::sqrt(ss / static_cast<double>(series.frequency.size() - 1));
  CHECK(d(row.at("mean_freq")) == mean);
  CHECK(d(row.at("sd_freq")) == sd);
  CHECK(d(row.at("herfindahl")) == doctest::Approx(0.2).epsilon(1e-12));
  const auto cal = calibrate_theta(mean, sd, 0.2, CopFamily::Clayton);
  CHECK(d(row.at("theta")) == doctest::Approx(cal.spec.theta).epsilon(1e-12));
  CHECK(d(row.at("pearson")) == doctest::Approx(cal.pearson).epsilon(1e-12));

  SUBCASE("product family is rejected for calibration") {
    const auto bad = run_cli("fit-copula --input " + flow.string() + " --out " +
                             (g_dir / "fc2").string() + " --copula product");
    CHECK(bad.exit_code == 1);
    CHECK(bad.err.find("error:") != std::string::npos);
  }
}

TEST_CASE("stress echoes configured parameters and walks the horizon grid") {
  const fs::path out = g_dir / "stress_out";
  const auto r = run_cli("stress --param 0.02,0.01,0.02 --t-grid 0.1,0.5,1,2 --out " +
                         out.string());
  REQUIRE(r.exit_code == 0);

  const auto rows = parse_csv(slurp(out / "stress.csv"));
  REQUIRE(rows.size() == 4);
  const auto [a, b] = beta_from_musigma(0.01, 0.02);
  const auto m = make_zi(0.02, make_severity(SevFamily::Beta, a, b));
  double prev = -1.0;
  for (const auto& row : rows) {
    CHECK(row.at("p") == "0.02");  // exactly as configured
    CHECK(row.at("mu") == "0.01");
    CHECK(row.at("sigma") == "0.02");
    const double t = d(row.at("t_years"));
    const double s = d(row.at("stress"));
    CHECK(s == zi_stress(m, t));
    CHECK(s >= prev);  // nondecreasing down the grid
    prev = s;
  }
  CHECK(d(rows[0].at("stress")) == 0.0);  // 0.1 years is below 1/(260 p)

  const auto j = nlohmann::ordered_json::parse(slurp(out / "stress.json"));
  CHECK(j.at("p").get<double>() == 0.02);

  SUBCASE("fitted route records per-cell failures and continues") {
    const fs::path flow = g_dir / "flow.csv";
    write_flow_fixture(flow);
    const auto rf = run_cli("stress --input " + flow.string() + " --out " +
                            (g_dir / "stress_fit").string() + " --t-grid 1,2");
    REQUIRE(rf.exit_code == 0);
    const auto frows = parse_csv(slurp(g_dir / "stress_fit" / "stress.csv"));
    std::size_t noted = 0, valued = 0;
    for (const auto& row : frows) {
      if (!row.at("note").empty()) {
        ++noted;
        CHECK(row.at("stress").empty());
      } else {
        ++valued;
      }
    }
    CHECK(noted == 1);  // the single-positive cell cannot fit a severity
    CHECK(valued == 4 * 2);
  }

  SUBCASE("coherency matrices are emitted when anchors are configured") {
    const fs::path ini = g_dir / "coh.ini";
    spit(ini,
         "investor_anchors = 0.2,0.4\n"
         "fund_anchors = 0.3,0.6\n"
         "fund_multipliers = 1.0,2.0\n"
         "investor_multipliers = 1.0,1.5\n"
         "coherency_rule = C1\n");
    const auto rc = run_cli("stress --config " + ini.string() +
                            " --param 0.02,0.01,0.02 --out " + (g_dir / "coh_out").string());
    REQUIRE(rc.exit_code == 0);
    const auto crows = parse_csv(slurp(g_dir / "coh_out" / "coherency.csv"));
    REQUIRE(crows.size() == 4);
    const auto mtx = coherency_shocks({0.2, 0.4}, {0.3, 0.6}, {1.0, 2.0}, {1.0, 1.5},
                                      CoherencyRule::C1);
    for (const auto& row : crows) {
      const auto f = std::stoul(row.at("fund"));
      const auto k = std::stoul(row.at("investor"));
      CHECK(d(row.at("shock")) == mtx.shocks[f][k]);
    }
  }
}

TEST_CASE("simulate is reproducible and matches the library sampler") {
  const std::string base = "simulate --param 0.2,0.5,0.3 --n-units 10 --copula clayton "
                           "--theta 1 --n-sims 5000 --seed 3 --dump-samples --out ";
  const auto r1 = run_cli(base + (g_dir / "sim1").string());
  REQUIRE(r1.exit_code == 0);

  SUBCASE("samples pass through byte-exact and re-ingest") {
    const auto structure = LiabilityStructure::from_summary(10, 0.1);
    const auto m = make_im(structure, 0.2, 0.5, 0.3);
    const auto c = make_copula(CopFamily::Clayton, 1.0);
    const auto s = simulate_cm(m, c, SimConfig{5000, 3, 4096});
    const auto parsed = read_series_csv_file((g_dir / "sim1" / "samples.csv").string());
    REQUIRE(parsed.size() == s.values.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) CHECK(parsed[i].value == s.values[i]);
  }

  SUBCASE("same seed gives byte-identical reports regardless of threads") {
    const auto r2 = run_cli(base + (g_dir / "sim2").string());
    REQUIRE(r2.exit_code == 0);
    const auto r4 = run_cli(base + (g_dir / "sim4").string(), "REDSTRESS_THREADS=4 ");
    REQUIRE(r4.exit_code == 0);
    CHECK(slurp(g_dir / "sim1" / "simulate.csv") == slurp(g_dir / "sim2" / "simulate.csv"));
    CHECK(slurp(g_dir / "sim1" / "simulate.csv") == slurp(g_dir / "sim4" / "simulate.csv"));
    CHECK(slurp(g_dir / "sim1" / "simulate.json") == slurp(g_dir / "sim4" / "simulate.json"));
    CHECK(slurp(g_dir / "sim1" / "samples.csv") == slurp(g_dir / "sim4" / "samples.csv"));
  }

  SUBCASE("empirical columns sit within four standard errors of the analytics") {
    const auto rows = parse_csv(slurp(g_dir / "sim1" / "simulate.csv"));
    std::map<std::string, std::string> kv;
    for (const auto& row : rows) kv[row.at("key")] = row.at("value");
    const double n = 5000.0;
    const double pnr_a = d(kv.at("pnr_analytic"));
    const double pnr_e = d(kv.at("pnr_empirical"));
    CHECK(std::fabs(pnr_e - pnr_a) < 4.0 * std::sqrt(pnr_a * (1.0 - pnr_a) / n));
    CHECK(std::fabs(d(kv.at("mean")) - d(kv.at("mean_analytic"))) <
          4.0 * d(kv.at("mean_se")));
    CHECK(kv.at("seed") == "3");
    CHECK(kv.at("model").find("clayton") != std::string::npos);
  }

  SUBCASE("a zero-dependence copula parameter equals the product family") {
    const std::string z = "simulate --param 0.2,0.5,0.3 --n-units 10 --n-sims 2000 --seed 9 "
                          "--dump-samples --out ";
    const auto rz = run_cli(z + (g_dir / "simz1").string() + " --copula clayton --theta 0");
    const auto rp = run_cli(z + (g_dir / "simz2").string() + " --copula product");
    REQUIRE(rz.exit_code == 0);
    REQUIRE(rp.exit_code == 0);
    CHECK(slurp(g_dir / "simz1" / "samples.csv") == slurp(g_dir / "simz2" / "samples.csv"));
    std::vector<double> a, b;
    for (const auto& row : read_series_csv_file((g_dir / "simz1" / "samples.csv").string()))
      a.push_back(row.value);
    for (const auto& row : read_series_csv_file((g_dir / "simz2" / "samples.csv").string()))
      b.push_back(row.value);
    CHECK(ks_two_sample(a, b).pass_at_99);
  }

  SUBCASE("horizon aggregation rows replace the single-day analytics") {
    const auto rh = run_cli("simulate --param 0.2,0.5,0.3 --n-units 10 --copula product "
                            "--n-sims 2000 --seed 5 --horizon-days 5 --rho-time 0.5 --out " +
                            (g_dir / "simh").string());
    REQUIRE(rh.exit_code == 0);
    const auto rows = parse_csv(slurp(g_dir / "simh" / "simulate.csv"));
    std::map<std::string, std::string> kv;
    for (const auto& row : rows) kv[row.at("key")] = row.at("value");
    CHECK(kv.at("horizon_days") == "5");
    CHECK(kv.count("pnr_analytic") == 0);
    CHECK(d(kv.at("mean")) > 0.0);
  }
}

TEST_CASE("factors command reports each configured analysis") {
  const fs::path dir = g_dir / "factor_fixture";
  fs::create_directories(dir);
  write_factor_fixture(dir);
  const fs::path out = g_dir / "factors_out";
  const auto r = run_cli(
      "factors --input " + (dir / "flow.csv").string() + " --bond " +
      (dir / "bond.csv").string() + " --stock " + (dir / "stock.csv").string() + " --vix " +
      (dir / "vix.csv").string() + " --fund-returns " + (dir / "fund_returns.csv").string() +
      " --market-returns " + (dir / "market_returns.csv").string() + " --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const auto kv = triple_map(parse_csv(slurp(out / "factors.csv")));

  const auto ingest = read_flow_csv_file((dir / "flow.csv").string());
  const auto series = daily_series(ingest.records, {"macro", "test"});

  const auto dcp = decomposition_fits(series);
  CHECK(d(kv.at("decomposition/frequency_r2")) == dcp.frequency_only.centered_r2);
  CHECK(d(kv.at("decomposition/severity_r2")) == dcp.severity_only.centered_r2);
  CHECK(d(kv.at("decomposition/joint_r2")) == dcp.joint.centered_r2);

  const auto ac = autocorrelation(series.rate, 2);
  CHECK(d(kv.at("autocorrelation/rho_1")) == ac.rho[0]);
  CHECK(d(kv.at("autocorrelation/max_rho")) == ac.max_rho);

  const auto f = build_factor_series(read_series_csv_file((dir / "bond.csv").string()),
                                     read_series_csv_file((dir / "stock.csv").string()),
                                     read_series_csv_file((dir / "vix.csv").string()), 1);
  const auto mf = macro_fit(series, f);
  CHECK(d(kv.at("macro/stock")) == mf.coefficients[2]);
  CHECK(d(kv.at("macro/r2")) == mf.centered_r2);
  CHECK(std::stoul(kv.at("macro/n_obs")) == mf.n_obs);

  const double uplift =
      vix_conditional(series, read_series_csv_file((dir / "vix.csv").string()), 30.0);
  CHECK(d(kv.at("vix_regime/uplift")) == uplift);

  CHECK(kv.count("flow_performance/alpha_lag_1") == 1);
  CHECK(kv.count("flow_performance/relative_performance_effect") == 1);

  SUBCASE("missing optional inputs drop their analyses, never the run") {
    const auto r2 = run_cli("factors --input " + (dir / "flow.csv").string() + " --out " +
                            (g_dir / "factors_min").string());
    REQUIRE(r2.exit_code == 0);
    const auto kv2 = triple_map(parse_csv(slurp(g_dir / "factors_min" / "factors.csv")));
    CHECK(kv2.count("decomposition/joint_r2") == 1);
    CHECK(kv2.count("macro/r2") == 0);
    CHECK(kv2.count("vix_regime/uplift") == 0);
    CHECK(kv2.count("flow_performance/r2") == 0);
  }
}

TEST_CASE("fatal errors exit nonzero with a diagnostic") {
  const auto missing = run_cli("stats --input /nonexistent/flow.csv --out " +
                               (g_dir / "f1").string());
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("error:") != std::string::npos);

  const auto nosub = run_cli("");
  CHECK(nosub.exit_code != 0);

  const auto noparam = run_cli("simulate --out " + (g_dir / "f2").string());
  CHECK(noparam.exit_code == 1);
  CHECK(noparam.err.find("error:") != std::string::npos);

  const fs::path badini = g_dir / "badkey.ini";
  spit(badini, "not_a_key = 1\n");
  const auto badcfg = run_cli("stats --config " + badini.string() + " --out " +
                              (g_dir / "f3").string());
  CHECK(badcfg.exit_code == 1);

  const auto badcell = run_cli("stats --cell nobar --input /nonexistent.csv");
  CHECK(badcell.exit_code == 1);
}

TEST_CASE("flags override config file values") {
  const fs::path flow = g_dir / "flow.csv";
  write_flow_fixture(flow);
  const fs::path ini = g_dir / "precedence.ini";
  spit(ini,
       "p = 0.02\n"
       "mu = 0.01\n"
       "sigma = 0.02\n"
       "t_grid = 1\n");
  const auto r = run_cli("stress --config " + ini.string() + " --param 0.03,0.02,0.03 --out " +
                         (g_dir / "prec_out").string());
  REQUIRE(r.exit_code == 0);
  const auto rows = parse_csv(slurp(g_dir / "prec_out" / "stress.csv"));
  REQUIRE(rows.size() == 1);
  // the %.17g encoding of 0.03 carries all 17 digits; compare after re-parsing
  CHECK(d(rows[0].at("p")) == 0.03);
  CHECK(d(rows[0].at("mu")) == 0.02);
}

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--bin") g_bin = argv[i + 1];
  if (g_bin.empty()) {
    std::fprintf(stderr, "usage: test_cli --bin <redstress binary>\n");
    return 2;
  }
  g_dir = fs::temp_directory_path() / "redstress_cli_test";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}
