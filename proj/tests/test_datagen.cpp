#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "cwopt/datagen.hpp"
#include "cwopt/error.hpp"

using namespace cwopt;

namespace {

const PlantConfig kPlant = PlantConfig::synthetic_default();

SweepSpec small_spec() {
  SweepSpec s;
  s.t_cws_values = {70.0, 80.0};
  s.n_fans_values = {4, 8};
  s.months = {7};
  s.hour_stride = 1;
  return s;
}

std::pair<WeatherSeries, LoadProfile> hours(std::size_t n) {
  WeatherSeries w;
  LoadProfile l;
  for (std::size_t i = 0; i < n; ++i) {
    Timestamp t = Timestamp::from_civil(2023, 7, 1).plus_minutes(static_cast<std::int64_t>(i) * 60);
    w.timestamps.push_back(t);
    l.timestamps.push_back(t);
    w.t_wb.push_back(62.0 + 0.1 * static_cast<double>(i % 100));
    l.q_load.push_back(600.0 + 15.0 * static_cast<double>(i % 100));
  }
  return {w, l};
}

Dataset numbered(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.timestamp = Timestamp::from_civil(2023, 1, 1).plus_minutes(static_cast<std::int64_t>(i));
    r.q_load = static_cast<double>(i);
    d.records.push_back(r);
  }
  return d;
}

}  // namespace

TEST_CASE("sweep cardinality and ordering") {
  auto [w, l] = hours(100);
  Dataset d = run_sweep(kPlant, small_spec(), w, l);
  REQUIRE(d.size() == 400);
  // time-major, then setpoint, then fans
  CHECK(d.records[0].n_fans == 4);
  CHECK(d.records[1].n_fans == 8);
  CHECK(d.records[0].timestamp == d.records[3].timestamp);
  CHECK(d.records[4].timestamp > d.records[3].timestamp);
  for (const auto& r : d.records) CHECK_FALSE(check_record(r, kPlant.fan_stages()).has_value());

  SweepSpec empty = small_spec();
  empty.months = {1};
  CHECK(run_sweep(kPlant, empty, w, l).empty());

  SweepSpec strided = small_spec();
  strided.hour_stride = 3;
  CHECK(run_sweep(kPlant, strided, w, l).size() == 34 * 4);
}

TEST_CASE("setpoint jitter") {
  auto [w, l] = hours(50);
  // cool enough that every requested setpoint is achievable as asked
  std::fill(w.t_wb.begin(), w.t_wb.end(), 45.0);
  SweepSpec s = small_spec();
  s.t_cws_jitter = 2.0;
  s.jitter_seed = 7;
  Dataset a = run_sweep(kPlant, s, w, l);
  Dataset plain = run_sweep(kPlant, small_spec(), w, l);
  REQUIRE(a.size() == plain.size());
  std::set<double> distinct;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double grid = plain.records[i].t_cws;
    CHECK(grid == ((i / 2) % 2 == 0 ? 70.0 : 80.0));
    CHECK(std::abs(a.records[i].t_cws - grid) <= 2.0);
    // clamped to the grid's own range
    CHECK(a.records[i].t_cws >= 70.0);
    CHECK(a.records[i].t_cws <= 80.0);
    CHECK(a.records[i].n_fans == plain.records[i].n_fans);
    distinct.insert(a.records[i].t_cws);
  }
  // about half the draws clamp onto an edge of the grid
  CHECK(distinct.size() > a.size() / 4);

  Dataset again = run_sweep(kPlant, s, w, l);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(again.records[i].t_cws == a.records[i].t_cws);
  s.jitter_seed = 8;
  CHECK(run_sweep(kPlant, s, w, l).records[0].t_cws != a.records[0].t_cws);
}

TEST_CASE("sweep spec validation") {
  SweepSpec s = small_spec();
  s.t_cws_values = {59.0};
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.n_fans_values = {};
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.t_cws_jitter = -0.1;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("cleaning rules") {
  auto [w, l] = hours(50);
  Dataset d = run_sweep(kPlant, small_spec(), w, l);

  auto [once, report] = clean(d);
  CHECK(report.dropped() == 0);
  CHECK(once.size() == d.size());

  Dataset bad = d;
  bad.records[7].t_cwr = bad.records[7].t_cws - 1.0;
  bad.records[9].q_load = 20.0;
  bad.records[11].p_fan = std::nan("");
  auto [kept, rep] = clean(bad);
  CHECK(rep.drops.at(kRuleReversedDeltaT) == 1);
  CHECK(rep.drops.at(kRuleMinLoad) == 1);
  CHECK(rep.drops.at(kRuleNonFinite) == 1);
  CHECK(kept.size() + rep.dropped() == bad.size());

  auto [twice, rep2] = clean(kept);
  CHECK(rep2.dropped() == 0);
  CHECK(twice.size() == kept.size());
}

TEST_CASE("duplicate keys are dropped only on request") {
  auto [w, l] = hours(10);
  Dataset d = run_sweep(kPlant, small_spec(), w, l);
  d.records.push_back(d.records.front());
  CleaningRules rules;
  CHECK(clean(d, rules).second.dropped() == 0);
  rules.drop_duplicate_keys = true;
  CHECK(clean(d, rules).second.drops.at(kRuleDuplicateKey) == 1);
}

TEST_CASE("correlation matrix") {
  Dataset d = numbered(50);
  for (auto& r : d.records) {
    r.t_wb = r.q_load;
    r.t_cws = -r.q_load;
    r.p_fan = std::sin(r.q_load);
    r.n_fans = 4;
  }
  auto m = correlation_matrix(d, {"q_load_tons", "t_wb_f", "t_cws_f", "p_fan_kw"});
  CHECK(m.at("q_load_tons", "t_wb_f") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.at("q_load_tons", "t_cws_f") == doctest::Approx(-1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(m.values[i][i] - 1.0) < 1e-12);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(m.values[i][j] - m.values[j][i]) < 1e-12);
      CHECK(std::abs(m.values[i][j]) <= 1.0 + 1e-12);
    }
  }
  try {
    correlation_matrix(d, {"q_load_tons", "n_fans"});
    FAIL("constant column accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FlaggedColumn);
    CHECK(std::string(e.what()).find("n_fans") != std::string::npos);
  }
}

TEST_CASE("dominant variables on a generated sweep") {
  SweepSpec s;
  for (int t = 65; t <= 85; t += 2) s.t_cws_values.push_back(t);
  s.n_fans_values = {2, 4, 6, 8};
  s.months = {6, 7, 8};
  s.hour_stride = 12;
  Dataset d = clean(run_sweep(kPlant, s)).first;
  auto m = correlation_matrix(d, {"p_fan_kw", "t_wb_f", "p_chiller_kw", "q_load_tons", "noise"});
  CHECK(std::abs(m.at("p_fan_kw", "t_wb_f")) > std::abs(m.at("p_fan_kw", "noise")));
  CHECK(std::abs(m.at("p_chiller_kw", "q_load_tons")) > std::abs(m.at("p_chiller_kw", "noise")));
}

TEST_CASE("split") {
  Dataset d = numbered(100);
  auto [a, b] = split(d, 0.8, 3);
  CHECK(a.size() == 80);
  CHECK(b.size() == 20);
  std::set<double> seen;
  for (const auto& r : a.records) seen.insert(r.q_load);
  for (const auto& r : b.records) seen.insert(r.q_load);
  CHECK(seen.size() == 100);

  auto [a2, b2] = split(d, 0.8, 3);
  auto [a3, b3] = split(d, 0.8, 4);
  auto keys = [](const Dataset& x) {
    std::vector<double> k;
    for (const auto& r : x.records) k.push_back(r.q_load);
    return k;
  };
  CHECK(keys(a) == keys(a2));
  CHECK(keys(b) != keys(b3));
  CHECK_THROWS_AS(split(d, 0.0, 1), Error);
  CHECK_THROWS_AS(split(numbered(1), 0.5, 1), Error);
}

TEST_CASE("dataset csv round trip and diagnostics") {
  auto [w, l] = hours(5);
  Dataset d = run_sweep(kPlant, small_spec(), w, l);
  auto path = std::filesystem::temp_directory_path() / "cwopt_ds_test.csv";
  write_dataset(d, path);
  Dataset back = read_dataset(path);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.records[i].timestamp == d.records[i].timestamp);
    CHECK(back.records[i].p_chiller == d.records[i].p_chiller);
    CHECK(back.records[i].q_rej == d.records[i].q_rej);
  }
  CHECK(fingerprint(back) == fingerprint(d));

  {
    std::ofstream out(path);
    out << kDatasetHeader << "\n2023-07-01T00:00:00,70,1000,80,90,4,600,50,110,oops,synthetic\n";
  }
  try {
    read_dataset(path);
    FAIL("bad row accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("sub-hourly resampling interpolates between hours") {
  auto [w, l] = hours(3);
  auto [w15, l15] = resample_conditions(w, l, 15);
  REQUIRE(w15.timestamps.size() == 9);
  CHECK(w15.timestamps[1] == w.timestamps[0].plus_minutes(15));
  CHECK(l15.q_load[2] == doctest::Approx((l.q_load[0] + l.q_load[1]) / 2.0));
  CHECK(w15.t_wb.back() == w.t_wb.back());
  CHECK_THROWS_AS(resample_conditions(w, l, 7), Error);
}
