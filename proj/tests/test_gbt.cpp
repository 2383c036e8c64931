#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cwopt/bundle.hpp"
#include "cwopt/datagen.hpp"
#include "cwopt/error.hpp"
#include "cwopt/gbt.hpp"

using namespace cwopt;

namespace {

TrainingData one_feature(const std::vector<double>& x, const std::vector<double>& y) {
  TrainingData t;
  t.columns = {x};
  t.target = y;
  t.feature_names = {"x"};
  t.target_name = "y";
  return t;
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.n_trees = 40;
  hp.max_depth = 4;
  hp.min_samples_leaf = 3;
  return hp;
}

const Dataset& small_sweep() {
  static const Dataset d = [] {
    SweepSpec s;
    s.t_cws_values = {65, 70, 75, 80, 85};
    s.n_fans_values = {2, 4, 6, 8};
    s.months = {6, 7, 8};
    s.hour_stride = 24;
    return clean(run_sweep(PlantConfig::synthetic_default(), s)).first;
  }();
  return d;
}

const SurrogateBundle& small_bundle() {
  static const SurrogateBundle b = train_bundle(small_sweep(), small_hp(), kDefaultStrata, "2026-01-01T00:00:00Z");
  return b;
}

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("constant target gives a base-only model") {
  GBTModel m = fit(one_feature({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, std::vector<double>(10, 4.25)), small_hp());
  CHECK(m.constant_target);
  CHECK(m.trees.empty());
  double x = 123.0;
  CHECK(m.predict({&x, 1}) == 4.25);
}

TEST_CASE("step function is learned exactly") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i * 0.25);
    y.push_back(i * 0.25 > 5.0 ? 1.0 : 0.0);
  }
  Hyperparams hp;
  hp.n_trees = 100;
  hp.max_depth = 1;
  hp.min_samples_leaf = 1;
  FitResult r = fit_with_trace(one_feature(x, y), hp);
  CHECK(r.training_rmse.back() < 1e-3);
  for (std::size_t k = 1; k < r.training_rmse.size(); ++k) CHECK(r.training_rmse[k] <= r.training_rmse[k - 1] + 1e-12);
}

TEST_CASE("training loss is monotone in the number of trees") {
  const Dataset& d = small_sweep();
  Hyperparams hp = small_hp();
  hp.n_trees = 50;
  FitResult r = fit_with_trace(training_data(d, Column::PChiller, chiller_features()), hp);
  CHECK(r.training_rmse[49] <= r.training_rmse[9]);
}

TEST_CASE("hand-built tree traversal") {
  GBTModel m;
  m.base_prediction = 2.0;
  m.learning_rate = 1.0;
  m.feature_names = {"x"};
  m.trees.emplace_back(std::vector<TreeNode>{{0, 5.0, 1, 2, 0.0}, {-1, 0, -1, -1, 0.0}, {-1, 0, -1, -1, 1.0}}, 1);
  double x7 = 7.0, x3 = 3.0, x5 = 5.0;
  CHECK(m.predict({&x7, 1}) == 3.0);
  CHECK(m.predict({&x3, 1}) == 2.0);
  CHECK(m.predict({&x5, 1}) == 2.0);  // threshold goes left
  double two[2] = {1, 2};
  CHECK_THROWS_AS(m.predict({two, 2}), Error);
}

TEST_CASE("metrics arithmetic") {
  std::vector<double> actual{100, 100}, pred{110, 90};
  Metrics m = compute_metrics(pred, actual);
  CHECK(m.mbe_percent == doctest::Approx(0.0));
  CHECK(m.cv_rmse_percent == doctest::Approx(10.0));

  std::vector<double> a{50, 120, 80}, p{50.5, 121.2, 80.8};
  CHECK(compute_metrics(p, a).mbe_percent == doctest::Approx(1.0));
  CHECK(compute_metrics(a, a).rmse == 0.0);

  std::vector<double> zero{0, 0};
  try {
    compute_metrics(zero, zero);
    FAIL("zero mean accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
  }
}

TEST_CASE("fit is deterministic and predictions stay within the target range") {
  const Dataset& d = small_sweep();
  GBTModel a = fit(d, Column::PChiller, chiller_features(), small_hp());
  GBTModel b = fit(d, Column::PChiller, chiller_features(), small_hp());
  auto target = d.column(Column::PChiller);
  double tmin = *std::min_element(target.begin(), target.end());
  double tmax = *std::max_element(target.begin(), target.end());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(50, 100), q(0, 3000);
  for (int i = 0; i < 200; ++i) {
    double x[2] = {t(rng), q(rng)};
    double pa = a.predict({x, 2});
    CHECK(pa == b.predict({x, 2}));
    CHECK(pa >= tmin - 1e-9);
    CHECK(pa <= tmax + 1e-9);
  }
}

TEST_CASE("bundle training") {
  const SurrogateBundle& b = small_bundle();
  CHECK(b.strata() == std::vector<int>{2, 4, 6, 8});
  CHECK_NOTHROW(b.validate());

  Dataset missing;
  for (const auto& r : small_sweep().records)
    if (r.n_fans != 6) missing.records.push_back(r);
  try {
    train_bundle(missing, small_hp());
    FAIL("missing stratum accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Bundle);
    CHECK(std::string(e.what()).find('6') != std::string::npos);
  }

  // Same data, hyperparameters and timestamp give the same file.
  SurrogateBundle again = train_bundle(small_sweep(), small_hp(), kDefaultStrata, "2026-01-01T00:00:00Z");
  CHECK(serialize_bundle(again) == serialize_bundle(b));
}

TEST_CASE("bundle persistence") {
  const SurrogateBundle& b = small_bundle();
  auto path = tmp("cwopt_bundle_test.json");
  save_bundle(b, path);
  SurrogateBundle back = load_bundle(path);
  CHECK(back.fingerprint() == b.fingerprint());
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> wb(55, 80), q(100, 2700), t(60, 90);
  for (int i = 0; i < 1000; ++i) {
    double w = wb(rng), l = q(rng), c = t(rng);
    CHECK(back.predict_chiller(c, l) == b.predict_chiller(c, l));
    CHECK(back.predict_rejection(l, c) == b.predict_rejection(l, c));
    CHECK(back.predict_tower(4, w, l, c) == b.predict_tower(4, w, l, c));
  }

  std::string text = serialize_bundle(b);
  auto expect_load_error = [&](const std::string& body, const std::string& needle) {
    auto p = tmp("cwopt_bundle_bad.json");
    write(p, body);
    try {
      load_bundle(p);
      FAIL("corrupt bundle accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Load);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
    std::filesystem::remove(p);
  };
  expect_load_error(text.substr(0, text.size() / 2), "cwopt_bundle_bad.json");
  expect_load_error("", "cwopt_bundle_bad.json");
  std::string future = text;
  future.replace(future.find("\"schema_version\": 1"), 19, "\"schema_version\": 99");
  expect_load_error(future, "schema_version");
  // A changed leaf still parses but no longer matches the stored fingerprint.
  std::string edited = text;
  std::size_t leaf = edited.find("\"value\"");
  leaf = edited.find_first_of("123456789", leaf);
  edited[leaf] = edited[leaf] == '9' ? '8' : static_cast<char>(edited[leaf] + 1);
  expect_load_error(edited, "models_fingerprint");
  CHECK_THROWS_AS(load_bundle(tmp("does_not_exist.json")), Error);
  std::filesystem::remove(path);
}

TEST_CASE("refine") {
  const SurrogateBundle& b = small_bundle();
  const Dataset& syn = small_sweep();

  SUBCASE("empty measured set is a no-op") {
    RefineResult r = refine(b, syn, Dataset{}, 5.0);
    CHECK_FALSE(r.report.warnings.empty());
    CHECK(r.bundle.fingerprint() == b.fingerprint());
  }
  SUBCASE("weight below one is rejected") { CHECK_THROWS_AS(refine(b, syn, syn, 0.5), Error); }
  SUBCASE("a synthetic subset at weight one adds nothing") {
    Dataset subset;
    for (std::size_t i = 0; i < syn.size(); i += 7) {
      subset.records.push_back(syn.records[i]);
      subset.records.back().source = Source::Measured;
    }
    RefineResult r = refine(b, syn, subset, 1.0);
    for (const auto& m : r.report.models) CHECK(std::abs(m.mbe_after - m.mbe_before) < 1e-9);
  }
  SUBCASE("biased chiller data pulls the chiller model") {
    Dataset biased;
    for (std::size_t i = 0; i < syn.size(); i += 3) {
      SampleRecord r = syn.records[i];
      r.p_chiller *= 1.05;
      r.source = Source::Measured;
      biased.records.push_back(r);
    }
    RefineResult r = refine(b, syn, biased, 10.0);
    const auto& chiller = r.report.models.front();
    CHECK(chiller.model == "chiller_power");
    CHECK(chiller.accepted);
    CHECK(std::abs(chiller.mbe_after) <= 0.5 * std::abs(chiller.mbe_before));
  }
}
