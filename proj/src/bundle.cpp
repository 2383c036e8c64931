#include "cwopt/bundle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "cwopt/error.hpp"

namespace cwopt {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "cwopt-surrogate-bundle";

Range range_of(const std::vector<double>& v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return Range{*lo, *hi};
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

const std::vector<Column>& chiller_features() {
  static const std::vector<Column> f = {Column::TCws, Column::QLoad};
  return f;
}

const std::vector<Column>& rejection_features() {
  static const std::vector<Column> f = {Column::QLoad, Column::TCws};
  return f;
}

const std::vector<Column>& tower_features() {
  static const std::vector<Column> f = {Column::TWb, Column::QRej, Column::TCws};
  return f;
}

std::vector<std::string> Envelope::violations(double t_wb_value, double q_load_value, double margin) const {
  std::vector<std::string> out;
  auto outside = [margin](const Range& r, double v) {
    double pad = margin * (r.hi - r.lo);
    return v < r.lo - pad || v > r.hi + pad;
  };
  if (outside(t_wb, t_wb_value)) out.emplace_back("t_wb_f");
  if (outside(q_load, q_load_value)) out.emplace_back("q_load_tons");
  return out;
}

// ---------------------------------------------------------------------------
// SurrogateBundle
// ---------------------------------------------------------------------------

double SurrogateBundle::predict_chiller(double t_cws, double q_load) const {
  const double x[] = {t_cws, q_load};
  return chiller_power.predict_unchecked(x);
}

double SurrogateBundle::predict_rejection(double q_load, double t_cws) const {
  const double x[] = {q_load, t_cws};
  return heat_rejection.predict_unchecked(x);
}

double SurrogateBundle::predict_tower(int n_fans, double t_wb, double q_rej, double t_cws) const {
  const double x[] = {t_wb, q_rej, t_cws};
  return tower(n_fans).predict_unchecked(x);
}

const GBTModel& SurrogateBundle::tower(int n_fans) const {
  auto it = tower_power.find(n_fans);
  if (it == tower_power.end())
    fail(ErrorKind::Config, "bundle has no tower model for " + std::to_string(n_fans) + " fans");
  return it->second;
}

std::vector<int> SurrogateBundle::strata() const {
  std::vector<int> out;
  for (const auto& [n, m] : tower_power) out.push_back(n);
  return out;
}

void SurrogateBundle::validate() const {
  if (schema_version != kBundleSchemaVersion)
    fail(ErrorKind::Bundle, "unsupported bundle schema_version " + std::to_string(schema_version));
  if (strata() != kDefaultStrata) fail(ErrorKind::Bundle, "bundle tower models must cover exactly {2,4,6,8} fans");
  auto check = [](const GBTModel& m, const std::vector<Column>& features, Column target, const std::string& what) {
    std::vector<std::string> names;
    for (Column c : features) names.emplace_back(column_name(c));
    if (m.feature_names != names) fail(ErrorKind::Bundle, what + ": unexpected feature list");
    if (m.target_name != column_name(target)) fail(ErrorKind::Bundle, what + ": unexpected target");
    if (!(m.learning_rate > 0.0 && m.learning_rate <= 1.0)) fail(ErrorKind::Bundle, what + ": bad learning_rate");
    if (!std::isfinite(m.base_prediction)) fail(ErrorKind::Bundle, what + ": non-finite base prediction");
    for (const auto& t : m.trees) t.validate(names.size());
  };
  check(chiller_power, chiller_features(), Column::PChiller, "chiller_power");
  check(heat_rejection, rejection_features(), Column::QRej, "heat_rejection");
  for (const auto& [n, m] : tower_power) check(m, tower_features(), Column::PFan, "tower_power_" + std::to_string(n));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::string utc_now_iso() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

Dataset stratum(const Dataset& data, int n_fans) {
  Dataset out;
  for (const auto& r : data.records)
    if (r.n_fans == n_fans) out.records.push_back(r);
  return out;
}

}  // namespace

SurrogateBundle train_bundle(const Dataset& data, const Hyperparams& hp, const std::vector<int>& strata,
                             std::optional<std::string> created_at) {
  hp.validate();
  const std::size_t min_rows = 2 * static_cast<std::size_t>(hp.min_samples_leaf);
  std::map<int, Dataset> slices;
  for (int n : strata) {
    slices[n] = stratum(data, n);
    if (slices[n].size() < min_rows)
      fail(ErrorKind::Bundle, "stratum " + std::to_string(n) + " fans has " + std::to_string(slices[n].size()) +
                                  " rows; at least " + std::to_string(min_rows) + " required");
  }
  SurrogateBundle b;
  b.hyperparams = hp;
  b.created_at = created_at ? *created_at : utc_now_iso();
  b.training_data_fingerprint = fingerprint(data);
  b.chiller_power = fit(data, Column::PChiller, chiller_features(), hp);
  b.heat_rejection = fit(data, Column::QRej, rejection_features(), hp);
  for (int n : strata) b.tower_power[n] = fit(slices[n], Column::PFan, tower_features(), hp);
  b.envelope.t_wb = range_of(data.column(Column::TWb));
  b.envelope.q_load = range_of(data.column(Column::QLoad));
  b.envelope.t_cws = range_of(data.column(Column::TCws));
  return b;
}

// ---------------------------------------------------------------------------
// Refinement
// ---------------------------------------------------------------------------

namespace {

// Synthetic rows at weight 1, then measured rows at `weight` unless an
// identical synthetic row already exists.
TrainingData weighted_union(const Dataset& synthetic, const Dataset& measured, Column target,
                            const std::vector<Column>& features, double weight) {
  TrainingData td = training_data(synthetic, target, features);
  td.weights.assign(td.rows(), 1.0);
  std::map<std::vector<double>, std::size_t> index;
  std::vector<double> key(features.size() + 1);
  for (std::size_t i = 0; i < td.rows(); ++i) {
    for (std::size_t f = 0; f < features.size(); ++f) key[f] = td.columns[f][i];
    key.back() = td.target[i];
    index.emplace(key, i);
  }
  for (const auto& r : measured.records) {
    for (std::size_t f = 0; f < features.size(); ++f) key[f] = column_value(r, features[f]);
    key.back() = column_value(r, target);
    if (auto it = index.find(key); it != index.end()) {
      td.weights[it->second] = std::max(td.weights[it->second], weight);
      continue;
    }
    for (std::size_t f = 0; f < features.size(); ++f) td.columns[f].push_back(key[f]);
    td.target.push_back(key.back());
    td.weights.push_back(weight);
  }
  return td;
}

double measured_mbe(const GBTModel& model, const Dataset& measured) {
  return evaluate(model, measured).metrics.mbe_percent;
}

}  // namespace

RefineResult refine(const SurrogateBundle& bundle, const Dataset& synthetic, const Dataset& measured, double weight) {
  if (!(weight >= 1.0) || !std::isfinite(weight)) fail(ErrorKind::Domain, "refinement weight must be >= 1");
  RefineResult result{bundle, {}};
  if (measured.empty()) {
    result.report.warnings.emplace_back("measured dataset is empty; bundle unchanged");
    return result;
  }
  for (const auto& r : measured.records)
    if (auto why = check_record(r)) fail(ErrorKind::Schema, "measured row at " + r.timestamp.iso() + ": " + *why);

  const Hyperparams& hp = bundle.hyperparams;
  auto refit = [&](const GBTModel& old, const Dataset& syn, const Dataset& meas, Column target,
                   const std::vector<Column>& features, const std::string& name) {
    ModelRefinement m;
    m.model = name;
    m.measured_rows = meas.size();
    if (meas.empty()) {
      result.report.warnings.push_back(name + ": no measured rows; kept");
      return old;
    }
    m.mbe_before = measured_mbe(old, meas);
    GBTModel fresh = fit(weighted_union(syn, meas, target, features, weight), hp);
    m.mbe_after = measured_mbe(fresh, meas);
    m.accepted = std::abs(m.mbe_after) <= std::abs(m.mbe_before);
    result.report.models.push_back(m);
    return m.accepted ? fresh : old;
  };

  SurrogateBundle& out = result.bundle;
  out.chiller_power = refit(bundle.chiller_power, synthetic, measured, Column::PChiller, chiller_features(), "chiller_power");
  out.heat_rejection = refit(bundle.heat_rejection, synthetic, measured, Column::QRej, rejection_features(), "heat_rejection");
  for (const auto& [n, model] : bundle.tower_power)
    out.tower_power[n] = refit(model, stratum(synthetic, n), stratum(measured, n), Column::PFan, tower_features(),
                               "tower_power_" + std::to_string(n));

  bool any = std::any_of(result.report.models.begin(), result.report.models.end(),
                         [](const ModelRefinement& m) { return m.accepted; });
  if (!any) {
    result.report.rejected = true;
    result.bundle = bundle;
    return result;
  }
  out.created_at = utc_now_iso();
  out.training_data_fingerprint = fingerprint(synthetic) + "+" + fingerprint(measured);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

json model_to_json(const GBTModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array();
    for (const auto& n : t.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"max_depth", t.max_depth()},
                     {"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  return {{"target", m.target_name},
          {"features", m.feature_names},
          {"base_prediction", m.base_prediction},
          {"learning_rate", m.learning_rate},
          {"constant_target", m.constant_target},
          {"training_metrics",
           {{"rmse", m.training_metrics.rmse},
            {"mbe_percent", m.training_metrics.mbe_percent},
            {"cv_rmse_percent", m.training_metrics.cv_rmse_percent}}},
          {"trees", trees}};
}

GBTModel model_from_json(const json& j) {
  GBTModel m;
  m.target_name = j.at("target").get<std::string>();
  m.feature_names = j.at("features").get<std::vector<std::string>>();
  m.base_prediction = j.at("base_prediction").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.constant_target = j.at("constant_target").get<bool>();
  const auto& tm = j.at("training_metrics");
  m.training_metrics = Metrics{tm.at("rmse").get<double>(), tm.at("mbe_percent").get<double>(),
                               tm.at("cv_rmse_percent").get<double>()};
  for (const auto& t : j.at("trees")) {
    auto feature = t.at("feature").get<std::vector<int>>();
    auto threshold = t.at("threshold").get<std::vector<double>>();
    auto left = t.at("left").get<std::vector<int>>();
    auto right = t.at("right").get<std::vector<int>>();
    auto value = t.at("value").get<std::vector<double>>();
    std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
      fail(ErrorKind::Bundle, "tree arrays have different lengths");
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = TreeNode{feature[i], threshold[i], left[i], right[i], value[i]};
    m.trees.emplace_back(std::move(nodes), t.at("max_depth").get<int>());
  }
  return m;
}

json models_json(const SurrogateBundle& b) {
  json towers = json::object();
  for (const auto& [n, m] : b.tower_power) towers[std::to_string(n)] = model_to_json(m);
  return {{"chiller_power", model_to_json(b.chiller_power)},
          {"heat_rejection", model_to_json(b.heat_rejection)},
          {"tower_power", towers}};
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 2) fail(ErrorKind::Bundle, "envelope ranges need two values");
  return Range{v[0], v[1]};
}

}  // namespace

std::string SurrogateBundle::fingerprint() const { return hex64(fnv1a(models_json(*this).dump())); }

std::string serialize_bundle(const SurrogateBundle& b) {
  json j = {{"format", kFormatTag},
            {"schema_version", b.schema_version},
            {"created_at", b.created_at},
            {"training_data_fingerprint", b.training_data_fingerprint},
            {"training_data_path", b.training_data_path},
            {"hyperparams",
             {{"n_trees", b.hyperparams.n_trees},
              {"max_depth", b.hyperparams.max_depth},
              {"learning_rate", b.hyperparams.learning_rate},
              {"min_samples_leaf", b.hyperparams.min_samples_leaf},
              {"seed", b.hyperparams.seed}}},
            {"envelope",
             {{"t_wb_f", range_json(b.envelope.t_wb)},
              {"q_load_tons", range_json(b.envelope.q_load)},
              {"t_cws_f", range_json(b.envelope.t_cws)}}},
            {"models_fingerprint", b.fingerprint()},
            {"models", models_json(b)}};
  return j.dump(1) + "\n";
}

SurrogateBundle parse_bundle(const std::string& text, const std::string& source_name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Load, source_name + ": not a readable bundle (" + std::string(e.what()) + ")");
  }
  SurrogateBundle b;
  try {
    if (!j.is_object() || j.value("format", std::string{}) != kFormatTag)
      fail(ErrorKind::Load, source_name + ": missing bundle format tag");
    b.schema_version = j.at("schema_version").get<int>();
    if (b.schema_version != kBundleSchemaVersion)
      fail(ErrorKind::Load, source_name + ": bundle schema_version " + std::to_string(b.schema_version) +
                                " is not supported (expected " + std::to_string(kBundleSchemaVersion) + ")");
    b.created_at = j.at("created_at").get<std::string>();
    b.training_data_fingerprint = j.at("training_data_fingerprint").get<std::string>();
    b.training_data_path = j.value("training_data_path", std::string{});
    const auto& hp = j.at("hyperparams");
    b.hyperparams.n_trees = hp.at("n_trees").get<int>();
    b.hyperparams.max_depth = hp.at("max_depth").get<int>();
    b.hyperparams.learning_rate = hp.at("learning_rate").get<double>();
    b.hyperparams.min_samples_leaf = hp.at("min_samples_leaf").get<int>();
    b.hyperparams.seed = hp.at("seed").get<std::uint64_t>();
    const auto& env = j.at("envelope");
    b.envelope.t_wb = range_from(env.at("t_wb_f"));
    b.envelope.q_load = range_from(env.at("q_load_tons"));
    b.envelope.t_cws = range_from(env.at("t_cws_f"));
    const auto& models = j.at("models");
    b.chiller_power = model_from_json(models.at("chiller_power"));
    b.heat_rejection = model_from_json(models.at("heat_rejection"));
    for (const auto& [key, value] : models.at("tower_power").items()) {
      int n = 0;
      try {
        n = std::stoi(key);
      } catch (const std::exception&) {
        fail(ErrorKind::Load, source_name + ": tower model key '" + key + "' is not a fan count");
      }
      b.tower_power[n] = model_from_json(value);
    }
    b.validate();
    const auto stored = j.at("models_fingerprint").get<std::string>();
    if (stored != b.fingerprint())
      fail(ErrorKind::Load, source_name + ": model data does not match models_fingerprint " + stored +
                                " (corrupted or edited file)");
  } catch (const json::exception& e) {
    fail(ErrorKind::Load, source_name + ": malformed bundle (" + std::string(e.what()) + ")");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Load) throw;
    fail(ErrorKind::Load, source_name + ": " + e.what());
  }
  return b;
}

void save_bundle(const SurrogateBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Bundle, "cannot write bundle '" + path.string() + "'");
  out << serialize_bundle(bundle);
  if (!out) fail(ErrorKind::Bundle, "failed writing bundle '" + path.string() + "'");
}

SurrogateBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Load, "cannot open bundle '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_bundle(buf.str(), path.string());
}

}  // namespace cwopt
