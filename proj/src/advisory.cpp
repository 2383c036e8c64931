#include "cwopt/advisory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cwopt/csv.hpp"
#include "cwopt/error.hpp"
#include "cwopt/units.hpp"

namespace cwopt {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path, ErrorKind kind, const std::string& what) {
  std::ifstream in(path);
  if (!in) fail(kind, "cannot open " + what + " '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Config, "cannot write '" + path.string() + "'");
  out << text;
}

void check_grid(const std::vector<double>& g, const std::string& name) {
  if (g.empty()) fail(ErrorKind::Table, name + " grid is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) fail(ErrorKind::Table, name + " grid has a non-finite value");
    if (i > 0 && !(g[i] > g[i - 1])) fail(ErrorKind::Table, name + " grid must be strictly increasing");
  }
}

std::vector<double> steps(double lo, double hi, std::size_t n) {
  std::vector<double> out;
  if (n == 0) return out;
  if (n == 1) return {lo};
  for (std::size_t i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  return out;
}

double raw_total(const SurrogateBundle& bundle, const PlantConfig& plant, double q, double wb, double t, int n) {
  return predict_loop(bundle, plant, q, wb, t, n).total();
}

}  // namespace

// ---------------------------------------------------------------------------

TableGrids TableGrids::standard() {
  TableGrids g;
  for (int q = 200; q <= 2700; q += 100) g.q_load.push_back(q);
  for (int wb = 60; wb <= 80; ++wb) g.t_wb.push_back(wb);
  return g;
}

TableGrids TableGrids::linspace(double q_lo, double q_hi, std::size_t nq, double wb_lo, double wb_hi,
                                std::size_t nwb) {
  return TableGrids{steps(q_lo, q_hi, nq), steps(wb_lo, wb_hi, nwb)};
}

void TableGrids::validate() const {
  check_grid(q_load, "q_load");
  check_grid(t_wb, "t_wb");
  if (q_load.front() < 0.0) fail(ErrorKind::Table, "q_load grid must be non-negative");
}

LookupTable build_table(const SurrogateBundle& bundle, const PlantConfig& plant, const TableGrids& grids,
                        const SwarmConfig& swarm) {
  grids.validate();
  swarm.validate();
  LookupTable table;
  table.grids = grids;
  table.context = TableContext{plant.n_chillers, plant.chw_supply_temp, bundle.fingerprint(), swarm.t_lo, swarm.t_hi,
                               swarm.fan_strata};

  const Envelope& env = bundle.envelope;
  auto outside = [](double v, const Range& r) { return v < r.lo || v > r.hi; };
  if (outside(grids.q_load.front(), env.q_load) || outside(grids.q_load.back(), env.q_load))
    table.warnings.push_back("q_load grid extends outside the training envelope");
  if (outside(grids.t_wb.front(), env.t_wb) || outside(grids.t_wb.back(), env.t_wb))
    table.warnings.push_back("t_wb grid extends outside the training envelope");

  table.cells.assign(grids.q_load.size(), std::vector<TableCell>(grids.t_wb.size()));
  for (std::size_t i = 0; i < grids.q_load.size(); ++i) {
    const double q = grids.q_load[i];
    for (std::size_t j = 0; j < grids.t_wb.size(); ++j) {
      const double wb = grids.t_wb[j];
      try {
        OptimizeResult r = optimize(loop_objective(bundle, plant, q, wb), swarm);
        TableCell& c = table.cells[i][j];
        c.t_cws_opt = r.best.t_cws;
        c.n_fans_opt = r.best.n_fans;
        c.feasible = r.best.feasible;
        c.predicted_power_kw = raw_total(bundle, plant, q, wb, r.best.t_cws, r.best.n_fans);
        c.n_chillers_on = active_chillers(plant, q);
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "table cell q_load=" << q << " t_wb=" << wb << " failed: " << e.what();
        fail(ErrorKind::Table, msg.str());
      }
    }
  }
  return table;
}

void write_table_csv(const LookupTable& table, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "q_load_tons,t_wb_f,t_cws_opt_f,n_fans_opt,predicted_power_kw,feasible,n_chillers_on\n";
  for (std::size_t i = 0; i < table.grids.q_load.size(); ++i)
    for (std::size_t j = 0; j < table.grids.t_wb.size(); ++j) {
      const TableCell& c = table.cells[i][j];
      out << csv::format_double(table.grids.q_load[i]) << ',' << csv::format_double(table.grids.t_wb[j]) << ','
          << csv::format_double(c.t_cws_opt) << ',' << c.n_fans_opt << ',' << csv::format_double(c.predicted_power_kw)
          << ',' << (c.feasible ? "true" : "false") << ',' << c.n_chillers_on << '\n';
    }
  write_text(path, out.str());
}

std::string table_to_json(const LookupTable& table) {
  json cells = json::array();
  for (const auto& row : table.cells) {
    json r = json::array();
    for (const TableCell& c : row)
      r.push_back({{"t_cws_opt_f", c.t_cws_opt},
                   {"n_fans_opt", c.n_fans_opt},
                   {"predicted_power_kw", c.predicted_power_kw},
                   {"feasible", c.feasible},
                   {"n_chillers_on", c.n_chillers_on}});
    cells.push_back(std::move(r));
  }
  json j = {{"format", "cwopt-lookup-table"},
            {"schema_version", 1},
            {"context",
             {{"n_chillers", table.context.n_chillers},
              {"chw_supply_temp_f", table.context.chw_supply_temp},
              {"bundle_fingerprint", table.context.bundle_fingerprint},
              {"t_cws_bounds_f", {table.context.t_cws_lo, table.context.t_cws_hi}},
              {"fan_strata", table.context.fan_strata}}},
            {"q_load_tons", table.grids.q_load},
            {"t_wb_f", table.grids.t_wb},
            {"cells", std::move(cells)},
            {"warnings", table.warnings}};
  return j.dump(1);
}

LookupTable table_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    if (j.value("format", "") != "cwopt-lookup-table") fail(ErrorKind::Load, "not a lookup table");
    LookupTable t;
    t.grids.q_load = j.at("q_load_tons").get<std::vector<double>>();
    t.grids.t_wb = j.at("t_wb_f").get<std::vector<double>>();
    const json& ctx = j.at("context");
    t.context.n_chillers = ctx.at("n_chillers").get<int>();
    t.context.chw_supply_temp = ctx.at("chw_supply_temp_f").get<double>();
    t.context.bundle_fingerprint = ctx.at("bundle_fingerprint").get<std::string>();
    auto bounds = ctx.at("t_cws_bounds_f").get<std::vector<double>>();
    if (bounds.size() != 2) fail(ErrorKind::Load, "t_cws_bounds_f needs two values");
    t.context.t_cws_lo = bounds[0];
    t.context.t_cws_hi = bounds[1];
    t.context.fan_strata = ctx.at("fan_strata").get<std::vector<int>>();
    t.warnings = j.value("warnings", std::vector<std::string>{});
    const json& cells = j.at("cells");
    if (cells.size() != t.grids.q_load.size()) fail(ErrorKind::Load, "cell rows do not match the q_load grid");
    for (const json& row : cells) {
      if (row.size() != t.grids.t_wb.size()) fail(ErrorKind::Load, "cell columns do not match the t_wb grid");
      std::vector<TableCell> r;
      for (const json& c : row)
        r.push_back(TableCell{c.at("t_cws_opt_f").get<double>(), c.at("n_fans_opt").get<int>(),
                              c.at("predicted_power_kw").get<double>(), c.at("feasible").get<bool>(),
                              c.value("n_chillers_on", 0)});
      t.cells.push_back(std::move(r));
    }
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::Load, std::string("malformed lookup table: ") + e.what());
  }
}

void save_table_json(const LookupTable& table, const std::filesystem::path& path) {
  write_text(path, table_to_json(table));
}

LookupTable load_table_json(const std::filesystem::path& path) {
  return table_from_json(read_text(path, ErrorKind::Load, "lookup table"));
}

// ---------------------------------------------------------------------------

Recommendation advise(const SurrogateBundle& bundle, const PlantConfig& plant, const AdviseRequest& req,
                      const SwarmConfig& swarm, const TariffSchedule* tariff, std::optional<std::string> computed_at) {
  if (!std::isfinite(req.q_load) || req.q_load < 0.0) fail(ErrorKind::Domain, "q_load must be finite and >= 0");
  if (!std::isfinite(req.t_wb)) fail(ErrorKind::Domain, "t_wb must be finite");
  if (req.current && !std::isfinite(req.current->t_cws)) fail(ErrorKind::Domain, "current t_cws must be finite");

  Recommendation rec;
  rec.q_load = req.q_load;
  rec.t_wb = req.t_wb;
  rec.timestamp = req.timestamp;
  rec.current = req.current;
  rec.bundle_fingerprint = bundle.fingerprint();
  rec.computed_at = computed_at ? *computed_at : utc_now_iso();
  for (const auto& v : bundle.envelope.violations(req.t_wb, req.q_load))
    rec.warnings.push_back(v + " outside the training envelope; prediction is extrapolated");

  std::optional<double> rate;
  if (tariff) {
    if (req.timestamp)
      rate = tariff->energy_rate(period_of(*tariff, *req.timestamp));
    else
      rec.warnings.push_back("no timestamp given; cost rate omitted");
  }

  Objective f = rate ? loop_objective(bundle, plant, req.q_load, req.t_wb, *rate)
                     : loop_objective(bundle, plant, req.q_load, req.t_wb);
  OptimizeResult r = optimize(f, swarm, req.current);
  rec.t_cws_opt = r.best.t_cws;
  rec.n_fans_opt = r.best.n_fans;
  rec.prediction = predict_loop(bundle, plant, req.q_load, req.t_wb, rec.t_cws_opt, rec.n_fans_opt);

  if (req.current) {
    LoopPrediction cur = predict_loop(bundle, plant, req.q_load, req.t_wb, req.current->t_cws, req.current->n_fans);
    const bool improves = rec.prediction.feasible(rec.t_cws_opt) && rec.prediction.total() < cur.total();
    if (!improves) {
      rec.t_cws_opt = req.current->t_cws;
      rec.n_fans_opt = req.current->n_fans;
      rec.prediction = cur;
    }
    if (!cur.feasible(req.current->t_cws))
      rec.warnings.push_back("current t_cws is below the predicted achievable floor");
  }

  rec.feasible = rec.prediction.feasible(rec.t_cws_opt);
  if (!rec.feasible && !req.current) rec.warnings.push_back("no feasible setting within the t_cws bounds");
  rec.predicted_power_kw = rec.prediction.total();
  if (rate) rec.predicted_cost_rate = rec.predicted_power_kw * *rate;
  if (req.current) {
    double cur = raw_total(bundle, plant, req.q_load, req.t_wb, req.current->t_cws, req.current->n_fans);
    Recommendation::Delta d{rec.predicted_power_kw - cur, std::nullopt};
    if (rate) d.cost_rate = d.power_kw * *rate;
    rec.baseline_delta = d;
  }
  return rec;
}

WhatIf what_if(const SurrogateBundle& bundle, const PlantConfig& plant, double q_load, double t_wb, double t_cws,
               int n_fans, const TariffSchedule* tariff, std::optional<Timestamp> at) {
  if (!std::isfinite(q_load) || q_load < 0.0) fail(ErrorKind::Domain, "q_load must be finite and >= 0");
  if (!std::isfinite(t_wb) || !std::isfinite(t_cws)) fail(ErrorKind::Domain, "temperatures must be finite");
  bundle.tower(n_fans);
  WhatIf w;
  w.prediction = predict_loop(bundle, plant, q_load, t_wb, t_cws, n_fans);
  w.feasible = w.prediction.feasible(t_cws);
  if (!w.feasible) w.warnings.push_back("t_cws is below the predicted achievable floor");
  for (const auto& v : bundle.envelope.violations(t_wb, q_load))
    w.warnings.push_back(v + " outside the training envelope; prediction is extrapolated");
  if (tariff && at) w.cost_rate = w.prediction.total() * tariff->energy_rate(period_of(*tariff, *at));
  return w;
}

namespace {

json prediction_json(const LoopPrediction& p) {
  return {{"p_chiller_kw", p.p_chiller}, {"q_rej_tons", p.q_rej},        {"p_fan_kw", p.p_fan},
          {"p_pump_kw", p.p_pump},       {"total_kw", p.total()},        {"t_cws_floor_f", p.t_cws_floor}};
}

}  // namespace

std::string recommendation_to_json(const Recommendation& rec) {
  json j = {{"q_load_tons", rec.q_load},
            {"t_wb_f", rec.t_wb},
            {"t_cws_opt_f", rec.t_cws_opt},
            {"n_fans_opt", rec.n_fans_opt},
            {"feasible", rec.feasible},
            {"predicted_power_kw", rec.predicted_power_kw},
            {"components", prediction_json(rec.prediction)},
            {"bundle_fingerprint", rec.bundle_fingerprint},
            {"computed_at", rec.computed_at},
            {"warnings", rec.warnings}};
  j["timestamp"] = rec.timestamp ? json(rec.timestamp->iso()) : json(nullptr);
  j["predicted_cost_rate"] = rec.predicted_cost_rate ? json(*rec.predicted_cost_rate) : json(nullptr);
  j["current"] = rec.current ? json{{"t_cws_f", rec.current->t_cws}, {"n_fans", rec.current->n_fans}} : json(nullptr);
  if (rec.baseline_delta) {
    j["baseline_delta"] = {{"power_kw", rec.baseline_delta->power_kw},
                           {"cost_rate", rec.baseline_delta->cost_rate ? json(*rec.baseline_delta->cost_rate)
                                                                       : json(nullptr)}};
  } else {
    j["baseline_delta"] = nullptr;
  }
  return j.dump();
}

std::string what_if_to_json(const WhatIf& w, double t_cws, int n_fans) {
  json j;
  j["components"] = prediction_json(w.prediction);
  j["predicted_power_kw"] = w.prediction.total();
  j["t_cws_f"] = t_cws;
  j["n_fans"] = n_fans;
  j["feasible"] = w.feasible;
  j["cost_rate"] = w.cost_rate ? json(*w.cost_rate) : json(nullptr);
  j["warnings"] = w.warnings;
  return j.dump();
}

// ---------------------------------------------------------------------------

SavingsResult savings_pipeline(const SurrogateBundle& bundle, const PlantConfig& plant, const Dataset& measured,
                               const TariffSchedule& tariff, const std::vector<std::chrono::year_month>& months,
                               const SwarmConfig& swarm, int interval_minutes) {
  swarm.validate();
  tariff.validate();
  if (measured.empty()) fail(ErrorKind::Schema, "measured dataset is empty");

  std::set<std::chrono::year_month> wanted(months.begin(), months.end());
  if (wanted.empty())
    for (const auto& r : measured.records) wanted.insert(r.timestamp.year_month());

  std::vector<const SampleRecord*> rows;
  for (const auto& r : measured.records)
    if (wanted.count(r.timestamp.year_month())) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(),
            [](const SampleRecord* a, const SampleRecord* b) { return a->timestamp < b->timestamp; });

  SavingsResult out;
  IntervalSeries base, opt;
  base.interval_minutes = opt.interval_minutes = interval_minutes;
  for (const SampleRecord* r : rows) {
    if (!std::isfinite(r->t_cws) || !std::isfinite(r->q_load) || !std::isfinite(r->t_wb))
      fail(ErrorKind::Schema, "record at " + r->timestamp.iso() + " lacks finite settings");
    if (std::find(swarm.fan_strata.begin(), swarm.fan_strata.end(), r->n_fans) == swarm.fan_strata.end())
      fail(ErrorKind::Schema, "record at " + r->timestamp.iso() + " has fan count " + std::to_string(r->n_fans) +
                                  " outside the optimizer strata");
    IntervalDetail d;
    d.timestamp = r->timestamp;
    d.q_load = r->q_load;
    d.t_wb = r->t_wb;
    d.baseline_t_cws = d.optimized_t_cws = r->t_cws;
    d.baseline_n_fans = d.optimized_n_fans = r->n_fans;
    d.baseline_kw = d.optimized_kw = raw_total(bundle, plant, r->q_load, r->t_wb, r->t_cws, r->n_fans);
    if (r->q_load > 0.0) {
      // Within one interval the rate is a constant factor, so the power-mode
      // argmin is also the cost-mode argmin.
      OptimizeResult o = optimize(loop_objective(bundle, plant, r->q_load, r->t_wb), swarm, Baseline{r->t_cws, r->n_fans});
      LoopPrediction p = predict_loop(bundle, plant, r->q_load, r->t_wb, o.best.t_cws, o.best.n_fans);
      if (p.feasible(o.best.t_cws) && p.total() < d.baseline_kw) {
        d.optimized_t_cws = o.best.t_cws;
        d.optimized_n_fans = o.best.n_fans;
        d.optimized_kw = p.total();
      }
    }
    base.timestamps.push_back(d.timestamp);
    opt.timestamps.push_back(d.timestamp);
    base.power_kw.push_back(std::max(0.0, d.baseline_kw));
    opt.power_kw.push_back(std::max(0.0, d.optimized_kw));
    out.intervals.push_back(d);
  }

  for (auto ym : wanted) out.reports.push_back(compare_costs(tariff, base, opt, ym));
  return out;
}

std::string savings_to_json(const SavingsResult& result) {
  json reports = json::array();
  auto bill = [](const BillResult& b) {
    json periods = json::object();
    for (const auto& [label, pc] : b.periods)
      periods[label] = {{"energy_kwh", pc.energy_kwh},
                        {"peak_kw", pc.peak_kw},
                        {"energy_charge_cents", pc.energy_charge},
                        {"demand_charge_cents", pc.demand_charge}};
    return json{{"periods", periods}, {"fixed_charge_cents", b.fixed_charge}, {"total_cents", b.total}};
  };
  for (const auto& r : result.reports)
    reports.push_back({{"month", format_year_month(r.month)},
                       {"kwh_saved", r.kwh_saved},
                       {"kwh_dollar_saved_cents", r.kwh_dollar_saved},
                       {"demand_dollar_saved_cents", r.demand_dollar_saved},
                       {"total_saved_cents", r.total_saved},
                       {"percent_saved", r.percent_saved},
                       {"baseline", bill(r.baseline)},
                       {"optimized", bill(r.optimized)}});
  return json{{"reports", reports}, {"intervals", result.intervals.size()}, {"table", format_savings_table(result.reports)}}
      .dump();
}

void write_interval_details_csv(const SavingsResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "timestamp,q_load_tons,t_wb_f,baseline_t_cws_f,baseline_n_fans,baseline_kw,optimized_t_cws_f,"
         "optimized_n_fans,optimized_kw\n";
  for (const auto& d : result.intervals)
    out << d.timestamp.iso() << ',' << csv::format_double(d.q_load) << ',' << csv::format_double(d.t_wb) << ','
        << csv::format_double(d.baseline_t_cws) << ',' << d.baseline_n_fans << ',' << csv::format_double(d.baseline_kw)
        << ',' << csv::format_double(d.optimized_t_cws) << ',' << d.optimized_n_fans << ','
        << csv::format_double(d.optimized_kw) << '\n';
  write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

enum class Quantity { Temperature, Cooling, Power, Count };

Quantity quantity_of(Column c) {
  switch (c) {
    case Column::TWb:
    case Column::TCws:
    case Column::TCwr: return Quantity::Temperature;
    case Column::QLoad:
    case Column::QRej: return Quantity::Cooling;
    case Column::NFans: return Quantity::Count;
    default: return Quantity::Power;
  }
}

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::optional<double> try_convert(Column column, const std::string& unit, double v) {
  const std::string u = lower(unit);
  switch (quantity_of(column)) {
    case Quantity::Temperature:
      if (u.empty() || u == "f" || u == "degf") return v;
      if (u == "c" || u == "degc") return units::celsius_to_fahrenheit(v);
      if (u == "k") return units::celsius_to_fahrenheit(v - 273.15);
      return std::nullopt;
    case Quantity::Cooling:
      if (u.empty() || u == "tons" || u == "ton") return v;
      if (u == "kw" || u == "kwt") return units::kw_to_tons(v);
      if (u == "btu/h" || u == "btuh") return v / units::kBtuPerTonHour;
      if (u == "mbh") return v * 1000.0 / units::kBtuPerTonHour;
      return std::nullopt;
    case Quantity::Power:
      if (u.empty() || u == "kw") return v;
      if (u == "w") return v / 1000.0;
      if (u == "mw") return v * 1000.0;
      return std::nullopt;
    case Quantity::Count:
      if (u.empty() || u == "count") return v;
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

double convert_unit(Column column, const std::string& unit, double value) {
  auto v = try_convert(column, unit, value);
  if (!v) fail(ErrorKind::Config, "unknown unit '" + unit + "' for " + std::string(column_name(column)));
  return *v;
}

ColumnMapping ColumnMapping::identity() {
  ColumnMapping m;
  for (Column c : numeric_columns()) m.columns[c] = ColumnSource{std::string(column_name(c)), "", std::nullopt, false};
  return m;
}

void ColumnMapping::validate() const {
  if (timestamp_column.empty()) fail(ErrorKind::Config, "mapping needs a timestamp column");
  for (Column c : numeric_columns()) {
    auto it = columns.find(c);
    const std::string name(column_name(c));
    if (it == columns.end()) fail(ErrorKind::Config, "mapping does not cover required column " + name);
    const ColumnSource& s = it->second;
    int kinds = (!s.column.empty()) + s.value.has_value() + s.derive;
    if (kinds != 1) fail(ErrorKind::Config, name + " needs exactly one of column, value or derive");
    if (s.derive && c != Column::QRej) fail(ErrorKind::Config, "only q_rej_tons can be derived");
    if (s.value && !std::isfinite(*s.value)) fail(ErrorKind::Config, name + " constant must be finite");
    if (!try_convert(c, s.unit, 0.0)) fail(ErrorKind::Config, "unknown unit '" + s.unit + "' for " + name);
  }
}

ColumnMapping parse_mapping(const std::string& text, const std::string& source_name) {
  ColumnMapping m;
  try {
    json j = json::parse(text);
    m.timestamp_column = j.value("timestamp", std::string("timestamp"));
    for (const auto& [key, spec] : j.at("columns").items()) {
      auto c = column_from_name(key);
      if (!c) fail(ErrorKind::Config, source_name + ": unknown dataset column '" + key + "'");
      ColumnSource s;
      if (spec.is_string()) {
        s.column = spec.get<std::string>();
      } else {
        s.column = spec.value("column", std::string());
        s.unit = spec.value("unit", std::string());
        if (spec.contains("value")) s.value = spec.at("value").get<double>();
        if (spec.contains("derive")) {
          if (spec.at("derive").get<std::string>() != "energy_balance")
            fail(ErrorKind::Config, source_name + ": derive must be \"energy_balance\"");
          s.derive = true;
        }
      }
      m.columns[*c] = s;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, source_name + ": malformed mapping: " + e.what());
  }
  m.validate();
  return m;
}

ColumnMapping load_mapping(const std::filesystem::path& path) {
  return parse_mapping(read_text(path, ErrorKind::Config, "mapping"), path.string());
}

IngestResult ingest_measured(const std::filesystem::path& csv_path, const ColumnMapping& mapping,
                             const std::vector<int>& fan_stages) {
  mapping.validate();
  csv::Table table;
  try {
    table = csv::read(csv_path);
  } catch (const Error& e) {
    fail(ErrorKind::Ingestion, e.what());
  }

  auto ts_col = table.column(mapping.timestamp_column);
  if (!ts_col) fail(ErrorKind::Ingestion, "timestamp column '" + mapping.timestamp_column + "' not found");
  std::map<Column, std::size_t> index;
  for (const auto& [c, s] : mapping.columns) {
    if (s.column.empty()) continue;
    auto i = table.column(s.column);
    if (!i) fail(ErrorKind::Ingestion, "source column '" + s.column + "' not found in " + csv_path.string());
    index[c] = *i;
  }

  IngestResult out;
  out.data.provenance = "ingested from " + csv_path.string();
  for (const csv::Row& row : table.rows) {
    ++out.rows_read;
    auto issue = [&](const std::string& msg) { out.issues.push_back(IngestIssue{row.line, msg}); };
    SampleRecord r;
    r.source = Source::Measured;
    try {
      r.timestamp = Timestamp::parse(row.fields.at(*ts_col));
    } catch (const std::exception& e) {
      issue(std::string("bad timestamp: ") + e.what());
      continue;
    }
    std::map<Column, double> v;
    std::string bad;
    for (const auto& [c, s] : mapping.columns) {
      if (s.derive) continue;
      double x;
      if (s.value) {
        x = *s.value;
      } else {
        const std::size_t i = index.at(c);
        auto parsed = i < row.fields.size() ? csv::to_double(row.fields[i]) : std::nullopt;
        if (!parsed) {
          bad = "column '" + s.column + "' is not a number";
          break;
        }
        x = *parsed;
      }
      v[c] = convert_unit(c, s.unit, x);
    }
    if (!bad.empty()) {
      issue(bad);
      continue;
    }
    if (mapping.columns.at(Column::QRej).derive) v[Column::QRej] = heat_rejection(v[Column::QLoad], v[Column::PChiller]);
    const double fans = v[Column::NFans];
    if (fans != std::round(fans)) {
      issue("n_fans is not an integer");
      continue;
    }
    r.t_wb = v[Column::TWb];
    r.q_load = v[Column::QLoad];
    r.t_cws = v[Column::TCws];
    r.t_cwr = v[Column::TCwr];
    r.n_fans = static_cast<int>(fans);
    r.p_chiller = v[Column::PChiller];
    r.p_fan = v[Column::PFan];
    r.p_pump = v[Column::PPump];
    r.q_rej = v[Column::QRej];
    if (auto why = check_record(r, fan_stages)) {
      issue(*why);
      continue;
    }
    out.data.records.push_back(r);
  }

  if (out.rows_read == 0) fail(ErrorKind::Ingestion, csv_path.string() + " has no data rows");
  const double frac = static_cast<double>(out.issues.size()) / static_cast<double>(out.rows_read);
  if (frac > kMaxRejectedFraction) {
    std::ostringstream msg;
    msg << out.issues.size() << " of " << out.rows_read << " rows rejected (more than 5%)";
    for (std::size_t k = 0; k < std::min<std::size_t>(5, out.issues.size()); ++k)
      msg << "; line " << out.issues[k].line << ": " << out.issues[k].message;
    fail(ErrorKind::Ingestion, msg.str());
  }
  return out;
}

}  // namespace cwopt
