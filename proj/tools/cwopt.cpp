// cwopt: command-line front end for the condenser-loop toolkit.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cwopt/advisory.hpp"
#include "cwopt/csv.hpp"
#include "cwopt/datagen.hpp"
#include "cwopt/error.hpp"
#include "cwopt/gbt.hpp"
#include "cwopt/service.hpp"
#include "cwopt/units.hpp"

using namespace cwopt;
using nlohmann::json;

namespace {

PlantConfig plant_or_default(const std::string& path) {
  return path.empty() ? PlantConfig::synthetic_default() : load_plant_config(path);
}

Hyperparams load_hyper(const std::string& path) {
  Hyperparams hp;
  if (path.empty()) return hp;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open hyperparameter file '" + path + "'");
  try {
    json j = json::parse(in);
    hp.n_trees = j.value("n_trees", hp.n_trees);
    hp.max_depth = j.value("max_depth", hp.max_depth);
    hp.learning_rate = j.value("learning_rate", hp.learning_rate);
    hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
    hp.seed = j.value("seed", hp.seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path + ": " + e.what());
  }
  hp.validate();
  return hp;
}

Baseline parse_baseline(const std::string& text) {
  auto comma = text.find(',');
  if (comma == std::string::npos) fail(ErrorKind::Config, "baseline must be '<t_cws>,<n_fans>'");
  auto t = csv::to_double(text.substr(0, comma));
  auto n = csv::to_int(text.substr(comma + 1));
  if (!t || !n) fail(ErrorKind::Config, "baseline must be '<t_cws>,<n_fans>'");
  return Baseline{*t, static_cast<int>(*n)};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_metrics(const std::string& name, const Evaluation& e) {
  std::printf("%-18s rows %7zu  CV(RMSE) %6.2f%%  MBE %7.3f%%  RMSE %.3f\n", name.c_str(), e.rows,
              e.metrics.cv_rmse_percent, e.metrics.mbe_percent, e.metrics.rmse);
}

Dataset stratum(const Dataset& d, int n) {
  Dataset out;
  for (const auto& r : d.records)
    if (r.n_fans == n) out.records.push_back(r);
  return out;
}

void print_bundle_eval(const SurrogateBundle& b, const Dataset& d) {
  print_metrics("chiller_power", evaluate(b.chiller_power, d));
  print_metrics("heat_rejection", evaluate(b.heat_rejection, d));
  for (int n : b.strata()) {
    Dataset s = stratum(d, n);
    if (s.empty()) {
      std::printf("%-18s no rows\n", ("tower_power_" + std::to_string(n)).c_str());
      continue;
    }
    print_metrics("tower_power_" + std::to_string(n), evaluate(b.tower(n), s));
  }
}

struct SwarmOpts {
  int particles = SwarmConfig{}.n_particles_per_stratum;
  int iterations = SwarmConfig{}.n_iterations;
  std::uint64_t seed = 0;
  bool deterministic = false;
  double t_lo = SwarmConfig{}.t_lo;
  double t_hi = SwarmConfig{}.t_hi;

  void add(CLI::App* app, bool deterministic_default = false) {
    deterministic = deterministic_default;
    app->add_option("--particles", particles, "Particles per fan stratum")->capture_default_str();
    app->add_option("--iterations", iterations, "Maximum iterations")->capture_default_str();
    app->add_option("--seed", seed, "RNG seed")->capture_default_str();
    app->add_option("--t-lo", t_lo, "Lower t_cws bound (°F)")->capture_default_str();
    app->add_option("--t-hi", t_hi, "Upper t_cws bound (°F)")->capture_default_str();
    if (deterministic_default)
      app->add_flag("--stochastic{false}", deterministic, "Random coefficients instead of the deterministic lattice");
    else
      app->add_flag("--deterministic", deterministic, "r1 = r2 = 1 and lattice initialization");
  }

  SwarmConfig config() const {
    SwarmConfig c;
    c.n_particles_per_stratum = particles;
    c.n_iterations = iterations;
    c.seed = seed;
    c.stochastic = !deterministic;
    c.t_lo = t_lo;
    c.t_hi = t_hi;
    return c;
  }
};

AdvisoryService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Condenser water loop simulation, surrogate training and set-point optimization"};
  app.require_subcommand(1);

  // init-plant
  std::string out_path;
  auto* init_plant = app.add_subcommand("init-plant", "Write the synthetic default plant config");
  init_plant->add_option("--out", out_path)->required();

  // simulate
  std::string config_path, weather_path, policy = "reset";
  double sim_t_cws = 75.0, reset_offset = 7.0;
  int sim_fans = 8, sim_year = 2023, interval = 60;
  unsigned sim_seed = 1;
  auto* simulate = app.add_subcommand("simulate", "Run the reference plant over a conditions series");
  simulate->add_option("--config", config_path, "Plant config (default: synthetic plant)");
  simulate->add_option("--weather", weather_path, "Conditions CSV timestamp,t_wb_f,q_load_tons (default: synthetic year)");
  simulate->add_option("--out", out_path)->required();
  simulate->add_option("--policy", policy, "reset or constant")->check(CLI::IsMember({"reset", "constant"}))->capture_default_str();
  simulate->add_option("--t-cws", sim_t_cws, "Setpoint for the constant policy")->capture_default_str();
  simulate->add_option("--fans", sim_fans, "Fan stage for the constant policy")->capture_default_str();
  simulate->add_option("--offset", reset_offset, "Wet-bulb reset offset")->capture_default_str();
  simulate->add_option("--year", sim_year, "Synthetic year")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "Synthetic conditions seed")->capture_default_str();
  simulate->add_option("--interval", interval, "Output cadence in minutes (interpolated)")->capture_default_str();

  // sweep
  std::string spec_path;
  bool no_clean = false, dedupe = false;
  auto* sweep = app.add_subcommand("sweep", "Generate a synthetic training dataset");
  sweep->add_option("--config", config_path, "Plant config (default: synthetic plant)");
  sweep->add_option("--spec", spec_path, "Sweep spec JSON")->required();
  sweep->add_option("--out", out_path)->required();
  sweep->add_flag("--raw", no_clean, "Skip cleaning");
  sweep->add_flag("--dedupe", dedupe, "Drop duplicate (t_wb, q_load, t_cws, n_fans) rows");

  // analyze corr
  std::string data_path, cols;
  unsigned noise_seed = 7;
  auto* analyze = app.add_subcommand("analyze", "Dataset analysis");
  analyze->require_subcommand(1);
  auto* corr = analyze->add_subcommand("corr", "Pearson correlation matrix");
  corr->add_option("--data", data_path)->required();
  corr->add_option("--cols", cols, "Comma-separated columns; 'noise' adds a seeded nuisance column")
      ->default_val("p_fan_kw,t_wb_f,p_chiller_kw,q_load_tons,noise");
  corr->add_option("--noise-seed", noise_seed)->capture_default_str();

  // train / eval / refine
  std::string hyper_path, bundle_path, measured_path, synthetic_path;
  double split_fraction = 0.8, weight = 10.0;
  unsigned split_seed = 42;
  auto* train = app.add_subcommand("train", "Fit the six-model surrogate bundle");
  train->add_option("--data", data_path)->required();
  train->add_option("--out", out_path)->required();
  train->add_option("--hyper", hyper_path, "Hyperparameter JSON");
  train->add_option("--split", split_fraction, "Training fraction; the rest is held out and scored")->capture_default_str();
  train->add_option("--split-seed", split_seed)->capture_default_str();

  auto* evalc = app.add_subcommand("eval", "Score a bundle on a dataset");
  evalc->add_option("--bundle", bundle_path)->required();
  evalc->add_option("--data", data_path)->required();

  auto* refinec = app.add_subcommand("refine", "Retrain with measured rows up-weighted");
  refinec->add_option("--bundle", bundle_path)->required();
  refinec->add_option("--measured", measured_path)->required();
  refinec->add_option("--synthetic", synthetic_path, "Synthetic data (default: the bundle's training data path)");
  refinec->add_option("--weight", weight)->capture_default_str();
  refinec->add_option("--out", out_path)->required();

  // optimize / advise
  std::string plant_path, tariff_path, at_text, baseline_text;
  double load = 0.0, twb = 0.0;
  SwarmOpts swarm;
  auto* optimizec = app.add_subcommand("optimize", "Optimize t_cws and fan stage for one operating point");
  optimizec->add_option("--bundle", bundle_path)->required();
  optimizec->add_option("--plant", plant_path, "Plant config (default: synthetic plant)");
  optimizec->add_option("--load", load, "Cooling load (tons)")->required();
  optimizec->add_option("--twb", twb, "Wet-bulb (°F)")->required();
  optimizec->add_option("--tariff", tariff_path);
  optimizec->add_option("--at", at_text, "Local timestamp for the tariff rate");
  optimizec->add_option("--baseline", baseline_text, "<t_cws>,<n_fans>");
  swarm.add(optimizec);

  auto* advisec = app.add_subcommand("advise", "Recommendation as JSON");
  advisec->add_option("--bundle", bundle_path)->required();
  advisec->add_option("--plant", plant_path);
  advisec->add_option("--load", load)->required();
  advisec->add_option("--twb", twb)->required();
  advisec->add_option("--current", baseline_text, "<t_cws>,<n_fans>");
  advisec->add_option("--tariff", tariff_path);
  advisec->add_option("--at", at_text);
  SwarmOpts advise_swarm;
  advise_swarm.add(advisec);

  // bill / savings
  int savings_interval = 15;
  std::string series_path, month_text, optimized_path, mapping_path, details_path, months_text;
  auto* billc = app.add_subcommand("bill", "Bill an interval series");
  billc->add_option("--tariff", tariff_path)->required();
  billc->add_option("--series", series_path)->required();
  billc->add_option("--month", month_text, "YYYY-MM")->required();

  auto* savingsc = app.add_subcommand(
      "savings", "Compare two interval series, or run the savings pipeline on measured data");
  savingsc->add_option("--tariff", tariff_path)->required();
  savingsc->add_option("--baseline", series_path, "Baseline interval CSV");
  savingsc->add_option("--optimized", optimized_path, "Optimized interval CSV");
  savingsc->add_option("--month", month_text, "YYYY-MM");
  savingsc->add_option("--bundle", bundle_path);
  savingsc->add_option("--plant", plant_path);
  savingsc->add_option("--measured", measured_path, "Measured dataset CSV (dataset header, or raw with --mapping)");
  savingsc->add_option("--mapping", mapping_path, "Column mapping JSON for raw measured data");
  savingsc->add_option("--months", months_text, "Comma-separated YYYY-MM (default: all in the data)");
  savingsc->add_option("--interval", savings_interval, "Interval minutes of the measured data")->capture_default_str();
  savingsc->add_option("--details", details_path, "Write per-interval settings and power CSV");
  SwarmOpts savings_swarm;
  savings_swarm.add(savingsc);

  // table
  std::string csv_out;
  TableGrids grids = TableGrids::standard();
  std::vector<double> q_range, wb_range;
  auto* tablec = app.add_subcommand("table", "Build the load x wet-bulb look-up table");
  tablec->add_option("--bundle", bundle_path)->required();
  tablec->add_option("--plant", plant_path);
  tablec->add_option("--out", out_path, "Table JSON")->required();
  tablec->add_option("--csv", csv_out, "Also write one CSV row per cell");
  tablec->add_option("--q-grid", q_range, "lo hi step (tons)")->expected(3);
  tablec->add_option("--wb-grid", wb_range, "lo hi step (°F)")->expected(3);
  SwarmOpts table_swarm;
  table_swarm.add(tablec, true);

  // serve
  ServiceConfig svc;
  std::string token_env = "CWOPT_ADMIN_TOKEN";
  auto* serve = app.add_subcommand("serve", "Run the advisory HTTP service");
  serve->add_option("--port", svc.port)->capture_default_str();
  serve->add_option("--host", svc.host)->capture_default_str();
  serve->add_option("--bundle", bundle_path)->required();
  serve->add_option("--plant", plant_path);
  serve->add_option("--tariff", tariff_path);
  serve->add_option("--table", svc.table_path, "Precomputed table JSON");
  serve->add_option("--data-root", svc.data_root, "Directory savings jobs may read");
  serve->add_option("--token-env", token_env, "Environment variable holding the admin token")->capture_default_str();
  SwarmOpts serve_swarm;
  serve_swarm.add(serve);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init_plant) {
      save_plant_config(PlantConfig::synthetic_default(), out_path);
    } else if (*simulate) {
      PlantConfig plant = plant_or_default(config_path);
      auto [w, l] = weather_path.empty() ? synthetic_conditions_year(plant, sim_year, sim_seed)
                                         : read_conditions(weather_path);
      if (interval != 60) std::tie(w, l) = resample_conditions(w, l, interval);
      SettingsPolicy p = policy == "constant" ? constant_policy(Settings{sim_t_cws, sim_fans})
                                              : wetbulb_reset_policy(plant, reset_offset);
      Dataset d = simulate_measured(plant, w, l, p);
      for (auto& r : d.records) r.source = Source::Synthetic;
      d.provenance = "simulate";
      write_dataset(d, out_path);
      double worst = 0.0;
      for (const auto& r : d.records)
        worst = std::max(worst, std::abs(r.q_rej - r.q_load - r.p_chiller / units::kKwPerTon) / std::max(r.q_rej, 1.0));
      std::printf("%zu rows written to %s; worst energy-balance residual %.3g\n", d.size(), out_path.c_str(), worst);
    } else if (*sweep) {
      PlantConfig plant = plant_or_default(config_path);
      Dataset d = run_sweep(plant, load_sweep_spec(spec_path));
      std::printf("sweep: %zu rows\n", d.size());
      if (!no_clean) {
        CleaningRules rules;
        rules.drop_duplicate_keys = dedupe;
        auto [kept, report] = clean(d, rules);
        for (const auto& [rule, n] : report.drops) std::printf("  dropped %-14s %zu\n", rule.c_str(), n);
        std::printf("kept %zu of %zu\n", report.kept_rows, report.input_rows);
        d = std::move(kept);
      }
      write_dataset(d, out_path);
    } else if (*corr) {
      Dataset d = read_dataset(data_path);
      auto m = correlation_matrix(d, split_list(cols), noise_seed);
      std::printf("%-14s", "");
      for (const auto& n : m.names) std::printf(" %13s", n.c_str());
      std::printf("\n");
      for (std::size_t i = 0; i < m.names.size(); ++i) {
        std::printf("%-14s", m.names[i].c_str());
        for (double v : m.values[i]) std::printf(" %13.4f", v);
        std::printf("\n");
      }
    } else if (*train) {
      Dataset d = read_dataset(data_path);
      Hyperparams hp = load_hyper(hyper_path);
      Dataset fit_on = d, held;
      if (split_fraction < 1.0) std::tie(fit_on, held) = split(d, split_fraction, split_seed);
      SurrogateBundle b = train_bundle(fit_on, hp);
      b.training_data_path = std::filesystem::absolute(data_path).string();
      save_bundle(b, out_path);
      std::printf("bundle %s written to %s (%zu training rows)\n", b.fingerprint().c_str(), out_path.c_str(),
                  fit_on.size());
      if (!held.empty()) {
        std::printf("held-out (%zu rows):\n", held.size());
        print_bundle_eval(b, held);
      }
    } else if (*evalc) {
      SurrogateBundle b = load_bundle(bundle_path);
      Dataset d = read_dataset(data_path);
      print_bundle_eval(b, d);
      auto e = evaluate(b.chiller_power, d);
      std::printf("\nchiller power by wet-bulb bin:\n t_wb   rows   avg %%diff\n");
      for (const auto& bin : e.wet_bulb_table)
        std::printf("%5d %6zu %10.3f\n", bin.t_wb, bin.count, bin.avg_percent_difference);
    } else if (*refinec) {
      SurrogateBundle b = load_bundle(bundle_path);
      std::string syn = synthetic_path.empty() ? b.training_data_path : synthetic_path;
      if (syn.empty()) fail(ErrorKind::Config, "bundle records no training data path; pass --synthetic");
      RefineResult r = refine(b, read_dataset(syn), read_dataset(measured_path), weight);
      for (const auto& w : r.report.warnings) std::printf("warning: %s\n", w.c_str());
      for (const auto& m : r.report.models)
        std::printf("%-16s rows %6zu  MBE %7.3f%% -> %7.3f%%  %s\n", m.model.c_str(), m.measured_rows, m.mbe_before,
                    m.mbe_after, m.accepted ? "accepted" : "kept original");
      if (r.report.rejected) std::printf("no model improved; bundle unchanged\n");
      save_bundle(r.bundle, out_path);
    } else if (*optimizec) {
      SurrogateBundle b = load_bundle(bundle_path);
      PlantConfig plant = plant_or_default(plant_path);
      std::optional<TariffSchedule> tariff;
      Objective f;
      if (!tariff_path.empty()) {
        if (at_text.empty()) fail(ErrorKind::Config, "--tariff needs --at");
        tariff = load_tariff(tariff_path);
        tariff->validate();
        f = loop_objective(b, plant, load, twb, *tariff, Timestamp::parse(at_text));
      } else {
        f = loop_objective(b, plant, load, twb);
      }
      std::optional<Baseline> base;
      if (!baseline_text.empty()) base = parse_baseline(baseline_text);
      OptimizeResult r = optimize(f, swarm.config(), base);
      std::printf("t_cws        %.4f\nn_fans       %d\nobjective    %.6f %s\nfeasible     %s\n"
                  "trace        %zu iterations, converged at %d, %zu evaluations\n",
                  r.best.t_cws, r.best.n_fans, r.best.objective_value, tariff ? "$/h" : "kW",
                  r.best.feasible ? "yes" : "no", r.trace.global_best.size(), r.trace.converged_at,
                  r.trace.evaluations);
    } else if (*advisec) {
      SurrogateBundle b = load_bundle(bundle_path);
      PlantConfig plant = plant_or_default(plant_path);
      std::optional<TariffSchedule> tariff;
      if (!tariff_path.empty()) {
        tariff = load_tariff(tariff_path);
        tariff->validate();
      }
      AdviseRequest req{load, twb, std::nullopt, std::nullopt};
      if (!baseline_text.empty()) req.current = parse_baseline(baseline_text);
      if (!at_text.empty()) req.timestamp = Timestamp::parse(at_text);
      Recommendation rec = advise(b, plant, req, advise_swarm.config(), tariff ? &*tariff : nullptr);
      std::cout << json::parse(recommendation_to_json(rec)).dump(2) << '\n';
    } else if (*billc) {
      TariffSchedule t = load_tariff(tariff_path);
      t.validate();
      std::cout << format_bill(compute_bill(t, read_interval_csv(series_path), parse_year_month(month_text)));
    } else if (*savingsc) {
      TariffSchedule t = load_tariff(tariff_path);
      t.validate();
      if (!measured_path.empty()) {
        if (bundle_path.empty()) fail(ErrorKind::Config, "the savings pipeline needs --bundle");
        SurrogateBundle b = load_bundle(bundle_path);
        PlantConfig plant = plant_or_default(plant_path);
        Dataset d;
        if (!mapping_path.empty()) {
          IngestResult ing = ingest_measured(measured_path, load_mapping(mapping_path));
          for (const auto& i : ing.issues) std::printf("skipped line %zu: %s\n", i.line, i.message.c_str());
          d = std::move(ing.data);
        } else {
          d = read_dataset(measured_path);
        }
        std::vector<std::chrono::year_month> months;
        for (const auto& m : split_list(months_text)) months.push_back(parse_year_month(m));
        SavingsResult r = savings_pipeline(b, plant, d, t, months, savings_swarm.config(), savings_interval);
        std::cout << format_savings_table(r.reports);
        if (!details_path.empty()) write_interval_details_csv(r, details_path);
      } else {
        if (series_path.empty() || optimized_path.empty() || month_text.empty())
          fail(ErrorKind::Config, "pass --baseline, --optimized and --month, or --measured with --bundle");
        auto rep = compare_costs(t, read_interval_csv(series_path), read_interval_csv(optimized_path),
                                 parse_year_month(month_text));
        std::cout << format_savings_table({rep});
      }
    } else if (*tablec) {
      SurrogateBundle b = load_bundle(bundle_path);
      PlantConfig plant = plant_or_default(plant_path);
      auto range = [](const std::vector<double>& r) {
        std::vector<double> g;
        if (!(r[2] > 0.0)) fail(ErrorKind::Config, "grid step must be > 0");
        for (std::size_t i = 0; i < grid_size(r[0], r[1], r[2]); ++i) g.push_back(r[0] + static_cast<double>(i) * r[2]);
        return g;
      };
      if (!q_range.empty()) grids.q_load = range(q_range);
      if (!wb_range.empty()) grids.t_wb = range(wb_range);
      LookupTable table = build_table(b, plant, grids, table_swarm.config());
      for (const auto& w : table.warnings) std::printf("warning: %s\n", w.c_str());
      save_table_json(table, out_path);
      if (!csv_out.empty()) write_table_csv(table, csv_out);
      std::size_t infeasible = 0;
      for (const auto& row : table.cells)
        for (const auto& c : row) infeasible += !c.feasible;
      std::printf("%zu x %zu table written to %s (%zu infeasible cells)\n", grids.q_load.size(), grids.t_wb.size(),
                  out_path.c_str(), infeasible);
    } else if (*serve) {
      svc.bundle_path = bundle_path;
      svc.plant_path = plant_path;
      svc.tariff_path = tariff_path;
      if (const char* tok = std::getenv(token_env.c_str())) svc.admin_token = tok;
      svc.swarm = serve_swarm.config();
      AdvisoryService service(svc);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::printf("serving on %s:%d\n", svc.host.c_str(), svc.port);
      std::fflush(stdout);
      service.run();
      g_service = nullptr;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
