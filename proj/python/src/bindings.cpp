#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cwopt/advisory.hpp"
#include "cwopt/bundle.hpp"
#include "cwopt/datagen.hpp"
#include "cwopt/error.hpp"
#include "cwopt/mipso.hpp"
#include "cwopt/plant.hpp"
#include "cwopt/tariff.hpp"

namespace py = pybind11;
using namespace cwopt;

namespace {

py::array_t<double> to_array(std::vector<double> v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Column column_or_throw(const std::string& name) {
  auto c = column_from_name(name);
  if (!c) throw Error(ErrorKind::Schema, "unknown column '" + name + "'");
  return *c;
}

std::optional<Baseline> baseline_of(std::optional<std::pair<double, int>> b) {
  if (!b) return std::nullopt;
  return Baseline{b->first, b->second};
}

py::dict bill_dict(const BillResult& b) {
  py::dict periods;
  for (const auto& [label, p] : b.periods) {
    py::dict d;
    d["energy_kwh"] = p.energy_kwh;
    d["peak_kw"] = p.peak_kw;
    d["energy_charge_cents"] = p.energy_charge;
    d["demand_charge_cents"] = p.demand_charge;
    periods[py::str(label)] = d;
  }
  py::dict d;
  d["periods"] = periods;
  d["fixed_charge_cents"] = b.fixed_charge;
  d["energy_total_cents"] = b.energy_total();
  d["demand_total_cents"] = b.demand_total();
  d["total_cents"] = b.total;
  d["total_kwh"] = b.total_kwh();
  return d;
}

}  // namespace

PYBIND11_MODULE(_cwopt, m) {
  m.doc() = "Condenser water loop plant model, surrogates and optimizer";

  static py::exception<Error> error(m, "CwoptError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  // -- plant ---------------------------------------------------------------
  py::class_<PlantConfig>(m, "PlantConfig")
      .def_static("synthetic_default", &PlantConfig::synthetic_default)
      .def_static("load", &load_plant_config, py::arg("path"))
      .def_static("parse", [](const std::string& text) { return parse_plant_config(text, "<string>"); })
      .def("save", [](const PlantConfig& c, const std::filesystem::path& p) { save_plant_config(c, p); })
      .def("to_text", &format_plant_config)
      .def_readonly("n_chillers", &PlantConfig::n_chillers)
      .def_readonly("n_tower_cells", &PlantConfig::n_tower_cells)
      .def_readonly("cell_rated_fan_power", &PlantConfig::cell_rated_fan_power);

  py::class_<PlantState>(m, "PlantState")
      .def_readonly("t_wb", &PlantState::t_wb)
      .def_readonly("q_load", &PlantState::q_load)
      .def_readonly("t_cws", &PlantState::t_cws)
      .def_readonly("t_cwr", &PlantState::t_cwr)
      .def_readonly("n_fans", &PlantState::n_fans)
      .def_readonly("fan_speed", &PlantState::fan_speed)
      .def_readonly("p_chiller", &PlantState::p_chiller)
      .def_readonly("p_fan", &PlantState::p_fan)
      .def_readonly("p_pump", &PlantState::p_pump)
      .def_readonly("q_rej", &PlantState::q_rej)
      .def_readonly("n_chillers_on", &PlantState::n_chillers_on)
      .def_property_readonly("total_power", &PlantState::total_power);

  m.def("simulate_point", &simulate_point, py::arg("plant"), py::arg("t_wb"), py::arg("q_load"),
        py::arg("t_cws_setpoint"), py::arg("n_fans"));

  // -- data ----------------------------------------------------------------
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def("__len__", &Dataset::size)
      .def_readonly("provenance", &Dataset::provenance)
      .def("column", [](const Dataset& d, const std::string& name) { return to_array(d.column(column_or_throw(name))); })
      .def("fingerprint", [](const Dataset& d) { return fingerprint(d); })
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { write_dataset(d, p); })
      .def_static("load", &read_dataset, py::arg("path"));

  py::class_<SweepSpec>(m, "SweepSpec")
      .def(py::init<>())
      .def_static("load", &load_sweep_spec, py::arg("path"))
      .def_readwrite("t_cws_values", &SweepSpec::t_cws_values)
      .def_readwrite("n_fans_values", &SweepSpec::n_fans_values)
      .def_readwrite("months", &SweepSpec::months)
      .def_readwrite("hour_stride", &SweepSpec::hour_stride)
      .def_readwrite("t_cws_jitter", &SweepSpec::t_cws_jitter)
      .def_readwrite("jitter_seed", &SweepSpec::jitter_seed)
      .def_readwrite("synthetic_year", &SweepSpec::synthetic_year)
      .def_readwrite("synthetic_seed", &SweepSpec::synthetic_seed);

  m.def("run_sweep", py::overload_cast<const PlantConfig&, const SweepSpec&>(&run_sweep), py::arg("plant"),
        py::arg("spec"));
  m.def(
      "clean",
      [](const Dataset& d, double min_load, bool drop_duplicates) {
        CleaningRules rules;
        rules.min_load = min_load;
        rules.drop_duplicate_keys = drop_duplicates;
        auto [kept, report] = clean(d, rules);
        py::dict drops;
        for (const auto& [rule, n] : report.drops) drops[py::str(rule)] = n;
        return py::make_tuple(kept, drops);
      },
      py::arg("data"), py::arg("min_load") = 50.0, py::arg("drop_duplicates") = false,
      "Returns (kept, {rule: rows dropped}).");
  m.def("split", &split, py::arg("data"), py::arg("fraction"), py::arg("seed"));

  // -- surrogate -----------------------------------------------------------
  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("n_trees", &Hyperparams::n_trees)
      .def_readwrite("max_depth", &Hyperparams::max_depth)
      .def_readwrite("learning_rate", &Hyperparams::learning_rate)
      .def_readwrite("min_samples_leaf", &Hyperparams::min_samples_leaf)
      .def_readwrite("seed", &Hyperparams::seed);

  py::class_<SurrogateBundle>(m, "SurrogateBundle")
      .def_static("load", &load_bundle, py::arg("path"))
      .def_static("parse", [](const std::string& text) { return parse_bundle(text, "<string>"); })
      .def("save", [](const SurrogateBundle& b, const std::filesystem::path& p) { save_bundle(b, p); })
      .def("to_json", &serialize_bundle)
      .def("predict_chiller", &SurrogateBundle::predict_chiller, py::arg("t_cws"), py::arg("q_load"))
      .def("predict_rejection", &SurrogateBundle::predict_rejection, py::arg("q_load"), py::arg("t_cws"))
      .def("predict_tower", &SurrogateBundle::predict_tower, py::arg("n_fans"), py::arg("t_wb"), py::arg("q_rej"),
           py::arg("t_cws"))
      .def("strata", &SurrogateBundle::strata)
      .def("fingerprint", &SurrogateBundle::fingerprint)
      .def_readonly("created_at", &SurrogateBundle::created_at)
      .def_readonly("hyperparams", &SurrogateBundle::hyperparams);

  m.def("train_bundle", &train_bundle, py::arg("data"), py::arg("hyperparams") = Hyperparams{},
        py::arg("strata") = kDefaultStrata, py::arg("created_at") = std::nullopt,
        py::call_guard<py::gil_scoped_release>());

  // -- optimizer -----------------------------------------------------------
  py::class_<SwarmConfig>(m, "SwarmConfig")
      .def(py::init<>())
      .def_readwrite("n_particles_per_stratum", &SwarmConfig::n_particles_per_stratum)
      .def_readwrite("n_iterations", &SwarmConfig::n_iterations)
      .def_readwrite("w", &SwarmConfig::w)
      .def_readwrite("c1", &SwarmConfig::c1)
      .def_readwrite("c2", &SwarmConfig::c2)
      .def_readwrite("t_lo", &SwarmConfig::t_lo)
      .def_readwrite("t_hi", &SwarmConfig::t_hi)
      .def_readwrite("fan_strata", &SwarmConfig::fan_strata)
      .def_readwrite("seed", &SwarmConfig::seed)
      .def_readwrite("stochastic", &SwarmConfig::stochastic)
      .def_readwrite("convergence_tolerance", &SwarmConfig::convergence_tolerance)
      .def_readwrite("stall_iterations", &SwarmConfig::stall_iterations)
      .def_readwrite("velocity_clamp_fraction", &SwarmConfig::velocity_clamp_fraction);

  py::class_<Candidate>(m, "Candidate")
      .def_readonly("t_cws", &Candidate::t_cws)
      .def_readonly("n_fans", &Candidate::n_fans)
      .def_readonly("objective_value", &Candidate::objective_value)
      .def_readonly("feasible", &Candidate::feasible)
      .def_readonly("penalty", &Candidate::penalty)
      .def("__repr__", [](const Candidate& c) {
        return "Candidate(t_cws=" + std::to_string(c.t_cws) + ", n_fans=" + std::to_string(c.n_fans) +
               ", objective_value=" + std::to_string(c.objective_value) + ")";
      });

  py::class_<OptimizeResult>(m, "OptimizeResult")
      .def_readonly("best", &OptimizeResult::best)
      .def_property_readonly("global_best", [](const OptimizeResult& r) { return r.trace.global_best; })
      .def_property_readonly("converged_at", [](const OptimizeResult& r) { return r.trace.converged_at; })
      .def_property_readonly("evaluations", [](const OptimizeResult& r) { return r.trace.evaluations; });

  m.def(
      "optimize",
      [](const PlainObjective& f, const SwarmConfig& config, std::optional<std::pair<double, int>> baseline) {
        return optimize(as_objective(f), config, baseline_of(baseline));
      },
      py::arg("objective"), py::arg("config") = SwarmConfig{}, py::arg("baseline") = std::nullopt,
      "Minimizes a Python callable f(t_cws, n_fans) -> float.");
  m.def(
      "grid_oracle",
      [](const PlainObjective& f, double t_lo, double t_hi, double step, const std::vector<int>& strata) {
        return grid_oracle(as_objective(f), t_lo, t_hi, step, strata);
      },
      py::arg("objective"), py::arg("t_lo") = 65.0, py::arg("t_hi") = 85.0, py::arg("step") = 0.1,
      py::arg("strata") = kDefaultStrata);

  py::class_<LoopPrediction>(m, "LoopPrediction")
      .def_readonly("p_chiller", &LoopPrediction::p_chiller)
      .def_readonly("q_rej", &LoopPrediction::q_rej)
      .def_readonly("p_fan", &LoopPrediction::p_fan)
      .def_readonly("p_pump", &LoopPrediction::p_pump)
      .def_readonly("t_cws_floor", &LoopPrediction::t_cws_floor)
      .def_property_readonly("total", &LoopPrediction::total)
      .def("feasible", &LoopPrediction::feasible, py::arg("t_cws"));

  m.def("predict_loop", &predict_loop, py::arg("bundle"), py::arg("plant"), py::arg("q_load"), py::arg("t_wb"),
        py::arg("t_cws"), py::arg("n_fans"));
  m.def(
      "optimize_loop",
      [](const SurrogateBundle& b, const PlantConfig& plant, double q_load, double t_wb, const SwarmConfig& config,
         std::optional<std::pair<double, int>> baseline) {
        return optimize(loop_objective(b, plant, q_load, t_wb), config, baseline_of(baseline));
      },
      py::arg("bundle"), py::arg("plant"), py::arg("q_load"), py::arg("t_wb"), py::arg("config") = SwarmConfig{},
      py::arg("baseline") = std::nullopt, py::call_guard<py::gil_scoped_release>());
  m.def(
      "grid_oracle_loop",
      [](const SurrogateBundle& b, const PlantConfig& plant, double q_load, double t_wb, double step) {
        return grid_oracle(loop_objective(b, plant, q_load, t_wb), 65.0, 85.0, step, kDefaultStrata);
      },
      py::arg("bundle"), py::arg("plant"), py::arg("q_load"), py::arg("t_wb"), py::arg("step") = 0.1);

  // -- tariff and advisory -------------------------------------------------
  py::class_<TariffSchedule>(m, "TariffSchedule")
      .def_static("load", &load_tariff, py::arg("path"))
      .def_static("parse", [](const std::string& text) { return parse_tariff(text, "<string>"); })
      .def_readonly("name", &TariffSchedule::name)
      .def("energy_rate_at", [](const TariffSchedule& t, const std::string& at) {
        return t.energy_rate(period_of(t, Timestamp::parse(at)));
      });

  m.def(
      "compute_bill",
      [](const TariffSchedule& t, const std::vector<std::string>& timestamps, const std::vector<double>& power_kw,
         int interval_minutes, const std::string& month) {
        IntervalSeries s;
        s.interval_minutes = interval_minutes;
        for (const auto& ts : timestamps) s.timestamps.push_back(Timestamp::parse(ts));
        s.power_kw = power_kw;
        return bill_dict(compute_bill(t, s, parse_year_month(month)));
      },
      py::arg("tariff"), py::arg("timestamps"), py::arg("power_kw"), py::arg("interval_minutes"), py::arg("month"),
      "Bills the intervals starting in `month` (YYYY-MM). Amounts are integer cents.");

  m.def(
      "advise_json",
      [](const SurrogateBundle& b, const PlantConfig& plant, double q_load, double t_wb,
         std::optional<std::pair<double, int>> current, std::optional<std::string> timestamp,
         const SwarmConfig& config, const TariffSchedule* tariff) {
        AdviseRequest r{q_load, t_wb, baseline_of(current), std::nullopt};
        if (timestamp) r.timestamp = Timestamp::parse(*timestamp);
        return recommendation_to_json(advise(b, plant, r, config, tariff));
      },
      py::arg("bundle"), py::arg("plant"), py::arg("q_load"), py::arg("t_wb"), py::arg("current") = std::nullopt,
      py::arg("timestamp") = std::nullopt, py::arg("config") = SwarmConfig{}, py::arg("tariff") = nullptr);
  m.def(
      "what_if_json",
      [](const SurrogateBundle& b, const PlantConfig& plant, double q_load, double t_wb, double t_cws, int n_fans) {
        return what_if_to_json(what_if(b, plant, q_load, t_wb, t_cws, n_fans), t_cws, n_fans);
      },
      py::arg("bundle"), py::arg("plant"), py::arg("q_load"), py::arg("t_wb"), py::arg("t_cws"), py::arg("n_fans"));
}
