#include "cwopt/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cwopt/error.hpp"

namespace cwopt {

using nlohmann::json;

std::shared_ptr<const ServiceSnapshot> load_snapshot(const ServiceConfig& config) {
  auto s = std::make_shared<ServiceSnapshot>();
  s->bundle = load_bundle(config.bundle_path);
  s->plant = config.plant_path.empty() ? PlantConfig::synthetic_default() : load_plant_config(config.plant_path);
  if (!config.tariff_path.empty()) {
    s->tariff = load_tariff(config.tariff_path);
    s->tariff->validate();
  }
  if (!config.table_path.empty()) s->table = load_table_json(config.table_path);
  s->loaded_at = utc_now_iso();
  return s;
}

namespace {

struct Job {
  std::string status = "running";
  std::string result;  // JSON, when done
  std::string error;
};

struct FieldError {
  std::string field;
  std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<FieldError>& details = {}) {
  json d = json::array();
  for (const auto& f : details) d.push_back({{"field", f.field}, {"message", f.message}});
  send_json(res, status, {{"error", message}, {"details", d}});
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain:
    case ErrorKind::Config:
    case ErrorKind::Schema:
    case ErrorKind::ScheduleGap:
    case ErrorKind::Alignment:
    case ErrorKind::Coverage:
    case ErrorKind::Ingestion: return 400;
    default: return 500;
  }
}

// Collects per-field diagnostics while reading a request body.
class Fields {
 public:
  explicit Fields(const json& body) : body_(body) {}

  std::optional<double> number(const std::string& name, bool required = true) {
    if (!body_.contains(name) || body_[name].is_null()) {
      if (required) errors.push_back({name, "required"});
      return std::nullopt;
    }
    const json& v = body_[name];
    if (!v.is_number()) {
      errors.push_back({name, "must be a number"});
      return std::nullopt;
    }
    double x = v.get<double>();
    if (!std::isfinite(x)) {
      errors.push_back({name, "must be finite"});
      return std::nullopt;
    }
    return x;
  }

  std::optional<int> integer(const std::string& name, bool required = true) {
    if (!body_.contains(name) || body_[name].is_null()) {
      if (required) errors.push_back({name, "required"});
      return std::nullopt;
    }
    if (!body_[name].is_number_integer()) {
      errors.push_back({name, "must be an integer"});
      return std::nullopt;
    }
    return body_[name].get<int>();
  }

  std::optional<Timestamp> timestamp(const std::string& name) {
    if (!body_.contains(name) || body_[name].is_null()) return std::nullopt;
    if (!body_[name].is_string()) {
      errors.push_back({name, "must be an ISO local timestamp string"});
      return std::nullopt;
    }
    try {
      return Timestamp::parse(body_[name].get<std::string>());
    } catch (const std::exception& e) {
      errors.push_back({name, e.what()});
      return std::nullopt;
    }
  }

  std::vector<FieldError> errors;

 private:
  const json& body_;
};

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) {
    send_error(res, 400, "malformed JSON", {{"body", "request body is not valid JSON"}});
    return std::nullopt;
  }
  if (!body.is_object()) {
    send_error(res, 400, "malformed request", {{"body", "expected a JSON object"}});
    return std::nullopt;
  }
  return body;
}

}  // namespace

struct AdvisoryService::Impl {
  ServiceConfig config;
  httplib::Server server;
  mutable std::mutex snapshot_mutex;
  std::shared_ptr<const ServiceSnapshot> current;

  std::mutex jobs_mutex;
  std::map<std::string, Job> jobs;
  std::vector<std::thread> workers;
  std::atomic<std::uint64_t> next_job{1};

  std::thread listener;
  int bound_port = 0;

  std::shared_ptr<const ServiceSnapshot> get() const {
    std::lock_guard lock(snapshot_mutex);
    return current;
  }

  void set(std::shared_ptr<const ServiceSnapshot> s) {
    std::lock_guard lock(snapshot_mutex);
    current = std::move(s);
  }

  // Keeps dataset references inside the configured data root.
  std::optional<std::filesystem::path> resolve(const std::string& rel) const {
    if (config.data_root.empty()) return std::nullopt;
    std::error_code ec;
    auto root = std::filesystem::weakly_canonical(config.data_root, ec);
    if (ec) return std::nullopt;
    auto p = std::filesystem::weakly_canonical(root / rel, ec);
    if (ec) return std::nullopt;
    auto [r, _] = std::mismatch(root.begin(), root.end(), p.begin(), p.end());
    if (r != root.end()) return std::nullopt;
    return p;
  }

  template <class F>
  void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const Error& e) {
      send_error(res, status_for(e.kind()), e.what(), {{"", std::string(to_string(e.kind()))}});
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  void routes() {
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      auto s = get();
      send_json(res, 200, {{"status", "ok"}, {"bundle_fingerprint", s->bundle.fingerprint()}, {"loaded_at", s->loaded_at}});
    });

    server.Get("/v1/bundle/meta", [this](const httplib::Request&, httplib::Response& res) {
      auto s = get();
      const auto& b = s->bundle;
      json hp = {{"n_trees", b.hyperparams.n_trees},
                 {"max_depth", b.hyperparams.max_depth},
                 {"learning_rate", b.hyperparams.learning_rate},
                 {"min_samples_leaf", b.hyperparams.min_samples_leaf}};
      send_json(res, 200,
                {{"fingerprint", b.fingerprint()},
                 {"created_at", b.created_at},
                 {"schema_version", b.schema_version},
                 {"training_data_fingerprint", b.training_data_fingerprint},
                 {"training_data_path", b.training_data_path},
                 {"hyperparams", hp},
                 {"strata", b.strata()},
                 {"envelope",
                  {{"t_wb_f", {b.envelope.t_wb.lo, b.envelope.t_wb.hi}},
                   {"q_load_tons", {b.envelope.q_load.lo, b.envelope.q_load.hi}},
                   {"t_cws_f", {b.envelope.t_cws.lo, b.envelope.t_cws.hi}}}}});
    });

    server.Get("/v1/table", [this](const httplib::Request&, httplib::Response& res) {
      auto s = get();
      if (!s->table) return send_error(res, 404, "no lookup table is loaded");
      res.status = 200;
      res.set_content(table_to_json(*s->table), "application/json");
    });

    server.Post("/v1/advise", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      Fields f(*body);
      auto q = f.number("q_load_tons");
      auto wb = f.number("t_wb_f");
      auto ts = f.timestamp("timestamp");
      std::optional<Baseline> current;
      if (body->contains("current") && !(*body)["current"].is_null()) {
        const json& c = (*body)["current"];
        if (!c.is_object()) {
          f.errors.push_back({"current", "must be an object with t_cws_f and n_fans"});
        } else {
          Fields cf(c);
          auto t = cf.number("t_cws_f");
          auto n = cf.integer("n_fans");
          for (auto& e : cf.errors) f.errors.push_back({"current." + e.field, e.message});
          if (t && n) current = Baseline{*t, *n};
        }
      }
      if (q && *q < 0.0) f.errors.push_back({"q_load_tons", "must be >= 0"});
      if (!f.errors.empty()) return send_error(res, 400, "invalid advise request", f.errors);
      guarded(res, [&] {
        auto s = get();
        if (current && !s->bundle.tower_power.count(current->n_fans))
          return send_error(res, 400, "invalid advise request", {{"current.n_fans", "not a bundle fan stratum"}});
        AdviseRequest r{*q, *wb, current, ts};
        Recommendation rec = advise(s->bundle, s->plant, r, config.swarm, s->tariff ? &*s->tariff : nullptr);
        res.status = 200;
        res.set_content(recommendation_to_json(rec), "application/json");
      });
    });

    server.Post("/v1/whatif", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      Fields f(*body);
      auto q = f.number("q_load_tons");
      auto wb = f.number("t_wb_f");
      auto t = f.number("t_cws_f");
      auto n = f.integer("n_fans");
      auto ts = f.timestamp("timestamp");
      if (q && *q < 0.0) f.errors.push_back({"q_load_tons", "must be >= 0"});
      auto s = get();
      if (n && !s->bundle.tower_power.count(*n)) f.errors.push_back({"n_fans", "not a bundle fan stratum"});
      if (!f.errors.empty()) return send_error(res, 400, "invalid what-if request", f.errors);
      guarded(res, [&] {
        WhatIf w = what_if(s->bundle, s->plant, *q, *wb, *t, *n, s->tariff ? &*s->tariff : nullptr, ts);
        res.status = 200;
        res.set_content(what_if_to_json(w, *t, *n), "application/json");
      });
    });

    server.Post("/v1/savings", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      std::vector<FieldError> errors;
      std::optional<std::filesystem::path> dataset, mapping;
      if (!body->contains("dataset") || !(*body)["dataset"].is_string()) {
        errors.push_back({"dataset", "required path relative to the data root"});
      } else if (!(dataset = resolve((*body)["dataset"].get<std::string>()))) {
        errors.push_back({"dataset", "must name a file inside the data root"});
      }
      if (body->contains("mapping") && !(*body)["mapping"].is_null()) {
        if (!(*body)["mapping"].is_string() || !(mapping = resolve((*body)["mapping"].get<std::string>())))
          errors.push_back({"mapping", "must name a file inside the data root"});
      }
      std::vector<std::chrono::year_month> months;
      if (body->contains("months")) {
        const json& m = (*body)["months"];
        if (!m.is_array()) {
          errors.push_back({"months", "must be an array of YYYY-MM strings"});
        } else {
          for (std::size_t i = 0; i < m.size(); ++i) {
            try {
              months.push_back(parse_year_month(m[i].get<std::string>()));
            } catch (const std::exception& e) {
              errors.push_back({"months[" + std::to_string(i) + "]", e.what()});
            }
          }
        }
      }
      int interval = 15;
      if (body->contains("interval_minutes")) {
        const json& iv = (*body)["interval_minutes"];
        if (!iv.is_number_integer() || iv.get<int>() <= 0 || 60 % iv.get<int>() != 0)
          errors.push_back({"interval_minutes", "must be a positive integer dividing 60"});
        else
          interval = iv.get<int>();
      }
      auto s = get();
      if (!s->tariff) errors.push_back({"tariff", "the service has no tariff loaded"});
      if (!errors.empty()) return send_error(res, 400, "invalid savings request", errors);

      const std::string id = std::to_string(next_job++);
      {
        std::lock_guard lock(jobs_mutex);
        jobs[id] = Job{};
      }
      workers.emplace_back([this, id, s, dataset, mapping, months, interval] {
        Job done;
        try {
          Dataset data = mapping ? ingest_measured(*dataset, load_mapping(*mapping)).data : read_dataset(*dataset);
          SavingsResult r = savings_pipeline(s->bundle, s->plant, data, *s->tariff, months, config.swarm, interval);
          done.status = "done";
          done.result = savings_to_json(r);
        } catch (const std::exception& e) {
          done.status = "failed";
          done.error = e.what();
        }
        std::lock_guard lock(jobs_mutex);
        jobs[id] = std::move(done);
      });
      send_json(res, 202, {{"job_id", id}, {"status", "running"}});
    });

    server.Get(R"(/v1/savings/([A-Za-z0-9]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(jobs_mutex);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) return send_error(res, 404, "unknown job");
      json out = {{"job_id", it->first}, {"status", it->second.status}};
      if (it->second.status == "done") out["result"] = json::parse(it->second.result);
      if (it->second.status == "failed") out["error"] = it->second.error;
      send_json(res, 200, out);
    });

    server.Post("/v1/admin/reload", [this](const httplib::Request& req, httplib::Response& res) {
      if (config.admin_token.empty()) return send_error(res, 403, "reload is disabled");
      if (req.get_header_value("Authorization") != "Bearer " + config.admin_token)
        return send_error(res, 401, "missing or wrong bearer token");
      std::optional<std::filesystem::path> bundle;
      if (!req.body.empty()) {
        auto body = parse_body(req, res);
        if (!body) return;
        if (body->contains("bundle_path")) {
          if (!(*body)["bundle_path"].is_string())
            return send_error(res, 400, "invalid reload request", {{"bundle_path", "must be a string"}});
          bundle = (*body)["bundle_path"].get<std::string>();
        }
      }
      guarded(res, [&] {
        ServiceConfig c = config;
        if (bundle) c.bundle_path = *bundle;
        auto fresh = load_snapshot(c);
        set(fresh);
        send_json(res, 200, {{"status", "reloaded"}, {"bundle_fingerprint", fresh->bundle.fingerprint()}});
      });
    });
  }
};

AdvisoryService::AdvisoryService(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  config.swarm.validate();
  impl_->config = std::move(config);
  try {
    impl_->set(load_snapshot(impl_->config));
  } catch (const Error& e) {
    fail(ErrorKind::Service, std::string("cannot start service: ") + e.what());
  }
  impl_->routes();
}

AdvisoryService::~AdvisoryService() {
  stop();
  for (auto& w : impl_->workers)
    if (w.joinable()) w.join();
}

int AdvisoryService::start() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) {
    impl_->bound_port = s.bind_to_any_port(impl_->config.host);
  } else {
    if (!s.bind_to_port(impl_->config.host, impl_->config.port))
      fail(ErrorKind::Service, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
    impl_->bound_port = impl_->config.port;
  }
  if (impl_->bound_port <= 0) fail(ErrorKind::Service, "cannot bind " + impl_->config.host);
  impl_->listener = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return impl_->bound_port;
}

void AdvisoryService::run() {
  if (!impl_->server.listen(impl_->config.host, impl_->config.port))
    fail(ErrorKind::Service, "cannot listen on " + impl_->config.host + ":" + std::to_string(impl_->config.port));
}

void AdvisoryService::stop() {
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

std::shared_ptr<const ServiceSnapshot> AdvisoryService::snapshot() const { return impl_->get(); }

void AdvisoryService::reload(const std::optional<std::filesystem::path>& bundle_path) {
  ServiceConfig c = impl_->config;
  if (bundle_path) c.bundle_path = *bundle_path;
  impl_->set(load_snapshot(c));
}

}  // namespace cwopt
