#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cwopt/error.hpp"
#include "cwopt/service.hpp"
#include "support.hpp"

using namespace cwopt;
using nlohmann::json;

namespace {

struct Fixture {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "cwopt_service_test";
  ServiceConfig config;

  Fixture() {
    std::filesystem::create_directories(dir / "root");
    save_bundle(support::bundle(), dir / "bundle.json");
    config.port = 0;
    config.bundle_path = dir / "bundle.json";
    config.tariff_path = std::filesystem::path(CWOPT_DATA_DIR) / "tariff_synthetic.json";
    config.data_root = dir / "root";
    config.admin_token = "secret";
    config.swarm.n_particles_per_stratum = 3;
    config.swarm.n_iterations = 8;
    config.swarm.stochastic = false;
  }
  ~Fixture() { std::filesystem::remove_all(dir); }
};

json post(httplib::Client& c, const std::string& path, const json& body, int expected) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == expected);
  return json::parse(r->body);
}

json get(httplib::Client& c, const std::string& path, int expected) {
  auto r = c.Get(path);
  REQUIRE(r);
  CHECK(r->status == expected);
  return json::parse(r->body);
}

}  // namespace

TEST_CASE("http advisory service") {
  Fixture fx;
  AdvisoryService service(fx.config);
  const int port = service.start();
  REQUIRE(port > 0);
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(60, 0);

  const std::string fingerprint = support::bundle().fingerprint();

  SUBCASE("health and metadata") {
    json h = get(c, "/v1/health", 200);
    CHECK(h["status"] == "ok");
    CHECK(h["bundle_fingerprint"] == fingerprint);
    json m = get(c, "/v1/bundle/meta", 200);
    CHECK(m["strata"] == json::array({2, 4, 6, 8}));
    CHECK(m["hyperparams"]["n_trees"] == 60);
    get(c, "/v1/table", 404);
  }

  SUBCASE("advise matches the library") {
    json body = {{"q_load_tons", 1500.0},
                 {"t_wb_f", 70.0},
                 {"timestamp", "2023-07-12T14:00:00"},
                 {"current", {{"t_cws_f", 80.0}, {"n_fans", 6}}}};
    json r = post(c, "/v1/advise", body, 200);
    TariffSchedule t = load_tariff(fx.config.tariff_path);
    Recommendation lib = advise(support::bundle(), support::plant(),
                                {1500.0, 70.0, Baseline{80.0, 6}, Timestamp::from_civil(2023, 7, 12, 14)},
                                fx.config.swarm, &t, r["computed_at"].get<std::string>());
    CHECK(r == json::parse(recommendation_to_json(lib)));
    CHECK(r["baseline_delta"]["power_kw"].get<double>() <= 0.0);

    json w = post(c, "/v1/whatif", {{"q_load_tons", 1500.0}, {"t_wb_f", 70.0}, {"t_cws_f", 80.0}, {"n_fans", 6}}, 200);
    CHECK(w["components"]["total_kw"].get<double>() ==
          doctest::Approx(predict_loop(support::bundle(), support::plant(), 1500.0, 70.0, 80.0, 6).total()));
  }

  SUBCASE("bad requests carry field diagnostics") {
    auto raw = c.Post("/v1/advise", "{not json", "application/json");
    REQUIRE(raw);
    CHECK(raw->status == 400);
    json e = post(c, "/v1/advise", {{"q_load_tons", "lots"}}, 400);
    std::set<std::string> fields;
    for (const auto& d : e["details"]) fields.insert(d["field"].get<std::string>());
    CHECK(fields.count("q_load_tons"));
    CHECK(fields.count("t_wb_f"));
    json stratum = post(c, "/v1/whatif", {{"q_load_tons", 1.0}, {"t_wb_f", 60.0}, {"t_cws_f", 80.0}, {"n_fans", 5}}, 400);
    CHECK(stratum["details"][0]["field"] == "n_fans");
    post(c, "/v1/savings", {{"dataset", "../../etc/passwd"}}, 400);
    get(c, "/v1/savings/999", 404);
  }

  SUBCASE("reload needs the token") {
    auto none = c.Post("/v1/admin/reload", "", "application/json");
    REQUIRE(none);
    CHECK(none->status == 401);
    httplib::Headers auth = {{"Authorization", "Bearer secret"}};
    auto ok = c.Post("/v1/admin/reload", auth, "", "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(json::parse(ok->body)["bundle_fingerprint"] == fingerprint);
    auto missing = c.Post("/v1/admin/reload", auth, json{{"bundle_path", (fx.dir / "nope.json").string()}}.dump(),
                          "application/json");
    REQUIRE(missing);
    CHECK(missing->status >= 400);
    // A failed reload leaves the old snapshot serving.
    CHECK(get(c, "/v1/health", 200)["bundle_fingerprint"] == fingerprint);
  }

  SUBCASE("savings job") {
    auto [w, l] = support::month_conditions(std::chrono::year{2023} / std::chrono::February, 60);
    write_dataset(simulate_measured(support::plant(), w, l, wetbulb_reset_policy(support::plant())),
                  fx.dir / "root" / "feb.csv");
    json job = post(c, "/v1/savings", {{"dataset", "feb.csv"}, {"interval_minutes", 60}}, 202);
    const std::string id = job["job_id"];
    json status;
    for (int i = 0; i < 600; ++i) {
      status = get(c, "/v1/savings/" + id, 200);
      if (status["status"] != "running") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    REQUIRE(status["status"] == "done");
    CHECK(status["result"]["reports"].size() == 1);
    CHECK(status["result"]["reports"][0]["month"] == "2023-02");
    CHECK(status["result"]["reports"][0]["total_saved_cents"].get<long long>() >= 0);
  }

  service.stop();
}

TEST_CASE("service refuses to start without a bundle") {
  ServiceConfig c;
  c.bundle_path = "/nonexistent/bundle.json";
  try {
    AdvisoryService s(c);
    FAIL("service started");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Service);
  }
}

TEST_CASE("reload is disabled without a configured token") {
  Fixture fx;
  fx.config.admin_token.clear();
  AdvisoryService service(fx.config);
  httplib::Client c("127.0.0.1", service.start());
  auto r = c.Post("/v1/admin/reload", httplib::Headers{{"Authorization", "Bearer "}}, "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 403);
  service.stop();
}
