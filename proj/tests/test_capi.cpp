// Links only the shared library; everything goes through aoilab.h.
#include <cmath>
#include <cstring>
#include <string>
#include <thread>

#include "aoilab/aoilab.h"
#include "doctest.h"
#include "json.hpp"

namespace {

struct Model {
  aoilab_model* m = nullptr;
  Model(const char* policy, const char* dist, double lambda) {
    REQUIRE(aoilab_model_create(policy, dist, lambda, &m) == AOILAB_OK);
  }
  ~Model() { aoilab_model_destroy(m); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  aoilab_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("analytic values through the C surface") {
  double v = 0.0;
  CHECK(aoilab_mean(Model("b2", "exp:1", 1.0).m, &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
  CHECK(aoilab_mean(Model("p1", "exp:1", 1.0).m, &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(aoilab_mean(Model("P2", "det:1", 1000.0).m, &v) == AOILAB_OK);
  CHECK(std::abs(v - 1.5) < 0.01);
  const Model b2("b2", "exp:1", 1.0);
  CHECK(aoilab_density(b2.m, 1.0, nullptr, &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(2.0 / 3.0 * std::exp(-1.0)).epsilon(1e-8));
  CHECK(aoilab_ccdf(b2.m, 2.0, "method=euler", &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(13.0 * std::exp(-2.0) / 3.0).epsilon(1e-8));
  double re = 0.0, im = 0.0;
  CHECK(aoilab_transform(b2.m, 0.0, 0.0, &re, &im) == AOILAB_OK);
  CHECK(re == doctest::Approx(1.0));
  CHECK(aoilab_high_traffic_transform(b2.m, 1.0, &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(0.125));
  CHECK(aoilab_model_rho(Model("b1", "det:2", 0.25).m, &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(0.5));
  CHECK(aoilab_detp1_moment(1.0, 1, &v) == AOILAB_OK);
  CHECK(v == doctest::Approx(std::exp(1.0)).epsilon(1e-10));
  CHECK(aoilab_detp1_density(1.0, 0.5, nullptr, &v) == AOILAB_OK);
  CHECK(v == 0.0);
}

TEST_CASE("status codes and messages") {
  aoilab_model* m = nullptr;
  CHECK(aoilab_model_create("q2", "exp:1", 1.0, &m) == AOILAB_E_ARGUMENT);
  CHECK(m == nullptr);
  CHECK(std::string(aoilab_last_error()).find("q2") != std::string::npos);
  CHECK(aoilab_model_create("b2", "exp:x", 1.0, &m) == AOILAB_E_ARGUMENT);
  CHECK(std::string(aoilab_last_error()).find("column") != std::string::npos);
  CHECK(aoilab_model_create(nullptr, "exp:1", 1.0, &m) == AOILAB_E_NULL);
  double v = 0.0;
  CHECK(aoilab_mean(Model("b3", "exp:1", 1.0).m, &v) == AOILAB_E_UNSUPPORTED);
  double re, im;
  CHECK(aoilab_transform(Model("b2", "exp:1", 1.0).m, -2.0, 0.0, &re, &im) == AOILAB_E_DOMAIN);
  CHECK(aoilab_density(Model("b2", "exp:1", 1.0).m, 1.0, "method=trapezoid", &v) == AOILAB_E_NUMERIC);
  CHECK(std::string(aoilab_last_error()).find("estimates") != std::string::npos);
  CHECK(aoilab_density(Model("b2", "exp:1", 1.0).m, 1.0, "speed=fast", &v) == AOILAB_E_ARGUMENT);
  CHECK(aoilab_mean(Model("b2", "exp:1", 1.0).m, &v) == AOILAB_OK);
  CHECK(std::string(aoilab_last_error()).empty());
  CHECK(std::string(aoilab_status_name(AOILAB_E_SIMULATION)) == "simulation error");
  CHECK(std::string(aoilab_version()) == "0.1.0");
}

TEST_CASE("last error is per thread") {
  aoilab_model* m = nullptr;
  CHECK(aoilab_model_create("zz", "exp:1", 1.0, &m) != AOILAB_OK);
  std::string other;
  std::thread([&] { other = aoilab_last_error(); }).join();
  CHECK(other.empty());
  CHECK(!std::string(aoilab_last_error()).empty());
}

TEST_CASE("simulation handle") {
  const Model b2("b2", "exp:1", 1.0);
  aoilab_sim* sim = nullptr;
  REQUIRE(aoilab_sim_create(b2.m, &sim) == AOILAB_OK);
  double v = 0.0;
  CHECK(aoilab_sim_mean(sim, &v) == AOILAB_E_ARGUMENT);
  CHECK(aoilab_sim_configure(sim, "segments=200000; seed=3\ngrid=1,2") == AOILAB_OK);
  CHECK(aoilab_sim_configure(sim, "segments=abc") == AOILAB_E_ARGUMENT);
  CHECK(aoilab_sim_configure(sim, "colour=red") == AOILAB_E_ARGUMENT);
  REQUIRE(aoilab_sim_run(sim) == AOILAB_OK);
  CHECK(aoilab_sim_mean(sim, &v) == AOILAB_OK);
  CHECK(std::abs(v / (8.0 / 3.0) - 1.0) < 0.01);
  char* text = nullptr;
  REQUIRE(aoilab_sim_stats_json(sim, &text) == AOILAB_OK);
  const auto stats = nlohmann::json::parse(take(text));
  CHECK(stats["departures"] == 200000);
  CHECK(stats["ccdf"]["t"].size() == 2);
  REQUIRE(aoilab_sim_path_csv(sim, &text) == AOILAB_OK);
  const std::string csv = take(text);
  CHECK(csv.rfind("epoch,age,occupancy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 200002);
  aoilab_sim_destroy(sim);

  REQUIRE(aoilab_sim_create(Model("p1", "det:1", 50.0).m, &sim) == AOILAB_OK);
  CHECK(aoilab_sim_configure(sim, "segments=5;max_events=100;grid=1") == AOILAB_OK);
  CHECK(aoilab_sim_run(sim) == AOILAB_E_SIMULATION);
  aoilab_sim_destroy(sim);
}

TEST_CASE("experiment entry points return parseable reports") {
  char* out = nullptr;
  REQUIRE(aoilab_sweep("policies=p1,p2,b2;rho=0.5,2;quantity=mean;format=json", &out) == AOILAB_OK);
  const auto sweep = nlohmann::json::parse(take(out));
  CHECK(sweep["cells"].size() == 6);
  REQUIRE(aoilab_sweep("preset=det-mean", &out) == AOILAB_OK);
  CHECK(take(out).rfind("rho,policy,quantity", 0) == 0);
  CHECK(aoilab_sweep("preset=no-such-preset", &out) == AOILAB_E_ARGUMENT);

  REQUIRE(aoilab_order("p2", "b2", "det:1", 2.0, nullptr, &out) == AOILAB_OK);
  CHECK(nlohmann::json::parse(take(out))["verdict"] == "a<=st b");

  REQUIRE(aoilab_pathwise("p2,b2", "exp:1", 2.0, "max_arrivals=20000", &out) == AOILAB_OK);
  const auto path = nlohmann::json::parse(take(out));
  CHECK(path["coupling"] == "service");
  CHECK(path["pairs"][0]["holds"] == true);
  CHECK(aoilab_pathwise("p2", "exp:1", 2.0, nullptr, &out) == AOILAB_E_ARGUMENT);

  REQUIRE(aoilab_high_traffic_check("b1", "exp:1", 100.0, "segments=50000", &out) == AOILAB_OK);
  CHECK(nlohmann::json::parse(take(out))["limit_mean"].get<double>() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(aoilab_high_traffic_check("p1", "exp:1", 100.0, nullptr, &out) == AOILAB_E_UNSUPPORTED);

  REQUIRE(aoilab_monotonicity_probe(0.5, &out) == AOILAB_OK);
  CHECK(nlohmann::json::parse(take(out))["sign_pattern"] == "negative");
}
