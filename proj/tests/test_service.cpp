// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "oracles.hpp"
#include "phosphor/error.hpp"
#include "phosphor/image.hpp"
#include "phosphor/service.hpp"

#include <httplib.h>

using namespace phosphor;
namespace fs = std::filesystem;

namespace {

// Catalog of 1 s clips at 5 fps, one session in the (100, 0) cell, stimuli
// rendered at a small percept size.
RunConfig base_config() {
  static const RunConfig prepared = [] {
    RunConfig c;
    c.output = oracle::scratch_dir("service-base");
    c.seed = 21;
    cmd_synth(c, 5.0, 1.0, 2);
    c.catalog = c.output / "catalog.json";
    c.cells = {ParamCell{100.0, 0.0}};
    c.percept_width = 24;
    c.percept_height = 24;
    c.subjects = 1;
    c.n_resamples = 500;
    cmd_preprocess(c);
    cmd_render(c);
    cmd_make_session(c);
    return c;
  }();
  return prepared;
}

// Fresh copy of the base output so each test owns its response log.
RunConfig fresh_config(const std::string& name) {
  RunConfig c = base_config();
  const fs::path dir = oracle::scratch_dir("service-" + name);
  fs::copy(c.output, dir, fs::copy_options::recursive);
  c.output = dir;
  c.catalog = dir / "catalog.json";
  return c;
}

json envelope(const std::string& session, std::size_t trial, bool people = false, bool cars = false,
              int confidence = 3) {
  return json{{"schema_version", 1},
              {"session_id", session},
              {"trial_index", trial},
              {"client_timestamp", "2026-01-01T00:00:00Z"},
              {"payload",
               {{"response", {{"saw_people", people}, {"saw_cars", cars}}},
                {"confidence", confidence},
                {"response_time_ms", 812.5}}}};
}

std::size_t line_count(const fs::path& file) {
  std::ifstream in(file);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

const char* const kForbiddenKeys[] = {"ground_truth", "category", "has_people", "has_cars", "clip_id", "practice_clip"};

void scan_blinded(const json& j, const std::vector<std::string>& forbidden_values) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      for (const char* bad : kForbiddenKeys) CHECK_MESSAGE(key != bad, "leaked key " << key);
      scan_blinded(value, forbidden_values);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) scan_blinded(v, forbidden_values);
  } else if (j.is_string()) {
    const std::string s = j.get<std::string>();
    for (const std::string& bad : forbidden_values) CHECK_MESSAGE(s.find(bad) == std::string::npos, "leaked " << bad << " in " << s);
  }
}

}  // namespace

TEST_CASE("health and session endpoints") {
  ExperimentService service(fresh_config("session"));
  const HttpResult health = service.health();
  CHECK(health.status == 200);
  CHECK(json::parse(health.body)["status"] == "ok");

  const HttpResult s = service.session("s001");
  REQUIRE(s.status == 200);
  const json body = json::parse(s.body);
  CHECK(body["schema_version"] == 1);
  CHECK(body["trials"].size() == 192);
  CHECK(body["practice_trials"].size() == 8);
  CHECK(body["practice_trials"][0]["trial_index"] == 192);
  CHECK(body["answered"].empty());
  CHECK(service.trial_count("s001") == 200);
  CHECK(service.session("s999").status == 404);
}

TEST_CASE("stimulus manifests and frames") {
  ExperimentService service(fresh_config("stimulus"));
  const json main = json::parse(service.stimulus("s001", "0").body);
  CHECK(main["fps"] == 5.0);
  REQUIRE(main["frame_urls"].size() == 5);
  CHECK(main["frame_urls"][4] == "/api/stimulus/s001/0/spv/4.png");
  CHECK_FALSE(main["practice"].get<bool>());
  CHECK_FALSE(main.contains("original_frame_urls"));

  const json practice = json::parse(service.stimulus("s001", "195").body);
  CHECK(practice["practice"].get<bool>());
  CHECK(practice["original_frame_urls"].size() == 5);

  const HttpResult png = service.frame("s001", "0", "spv", "2");
  CHECK(png.status == 200);
  CHECK(png.content_type == "image/png");
  CHECK(png.body.substr(1, 3) == "PNG");
  CHECK(service.frame("s001", "195", "original", "0").status == 200);
  CHECK(service.frame("s001", "0", "original", "0").status == 404);  // originals only for practice
  CHECK(service.frame("s001", "0", "spv", "5").status == 404);
  CHECK(service.stimulus("s001", "200").status == 404);
  CHECK(service.stimulus("s001", "abc").status == 404);
  CHECK(service.stimulus("nope", "0").status == 404);
}

TEST_CASE("duplicate responses are rejected idempotently") {
  const RunConfig config = fresh_config("duplicate");
  ExperimentService service(config);
  const std::string body = envelope("s001", 5, true, false, 4).dump();
  CHECK(service.post_response(body).status == 200);
  const HttpResult second = service.post_response(body);
  CHECK(second.status == 409);
  CHECK(json::parse(second.body)["error"] == "DuplicateResponse");
  const fs::path log = responses_dir(config) / "s001.jsonl";
  CHECK(line_count(log) == 1);

  std::vector<std::string> warnings;
  const auto logged = read_response_log(log, warnings);
  REQUIRE(logged.size() == 1);
  CHECK(warnings.empty());
  CHECK(logged[0].record.trial_index == 5);
  CHECK(logged[0].record.confidence == 4);
  CHECK(logged[0].record.response == Response{true, false});
  const StoredSession stored = load_sessions(config).front();
  const StimulusCatalog catalog = load_catalog(config.catalog, {.check_frames = false});
  CHECK(logged[0].record.ground_truth == catalog.find(stored.plan.trials[5].clip_id).ground_truth);
  CHECK(logged[0].trial == stored.plan.trials[5]);

  // a restarted service remembers the answer
  ExperimentService restarted(config);
  CHECK(restarted.post_response(body).status == 409);
  CHECK(json::parse(restarted.session("s001").body)["answered"] == json::array({5}));
}

TEST_CASE("concurrent duplicates produce one record") {
  const RunConfig config = fresh_config("concurrent");
  ExperimentService service(config);
  std::atomic<int> accepted{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      const int status = service.post_response(envelope("s001", 7).dump()).status;
      (status == 200 ? accepted : conflicts)++;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(accepted == 1);
  CHECK(conflicts == 7);
  CHECK(line_count(responses_dir(config) / "s001.jsonl") == 1);
}

TEST_CASE("unknown targets and schema violations") {
  const RunConfig config = fresh_config("errors");
  ExperimentService service(config);
  CHECK(service.post_response(envelope("s404", 0).dump()).status == 404);
  CHECK(service.post_response(envelope("s001", 200).dump()).status == 404);

  auto with = [](auto&& edit) {
    json e = envelope("s001", 1);
    edit(e);
    return e.dump();
  };
  const std::string bad_bodies[] = {
      "not json",
      "[]",
      with([](json& e) { e["schema_version"] = 2; }),
      with([](json& e) { e.erase("session_id"); }),
      with([](json& e) { e["trial_index"] = -1; }),
      with([](json& e) { e["trial_index"] = "1"; }),
      with([](json& e) { e.erase("client_timestamp"); }),
      with([](json& e) { e["payload"]["confidence"] = 0; }),
      with([](json& e) { e["payload"]["confidence"] = 6; }),
      with([](json& e) { e["payload"]["confidence"] = 2.5; }),
      with([](json& e) { e["payload"]["response"].erase("saw_cars"); }),
      with([](json& e) { e["payload"]["response"]["saw_people"] = "yes"; }),
      with([](json& e) { e["payload"]["response_time_ms"] = -3; }),
      with([](json& e) { e["payload"]["practice"] = true; }),  // trial 1 is a main trial
  };
  for (const std::string& body : bad_bodies) {
    const HttpResult r = service.post_response(body);
    CHECK_MESSAGE(r.status == 422, body);
    CHECK(json::parse(r.body)["error"] == "SchemaViolation");
  }
  CHECK_FALSE(fs::exists(responses_dir(config) / "s001.jsonl"));
  // schema is checked before the session lookup
  json both = envelope("s404", 0);
  both["payload"]["confidence"] = 9;
  CHECK(service.post_response(both.dump()).status == 422);
}

TEST_CASE("no endpoint leaks ground truth") {
  const RunConfig config = fresh_config("blinding");
  ExperimentService service(config);
  const StimulusCatalog catalog = load_catalog(config.catalog, {.check_frames = false});
  std::vector<std::string> clip_ids;
  for (const auto& clip : catalog.clips) clip_ids.push_back(clip.clip_id);

  std::vector<HttpResult> payloads{service.health(), service.session("s001"), service.session("zzz")};
  for (std::size_t t = 0; t < service.trial_count("s001"); t += 7) {
    payloads.push_back(service.stimulus("s001", std::to_string(t)));
  }
  payloads.push_back(service.stimulus("s001", "199"));
  payloads.push_back(service.post_response(envelope("s001", 3).dump()));
  payloads.push_back(service.post_response(envelope("s001", 3).dump()));
  json practice = envelope("s001", 192);
  practice["payload"]["practice"] = true;
  payloads.push_back(service.post_response(practice.dump()));
  payloads.push_back(service.post_response("{}"));
  for (const HttpResult& r : payloads) {
    REQUIRE(r.content_type == "application/json");
    scan_blinded(json::parse(r.body), clip_ids);
  }
  for (const std::string& id : clip_ids) {
    const std::string png = service.frame("s001", "193", "original", "0").body;
    CHECK(png.find(id) == std::string::npos);
  }
}

TEST_CASE("scripted 192-trial run feeds analyze") {
  RunConfig config = fresh_config("scripted");
  ExperimentService service(config);
  const StoredSession stored = load_sessions(config).front();
  const StimulusCatalog catalog = load_catalog(config.catalog, {.check_frames = false});
  for (std::size_t t = 0; t < 192; ++t) {
    const GroundTruth truth = catalog.find(stored.plan.trials[t].clip_id).ground_truth;
    REQUIRE(service.post_response(envelope("s001", t, truth.has_people, truth.has_cars, 5).dump()).status == 200);
  }
  for (std::size_t k = 0; k < 8; ++k) {
    json e = envelope("s001", 192 + k);
    e["payload"]["practice"] = true;
    REQUIRE(service.post_response(e.dump()).status == 200);
  }
  const fs::path log = responses_dir(config) / "s001.jsonl";
  CHECK(line_count(log) == 200);

  SUBCASE("complete log") {
    const CommandSummary summary = cmd_analyze(config);
    CHECK(summary.warnings.empty());
    const json metrics = read_json(analysis_dir(config) / "metrics.json");
    const json& subject = metrics["subjects"][0];
    CHECK(subject["answered"] == 192);
    CHECK(subject["coverage"] == 1.0);
    const double ceiling = 2.0 * oracle::normal_quantile(1.0 - 1.0 / 384.0);
    CHECK(subject["overall"]["d_prime"].get<double>() == doctest::Approx(ceiling).epsilon(1e-9));
    CHECK(subject["overall"]["accuracy"] == 1.0);
    const json stats = read_json(analysis_dir(config) / "stats.json");
    for (const auto& c : stats["comparisons"]) {
      CHECK(c["fdr_adjusted_p"].get<double>() >= c["boot_p"].get<double>());
    }
  }
  SUBCASE("truncated final line") {
    const std::string text = read_file(log);
    write_file(log, text + R"({"schema_version":1,"session_id":"s001","trial_ind)");
    std::vector<std::string> warnings;
    CHECK(read_response_log(log, warnings).size() == 200);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("truncated") != std::string::npos);
    const CommandSummary summary = cmd_analyze(config);
    CHECK(summary.warnings.size() == 1);
    CHECK(read_json(analysis_dir(config) / "metrics.json")["subjects"][0]["answered"] == 192);

    // restarting terminates the partial line so later appends stay parseable
    ExperimentService restarted(config);
    CHECK(restarted.post_response(envelope("s001", 0).dump()).status == 409);
    warnings.clear();
    CHECK(read_response_log(log, warnings).size() == 200);
    CHECK(warnings.size() == 1);
  }
  SUBCASE("missing trials are reported") {
    const std::string text = read_file(log);
    write_file(log, text.substr(0, text.find('\n') + 1));
    const CommandSummary summary = cmd_analyze(config);
    REQUIRE_FALSE(summary.warnings.empty());
    CHECK(summary.warnings[0].find("IncompleteSession") != std::string::npos);
  }
}

TEST_CASE("HTTP transport") {
  const RunConfig config = fresh_config("http");
  ExperimentService service(config);
  HttpServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread runner([&] { server.run(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto session = client.Get("/api/session/s001");
  REQUIRE(session);
  CHECK(json::parse(session->body)["trials"].size() == 192);
  auto manifest = client.Get("/api/stimulus/s001/1");
  REQUIRE(manifest);
  const std::string url = json::parse(manifest->body)["frame_urls"][0];
  auto png = client.Get(url);
  REQUIRE(png);
  CHECK(png->status == 200);
  CHECK(png->get_header_value("Content-Type") == "image/png");
  CHECK(client.Get("/api/session/none")->status == 404);

  const std::string body = envelope("s001", 9, false, true, 2).dump();
  CHECK(client.Post("/api/response", body, "application/json")->status == 200);
  CHECK(client.Post("/api/response", body, "application/json")->status == 409);
  CHECK(client.Post("/api/response", "{", "application/json")->status == 422);

  server.stop();
  runner.join();
  CHECK(line_count(responses_dir(config) / "s001.jsonl") == 1);
}
