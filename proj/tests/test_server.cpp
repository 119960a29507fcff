#include <catch2/catch_amalgamated.hpp>

#include "configym/report.hpp"
#include "configym/server.hpp"

#include <array>
#include <thread>

using namespace configym;

namespace {

TaskBundle grid_bundle(const std::string& task_id) {
    TaskBundle bundle;
    bundle.task_id = task_id;
    bundle.task_text = "maximize the score";
    bundle.fidelity_key = {"epoch"};
    ExperimentTable table;
    table.experiment_id = "e1";
    table.fidelity.metadata["epoch"] = 1.0;
    table.env_text = "env text";
    table.space.dimensions = {
        {"lr", DimensionKind::scalar_choice, {"1e-06", "5e-06", "1e-05"}, ""},
        {"mb", DimensionKind::scalar_choice, {"16", "32", "64"}, ""},
        {"kl", DimensionKind::scalar_choice, {"0", "0.001"}, ""},
    };
    int i = 0;
    for (const auto& lr : {"1e-06", "5e-06", "1e-05"})
        for (const auto& mb : {"16", "32", "64"})
            for (const auto& kl : {"0", "0.001"}) {
                ExperimentTable::Record record;
                record.config.values["lr"] = std::string(lr);
                record.config.values["mb"] = std::string(mb);
                record.config.values["kl"] = std::string(kl);
                record.outcome.score = 0.4 + 0.02 * i;
                record.outcome.details["note"] = "r" + std::to_string(i);
                ++i;
                table.records[canonicalize(record.config, table.space)] = record;
            }
    bundle.experiments.push_back(std::move(table));
    return bundle;
}

// in-process server plus a client, torn down with the test
struct LiveServer {
    GymServer gym;
    int port;
    std::thread runner;
    httplib::Client client;

    LiveServer()
        : gym({grid_bundle("tuning"), grid_bundle("tuning2")}),
          port(gym.http().bind_to_any_port("127.0.0.1")),
          runner([this] { gym.http().listen_after_bind(); }),
          client("127.0.0.1", port) {
        gym.http().wait_until_ready();
    }

    ~LiveServer() {
        gym.http().stop();
        runner.join();
    }

    json get(const std::string& path, int expected_status) {
        auto res = client.Get(path);
        REQUIRE(res);
        REQUIRE(res->status == expected_status);
        return json::parse(res->body);
    }

    json post(const std::string& path, const json& body, int expected_status) {
        auto res = client.Post(path, body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == expected_status);
        return json::parse(res->body);
    }
};

} // namespace

TEST_CASE("duplicate task ids are rejected at construction") {
    CHECK_THROWS_AS(GymServer({grid_bundle("t"), grid_bundle("t")}), BundleError);
}

TEST_CASE("task and environment discovery") {
    LiveServer live;
    json tasks = live.get("/tasks", 200);
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0].at("task_id") == "tuning");
    CHECK(tasks[0].at("direction") == "maximize");
    CHECK(tasks[0].at("experiments") == 1);

    json envs = live.get("/tasks/tuning/envs", 200);
    REQUIRE(envs.size() == 1);
    CHECK(envs[0].at("experiment_id") == "e1");
    CHECK(envs[0].at("env_text") == "env text");
    CHECK(envs[0].at("records") == 18);
    CHECK(envs[0].at("fidelity").at("metadata").at("epoch") == 1.0);

    json missing = live.get("/tasks/nope/envs", 404);
    CHECK(missing.contains("error"));
}

TEST_CASE("the space endpoint serves the serialized configuration space") {
    LiveServer live;
    json space = live.get("/tasks/tuning/envs/e1/space", 200);
    CHECK(space.at("candidate_mode") == "factored-grid");
    CHECK(space.at("dimensions").size() == 3);
    CHECK(json::parse(detail::space_to_json(grid_bundle("tuning").experiments[0].space).dump()) ==
          space);
    live.get("/tasks/tuning/envs/nope/space", 404);
}

TEST_CASE("direct queries return the stored score and details") {
    LiveServer live;
    json reply = live.post("/tasks/tuning/envs/e1/query",
                           {{"config", {{"lr", "1e-06"}, {"mb", "16"}, {"kl", "0"}}}}, 200);
    CHECK(reply.at("score") == Catch::Approx(0.4));
    CHECK(reply.at("additional_information").at("note") == "r0");

    // numeric dict values are stringified, not rejected
    json numeric = live.post("/tasks/tuning/envs/e1/query",
                             {{"config", {{"lr", "1e-06"}, {"mb", 16}, {"kl", 0}}}}, 200);
    CHECK(numeric.at("score") == Catch::Approx(0.4));

    // canonical text form works as well
    json text = live.post("/tasks/tuning/envs/e1/query",
                          {{"config", "kl=0;lr=5e-06;mb=32"}}, 200);
    CHECK(text.at("score") == Catch::Approx(0.56));

    live.post("/tasks/tuning/envs/e1/query",
              {{"config", {{"lr", "2e-06"}, {"mb", "16"}, {"kl", "0"}}}}, 400); // off grid
    live.post("/tasks/tuning/envs/e1/query", {{"wrong", 1}}, 400);
    auto res = live.client.Post("/tasks/tuning/envs/e1/query", "{{{", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
}

TEST_CASE("episode lifecycle over HTTP") {
    LiveServer live;
    json created = live.post(
        "/episodes",
        {{"task", "tuning"}, {"env", "e1"}, {"budget", 2}, {"episode_id", "ep-http"}}, 200);
    CHECK(created.at("episode_id") == "ep-http");
    CHECK(created.at("remaining") == 2);

    // duplicate id refused, bad arguments refused
    live.post("/episodes",
              {{"task", "tuning"}, {"env", "e1"}, {"budget", 2}, {"episode_id", "ep-http"}},
              409);
    live.post("/episodes", {{"task", "nope"}, {"env", "e1"}, {"budget", 2}}, 404);
    live.post("/episodes", {{"task", "tuning"}, {"env", "nope"}, {"budget", 2}}, 400);
    live.post("/episodes", {{"task", "tuning"}, {"env", "e1"}, {"budget", 0}}, 400);
    live.post("/episodes", {{"task", "tuning"}}, 400);

    // a valid step executes; the log is refused while in progress
    json obs = live.post("/episodes/ep-http/step", {{"config", "kl=0;lr=1e-06;mb=16"}}, 200);
    CHECK(obs.at("executed") == true);
    CHECK(obs.at("matched") == false);
    CHECK(obs.at("score") == Catch::Approx(0.4));
    CHECK(obs.at("remaining") == 1);
    CHECK_FALSE(obs.contains("final"));
    live.get("/episodes/ep-http/log", 409);

    // a malformed proposal is redirected, completing the episode
    json last = live.post("/episodes/ep-http/step",
                          {{"config", "kl=0.001;lr=1e-05;mb=64)"}}, 200);
    CHECK(last.at("matched") == true);
    CHECK(last.at("remaining") == 0);
    REQUIRE(last.contains("final"));
    CHECK(last.at("final").at("regret") == Catch::Approx(0.0)); // matched onto the argmax
    CHECK(last.at("final").at("matched_fraction") == Catch::Approx(0.5));

    // stepping past the budget is a conflict and leaves the state untouched
    live.post("/episodes/ep-http/step", {{"config", "kl=0;lr=5e-06;mb=32"}}, 409);
    json status = live.get("/episodes/ep-http", 200);
    CHECK(status.at("turns") == 2);
    CHECK(status.at("finished") == true);
    CHECK(status.at("final").at("regret") == Catch::Approx(0.0));

    live.get("/episodes/nope", 404);
    live.post("/episodes/nope/step", {{"config", "x"}}, 404);
}

TEST_CASE("the served log matches the local runtime byte for byte") {
    LiveServer live;
    std::vector<std::string> proposals = {"kl=0;lr=1e-06;mb=16", "garbage [1,2)",
                                          "kl=0.001;lr=1e-05;mb=64"};
    live.post("/episodes",
              {{"task", "tuning"}, {"env", "e1"}, {"budget", 3},
               {"episode_id", "ep-log"}, {"policy", "probe"}, {"reward_mode", "lenient"}},
              200);
    for (const auto& raw : proposals) live.post("/episodes/ep-log/step", {{"config", raw}}, 200);

    auto res = live.client.Get("/episodes/ep-log/log");
    REQUIRE(res);
    REQUIRE(res->status == 200);

    // identical episode replayed through the in-process runtime
    TaskBundle bundle = grid_bundle("tuning");
    EpisodeState state = init_episode(bundle, "e1", 3);
    for (const auto& raw : proposals) step(state, raw);
    TaskBounds bounds = bounds_for(bundle, bundle.experiments[0]);
    TrajectoryRecord record = finalize_episode(state, bounds, RewardMode::lenient, "ep-log");
    record.policy = "probe";
    CHECK(res->body == episode_log_text(record, bounds));

    EpisodeSummary summary = parse_episode_log(res->body);
    CHECK(summary.policy == "probe");
    CHECK(summary.reward_mode == "lenient");
    CHECK(summary.turns == 3);
}

TEST_CASE("matching can be disabled per episode") {
    LiveServer live;
    live.post("/episodes",
              {{"task", "tuning"}, {"env", "e1"}, {"budget", 1},
               {"episode_id", "ep-nomatch"}, {"matching", false}},
              200);
    json obs = live.post("/episodes/ep-nomatch/step", {{"config", "total garbage"}}, 200);
    CHECK(obs.at("executed") == false);
    CHECK(obs.at("final").at("reward") == -1.0);
    CHECK(obs.at("final").at("execution_rate") == 0.0);
}

TEST_CASE("concurrent episodes never share state") {
    LiveServer live;
    live.post("/episodes",
              {{"task", "tuning"}, {"env", "e1"}, {"budget", 2}, {"episode_id", "ep-a"}}, 200);
    live.post("/episodes",
              {{"task", "tuning2"}, {"env", "e1"}, {"budget", 3}, {"episode_id", "ep-b"}}, 200);

    live.post("/episodes/ep-a/step", {{"config", "kl=0;lr=1e-06;mb=16"}}, 200);
    live.post("/episodes/ep-b/step", {{"config", "kl=0;lr=5e-06;mb=32"}}, 200);
    live.post("/episodes/ep-a/step", {{"config", "kl=0;lr=1e-05;mb=64"}}, 200);

    json a = live.get("/episodes/ep-a", 200);
    json b = live.get("/episodes/ep-b", 200);
    CHECK(a.at("turns") == 2);
    CHECK(a.at("finished") == true);
    CHECK(b.at("turns") == 1);
    CHECK(b.at("remaining") == 2);
    CHECK(b.at("finished") == false);

    // many clients hammer one fresh episode in parallel; every turn lands
    live.post("/episodes",
              {{"task", "tuning"}, {"env", "e1"}, {"budget", 18}, {"episode_id", "ep-c"}}, 200);
    std::vector<std::thread> workers;
    std::array<bool, 6> worker_ok{};
    for (int w = 0; w < 6; ++w)
        workers.emplace_back([&live, &worker_ok, w] {
            httplib::Client client("127.0.0.1", live.port);
            const char* lrs[] = {"1e-06", "5e-06", "1e-05"};
            const char* mbs[] = {"16", "32", "64"};
            bool ok = true;
            for (int i = 0; i < 3; ++i) {
                json body = {{"config", std::string("kl=") + (w % 2 ? "0.001" : "0") +
                                            ";lr=" + lrs[w % 3] + ";mb=" + mbs[i]}};
                auto res = client.Post("/episodes/ep-c/step", body.dump(), "application/json");
                ok = ok && res && res->status == 200;
            }
            worker_ok[static_cast<std::size_t>(w)] = ok;
        });
    for (auto& worker : workers) worker.join();
    for (bool ok : worker_ok) CHECK(ok);
    json c = live.get("/episodes/ep-c", 200);
    CHECK(c.at("turns") == 18);
    CHECK(c.at("final").at("unique_config_rate") == 1.0);
    CHECK(c.at("final").at("regret") == 0.0);
}
