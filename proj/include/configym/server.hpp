#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <httplib.h>

#include "configym/episode.hpp"
#include "configym/lookup.hpp"

namespace configym {

// HTTP face of the gym: task/space discovery, direct lookups, and
// concurrent episodes isolated by id (each episode serializes its own
// turns; different episodes never contend).
class GymServer {
public:
    explicit GymServer(std::vector<TaskBundle> bundles) {
        for (auto& bundle : bundles) {
            std::string id = bundle.task_id;
            if (bundles_.count(id))
                throw BundleError("schema-violation", "/" + id, "duplicate task_id");
            bundles_.emplace(std::move(id), std::move(bundle));
        }
        install_routes();
    }

    httplib::Server& http() { return server_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

private:
    struct Episode {
        std::mutex mutex;
        EpisodeState state;
        TaskBounds bounds;
        RewardMode reward_mode = RewardMode::strict;
        std::string policy_label = "agent";
        std::string episode_id;
    };

    static void reply_json(httplib::Response& res, int status, const ordered_json& doc) {
        res.status = status;
        res.set_content(doc.dump(), "application/json");
    }

    static void reply_error(httplib::Response& res, int status, const std::string& message) {
        reply_json(res, status, ordered_json{{"error", message}});
    }

    const TaskBundle* find_task(const std::string& id) const {
        auto it = bundles_.find(id);
        return it == bundles_.end() ? nullptr : &it->second;
    }

    // config payload: either the canonical/raw text or an Appendix-style dict
    static std::optional<Configuration> config_from_payload(const json& payload,
                                                            const ConfigSpace& space) {
        if (!payload.contains("config")) return std::nullopt;
        const json& c = payload.at("config");
        if (c.is_object()) {
            Configuration config;
            for (auto it = c.begin(); it != c.end(); ++it) {
                if (it.value().is_array()) {
                    std::vector<std::string> list;
                    for (const auto& t : it.value())
                        list.push_back(t.is_string() ? t.get<std::string>() : t.dump());
                    config.values[it.key()] = std::move(list);
                } else {
                    config.values[it.key()] = it.value().is_string()
                                                  ? it.value().get<std::string>()
                                                  : it.value().dump();
                }
            }
            return config;
        }
        if (c.is_string()) return parse_config_text(c.get<std::string>(), space);
        return std::nullopt;
    }

    void install_routes() {
        server_.Get("/tasks", [this](const httplib::Request&, httplib::Response& res) {
            ordered_json tasks = ordered_json::array();
            for (const auto& [id, bundle] : bundles_) {
                ordered_json t = ordered_json::object();
                t["task_id"] = id;
                t["task_text"] = bundle.task_text;
                t["direction"] = to_string(bundle.direction);
                t["experiments"] = bundle.experiments.size();
                t["top_k"] = bundle.top_k;
                tasks.push_back(std::move(t));
            }
            reply_json(res, 200, tasks);
        });

        server_.Get(R"(/tasks/([^/]+)/envs)",
                    [this](const httplib::Request& req, httplib::Response& res) {
            const TaskBundle* bundle = find_task(req.matches[1]);
            if (!bundle) return reply_error(res, 404, "unknown task");
            ordered_json envs = ordered_json::array();
            for (const auto& table : bundle->experiments) {
                ordered_json e = ordered_json::object();
                e["experiment_id"] = table.experiment_id;
                e["env_text"] = table.redact ? "" : table.env_text;
                ordered_json meta = ordered_json::object();
                for (const auto& [k, v] : table.fidelity.metadata) meta[k] = v;
                e["fidelity"] = {{"metadata", meta}};
                if (table.fidelity.level)
                    e["fidelity"]["level"] = to_string(*table.fidelity.level);
                e["records"] = table.records.size();
                envs.push_back(std::move(e));
            }
            reply_json(res, 200, envs);
        });

        server_.Get(R"(/tasks/([^/]+)/envs/([^/]+)/space)",
                    [this](const httplib::Request& req, httplib::Response& res) {
            const TaskBundle* bundle = find_task(req.matches[1]);
            if (!bundle) return reply_error(res, 404, "unknown task");
            const ExperimentTable* table = bundle->find_experiment(req.matches[2]);
            if (!table) return reply_error(res, 404, "unknown experiment");
            reply_json(res, 200, detail::space_to_json(table->space));
        });

        server_.Post(R"(/tasks/([^/]+)/envs/([^/]+)/query)",
                     [this](const httplib::Request& req, httplib::Response& res) {
            const TaskBundle* bundle = find_task(req.matches[1]);
            if (!bundle) return reply_error(res, 404, "unknown task");
            const ExperimentTable* table = bundle->find_experiment(req.matches[2]);
            if (!table) return reply_error(res, 404, "unknown experiment");
            json payload = json::parse(req.body, nullptr, false);
            if (payload.is_discarded()) return reply_error(res, 400, "malformed JSON body");
            auto config = config_from_payload(payload, table->space);
            if (!config) return reply_error(res, 400, "missing or unparseable config");
            if (!validate(*config, table->space).valid)
                return reply_error(res, 400, "configuration outside the space");
            try {
                const Outcome& outcome = query(*table, *config);
                ordered_json doc = ordered_json::object();
                doc["score"] = outcome.score;
                ordered_json info = ordered_json::object();
                for (const auto& [k, v] : outcome.details) info[k] = v;
                doc["additional_information"] = std::move(info);
                reply_json(res, 200, doc);
            } catch (const NotFoundError& e) {
                reply_error(res, 404, e.what());
            }
        });

        server_.Post("/episodes", [this](const httplib::Request& req, httplib::Response& res) {
            json payload = json::parse(req.body, nullptr, false);
            if (payload.is_discarded()) return reply_error(res, 400, "malformed JSON body");
            if (!payload.contains("task") || !payload.contains("env") ||
                !payload.contains("budget"))
                return reply_error(res, 400, "task, env and budget are required");
            const TaskBundle* bundle = find_task(payload.at("task").get<std::string>());
            if (!bundle) return reply_error(res, 404, "unknown task");

            auto episode = std::make_shared<Episode>();
            EpisodeOptions options;
            if (payload.contains("matching")) options.matching = payload.at("matching").get<bool>();
            try {
                episode->state = init_episode(*bundle, payload.at("env").get<std::string>(),
                                              payload.at("budget").get<int>(), options);
            } catch (const EpisodeError& e) {
                return reply_error(res, 400, e.what());
            }
            episode->bounds = bounds_for(*bundle, *episode->state.table);
            if (payload.contains("reward_mode"))
                episode->reward_mode =
                    reward_mode_from_string(payload.at("reward_mode").get<std::string>());
            if (payload.contains("policy"))
                episode->policy_label = payload.at("policy").get<std::string>();

            std::string episode_id;
            {
                std::lock_guard<std::mutex> lock(registry_mutex_);
                episode_id = payload.contains("episode_id")
                                 ? payload.at("episode_id").get<std::string>()
                                 : "episode-" + std::to_string(next_episode_++);
                if (episodes_.count(episode_id))
                    return reply_error(res, 409, "episode_id already exists");
                episode->episode_id = episode_id;
                episodes_.emplace(episode_id, episode);
            }
            ordered_json doc = ordered_json::object();
            doc["episode_id"] = episode_id;
            doc["task"] = bundle->task_id;
            doc["env"] = episode->state.table->experiment_id;
            doc["budget"] = episode->state.budget;
            doc["remaining"] = episode->state.remaining();
            reply_json(res, 200, doc);
        });

        server_.Post(R"(/episodes/([^/]+)/step)",
                     [this](const httplib::Request& req, httplib::Response& res) {
            auto episode = find_episode(req.matches[1]);
            if (!episode) return reply_error(res, 404, "unknown episode");
            json payload = json::parse(req.body, nullptr, false);
            if (payload.is_discarded()) return reply_error(res, 400, "malformed JSON body");
            if (!payload.contains("config") || !payload.at("config").is_string())
                return reply_error(res, 400, "config text is required");

            std::lock_guard<std::mutex> lock(episode->mutex);
            if (episode->state.finished())
                return reply_error(res, 409, "budget exhausted");
            Observation obs = step(episode->state, payload.at("config").get<std::string>());
            ordered_json doc = ordered_json::object();
            doc["executed"] = obs.executed;
            doc["score"] = obs.score;
            doc["details"] = obs.details_text;
            doc["matched"] = obs.matched;
            doc["remaining"] = obs.remaining;
            if (episode->state.finished()) doc["final"] = final_json(*episode);
            reply_json(res, 200, doc);
        });

        server_.Get(R"(/episodes/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
            auto episode = find_episode(req.matches[1]);
            if (!episode) return reply_error(res, 404, "unknown episode");
            std::lock_guard<std::mutex> lock(episode->mutex);
            ordered_json doc = ordered_json::object();
            doc["episode_id"] = episode->episode_id;
            doc["task"] = episode->state.bundle->task_id;
            doc["env"] = episode->state.table->experiment_id;
            doc["budget"] = episode->state.budget;
            doc["turns"] = episode->state.history.size();
            doc["remaining"] = episode->state.remaining();
            doc["finished"] = episode->state.finished();
            if (episode->state.finished()) doc["final"] = final_json(*episode);
            reply_json(res, 200, doc);
        });

        server_.Get(R"(/episodes/([^/]+)/log)",
                    [this](const httplib::Request& req, httplib::Response& res) {
            auto episode = find_episode(req.matches[1]);
            if (!episode) return reply_error(res, 404, "unknown episode");
            std::lock_guard<std::mutex> lock(episode->mutex);
            if (!episode->state.finished())
                return reply_error(res, 409, "episode still in progress");
            TrajectoryRecord record = finalize_episode(episode->state, episode->bounds,
                                                       episode->reward_mode,
                                                       episode->episode_id);
            record.policy = episode->policy_label;
            res.status = 200;
            res.set_content(episode_log_text(record, episode->bounds), "application/jsonl");
        });
    }

    ordered_json final_json(Episode& episode) {
        TrajectoryRecord record = finalize_episode(episode.state, episode.bounds,
                                                   episode.reward_mode, episode.episode_id);
        ordered_json doc = ordered_json::object();
        doc["reward"] = record.reward;
        doc["regret"] = record.regret;
        doc["execution_rate"] = record.metrics.execution_rate;
        doc["unique_config_rate"] = record.metrics.unique_config_rate;
        doc["matched_fraction"] = record.metrics.matched_fraction;
        return doc;
    }

    std::shared_ptr<Episode> find_episode(const std::string& id) {
        std::lock_guard<std::mutex> lock(registry_mutex_);
        auto it = episodes_.find(id);
        return it == episodes_.end() ? nullptr : it->second;
    }

    std::map<std::string, TaskBundle> bundles_;
    httplib::Server server_;
    std::mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Episode>> episodes_;
    long next_episode_ = 0;
};

} // namespace configym
