#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "configym/curation.hpp"
#include "configym/episode.hpp"
#include "configym/lookup.hpp"
#include "configym/rng.hpp"

namespace configym {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AgentTimeout : ProtocolError {
    using ProtocolError::ProtocolError;
};

// One line on the wire: {"type": ..., "episode_id": ..., "payload": {...}}
struct ProtocolMessage {
    std::string type; // prompt | exec_config | observation | episode_end | error
    std::string episode_id;
    ordered_json payload = ordered_json::object();
};

inline ordered_json message_to_json(const ProtocolMessage& message) {
    ordered_json doc = ordered_json::object();
    doc["type"] = message.type;
    doc["episode_id"] = message.episode_id;
    doc["payload"] = message.payload;
    return doc;
}

inline ProtocolMessage message_from_json(const json& doc) {
    ProtocolMessage message;
    message.type = doc.at("type").get<std::string>();
    message.episode_id = doc.at("episode_id").get<std::string>();
    if (doc.contains("payload")) message.payload = doc.at("payload");
    return message;
}

inline ProtocolMessage parse_message_line(const std::string& line) {
    try {
        return message_from_json(json::parse(line));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed message line: ") + e.what());
    }
}

inline ProtocolMessage make_exec_config(const std::string& episode_id,
                                        const std::string& config_text) {
    ProtocolMessage message;
    message.type = "exec_config";
    message.episode_id = episode_id;
    message.payload["config"] = config_text;
    return message;
}

// Pulls the configuration out of an exec_config payload: the substring
// between the first <config> and </config> pair when present, else the
// whole payload text.
inline std::string extract_config(const std::string& text) {
    const std::string open = "<config>", close = "</config>";
    std::size_t start = text.find(open);
    if (start == std::string::npos) return text;
    start += open.size();
    std::size_t end = text.find(close, start);
    if (end == std::string::npos) return text;
    return text.substr(start, end - start);
}

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

// An agent answers each gym message (prompt, observation or error) with one
// message of its own; implementations doing real I/O throw AgentTimeout
// when the peer stalls past the deadline.
class Agent {
public:
    virtual ~Agent() = default;
    virtual ProtocolMessage respond(const ProtocolMessage& message) = 0;
};

namespace detail {

inline std::vector<std::string> descending_canonicals(const ExperimentTable& table) {
    std::vector<std::string> order;
    for (const auto& [canon, record] : top_k(table, table.records.size()))
        order.push_back(canon);
    return order;
}

} // namespace detail

// Replays the table's records best-first; attains reward 0 within budget.
class OptimalReplayAgent : public Agent {
public:
    explicit OptimalReplayAgent(const ExperimentTable& table)
        : order_(detail::descending_canonicals(table)) {}

    ProtocolMessage respond(const ProtocolMessage& message) override {
        std::string text = cursor_ < order_.size() ? order_[cursor_++] : std::string();
        return make_exec_config(message.episode_id, "<config>" + text + "</config>");
    }

private:
    std::vector<std::string> order_;
    std::size_t cursor_ = 0;
};

// Corruption taxonomy applied to otherwise-valid serializations.
enum class CorruptionKind { bracket_swap = 0, element_duplication = 1, truncation = 2 };

// Proposes valid configurations best-first but mangles the serialization
// with probability p per turn. Every corruption is guaranteed to produce
// text that no longer validates, so with matching off a corrupted turn
// never executes.
class NoisyFormatAgent : public Agent {
public:
    NoisyFormatAgent(const ExperimentTable& table, double malformation_rate,
                     std::uint64_t seed)
        : order_(detail::descending_canonicals(table)), rate_(malformation_rate), rng_(seed) {
        if (rate_ < 0.0 || rate_ > 1.0)
            throw ProtocolError("malformation rate must be in [0, 1]");
    }

    ProtocolMessage respond(const ProtocolMessage& message) override {
        std::string text =
            cursor_ < order_.size() ? order_[cursor_++] : order_[order_.size() - 1];
        if (rng_.uniform() < rate_) {
            auto kind = static_cast<CorruptionKind>(rng_.below(3));
            text = corrupt(text, kind);
            ++kind_counts_[static_cast<std::size_t>(kind)];
        }
        return make_exec_config(message.episode_id, "<config>" + text + "</config>");
    }

    const std::array<std::size_t, 3>& kind_counts() const { return kind_counts_; }

    static std::string corrupt(std::string text, CorruptionKind kind) {
        switch (kind) {
        case CorruptionKind::bracket_swap:
            // [a,b] -> (a,b); scalar-only text gets its separators swapped
            if (text.find('[') != std::string::npos) {
                for (char& c : text) {
                    if (c == '[') c = '(';
                    if (c == ']') c = ')';
                }
            } else {
                for (char& c : text)
                    if (c == '=') c = ':';
            }
            return text;
        case CorruptionKind::element_duplication: {
            // double the first value token: k=v -> k=vv (never a grid token)
            std::size_t eq = text.find('=');
            if (eq == std::string::npos) return text + text;
            std::size_t end = text.find_first_of(";[", eq + 1);
            if (end == std::string::npos) end = text.size();
            std::string value = text.substr(eq + 1, end - eq - 1);
            return text.substr(0, end) + value + text.substr(end);
        }
        case CorruptionKind::truncation:
            return text.substr(0, std::max<std::size_t>(1, text.size() * 2 / 3));
        }
        return text;
    }

private:
    std::vector<std::string> order_;
    double rate_;
    Rng rng_;
    std::size_t cursor_ = 0;
    std::array<std::size_t, 3> kind_counts_{};
};

// Replays a fixed list of messages; answers with an empty error message
// once exhausted (which the runner counts as a protocol violation).
class FixedSequenceAgent : public Agent {
public:
    explicit FixedSequenceAgent(std::vector<ProtocolMessage> replies)
        : replies_(std::move(replies)) {}

    static FixedSequenceAgent from_configs(const std::vector<std::string>& configs) {
        std::vector<ProtocolMessage> replies;
        for (const auto& config : configs) replies.push_back(make_exec_config("", config));
        return FixedSequenceAgent(std::move(replies));
    }

    ProtocolMessage respond(const ProtocolMessage& message) override {
        if (cursor_ >= replies_.size()) {
            ProtocolMessage out;
            out.type = "error";
            out.episode_id = message.episode_id;
            out.payload["reason"] = "sequence exhausted";
            return out;
        }
        ProtocolMessage out = replies_[cursor_++];
        out.episode_id = message.episode_id;
        return out;
    }

private:
    std::vector<ProtocolMessage> replies_;
    std::size_t cursor_ = 0;
};

struct ScriptedAgentSpec {
    std::string kind; // optimal_replay | noisy_format | fixed_sequence
    double malformation_rate = 0.32;
    std::uint64_t seed = 0;
    std::vector<std::string> sequence;
};

inline std::unique_ptr<Agent> scripted_agent(const ScriptedAgentSpec& spec,
                                             const ExperimentTable& table) {
    if (spec.kind == "optimal_replay") return std::make_unique<OptimalReplayAgent>(table);
    if (spec.kind == "noisy_format")
        return std::make_unique<NoisyFormatAgent>(table, spec.malformation_rate, spec.seed);
    if (spec.kind == "fixed_sequence")
        return std::make_unique<FixedSequenceAgent>(
            FixedSequenceAgent::from_configs(spec.sequence));
    throw ProtocolError("unknown scripted agent kind: " + spec.kind);
}

// ---------------------------------------------------------------------------
// The agent-driven episode loop
// ---------------------------------------------------------------------------

struct TranscriptEntry {
    std::string from; // "gym" or "agent"
    ProtocolMessage message;
};

struct AgentRunResult {
    TrajectoryRecord record;
    bool aborted = false;
    int violations = 0;
    std::vector<TranscriptEntry> transcript;
};

struct AgentRunParams {
    std::string episode_id = "episode-0";
    std::string policy_label = "agent";
    int max_violations = 3;
    RewardMode reward_mode = RewardMode::strict;
    EpisodeOptions options;
};

// Message ordering per completed episode: prompt, (exec_config,
// observation) x T, episode_end. Protocol violations are answered with an
// error message and never consume budget; the third strike aborts the
// episode, which leaves fewer than T turns and therefore reward -1.
inline AgentRunResult run_episode_with_agent(Agent& agent, const TaskBundle& bundle,
                                             const std::string& experiment_id, int budget,
                                             const std::string& prompt_text,
                                             const AgentRunParams& params = {}) {
    EpisodeState state = init_episode(bundle, experiment_id, budget, params.options);
    TaskBounds bounds = bounds_for(bundle, *state.table);

    AgentRunResult result;
    auto send = [&](const ProtocolMessage& message) {
        result.transcript.push_back({"gym", message});
    };
    auto receive = [&](const ProtocolMessage& message) {
        result.transcript.push_back({"agent", message});
    };

    ProtocolMessage prompt;
    prompt.type = "prompt";
    prompt.episode_id = params.episode_id;
    prompt.payload["prompt"] = prompt_text;
    prompt.payload["budget"] = budget;
    send(prompt);

    ProtocolMessage outbound = prompt;
    int strikes = 0;
    while (!state.finished()) {
        ProtocolMessage reply;
        try {
            reply = agent.respond(outbound);
        } catch (const AgentTimeout&) {
            result.aborted = true;
            break;
        }
        receive(reply);
        if (reply.type != "exec_config" || !reply.payload.contains("config") ||
            !reply.payload.at("config").is_string()) {
            ++strikes;
            ++result.violations;
            if (strikes >= params.max_violations) {
                result.aborted = true;
                break;
            }
            ProtocolMessage error;
            error.type = "error";
            error.episode_id = params.episode_id;
            error.payload["reason"] = "expected an exec_config message";
            error.payload["strikes"] = strikes;
            send(error);
            outbound = error;
            continue;
        }
        std::string config_text =
            extract_config(reply.payload.at("config").get<std::string>());
        Observation obs = step(state, config_text);

        ProtocolMessage observation;
        observation.type = "observation";
        observation.episode_id = params.episode_id;
        observation.payload["executed"] = obs.executed;
        observation.payload["score"] = obs.score;
        observation.payload["details"] = obs.details_text;
        observation.payload["matched"] = obs.matched;
        observation.payload["remaining"] = obs.remaining;
        send(observation);
        outbound = observation;
    }

    result.record =
        finalize_episode(state, bounds, params.reward_mode, params.episode_id);
    result.record.policy = params.policy_label;

    ProtocolMessage episode_end;
    episode_end.type = "episode_end";
    episode_end.episode_id = params.episode_id;
    episode_end.payload["reward"] = result.record.reward;
    episode_end.payload["regret"] = result.record.regret;
    episode_end.payload["aborted"] = result.aborted;
    send(episode_end);
    return result;
}

inline AgentRunResult run_episode_with_agent(Agent& agent, const TaskBundle& bundle,
                                             const CurationSample& sample,
                                             const AgentRunParams& params = {}) {
    return run_episode_with_agent(agent, bundle, sample.target_experiment_id, sample.budget,
                                  render_context(sample, bundle), params);
}

inline std::string transcript_log_text(const AgentRunResult& result) {
    std::string text;
    for (const auto& entry : result.transcript) {
        ordered_json doc = message_to_json(entry.message);
        doc["from"] = entry.from;
        text += doc.dump() + "\n";
    }
    return text;
}

// Replays a persisted transcript's exec_config stream through a fresh
// episode; identical rewards and metrics fall out of the runtime being
// deterministic in the proposal sequence.
inline TrajectoryRecord replay_transcript(const std::string& text, const TaskBundle& bundle,
                                          const std::string& experiment_id, int budget,
                                          const AgentRunParams& params = {}) {
    EpisodeState state = init_episode(bundle, experiment_id, budget, params.options);
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        json doc = json::parse(line);
        if (doc.value("from", "") != "agent") continue;
        ProtocolMessage message = message_from_json(doc);
        if (message.type != "exec_config" || !message.payload.contains("config") ||
            !message.payload.at("config").is_string())
            continue;
        if (state.finished()) break;
        step(state, extract_config(message.payload.at("config").get<std::string>()));
    }
    TaskBounds bounds = bounds_for(bundle, *state.table);
    TrajectoryRecord record =
        finalize_episode(state, bounds, params.reward_mode, params.episode_id);
    record.policy = params.policy_label;
    return record;
}

} // namespace configym
