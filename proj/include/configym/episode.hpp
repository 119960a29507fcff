#pragma once

#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "configym/lookup.hpp"

namespace configym {

// One propose-and-observe turn. `executed` means the proposal reached the
// lookup table, either directly (valid) or via most-similar matching.
struct Turn {
    std::string raw;
    bool parsed = false;
    bool valid = false;   // parsed, validated and present in the table
    bool matched = false; // redirected by most-similar matching
    std::string canonical; // canonical text of the executed record, empty if none
    std::optional<Outcome> outcome;

    bool executed() const { return valid || matched; }
};

struct EpisodeOptions {
    bool matching = true; // most-similar matching on malformed proposals
};

struct Observation {
    bool executed = false;
    double score = 0.0;
    std::string details_text;
    bool matched = false;
    int remaining = 0;
};

struct EpisodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpisodeState {
    const TaskBundle* bundle = nullptr;
    const ExperimentTable* table = nullptr;
    int t = 1;      // 1-based turn index
    int budget = 0; // T
    EpisodeOptions options;
    std::vector<Turn> history;

    int remaining() const { return budget - static_cast<int>(history.size()); }
    bool finished() const { return t > budget; }
};

inline EpisodeState init_episode(const TaskBundle& bundle, const std::string& experiment_id,
                                 int budget, EpisodeOptions options = {}) {
    if (budget < 1) throw EpisodeError("nonpositive-budget: " + std::to_string(budget));
    const ExperimentTable* table = bundle.find_experiment(experiment_id);
    if (table == nullptr) throw EpisodeError("unknown-experiment: " + experiment_id);
    EpisodeState state;
    state.bundle = &bundle;
    state.table = table;
    state.budget = budget;
    state.options = options;
    return state;
}

inline std::string details_text(const Outcome& outcome) {
    std::string text;
    for (const auto& [k, v] : outcome.details) {
        if (!text.empty()) text += "; ";
        text += k + ": " + v;
    }
    return text;
}

// Executes one proposal. Malformed proposals never error: with matching on
// they are redirected, with matching off they burn the turn unexecuted.
inline Observation step(EpisodeState& state, const std::string& raw) {
    if (state.finished()) throw EpisodeError("budget-exhausted");

    Turn turn;
    turn.raw = raw;
    auto parsed = parse_config_text(raw, state.table->space);
    turn.parsed = parsed.has_value();
    bool direct = false;
    if (parsed) {
        std::string canon = canonicalize(*parsed, state.table->space);
        auto it = state.table->records.find(canon);
        if (it != state.table->records.end() && validate(*parsed, state.table->space).valid) {
            turn.valid = true;
            turn.canonical = canon;
            turn.outcome = it->second.outcome;
            direct = true;
        }
    }
    if (!direct && state.options.matching) {
        MatchResult match = match_most_similar(*state.table, raw);
        turn.matched = true;
        turn.canonical = match.canonical;
        turn.outcome = match.record->outcome;
    }

    Observation obs;
    obs.executed = turn.executed();
    obs.matched = turn.matched;
    if (turn.outcome) {
        obs.score = turn.outcome->score;
        obs.details_text = details_text(*turn.outcome);
    }
    state.history.push_back(std::move(turn));
    state.t += 1;
    obs.remaining = state.remaining();
    return obs;
}

// ---------------------------------------------------------------------------
// Rewards and metrics
// ---------------------------------------------------------------------------

// Utility-space bounds. best >= worst; equal bounds are the degenerate case.
struct TaskBounds {
    double best_utility = 0.0;
    double worst_utility = 0.0;
};

inline TaskBounds bounds_from_table(const ExperimentTable& table) {
    TaskBounds bounds{-std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
    for (const auto& [canon, record] : table.records) {
        double u = utility(record.outcome);
        bounds.best_utility = std::max(bounds.best_utility, u);
        bounds.worst_utility = std::min(bounds.worst_utility, u);
    }
    return bounds;
}

inline TaskBounds bounds_for(const TaskBundle& bundle, const ExperimentTable& table) {
    if (bundle.bounds) {
        double a = utility(bundle.bounds->best, bundle.direction);
        double b = utility(bundle.bounds->worst, bundle.direction);
        return {std::max(a, b), std::min(a, b)};
    }
    return bounds_from_table(table);
}

enum class RewardMode { strict, lenient };

inline RewardMode reward_mode_from_string(const std::string& s) {
    if (s == "strict") return RewardMode::strict;
    if (s == "lenient") return RewardMode::lenient;
    throw std::invalid_argument("unknown reward mode: " + s);
}

// Trajectory-level cumulative-regret reward in [-1, 0]. The main branch
// requires T distinct valid proposals; anything else (repeats, invalid or
// missing turns) collapses to -1. In strict mode a matched turn counts as
// invalid; in lenient mode it counts as valid under its matched canonical.
inline double outcome_reward(const std::vector<Turn>& turns, TaskBounds bounds, int budget,
                             RewardMode mode = RewardMode::strict) {
    if (static_cast<int>(turns.size()) != budget) return -1.0;
    std::set<std::string> seen;
    double cumulative = 0.0;
    for (const auto& turn : turns) {
        bool counts = mode == RewardMode::strict ? turn.valid : turn.executed();
        if (!counts) return -1.0;
        if (!seen.insert(turn.canonical).second) return -1.0;
        cumulative += utility(*turn.outcome);
    }
    double range = bounds.best_utility - bounds.worst_utility;
    if (range <= 0.0) return 0.0; // degenerate bounds: every proposal is optimal
    return -(budget * bounds.best_utility - cumulative) / (budget * range);
}

// Group-normalized advantages (population standard deviation).
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            double epsilon = 1e-8) {
    const std::size_t n = rewards.size();
    if (n == 0) return {};
    double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    double std_dev = std::sqrt(var / static_cast<double>(n));
    std::vector<double> advantages(n);
    for (std::size_t i = 0; i < n; ++i)
        advantages[i] = (rewards[i] - mean) / (std_dev + epsilon);
    return advantages;
}

// Distance of the best executed configuration from the global optimum,
// in [0, 1]. Empty or all-unexecuted history scores 1.
inline double normalized_regret(const std::vector<Turn>& turns, TaskBounds bounds) {
    double best_found = -std::numeric_limits<double>::infinity();
    for (const auto& turn : turns)
        if (turn.executed()) best_found = std::max(best_found, utility(*turn.outcome));
    if (!std::isfinite(best_found)) return 1.0;
    double range = bounds.best_utility - bounds.worst_utility;
    if (range <= 0.0) return 0.0;
    double regret = (bounds.best_utility - best_found) / range;
    return std::clamp(regret, 0.0, 1.0);
}

struct BehaviorMetrics {
    double execution_rate = 0.0;     // executed turns / T (matched turns count)
    double unique_config_rate = 0.0; // distinct executed canonicals / T
    double matched_fraction = 0.0;   // matched turns / T, reported separately
};

inline BehaviorMetrics behavior_metrics(const std::vector<Turn>& turns, int budget) {
    BehaviorMetrics m;
    if (budget <= 0) return m;
    std::set<std::string> distinct;
    int executed = 0, matched = 0;
    for (const auto& turn : turns) {
        if (turn.executed()) {
            ++executed;
            distinct.insert(turn.canonical);
        }
        if (turn.matched) ++matched;
    }
    m.execution_rate = static_cast<double>(executed) / budget;
    m.unique_config_rate = static_cast<double>(distinct.size()) / budget;
    m.matched_fraction = static_cast<double>(matched) / budget;
    return m;
}

// ---------------------------------------------------------------------------
// Finalized trajectories and the episode log
// ---------------------------------------------------------------------------

struct TrajectoryRecord {
    std::string episode_id;
    std::string policy; // method label for aggregation ("agent" for external agents)
    std::string task_id;
    std::string experiment_id;
    int budget = 0;
    bool matching = true;
    RewardMode reward_mode = RewardMode::strict;
    std::vector<Turn> turns;
    double reward = -1.0;
    double regret = 1.0;
    BehaviorMetrics metrics;
};

inline TrajectoryRecord finalize_episode(const EpisodeState& state, TaskBounds bounds,
                                         RewardMode mode, std::string episode_id) {
    TrajectoryRecord record;
    record.episode_id = std::move(episode_id);
    record.task_id = state.bundle->task_id;
    record.experiment_id = state.table->experiment_id;
    record.budget = state.budget;
    record.matching = state.options.matching;
    record.reward_mode = mode;
    record.turns = state.history;
    record.reward = outcome_reward(record.turns, bounds, state.budget, mode);
    record.regret = normalized_regret(record.turns, bounds);
    record.metrics = behavior_metrics(record.turns, state.budget);
    return record;
}

// Append-only JSON-lines log, replayable to recompute every metric
// bit-identically. Timestamps are logical (the turn index): wall-clock
// stamps would break content-addressed reruns.
inline std::string episode_log_text(const TrajectoryRecord& record, TaskBounds bounds) {
    ordered_json header = ordered_json::object();
    header["type"] = "episode";
    header["episode_id"] = record.episode_id;
    header["policy"] = record.policy;
    header["task"] = record.task_id;
    header["experiment"] = record.experiment_id;
    header["budget"] = record.budget;
    header["matching"] = record.matching;
    header["reward_mode"] = record.reward_mode == RewardMode::strict ? "strict" : "lenient";
    header["bounds"] = {{"best_utility", bounds.best_utility},
                        {"worst_utility", bounds.worst_utility}};
    std::string text = header.dump() + "\n";
    int index = 1;
    for (const auto& turn : record.turns) {
        ordered_json tj = ordered_json::object();
        tj["type"] = "turn";
        tj["timestamp"] = index++;
        tj["raw"] = turn.raw;
        tj["canonical"] = turn.canonical;
        tj["executed"] = turn.executed();
        tj["valid"] = turn.valid;
        tj["matched"] = turn.matched;
        if (turn.outcome) tj["score"] = turn.outcome->score;
        text += tj.dump() + "\n";
    }
    ordered_json footer = ordered_json::object();
    footer["type"] = "final";
    footer["reward"] = record.reward;
    footer["regret"] = record.regret;
    footer["execution_rate"] = record.metrics.execution_rate;
    footer["unique_config_rate"] = record.metrics.unique_config_rate;
    footer["matched_fraction"] = record.metrics.matched_fraction;
    text += footer.dump() + "\n";
    return text;
}

// Replays a persisted log through the runtime, recomputing rewards and
// metrics from the raw proposals.
inline TrajectoryRecord replay_episode_log(const std::string& text, const TaskBundle& bundle) {
    std::vector<std::string> raws;
    ordered_json header;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        json doc = json::parse(line);
        const std::string type = doc.at("type").get<std::string>();
        if (type == "episode") header = doc;
        else if (type == "turn") raws.push_back(doc.at("raw").get<std::string>());
    }
    EpisodeOptions options;
    options.matching = header.at("matching").get<bool>();
    EpisodeState state = init_episode(bundle, header.at("experiment").get<std::string>(),
                                      header.at("budget").get<int>(), options);
    for (const auto& raw : raws) step(state, raw);
    TaskBounds bounds{header.at("bounds").at("best_utility").get<double>(),
                      header.at("bounds").at("worst_utility").get<double>()};
    RewardMode mode = reward_mode_from_string(header.at("reward_mode").get<std::string>());
    TrajectoryRecord record =
        finalize_episode(state, bounds, mode, header.at("episode_id").get<std::string>());
    if (header.contains("policy")) record.policy = header.at("policy").get<std::string>();
    return record;
}

} // namespace configym
