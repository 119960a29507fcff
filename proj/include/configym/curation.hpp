#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "configym/episode.hpp"
#include "configym/rng.hpp"

namespace configym {

struct CurationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FidelitySplit {
    std::vector<std::string> low;
    std::vector<std::string> medium;
    std::vector<std::string> high;
};

enum class SampleRole { train, test };

struct CurationSample {
    SampleRole role = SampleRole::train;
    std::string target_experiment_id;
    int budget = 1;
    int top_k = 3;
    std::vector<std::string> demo_experiment_ids; // strictly lower tier than target
};

// Sorts experiments lexicographically on the fidelity_key metadata, then
// assigns tiers: bundle-declared levels pass through untouched, otherwise
// terciles of the sorted order.
inline FidelitySplit order_by_fidelity(const TaskBundle& bundle) {
    if (bundle.fidelity_key.empty())
        throw CurationError("missing-metadata: bundle has empty fidelity_key");
    std::vector<const ExperimentTable*> sorted;
    for (const auto& table : bundle.experiments) {
        for (const auto& key : bundle.fidelity_key)
            if (!table.fidelity.metadata.count(key))
                throw CurationError("missing-metadata: " + table.experiment_id +
                                    " lacks fidelity metadata " + key);
        sorted.push_back(&table);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](const ExperimentTable* a, const ExperimentTable* b) {
                         for (const auto& key : bundle.fidelity_key) {
                             double av = a->fidelity.metadata.at(key);
                             double bv = b->fidelity.metadata.at(key);
                             if (av != bv) return av < bv;
                         }
                         return false;
                     });

    bool all_labeled = std::all_of(sorted.begin(), sorted.end(), [](const ExperimentTable* t) {
        return t->fidelity.level.has_value();
    });
    FidelitySplit split;
    if (all_labeled) {
        for (const ExperimentTable* t : sorted) {
            switch (*t->fidelity.level) {
            case FidelityLevel::low: split.low.push_back(t->experiment_id); break;
            case FidelityLevel::medium: split.medium.push_back(t->experiment_id); break;
            case FidelityLevel::high: split.high.push_back(t->experiment_id); break;
            }
        }
    } else {
        const std::size_t n = sorted.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (3 * i < n) split.low.push_back(sorted[i]->experiment_id);
            else if (3 * i < 2 * n) split.medium.push_back(sorted[i]->experiment_id);
            else split.high.push_back(sorted[i]->experiment_id);
        }
    }
    return split;
}

enum class TestDemoTiers { medium_only, low_and_medium };

struct SampleOptions {
    std::vector<int> budgets = {1, 2, 3, 4, 5};
    int top_k = 3;
    TestDemoTiers test_demo_tiers = TestDemoTiers::medium_only;
    bool no_demos = false; // ablation: optimize each experiment in isolation
};

// Train samples pair every medium-tier experiment with all low-tier demos;
// test samples pair every high-tier experiment with the medium tier (or
// low+medium under the override). Each pairing is replicated per budget.
inline std::vector<CurationSample> build_samples(const FidelitySplit& split,
                                                 const SampleOptions& options) {
    if (options.top_k < 1) throw CurationError("top_k must be >= 1");
    if (options.budgets.empty()) throw CurationError("budgets must be non-empty");
    if (split.medium.empty()) throw CurationError("empty-tier: no medium experiments");
    if (split.high.empty()) throw CurationError("empty-tier: no high experiments");

    std::vector<CurationSample> samples;
    for (const auto& target : split.medium) {
        for (int budget : options.budgets) {
            CurationSample s;
            s.role = SampleRole::train;
            s.target_experiment_id = target;
            s.budget = budget;
            s.top_k = options.top_k;
            if (!options.no_demos) s.demo_experiment_ids = split.low;
            samples.push_back(std::move(s));
        }
    }
    std::vector<std::string> test_demos = split.medium;
    if (options.test_demo_tiers == TestDemoTiers::low_and_medium)
        test_demos.insert(test_demos.begin(), split.low.begin(), split.low.end());
    for (const auto& target : split.high) {
        for (int budget : options.budgets) {
            CurationSample s;
            s.role = SampleRole::test;
            s.target_experiment_id = target;
            s.budget = budget;
            s.top_k = options.top_k;
            if (!options.no_demos) s.demo_experiment_ids = test_demos;
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

// K highest-utility records, descending; ties break to the smaller
// canonical text. K past the table size returns the whole table.
inline std::vector<std::pair<std::string, const ExperimentTable::Record*>>
top_k(const ExperimentTable& table, int k) {
    std::vector<std::pair<std::string, const ExperimentTable::Record*>> ranked;
    for (const auto& [canon, record] : table.records) ranked.emplace_back(canon, &record);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        double ua = utility(a.second->outcome);
        double ub = utility(b.second->outcome);
        if (ua != ub) return ua > ub;
        return a.first < b.first;
    });
    if (k >= 0 && ranked.size() > static_cast<std::size_t>(k)) ranked.resize(k);
    return ranked;
}

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string render_value(const ConfigValue& value) {
    if (std::holds_alternative<std::string>(value)) return std::get<std::string>(value);
    std::string out = "[";
    const auto& list = std::get<std::vector<std::string>>(value);
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (i) out += ", ";
        out += list[i];
    }
    out += "]";
    return out;
}

// Python-dict style rendering in the space's dimension order, matching the
// grid texts the agent sees: {'lr': [1e-06, 5e-06, 1e-05], ...}
inline std::string render_grid(const ConfigSpace& space) {
    std::string out = "{";
    for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
        const auto& dim = space.dimensions[i];
        if (i) out += ", ";
        out += "'" + dim.name + "': [";
        for (std::size_t j = 0; j < dim.allowed.size(); ++j) {
            if (j) out += ", ";
            out += dim.allowed[j];
        }
        out += "]";
    }
    out += "}";
    return out;
}

inline std::string render_config_dict(const Configuration& config, const ConfigSpace& space) {
    std::string out = "{";
    bool first = true;
    for (const auto& dim : space.dimensions) {
        auto it = config.values.find(dim.name);
        if (it == config.values.end()) continue;
        if (!first) out += ", ";
        first = false;
        out += "'" + dim.name + "': " + render_value(it->second);
    }
    out += "}";
    return out;
}

} // namespace detail

// Deterministic Task / Context / Instructions prompt. Demo blocks carry the
// demo table's environment line plus its Top-K configurations; scores from
// the target tier never appear.
inline std::string render_context(const CurationSample& sample, const TaskBundle& bundle) {
    const ExperimentTable* target = bundle.find_experiment(sample.target_experiment_id);
    if (target == nullptr)
        throw CurationError("unknown target experiment: " + sample.target_experiment_id);

    std::ostringstream out;
    out << "## Task\n" << bundle.task_text << "\n";
    out << "Optimization direction: " << (bundle.direction == Direction::maximize
                                              ? "higher scores are better."
                                              : "lower scores are better.")
        << "\n\n";

    out << "## Context\n";
    if (!target->redact)
        out << "Experiment Environment information: " << target->env_text << "\n";
    out << "Configuration space (must strictly follow):\n";
    if (target->space.candidate_mode == CandidateMode::factored_grid) {
        out << "\"" << detail::render_grid(target->space) << "\"\n";
    } else {
        out << "Select EXACTLY ONE of the numbered candidate configurations below. "
               "Do NOT create any new values and do NOT edit any candidate.\n";
        int option = 1;
        for (const auto& cand : target->space.explicit_candidates)
            out << "Option " << option++ << ": "
                << detail::render_config_dict(cand, target->space) << "\n";
    }
    out << "\n";

    if (sample.demo_experiment_ids.empty()) {
        out << "No prior experiments are available for this task.\n";
    } else {
        out << "From previous lower-fidelity experiments, here are related environments and "
            << "Top" << sample.top_k
            << " score configurations which may be helpful for proposing the next promising "
               "configuration.\n";
        for (const auto& demo_id : sample.demo_experiment_ids) {
            const ExperimentTable* demo = bundle.find_experiment(demo_id);
            if (demo == nullptr) throw CurationError("unknown demo experiment: " + demo_id);
            out << "######\n";
            out << "Experiment Environment information: "
                << (demo->redact ? std::string("(environment description withheld)")
                                 : demo->env_text)
                << "\n";
            out << "Top-" << sample.top_k << " configurations:\n";
            int rank = 1;
            for (const auto& [canon, record] : top_k(*demo, sample.top_k))
                out << rank++ << ". "
                    << detail::render_config_dict(record->config, demo->space) << "\n";
        }
        out << "######\n";
    }
    out << "\n## Instructions\n";
    out << "Think step by step, select the most promising configuration, and output ONLY the "
           "final configuration dict between <config> and </config> tags.\n";
    out << "You MUST call the \"exec_config\" tool with the configuration between <config> and "
           "</config> tags to query its score.\n";
    out << "Remember: your remaining budget is " << sample.budget
        << ". Consider previous experimental results and the best configurations from "
           "lower-fidelity experiments when making decisions.\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Trajectory simulation support
// ---------------------------------------------------------------------------

struct ContinuationRequest {
    std::vector<Turn> truncated_turns;
    std::size_t removed_index = 0; // 0-based index of the removed turn
    std::string best_config_text;  // the table's Top-1 configuration
    std::string instructions;
};

// Removes the last or second-to-last turn (seeded 50/50) and packages the
// truncated transcript plus the target best configuration for an external
// agent to continue from.
inline ContinuationRequest truncate_for_continuation(const TrajectoryRecord& traj,
                                                     const ExperimentTable& table,
                                                     std::uint64_t seed) {
    if (traj.turns.size() < 2)
        throw CurationError("too-short-trajectory: need at least 2 turns");
    Rng rng(seed);
    ContinuationRequest request;
    request.removed_index = traj.turns.size() - 1 - rng.below(2);
    for (std::size_t i = 0; i < traj.turns.size(); ++i)
        if (i != request.removed_index) request.truncated_turns.push_back(traj.turns[i]);
    auto best = top_k(table, 1);
    request.best_config_text = detail::render_config_dict(best.front().second->config, table.space);
    request.instructions =
        "Continue the trajectory above toward the best configuration " +
        request.best_config_text +
        ". Output the next configuration between <config> and </config> tags and call "
        "\"exec_config\".";
    return request;
}

// A trajectory is accepted for distillation when some executed turn hits a
// utility-argmax record of the table.
inline bool accept_trajectory(const TrajectoryRecord& traj, const ExperimentTable& table) {
    double best = bounds_from_table(table).best_utility;
    std::set<std::string> argmax_keys;
    for (const auto& [canon, record] : table.records)
        if (utility(record.outcome) == best) argmax_keys.insert(canon);
    for (const auto& turn : traj.turns)
        if (turn.executed() && argmax_keys.count(turn.canonical)) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline ordered_json sample_to_json(const CurationSample& sample, const TaskBundle& bundle) {
    ordered_json doc = ordered_json::object();
    doc["type"] = "sample";
    doc["role"] = sample.role == SampleRole::train ? "train" : "test";
    doc["target_experiment_id"] = sample.target_experiment_id;
    doc["budget"] = sample.budget;
    doc["prompt"] = render_context(sample, bundle);
    doc["demo_provenance"] = {{"experiment_ids", sample.demo_experiment_ids},
                              {"top_k", sample.top_k}};
    return doc;
}

inline ordered_json continuation_request_to_json(const ContinuationRequest& request,
                                                 const std::string& experiment_id) {
    ordered_json doc = ordered_json::object();
    doc["type"] = "continuation_request";
    doc["target_experiment_id"] = experiment_id;
    doc["removed_index"] = request.removed_index;
    doc["best_config"] = request.best_config_text;
    doc["instructions"] = request.instructions;
    doc["truncated_turns"] = ordered_json::array();
    for (const auto& turn : request.truncated_turns) {
        ordered_json tj = ordered_json::object();
        tj["raw"] = turn.raw;
        tj["canonical"] = turn.canonical;
        if (turn.outcome) tj["score"] = turn.outcome->score;
        doc["truncated_turns"].push_back(std::move(tj));
    }
    return doc;
}

} // namespace configym
