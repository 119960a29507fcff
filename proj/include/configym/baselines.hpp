#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "configym/curation.hpp"
#include "configym/episode.hpp"
#include "configym/rng.hpp"

namespace configym {

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Built-in policies propose canonical-text configurations. They only ever
// emit valid, distinct records, so their execution and unique-config rates
// are 1.0 by construction.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string propose(const EpisodeState& state) = 0;
};

namespace detail {

inline std::set<std::string> proposed_keys(const EpisodeState& state) {
    std::set<std::string> keys;
    for (const auto& turn : state.history)
        if (!turn.canonical.empty()) keys.insert(turn.canonical);
    return keys;
}

} // namespace detail

// Uniform sampling without replacement over the recorded configurations.
class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}

    std::string propose(const EpisodeState& state) override {
        auto seen = detail::proposed_keys(state);
        std::vector<const std::string*> pool;
        for (const auto& [canon, record] : state.table->records)
            if (!seen.count(canon)) pool.push_back(&canon);
        if (pool.empty()) throw PolicyError("space-exhausted");
        return *pool[rng_.below(pool.size())];
    }

private:
    Rng rng_;
};

// Replays demo configurations best-first. Utilities are z-scored per demo
// table before merging since raw scores are not comparable across
// environments. Demos that are invalid or unrecorded in the target space
// are skipped; when none remain the policy falls back to random sampling.
class TopKWarmStartPolicy : public Policy {
public:
    TopKWarmStartPolicy(const std::vector<const ExperimentTable*>& demos, std::uint64_t seed)
        : fallback_(seed) {
        struct Ranked { double z; std::string canonical_in_demo; Configuration config; };
        std::vector<Ranked> merged;
        for (const ExperimentTable* demo : demos) {
            double mean = 0.0, var = 0.0;
            std::size_t n = demo->records.size();
            for (const auto& [canon, record] : demo->records) mean += utility(record.outcome);
            mean /= static_cast<double>(n);
            for (const auto& [canon, record] : demo->records) {
                double d = utility(record.outcome) - mean;
                var += d * d;
            }
            double std_dev = std::sqrt(var / static_cast<double>(n));
            for (const auto& [canon, record] : demo->records) {
                double z = std_dev > 0.0 ? (utility(record.outcome) - mean) / std_dev : 0.0;
                merged.push_back({z, canon, record.config});
            }
        }
        std::sort(merged.begin(), merged.end(), [](const Ranked& a, const Ranked& b) {
            if (a.z != b.z) return a.z > b.z;
            return a.canonical_in_demo < b.canonical_in_demo;
        });
        std::set<std::string> seen;
        for (auto& r : merged)
            if (seen.insert(r.canonical_in_demo).second)
                ranked_demos_.push_back(std::move(r.config));
    }

    std::string propose(const EpisodeState& state) override {
        auto seen = detail::proposed_keys(state);
        for (; cursor_ < ranked_demos_.size(); ++cursor_) {
            const Configuration& config = ranked_demos_[cursor_];
            if (!validate(config, state.table->space).valid) continue;
            std::string canon = canonicalize(config, state.table->space);
            if (!state.table->records.count(canon) || seen.count(canon)) continue;
            ++cursor_;
            return canon;
        }
        used_fallback_ = true;
        return fallback_.propose(state);
    }

    bool used_fallback() const { return used_fallback_; }
    std::size_t usable_demo_count(const ExperimentTable& target) const {
        std::size_t n = 0;
        for (const auto& config : ranked_demos_)
            if (validate(config, target.space).valid &&
                target.records.count(canonicalize(config, target.space)))
                ++n;
        return n;
    }

private:
    std::vector<Configuration> ranked_demos_;
    std::size_t cursor_ = 0;
    RandomPolicy fallback_;
    bool used_fallback_ = false;
};

// Enumerates records in canonical order; attains regret 0 at T = |records|.
class ExhaustivePolicy : public Policy {
public:
    std::string propose(const EpisodeState& state) override {
        auto seen = detail::proposed_keys(state);
        for (const auto& [canon, record] : state.table->records)
            if (!seen.count(canon)) return canon;
        throw PolicyError("space-exhausted");
    }
};

// Hill climber over recorded neighbors of the best configuration found so
// far (neighbor = one dimension differs); random restart when stuck.
class GreedyLocalPolicy : public Policy {
public:
    explicit GreedyLocalPolicy(std::uint64_t seed) : fallback_(seed) {}

    std::string propose(const EpisodeState& state) override {
        const Turn* best = nullptr;
        for (const auto& turn : state.history)
            if (turn.executed() &&
                (best == nullptr || utility(*turn.outcome) > utility(*best->outcome)))
                best = &turn;
        if (best != nullptr) {
            auto seen = detail::proposed_keys(state);
            const auto base_it = state.table->records.find(best->canonical);
            if (base_it != state.table->records.end()) {
                for (const auto& [canon, record] : state.table->records) {
                    if (seen.count(canon)) continue;
                    if (differing_dimensions(base_it->second.config, record.config) == 1)
                        return canon;
                }
            }
        }
        return fallback_.propose(state);
    }

private:
    static std::size_t differing_dimensions(const Configuration& a, const Configuration& b) {
        std::size_t diff = 0;
        for (const auto& [name, value] : a.values) {
            auto it = b.values.find(name);
            if (it == b.values.end() || it->second != value) ++diff;
        }
        for (const auto& [name, value] : b.values)
            if (!a.values.count(name)) ++diff;
        return diff;
    }

    RandomPolicy fallback_;
};

struct PolicySpec {
    std::string name; // random | topk_warmstart | exhaustive | greedy_local
    std::uint64_t seed = 0;
};

inline std::unique_ptr<Policy> make_policy(const PolicySpec& spec,
                                           const std::vector<const ExperimentTable*>& demos) {
    if (spec.name == "random") return std::make_unique<RandomPolicy>(spec.seed);
    if (spec.name == "topk_warmstart")
        return std::make_unique<TopKWarmStartPolicy>(demos, spec.seed);
    if (spec.name == "exhaustive") return std::make_unique<ExhaustivePolicy>();
    if (spec.name == "greedy_local") return std::make_unique<GreedyLocalPolicy>(spec.seed);
    throw PolicyError("unknown policy: " + spec.name);
}

} // namespace configym
