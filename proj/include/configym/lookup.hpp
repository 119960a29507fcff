#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "configym/core.hpp"

namespace configym {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct BundleError : std::runtime_error {
    std::string kind; // "malformed-document", "schema-violation", "record-outside-space"
    std::string path;
    BundleError(std::string kind_, std::string path_, const std::string& what_)
        : std::runtime_error(kind_ + " at " + path_ + ": " + what_),
          kind(std::move(kind_)), path(std::move(path_)) {}
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentTable {
    std::string experiment_id;
    FidelityTag fidelity;
    std::string env_text;
    bool redact = false; // when set, env_text is withheld from rendered prompts
    ConfigSpace space;

    struct Record {
        Configuration config;
        Outcome outcome;
    };
    // keyed by canonical text; std::map keeps canonical (lexicographic) order
    std::map<std::string, Record> records;
};

struct MetricBounds {
    double best = 0.0;  // raw score of the best outcome
    double worst = 0.0; // raw score of the worst outcome
};

struct TaskBundle {
    std::string task_id;
    std::string task_text;
    Direction direction = Direction::maximize;
    std::vector<ExperimentTable> experiments;
    std::vector<std::string> fidelity_key;
    std::optional<MetricBounds> bounds;
    int top_k = 3; // demo depth used by curation, per-task default

    const ExperimentTable* find_experiment(const std::string& id) const {
        for (const auto& e : experiments)
            if (e.experiment_id == id) return &e;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Bundle (de)serialization
// ---------------------------------------------------------------------------

namespace detail {

inline ConfigValue value_from_json(const json& v) {
    if (v.is_array()) {
        std::vector<std::string> list;
        for (const auto& t : v) list.push_back(t.get<std::string>());
        return list;
    }
    return v.get<std::string>();
}

inline json value_to_json(const ConfigValue& v) {
    if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
    return std::get<std::vector<std::string>>(v);
}

inline Configuration config_from_json(const json& obj) {
    Configuration c;
    for (auto it = obj.begin(); it != obj.end(); ++it)
        c.values[it.key()] = value_from_json(it.value());
    return c;
}

inline ordered_json config_to_json(const Configuration& c) {
    ordered_json obj = ordered_json::object();
    for (const auto& [k, v] : c.values) obj[k] = value_to_json(v);
    return obj;
}

inline ConfigSpace space_from_json(const json& obj, const std::string& path) {
    ConfigSpace space;
    const std::string mode = obj.at("candidate_mode").get<std::string>();
    if (mode == "factored-grid") space.candidate_mode = CandidateMode::factored_grid;
    else if (mode == "explicit-list") space.candidate_mode = CandidateMode::explicit_list;
    else throw BundleError("schema-violation", path + "/candidate_mode", mode);
    for (const auto& d : obj.at("dimensions")) {
        Dimension dim;
        dim.name = d.at("name").get<std::string>();
        const std::string kind = d.at("kind").get<std::string>();
        if (kind == "scalar-choice") dim.kind = DimensionKind::scalar_choice;
        else if (kind == "per-layer-list") dim.kind = DimensionKind::per_layer_list;
        else throw BundleError("schema-violation", path + "/dimensions/" + dim.name, kind);
        for (const auto& t : d.at("allowed")) dim.allowed.push_back(t.get<std::string>());
        if (dim.allowed.empty())
            throw BundleError("schema-violation", path + "/dimensions/" + dim.name,
                              "empty allowed set");
        if (d.contains("layer_count_source"))
            dim.layer_count_source = d.at("layer_count_source").get<std::string>();
        space.dimensions.push_back(std::move(dim));
    }
    if (obj.contains("explicit_candidates"))
        for (const auto& c : obj.at("explicit_candidates"))
            space.explicit_candidates.push_back(config_from_json(c));
    if (space.candidate_mode == CandidateMode::explicit_list &&
        space.explicit_candidates.empty())
        throw BundleError("schema-violation", path, "explicit-list mode without candidates");
    // dimension-level invariants
    for (const auto& dim : space.dimensions) {
        for (std::size_t i = 0; i < dim.allowed.size(); ++i)
            for (std::size_t j = i + 1; j < dim.allowed.size(); ++j)
                if (dim.allowed[i] == dim.allowed[j])
                    throw BundleError("schema-violation", path + "/dimensions/" + dim.name,
                                      "duplicate token " + dim.allowed[i]);
        if (dim.kind == DimensionKind::per_layer_list && !dim.layer_count_source.empty()) {
            const Dimension* src = space.find(dim.layer_count_source);
            if (src == nullptr || src->kind != DimensionKind::scalar_choice)
                throw BundleError("schema-violation", path + "/dimensions/" + dim.name,
                                  "layer_count_source is not a scalar dimension");
        }
    }
    return space;
}

inline ordered_json space_to_json(const ConfigSpace& space) {
    ordered_json obj = ordered_json::object();
    obj["candidate_mode"] =
        space.candidate_mode == CandidateMode::factored_grid ? "factored-grid" : "explicit-list";
    obj["dimensions"] = ordered_json::array();
    for (const auto& d : space.dimensions) {
        ordered_json dj = ordered_json::object();
        dj["name"] = d.name;
        dj["kind"] = d.kind == DimensionKind::scalar_choice ? "scalar-choice" : "per-layer-list";
        dj["allowed"] = d.allowed;
        if (!d.layer_count_source.empty()) dj["layer_count_source"] = d.layer_count_source;
        obj["dimensions"].push_back(std::move(dj));
    }
    if (!space.explicit_candidates.empty()) {
        obj["explicit_candidates"] = ordered_json::array();
        for (const auto& c : space.explicit_candidates)
            obj["explicit_candidates"].push_back(config_to_json(c));
    }
    return obj;
}

} // namespace detail

inline TaskBundle bundle_from_json(const json& doc) {
    TaskBundle bundle;
    try {
        bundle.task_id = doc.at("task_id").get<std::string>();
        bundle.direction = direction_from_string(doc.at("direction").get<std::string>());
        bundle.task_text = doc.at("task_text").get<std::string>();
        for (const auto& k : doc.at("fidelity_key"))
            bundle.fidelity_key.push_back(k.get<std::string>());
        if (doc.contains("bounds") && !doc.at("bounds").is_null())
            bundle.bounds = MetricBounds{doc.at("bounds").at("best").get<double>(),
                                         doc.at("bounds").at("worst").get<double>()};
        if (doc.contains("top_k")) bundle.top_k = doc.at("top_k").get<int>();
    } catch (const json::exception& e) {
        throw BundleError("schema-violation", "/", e.what());
    }

    if (!doc.contains("experiments"))
        throw BundleError("schema-violation", "/experiments", "missing");
    for (const auto& ej : doc.at("experiments")) {
        ExperimentTable table;
        std::string path;
        try {
            table.experiment_id = ej.at("experiment_id").get<std::string>();
            path = "/experiments/" + table.experiment_id;
            const auto& fj = ej.at("fidelity");
            for (auto it = fj.at("metadata").begin(); it != fj.at("metadata").end(); ++it)
                table.fidelity.metadata[it.key()] = it.value().get<double>();
            if (fj.contains("level") && !fj.at("level").is_null())
                table.fidelity.level = level_from_string(fj.at("level").get<std::string>());
            table.env_text = ej.at("env_text").get<std::string>();
            if (ej.contains("redact")) table.redact = ej.at("redact").get<bool>();
            table.space = detail::space_from_json(ej.at("space"), path + "/space");
        } catch (const json::exception& e) {
            throw BundleError("schema-violation", path.empty() ? "/experiments" : path, e.what());
        }

        if (!ej.contains("records") || ej.at("records").empty())
            throw BundleError("schema-violation", path + "/records", "records must be non-empty");
        for (const auto& rj : ej.at("records")) {
            ExperimentTable::Record record;
            try {
                record.config = detail::config_from_json(rj.at("config"));
                record.outcome.score = rj.at("score").get<double>();
                record.outcome.direction = bundle.direction;
                if (rj.contains("details"))
                    for (auto it = rj.at("details").begin(); it != rj.at("details").end(); ++it)
                        record.outcome.details[it.key()] = it.value().get<std::string>();
            } catch (const json::exception& e) {
                throw BundleError("schema-violation", path + "/records", e.what());
            }
            if (!std::isfinite(record.outcome.score))
                throw BundleError("schema-violation", path + "/records", "non-finite score");
            std::string canon = canonicalize(record.config, table.space);
            if (!validate(record.config, table.space).valid)
                throw BundleError("record-outside-space", path + "/records", canon);
            table.records[canon] = std::move(record);
        }
        for (const auto& k : bundle.fidelity_key)
            if (!table.fidelity.metadata.count(k))
                throw BundleError("schema-violation", path + "/fidelity",
                                  "missing fidelity_key metadata: " + k);
        for (const auto& other : bundle.experiments)
            if (other.experiment_id == table.experiment_id)
                throw BundleError("schema-violation", path, "duplicate experiment_id");
        bundle.experiments.push_back(std::move(table));
    }
    return bundle;
}

inline TaskBundle load_bundle(std::istream& in) {
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw BundleError("malformed-document", "/", "not a valid JSON document");
    return bundle_from_json(doc);
}

inline ordered_json bundle_to_json(const TaskBundle& bundle) {
    ordered_json doc = ordered_json::object();
    doc["task_id"] = bundle.task_id;
    doc["direction"] = to_string(bundle.direction);
    doc["task_text"] = bundle.task_text;
    doc["fidelity_key"] = bundle.fidelity_key;
    if (bundle.bounds)
        doc["bounds"] = {{"best", bundle.bounds->best}, {"worst", bundle.bounds->worst}};
    doc["top_k"] = bundle.top_k;
    doc["experiments"] = ordered_json::array();
    for (const auto& table : bundle.experiments) {
        ordered_json ej = ordered_json::object();
        ej["experiment_id"] = table.experiment_id;
        ordered_json meta = ordered_json::object();
        for (const auto& [k, v] : table.fidelity.metadata) meta[k] = v;
        ej["fidelity"] = {{"metadata", meta}};
        if (table.fidelity.level) ej["fidelity"]["level"] = to_string(*table.fidelity.level);
        ej["env_text"] = table.env_text;
        if (table.redact) ej["redact"] = true;
        ej["space"] = detail::space_to_json(table.space);
        ej["records"] = ordered_json::array();
        for (const auto& [canon, record] : table.records) {
            ordered_json rj = ordered_json::object();
            rj["config"] = detail::config_to_json(record.config);
            rj["score"] = record.outcome.score;
            if (!record.outcome.details.empty()) {
                ordered_json dj = ordered_json::object();
                for (const auto& [k, v] : record.outcome.details) dj[k] = v;
                rj["details"] = std::move(dj);
            }
            ej["records"].push_back(std::move(rj));
        }
        doc["experiments"].push_back(std::move(ej));
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

// Exact lookup; precondition: validate(config, table.space).valid
inline const Outcome& query(const ExperimentTable& table, const Configuration& config) {
    std::string canon = canonicalize(config, table.space);
    auto it = table.records.find(canon);
    if (it == table.records.end())
        throw NotFoundError("no record for configuration " + canon);
    return it->second.outcome;
}

// Classic O(|a|*|b|) dynamic program, rolling row.
inline std::size_t longest_common_substring_len(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    std::size_t best = 0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
            if (cur[j] > best) best = cur[j];
        }
        std::swap(prev, cur);
    }
    return best;
}

struct MatchResult {
    std::string canonical;
    const ExperimentTable::Record* record = nullptr;
    bool matched = false; // true when the proposal was redirected
    std::size_t lcs_len = 0;
};

namespace detail {

// Shared-token count between two canonical texts, used as a cheap prefilter
// before exact LCS on very large tables.
inline std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : s) {
        if (c == ';' || c == ',' || c == '=' || c == '[' || c == ']') {
            if (!cur.empty()) tokens.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    std::sort(tokens.begin(), tokens.end());
    return tokens;
}

inline std::size_t shared_token_count(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b) {
    std::size_t i = 0, j = 0, shared = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) { ++shared; ++i; ++j; }
        else if (a[i] < b[j]) ++i;
        else ++j;
    }
    return shared;
}

} // namespace detail

// Tables above this size go through the token prefilter before exact LCS.
inline constexpr std::size_t kLcsPrefilterThreshold = 20000;
inline constexpr std::size_t kLcsPrefilterKeep = 256;

// If raw parses and validates, exact query (matched=false). Otherwise the
// record whose canonical text has the longest common substring with the
// proposal text wins; ties break to the lexicographically smallest key.
inline MatchResult match_most_similar(const ExperimentTable& table, const std::string& raw) {
    auto parsed = parse_config_text(raw, table.space);
    if (parsed) {
        std::string canon = canonicalize(*parsed, table.space);
        auto it = table.records.find(canon);
        if (it != table.records.end() && validate(*parsed, table.space).valid)
            return {canon, &it->second, false, 0};
    }
    // query text for similarity: canonical form of the best-effort parse,
    // else the raw text itself
    std::string probe = parsed ? canonicalize(*parsed, table.space) : raw;
    if (probe.empty()) probe = raw;

    std::vector<const std::string*> candidates;
    if (table.records.size() > kLcsPrefilterThreshold) {
        auto probe_tokens = detail::split_tokens(probe);
        std::vector<std::pair<std::size_t, const std::string*>> scored;
        scored.reserve(table.records.size());
        for (const auto& [canon, record] : table.records)
            scored.emplace_back(detail::shared_token_count(probe_tokens,
                                                           detail::split_tokens(canon)),
                                &canon);
        // top-N by shared tokens, canonical order within ties (records map is
        // already sorted, so stable_sort preserves it)
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        if (scored.size() > kLcsPrefilterKeep) scored.resize(kLcsPrefilterKeep);
        for (const auto& [count, key] : scored) candidates.push_back(key);
        std::sort(candidates.begin(), candidates.end(),
                  [](const std::string* x, const std::string* y) { return *x < *y; });
    } else {
        for (const auto& [canon, record] : table.records) candidates.push_back(&canon);
    }

    MatchResult best;
    for (const std::string* canon : candidates) {
        std::size_t len = longest_common_substring_len(probe, *canon);
        // candidates iterate in canonical order, so strict '>' gives the
        // lexicographically smallest key on ties
        if (best.record == nullptr || len > best.lcs_len) {
            best.canonical = *canon;
            best.record = &table.records.at(*canon);
            best.lcs_len = len;
        }
    }
    best.matched = true;
    return best;
}

} // namespace configym
