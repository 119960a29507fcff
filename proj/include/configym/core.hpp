#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace configym {

enum class Direction { maximize, minimize };

inline std::string to_string(Direction d) {
    return d == Direction::maximize ? "maximize" : "minimize";
}

inline Direction direction_from_string(const std::string& s) {
    if (s == "maximize") return Direction::maximize;
    if (s == "minimize") return Direction::minimize;
    throw std::invalid_argument("unknown direction: " + s);
}

enum class DimensionKind { scalar_choice, per_layer_list };

// One axis of a configuration space. Values are exact string tokens; they
// are never parsed as numbers, so "1e-05" and "0.00001" are distinct.
struct Dimension {
    std::string name;
    DimensionKind kind = DimensionKind::scalar_choice;
    std::vector<std::string> allowed;
    // per_layer_list only: name of the scalar dimension whose chosen token
    // gives the expected list length
    std::string layer_count_source;

    bool allows(const std::string& token) const {
        return std::find(allowed.begin(), allowed.end(), token) != allowed.end();
    }
};

// A configuration value is either a single token or a list of tokens.
using ConfigValue = std::variant<std::string, std::vector<std::string>>;

struct Configuration {
    std::map<std::string, ConfigValue> values;

    bool operator==(const Configuration& other) const = default;
};

enum class CandidateMode { factored_grid, explicit_list };

struct ConfigSpace {
    std::vector<Dimension> dimensions;
    CandidateMode candidate_mode = CandidateMode::factored_grid;
    std::vector<Configuration> explicit_candidates; // explicit_list only

    const Dimension* find(const std::string& name) const {
        for (const auto& d : dimensions)
            if (d.name == name) return &d;
        return nullptr;
    }
};

struct Outcome {
    double score = 0.0;
    Direction direction = Direction::maximize;
    std::map<std::string, std::string> details;
};

// Signed view of a score: higher utility is always better, regardless of
// the task's declared direction. All reward and regret arithmetic consumes
// utilities only.
inline double utility(double score, Direction d) {
    return d == Direction::maximize ? score : -score;
}

inline double utility(const Outcome& o) { return utility(o.score, o.direction); }

enum class FidelityLevel { low, medium, high };

inline std::string to_string(FidelityLevel l) {
    switch (l) {
    case FidelityLevel::low: return "low";
    case FidelityLevel::medium: return "medium";
    default: return "high";
    }
}

inline FidelityLevel level_from_string(const std::string& s) {
    if (s == "low") return FidelityLevel::low;
    if (s == "medium") return FidelityLevel::medium;
    if (s == "high") return FidelityLevel::high;
    throw std::invalid_argument("unknown fidelity level: " + s);
}

struct FidelityTag {
    std::map<std::string, double> metadata; // e.g. tokens=2e9, params=268304384
    std::optional<FidelityLevel> level;
};

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

// Deterministic text form: keys sorted, scalar tokens verbatim, lists as
// [t1,t2,...] with no spaces, entries joined by ';'. Dimensions not present
// in the space are dropped. Total function: invalid configs serialize too.
inline std::string canonicalize(const Configuration& config, const ConfigSpace& space) {
    std::string out;
    for (const auto& [name, value] : config.values) { // std::map iterates sorted
        if (space.find(name) == nullptr) continue;
        if (!out.empty()) out += ';';
        out += name;
        out += '=';
        if (std::holds_alternative<std::string>(value)) {
            out += std::get<std::string>(value);
        } else {
            out += '[';
            const auto& list = std::get<std::vector<std::string>>(value);
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (i) out += ',';
                out += list[i];
            }
            out += ']';
        }
    }
    return out;
}

// Inverse of canonicalize on well-formed canonical text.
inline Configuration parse_canonical(const std::string& text) {
    Configuration config;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eq = text.find('=', pos);
        if (eq == std::string::npos) break;
        std::string name = text.substr(pos, eq - pos);
        std::size_t value_start = eq + 1;
        if (value_start < text.size() && text[value_start] == '[') {
            std::size_t close = text.find(']', value_start);
            if (close == std::string::npos) close = text.size() - 1;
            std::vector<std::string> list;
            std::size_t p = value_start + 1;
            while (p <= close) {
                std::size_t comma = text.find(',', p);
                if (comma == std::string::npos || comma > close) comma = close;
                if (comma > p) list.push_back(text.substr(p, comma - p));
                p = comma + 1;
            }
            config.values[name] = list;
            pos = close + 1;
            if (pos < text.size() && text[pos] == ';') ++pos;
        } else {
            std::size_t semi = text.find(';', value_start);
            if (semi == std::string::npos) semi = text.size();
            config.values[name] = text.substr(value_start, semi - value_start);
            pos = semi + 1;
        }
    }
    return config;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct DimensionDiagnostic {
    std::string dimension;
    std::string problem; // "missing", "token-not-allowed", "length-mismatch",
                         // "extraneous", "kind-mismatch", "not-a-candidate"
};

struct ValidityReport {
    bool valid = true;
    std::vector<DimensionDiagnostic> diagnostics;

    void flag(std::string dim, std::string problem) {
        valid = false;
        diagnostics.push_back({std::move(dim), std::move(problem)});
    }
};

inline ValidityReport validate(const Configuration& config, const ConfigSpace& space) {
    ValidityReport report;
    for (const auto& [name, value] : config.values) {
        if (space.find(name) == nullptr) report.flag(name, "extraneous");
    }
    for (const auto& dim : space.dimensions) {
        auto it = config.values.find(dim.name);
        if (it == config.values.end()) {
            report.flag(dim.name, "missing");
            continue;
        }
        if (dim.kind == DimensionKind::scalar_choice) {
            if (!std::holds_alternative<std::string>(it->second)) {
                report.flag(dim.name, "kind-mismatch");
                continue;
            }
            if (!dim.allows(std::get<std::string>(it->second)))
                report.flag(dim.name, "token-not-allowed");
        } else {
            if (!std::holds_alternative<std::vector<std::string>>(it->second)) {
                report.flag(dim.name, "kind-mismatch");
                continue;
            }
            const auto& list = std::get<std::vector<std::string>>(it->second);
            for (const auto& token : list) {
                if (!dim.allows(token)) {
                    report.flag(dim.name, "token-not-allowed");
                    break;
                }
            }
            if (!dim.layer_count_source.empty()) {
                auto src = config.values.find(dim.layer_count_source);
                if (src != config.values.end() &&
                    std::holds_alternative<std::string>(src->second)) {
                    char* end = nullptr;
                    const std::string& tok = std::get<std::string>(src->second);
                    long n = std::strtol(tok.c_str(), &end, 10);
                    if (end && *end == '\0' && n > 0 &&
                        static_cast<std::size_t>(n) != list.size())
                        report.flag(dim.name, "length-mismatch");
                }
            }
        }
    }
    if (space.candidate_mode == CandidateMode::explicit_list && report.valid) {
        std::string canon = canonicalize(config, space);
        bool member = false;
        for (const auto& cand : space.explicit_candidates) {
            if (canonicalize(cand, space) == canon) {
                member = true;
                break;
            }
        }
        if (!member) report.flag("", "not-a-candidate");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Best-effort parsing of agent-proposed configuration text
// ---------------------------------------------------------------------------

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& p) {
    while (p < s.size() && (s[p] == ' ' || s[p] == '\t' || s[p] == '\n' || s[p] == '\r')) ++p;
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string strip_quotes(std::string tok) {
    if (tok.size() >= 2 && (tok.front() == '\'' || tok.front() == '"') && tok.back() == tok.front())
        return tok.substr(1, tok.size() - 2);
    return tok;
}

// A raw value token: everything up to the next ',', '}' or ']' at depth 0.
inline std::string read_token(const std::string& s, std::size_t& p) {
    skip_ws(s, p);
    std::size_t start = p;
    while (p < s.size() && s[p] != ',' && s[p] != '}' && s[p] != ']') ++p;
    return strip_quotes(trim(s.substr(start, p - start)));
}

} // namespace detail

// Token-preserving parser for the dict / array shapes agents emit:
// {'lr': 1e-06, 'mb': 32} or {"k": [1,2,3]} or a bare array of scalars.
// Never converts tokens to numbers. A bare array is zipped positionally
// onto the space's dimension order (Task-4-style mixture proposals).
// Canonical text (k=v;k2=[...]) is also accepted. Returns nullopt when the
// text has no recognizable structure.
inline std::optional<Configuration> parse_config_text(const std::string& raw,
                                                      const ConfigSpace& space) {
    std::string text = detail::trim(raw);
    if (text.empty()) return std::nullopt;

    // canonical form
    if (text.find('=') != std::string::npos && text.front() != '{' && text.front() != '[') {
        Configuration c = parse_canonical(text);
        if (!c.values.empty()) return c;
        return std::nullopt;
    }

    std::size_t p = 0;
    detail::skip_ws(text, p);
    if (p < text.size() && text[p] == '{') {
        ++p;
        Configuration config;
        while (p < text.size()) {
            detail::skip_ws(text, p);
            if (p >= text.size() || text[p] == '}') break;
            std::size_t colon = text.find(':', p);
            if (colon == std::string::npos) break;
            std::string key = detail::strip_quotes(detail::trim(text.substr(p, colon - p)));
            p = colon + 1;
            detail::skip_ws(text, p);
            if (p < text.size() && text[p] == '[') {
                ++p;
                std::vector<std::string> list;
                while (p < text.size() && text[p] != ']') {
                    std::string tok = detail::read_token(text, p);
                    if (!tok.empty()) list.push_back(tok);
                    if (p < text.size() && text[p] == ',') ++p;
                }
                if (p < text.size()) ++p; // ']'
                config.values[key] = list;
            } else {
                config.values[key] = detail::read_token(text, p);
            }
            detail::skip_ws(text, p);
            if (p < text.size() && text[p] == ',') ++p;
        }
        if (config.values.empty()) return std::nullopt;
        return config;
    }
    if (p < text.size() && text[p] == '[') {
        ++p;
        std::vector<std::string> tokens;
        while (p < text.size() && text[p] != ']') {
            std::string tok = detail::read_token(text, p);
            if (!tok.empty()) tokens.push_back(tok);
            if (p < text.size() && text[p] == ',') ++p;
        }
        if (tokens.empty()) return std::nullopt;
        // positional zip requires an all-scalar space of matching size
        if (tokens.size() != space.dimensions.size()) return std::nullopt;
        Configuration config;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (space.dimensions[i].kind != DimensionKind::scalar_choice) return std::nullopt;
            config.values[space.dimensions[i].name] = tokens[i];
        }
        return config;
    }
    return std::nullopt;
}

} // namespace configym
