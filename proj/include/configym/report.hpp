#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "configym/episode.hpp"

namespace configym {

struct ReportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Summary statistics parsed back out of one persisted episode log.
struct EpisodeSummary {
    std::string episode_id;
    std::string policy;
    std::string task_id;
    std::string experiment_id;
    int budget = 0;
    bool matching = true;
    std::string reward_mode;
    TaskBounds bounds;
    double reward = -1.0;
    double regret = 1.0;
    double execution_rate = 0.0;
    double unique_config_rate = 0.0;
    double matched_fraction = 0.0;
    int turns = 0;
};

inline EpisodeSummary parse_episode_log(const std::string& text) {
    EpisodeSummary summary;
    bool saw_header = false, saw_footer = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw ReportError(std::string("malformed log line: ") + e.what());
        }
        const std::string type = doc.at("type").get<std::string>();
        if (type == "episode") {
            saw_header = true;
            summary.episode_id = doc.at("episode_id").get<std::string>();
            if (doc.contains("policy")) summary.policy = doc.at("policy").get<std::string>();
            summary.task_id = doc.at("task").get<std::string>();
            summary.experiment_id = doc.at("experiment").get<std::string>();
            summary.budget = doc.at("budget").get<int>();
            summary.matching = doc.at("matching").get<bool>();
            summary.reward_mode = doc.at("reward_mode").get<std::string>();
            summary.bounds.best_utility = doc.at("bounds").at("best_utility").get<double>();
            summary.bounds.worst_utility = doc.at("bounds").at("worst_utility").get<double>();
        } else if (type == "turn") {
            ++summary.turns;
        } else if (type == "final") {
            saw_footer = true;
            summary.reward = doc.at("reward").get<double>();
            summary.regret = doc.at("regret").get<double>();
            summary.execution_rate = doc.at("execution_rate").get<double>();
            summary.unique_config_rate = doc.at("unique_config_rate").get<double>();
            summary.matched_fraction = doc.at("matched_fraction").get<double>();
        }
    }
    if (!saw_header) throw ReportError("log missing episode header");
    if (!saw_footer) throw ReportError("log missing final summary");
    return summary;
}

// One row per (method, task, budget).
struct GroupReport {
    std::string policy;
    std::string task_id;
    int budget = 0;
    int episodes = 0;
    double mean_reward = 0.0;
    double mean_regret = 0.0;
    double std_regret = 0.0;
    double mean_execution_rate = 0.0;
    double mean_unique_config_rate = 0.0;
    double mean_matched_fraction = 0.0;
};

struct AggregateReport {
    std::vector<GroupReport> groups; // sorted by (policy, task, budget)
    int episodes = 0;
};

// Groups episodes by (method, task, budget). Input order never matters:
// episodes are re-sorted by id before accumulation, so any permutation of
// the same logs produces an identical report. Two logs for the same
// experiment of one task that disagree on the score bounds cannot be
// averaged meaningfully and are rejected.
inline AggregateReport aggregate_report(std::vector<EpisodeSummary> episodes) {
    std::sort(episodes.begin(), episodes.end(),
              [](const EpisodeSummary& a, const EpisodeSummary& b) {
                  return std::tie(a.policy, a.task_id, a.budget, a.episode_id) <
                         std::tie(b.policy, b.task_id, b.budget, b.episode_id);
              });
    std::map<std::pair<std::string, std::string>, TaskBounds> bounds_seen;
    for (const auto& ep : episodes) {
        auto key = std::make_pair(ep.task_id, ep.experiment_id);
        auto [it, inserted] = bounds_seen.try_emplace(key, ep.bounds);
        if (!inserted && (it->second.best_utility != ep.bounds.best_utility ||
                          it->second.worst_utility != ep.bounds.worst_utility))
            throw ReportError("inconsistent bounds across logs for experiment " +
                              ep.experiment_id + " of task " + ep.task_id);
    }

    std::map<std::tuple<std::string, std::string, int>, std::vector<const EpisodeSummary*>>
        grouped;
    for (const auto& ep : episodes)
        grouped[{ep.policy, ep.task_id, ep.budget}].push_back(&ep);

    AggregateReport report;
    report.episodes = static_cast<int>(episodes.size());
    for (const auto& [key, members] : grouped) {
        GroupReport g;
        g.policy = std::get<0>(key);
        g.task_id = std::get<1>(key);
        g.budget = std::get<2>(key);
        g.episodes = static_cast<int>(members.size());
        for (const EpisodeSummary* ep : members) {
            g.mean_reward += ep->reward;
            g.mean_regret += ep->regret;
            g.mean_execution_rate += ep->execution_rate;
            g.mean_unique_config_rate += ep->unique_config_rate;
            g.mean_matched_fraction += ep->matched_fraction;
        }
        double n = static_cast<double>(g.episodes);
        g.mean_reward /= n;
        g.mean_regret /= n;
        g.mean_execution_rate /= n;
        g.mean_unique_config_rate /= n;
        g.mean_matched_fraction /= n;
        double var = 0.0;
        for (const EpisodeSummary* ep : members)
            var += (ep->regret - g.mean_regret) * (ep->regret - g.mean_regret);
        g.std_regret = std::sqrt(var / n);
        report.groups.push_back(std::move(g));
    }
    return report;
}

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace detail

inline std::string report_csv(const AggregateReport& report) {
    std::string csv = "policy,task,budget,episodes,mean_reward,mean_regret,std_regret,"
                      "mean_execution_rate,mean_unique_config_rate,mean_matched_fraction\n";
    for (const auto& g : report.groups) {
        csv += g.policy + "," + g.task_id + "," + std::to_string(g.budget) + "," +
               std::to_string(g.episodes) + "," + detail::fixed6(g.mean_reward) + "," +
               detail::fixed6(g.mean_regret) + "," + detail::fixed6(g.std_regret) + "," +
               detail::fixed6(g.mean_execution_rate) + "," +
               detail::fixed6(g.mean_unique_config_rate) + "," +
               detail::fixed6(g.mean_matched_fraction) + "\n";
    }
    return csv;
}

inline std::string report_table(const AggregateReport& report) {
    std::vector<std::array<std::string, 8>> rows;
    rows.push_back({"policy", "task", "budget", "episodes", "reward", "regret", "regret_std",
                    "exec/unique"});
    for (const auto& g : report.groups)
        rows.push_back({g.policy, g.task_id, std::to_string(g.budget),
                        std::to_string(g.episodes), detail::fixed6(g.mean_reward),
                        detail::fixed6(g.mean_regret), detail::fixed6(g.std_regret),
                        detail::fixed6(g.mean_execution_rate) + "/" +
                            detail::fixed6(g.mean_unique_config_rate)});
    std::array<std::size_t, 8> width{};
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out += std::string(width[c] - row[c].size() + 2, ' ');
        }
        out += "\n";
    }
    out += "total episodes: " + std::to_string(report.episodes) + "\n";
    return out;
}

inline ordered_json report_json(const AggregateReport& report) {
    ordered_json doc = ordered_json::object();
    doc["episodes"] = report.episodes;
    ordered_json groups = ordered_json::array();
    for (const auto& g : report.groups) {
        ordered_json row = ordered_json::object();
        row["policy"] = g.policy;
        row["task"] = g.task_id;
        row["budget"] = g.budget;
        row["episodes"] = g.episodes;
        row["mean_reward"] = g.mean_reward;
        row["mean_regret"] = g.mean_regret;
        row["std_regret"] = g.std_regret;
        row["mean_execution_rate"] = g.mean_execution_rate;
        row["mean_unique_config_rate"] = g.mean_unique_config_rate;
        row["mean_matched_fraction"] = g.mean_matched_fraction;
        groups.push_back(std::move(row));
    }
    doc["groups"] = std::move(groups);
    return doc;
}

// Minimal SVG regret-vs-budget chart, one polyline per (policy, task).
inline std::string report_plot_svg(const AggregateReport& report) {
    const double w = 640, h = 400, margin = 50;
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, double>>> series;
    int min_b = std::numeric_limits<int>::max(), max_b = 1;
    for (const auto& g : report.groups) {
        series[{g.policy, g.task_id}].push_back({g.budget, g.mean_regret});
        min_b = std::min(min_b, g.budget);
        max_b = std::max(max_b, g.budget);
    }
    if (series.empty()) min_b = max_b = 1;
    auto x_of = [&](int b) {
        if (max_b == min_b) return w / 2.0;
        return margin + (w - 2 * margin) * (b - min_b) / static_cast<double>(max_b - min_b);
    };
    auto y_of = [&](double regret) { return h - margin - (h - 2 * margin) * regret; };
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(static_cast<int>(w)) + "\" height=\"" +
                      std::to_string(static_cast<int>(h)) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const std::array<std::string, 6> colors = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                               "#d62728", "#9467bd", "#8c564b"};
    std::size_t index = 0;
    for (const auto& [key, points] : series) {
        std::string path;
        for (const auto& [b, regret] : points) {
            path += path.empty() ? "M" : " L";
            path += detail::fixed6(x_of(b)) + "," + detail::fixed6(y_of(regret));
        }
        const std::string& color = colors[index % colors.size()];
        svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\"/>\n";
        svg += "<text x=\"" + detail::fixed6(margin) + "\" y=\"" +
               detail::fixed6(margin / 2.0 + 12.0 * static_cast<double>(index)) +
               "\" fill=\"" + color + "\" font-size=\"10\">" + key.first + " / " +
               key.second + "</text>\n";
        ++index;
    }
    svg += "<text x=\"" + detail::fixed6(w / 2.0) + "\" y=\"" + detail::fixed6(h - 10.0) +
           "\" font-size=\"12\" text-anchor=\"middle\">budget</text>\n";
    svg += "<text x=\"15\" y=\"" + detail::fixed6(h / 2.0) +
           "\" font-size=\"12\" transform=\"rotate(-90 15 " + detail::fixed6(h / 2.0) +
           ")\" text-anchor=\"middle\">mean regret</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace configym
