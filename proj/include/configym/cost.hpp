#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "configym/lookup.hpp"

namespace configym {

using Rational = boost::multiprecision::cpp_rational;

struct CostError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Amortized-compute model comparing two ways of configuring K target tasks:
// tuning each from scratch with S_base high-fidelity evaluations, versus
// training a configuration policy once on M cheap source tasks (E_m
// low-fidelity episodes each) after which every target needs only S_meta
// high-fidelity evaluations. All arithmetic is exact rational so the
// break-even boundary carries no floating-point ambiguity.
struct CostModelParams {
    Rational target_tasks;           // K
    Rational source_tasks;           // M
    Rational episodes_per_source;    // E_m: low-fidelity episodes per source task
    Rational baseline_evals;         // S_base: high-fidelity evals per task, untrained
    Rational policy_evals;           // S_meta: high-fidelity evals per task, trained
    Rational high_fidelity_cost;     // t_HF: cost of one high-fidelity evaluation
    Rational low_fidelity_cost;      // t_LF: cost of one low-fidelity evaluation

    Rational alpha() const { // cost ratio of one high- to one low-fidelity eval
        if (low_fidelity_cost <= 0) throw CostError("t_LF must be positive");
        return high_fidelity_cost / low_fidelity_cost;
    }
    Rational eval_saving() const { return baseline_evals - policy_evals; } // ΔS
};

inline void validate_params(const CostModelParams& p) {
    if (p.target_tasks < 0 || p.source_tasks < 0 || p.episodes_per_source < 0 ||
        p.baseline_evals < 0 || p.policy_evals < 0)
        throw CostError("counts must be nonnegative");
    if (p.low_fidelity_cost <= 0) throw CostError("t_LF must be positive");
    if (p.high_fidelity_cost < 0) throw CostError("t_HF must be nonnegative");
}

// Cumulative cost of tuning k tasks without a trained policy: k*S_base*t_HF.
inline Rational baseline_cost(const CostModelParams& p, const Rational& k) {
    return k * p.baseline_evals * p.high_fidelity_cost;
}

// One-time training cost plus the cheaper per-task tuning:
// M*E_m*t_LF + k*S_meta*t_HF.
inline Rational policy_cost(const CostModelParams& p, const Rational& k) {
    return p.source_tasks * p.episodes_per_source * p.low_fidelity_cost +
           k * p.policy_evals * p.high_fidelity_cost;
}

struct CostReport {
    Rational baseline_total;              // C_base at K
    Rational policy_total;                // C_meta at K
    bool cost_effective = false;          // C_meta < C_base
    bool meaningful_saving = true;        // flags (never errors) S_meta > S_base
    std::optional<Rational> leverage_ratio; // K/M, absent when M = 0
    std::optional<Rational> threshold;      // E_m/(ΔS*α), absent when ΔS*α <= 0
    std::optional<Rational> critical_task_count; // smallest integer K that pays off
};

// floor for nonnegative rationals
inline Rational rational_floor(const Rational& r) {
    return Rational(boost::multiprecision::numerator(r) /
                    boost::multiprecision::denominator(r));
}

inline CostReport cost_report(const CostModelParams& p) {
    validate_params(p);
    CostReport report;
    report.baseline_total = baseline_cost(p, p.target_tasks);
    report.policy_total = policy_cost(p, p.target_tasks);
    report.cost_effective = report.policy_total < report.baseline_total;
    report.meaningful_saving = p.eval_saving() >= 0;
    if (p.source_tasks > 0) report.leverage_ratio = p.target_tasks / p.source_tasks;
    Rational saving_rate = p.eval_saving() * p.alpha(); // ΔS*α
    if (saving_rate > 0) {
        report.threshold = p.episodes_per_source / saving_rate;
        // break-even: M*E_m < K*ΔS*α, so the first paying integer K is
        // floor(M*E_m/(ΔS*α)) + 1
        report.critical_task_count =
            rational_floor(p.source_tasks * p.episodes_per_source / saving_rate) + 1;
    }
    return report;
}

struct CostCurvePoint {
    long tasks = 0;
    Rational baseline;
    Rational policy;
};

// Linear-through-origin baseline series vs affine policy series over
// k = 1..max_tasks; with ΔS > 0 they cross exactly once.
inline std::vector<CostCurvePoint> cumulative_cost_curves(const CostModelParams& p,
                                                          long max_tasks) {
    validate_params(p);
    if (max_tasks < 1) throw CostError("max_tasks must be at least 1");
    std::vector<CostCurvePoint> curve;
    curve.reserve(static_cast<std::size_t>(max_tasks));
    for (long k = 1; k <= max_tasks; ++k)
        curve.push_back({k, baseline_cost(p, k), policy_cost(p, k)});
    return curve;
}

// Baseline-over-policy cost ratio at k tasks.
inline Rational cost_reduction_factor(const CostModelParams& p, const Rational& k) {
    Rational denom = policy_cost(p, k);
    if (denom == 0) throw CostError("policy cost is zero");
    return baseline_cost(p, k) / denom;
}

inline std::string rational_text(const Rational& r) { return r.str(); }

inline double rational_value(const Rational& r) { return r.template convert_to<double>(); }

inline CostModelParams cost_params_from_json(const json& doc) {
    auto field = [&](const char* name) {
        const json& v = doc.at(name);
        if (v.is_string()) return Rational(v.get<std::string>());
        if (v.is_number_integer()) return Rational(v.get<long long>());
        throw CostError(std::string("parameter ") + name +
                        " must be an integer or a rational string like \"3/2\"");
    };
    CostModelParams p;
    p.target_tasks = field("target_tasks");
    p.source_tasks = field("source_tasks");
    p.episodes_per_source = field("episodes_per_source");
    p.baseline_evals = field("baseline_evals");
    p.policy_evals = field("policy_evals");
    p.high_fidelity_cost = field("high_fidelity_cost");
    p.low_fidelity_cost = field("low_fidelity_cost");
    return p;
}

inline ordered_json cost_report_json(const CostModelParams& p, long max_tasks) {
    CostReport report = cost_report(p);
    ordered_json doc = ordered_json::object();
    doc["params"] = {
        {"target_tasks", rational_text(p.target_tasks)},
        {"source_tasks", rational_text(p.source_tasks)},
        {"episodes_per_source", rational_text(p.episodes_per_source)},
        {"baseline_evals", rational_text(p.baseline_evals)},
        {"policy_evals", rational_text(p.policy_evals)},
        {"high_fidelity_cost", rational_text(p.high_fidelity_cost)},
        {"low_fidelity_cost", rational_text(p.low_fidelity_cost)},
    };
    doc["alpha"] = rational_text(p.alpha());
    doc["eval_saving"] = rational_text(p.eval_saving());
    doc["baseline_total"] = rational_text(report.baseline_total);
    doc["policy_total"] = rational_text(report.policy_total);
    doc["cost_effective"] = report.cost_effective;
    doc["meaningful_saving"] = report.meaningful_saving;
    doc["leverage_ratio"] =
        report.leverage_ratio ? rational_text(*report.leverage_ratio) : "undefined";
    doc["threshold"] = report.threshold ? rational_text(*report.threshold) : "infinity";
    doc["critical_task_count"] =
        report.critical_task_count ? rational_text(*report.critical_task_count) : "infinity";
    ordered_json rows = ordered_json::array();
    for (const auto& point : cumulative_cost_curves(p, max_tasks)) {
        ordered_json row = ordered_json::object();
        row["tasks"] = point.tasks;
        row["baseline_cost"] = rational_text(point.baseline);
        row["policy_cost"] = rational_text(point.policy);
        Rational factor = point.policy == 0 ? Rational(0) : point.baseline / point.policy;
        row["reduction_factor_exact"] = rational_text(factor);
        row["reduction_factor"] = rational_value(factor);
        rows.push_back(std::move(row));
    }
    doc["curve"] = std::move(rows);
    return doc;
}

} // namespace configym
