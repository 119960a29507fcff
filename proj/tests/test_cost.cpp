#include <catch2/catch_amalgamated.hpp>

#include "configym/cost.hpp"
#include "configym/rng.hpp"

using namespace configym;

namespace {

CostModelParams make_params(long long k, long long m, long long em, long long sbase,
                            long long smeta, long long thf, long long tlf) {
    CostModelParams p;
    p.target_tasks = k;
    p.source_tasks = m;
    p.episodes_per_source = em;
    p.baseline_evals = sbase;
    p.policy_evals = smeta;
    p.high_fidelity_cost = thf;
    p.low_fidelity_cost = tlf;
    return p;
}

} // namespace

TEST_CASE("worked example: four source tasks at a 50x fidelity gap") {
    // M=4, E_m=100, S_base=12, S_meta=10 (dS=2), t_HF=50, t_LF=1 (alpha=50)
    CostModelParams p = make_params(6, 4, 100, 12, 10, 50, 1);
    CHECK(p.alpha() == 50);
    CHECK(p.eval_saving() == 2);

    CostReport report = cost_report(p);
    REQUIRE(report.threshold.has_value());
    CHECK(*report.threshold == 1); // E_m / (dS * alpha) = 100 / 100
    REQUIRE(report.critical_task_count.has_value());
    CHECK(*report.critical_task_count == 5); // floor(4*100/100) + 1

    // K=6 > 5 pays off; K=4 does not; K exactly at break-even does not
    CHECK(report.cost_effective);
    p.target_tasks = 4;
    CHECK_FALSE(cost_report(p).cost_effective);
    p.target_tasks = Rational(4); // M*E_m/(dS*alpha) = 4: equality, not a win
    CHECK(policy_cost(p, 4) == baseline_cost(p, 4));
}

TEST_CASE("calibration point: exact 3.6x reduction at thirty target tasks") {
    CostModelParams p = make_params(30, 3, 100, 12, 3, 90, 3);
    CHECK(baseline_cost(p, 30) == 32400);
    CHECK(policy_cost(p, 30) == 9000);
    CHECK(cost_reduction_factor(p, 30) == Rational(18, 5)); // exactly 3.6
    CHECK(rational_value(cost_reduction_factor(p, 30)) == 3.6);
    CostReport report = cost_report(p);
    CHECK(report.cost_effective);
    REQUIRE(report.leverage_ratio.has_value());
    CHECK(*report.leverage_ratio == 10);
    REQUIRE(report.critical_task_count.has_value());
    CHECK(*report.critical_task_count == 2); // 3*100/(9*30) = 10/9 -> floor + 1
}

TEST_CASE("zero or negative eval saving removes the break-even point") {
    CostModelParams same = make_params(10, 2, 50, 8, 8, 10, 1); // dS = 0
    CostReport report = cost_report(same);
    CHECK_FALSE(report.threshold.has_value());
    CHECK_FALSE(report.critical_task_count.has_value());
    CHECK(report.meaningful_saving); // dS = 0 is allowed
    CHECK_FALSE(report.cost_effective);

    CostModelParams worse = make_params(10, 2, 50, 8, 9, 10, 1); // dS < 0
    report = cost_report(worse);
    CHECK_FALSE(report.meaningful_saving); // flagged, never an error
    CHECK_FALSE(report.threshold.has_value());
}

TEST_CASE("parameter validation rejects impossible inputs") {
    CHECK_THROWS_AS(cost_report(make_params(1, 1, 1, 1, 1, 1, 0)), CostError);
    CHECK_THROWS_AS(cost_report(make_params(-1, 1, 1, 1, 1, 1, 1)), CostError);
    CHECK_THROWS_AS(cost_report(make_params(1, 1, 1, 1, -1, 1, 1)), CostError);
    CHECK_THROWS_AS(cumulative_cost_curves(make_params(1, 1, 1, 1, 1, 1, 1), 0), CostError);
    // all-zero policy side: division by zero is refused
    CHECK_THROWS_AS(cost_reduction_factor(make_params(5, 0, 0, 4, 0, 10, 1), 5), CostError);
}

TEST_CASE("report agrees with an integer brute-force oracle on random inputs") {
    Rng rng(404);
    for (int trial = 0; trial < 10000; ++trial) {
        long long k = 1 + static_cast<long long>(rng.below(40));
        long long m = 1 + static_cast<long long>(rng.below(5));
        long long em = 1 + static_cast<long long>(rng.below(50));
        long long sbase = 1 + static_cast<long long>(rng.below(15));
        long long smeta = static_cast<long long>(rng.below(static_cast<std::uint64_t>(sbase) + 1));
        long long thf = 1 + static_cast<long long>(rng.below(100));
        long long tlf = 1 + static_cast<long long>(rng.below(3));
        CostModelParams p = make_params(k, m, em, sbase, smeta, thf, tlf);
        CostReport report = cost_report(p);

        // direct integer recomputation of both totals
        long long base_total = k * sbase * thf;
        long long policy_total = m * em * tlf + k * smeta * thf;
        REQUIRE(report.baseline_total == base_total);
        REQUIRE(report.policy_total == policy_total);
        REQUIRE(report.cost_effective == (policy_total < base_total));

        long long ds = sbase - smeta;
        if (ds > 0) {
            // oracle: scan for the first integer task count that pays off
            long long critical = -1;
            for (long long q = 1; q <= 1000; ++q)
                if (m * em * tlf + q * smeta * thf < q * sbase * thf) {
                    critical = q;
                    break;
                }
            REQUIRE(critical > 0);
            REQUIRE(report.critical_task_count.has_value());
            REQUIRE(*report.critical_task_count == critical);
            // equivalence: cost-effective iff leverage exceeds the threshold
            REQUIRE(report.cost_effective ==
                    (*report.leverage_ratio > *report.threshold));
        } else {
            REQUIRE_FALSE(report.critical_task_count.has_value());
        }
    }
}

TEST_CASE("cumulative curves cross exactly once when the policy saves evals") {
    CostModelParams p = make_params(30, 3, 100, 12, 3, 90, 3);
    auto curve = cumulative_cost_curves(p, 40);
    REQUIRE(curve.size() == 40);
    CHECK(curve.front().tasks == 1);
    CHECK(curve.front().baseline == 12 * 90);
    CHECK(curve.front().policy == 3 * 100 * 3 + 3 * 90);

    // the baseline-minus-policy gap is strictly increasing: one sign change
    int sign_changes = 0;
    Rational prev_gap;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        Rational gap = curve[i].baseline - curve[i].policy;
        if (i > 0) {
            CHECK(gap > prev_gap);
            if ((prev_gap < 0) != (gap < 0)) ++sign_changes;
        }
        prev_gap = gap;
    }
    CHECK(sign_changes == 1);
    // the crossing lands exactly at the reported critical task count
    CostReport report = cost_report(p);
    long critical = static_cast<long>(rational_value(*report.critical_task_count));
    CHECK(curve[critical - 2].policy >= curve[critical - 2].baseline);
    CHECK(curve[critical - 1].policy < curve[critical - 1].baseline);
}

TEST_CASE("parameters parse from integers and rational strings") {
    json doc = {{"target_tasks", 30},       {"source_tasks", 3},
                {"episodes_per_source", 100}, {"baseline_evals", 12},
                {"policy_evals", 3},        {"high_fidelity_cost", 90},
                {"low_fidelity_cost", 3}};
    CostModelParams p = cost_params_from_json(doc);
    CHECK(cost_reduction_factor(p, 30) == Rational(18, 5));

    doc["low_fidelity_cost"] = "3/2";
    p = cost_params_from_json(doc);
    CHECK(p.low_fidelity_cost == Rational(3, 2));
    CHECK(p.alpha() == 60);

    doc["low_fidelity_cost"] = 1.5; // floats are ambiguous, refuse them
    CHECK_THROWS_AS(cost_params_from_json(doc), CostError);
    doc.erase("low_fidelity_cost");
    CHECK_THROWS_AS(cost_params_from_json(doc), json::exception);
}

TEST_CASE("json report carries exact and floating reduction factors") {
    CostModelParams p = make_params(30, 3, 100, 12, 3, 90, 3);
    ordered_json doc = cost_report_json(p, 30);
    CHECK(doc.at("alpha") == "30");
    CHECK(doc.at("eval_saving") == "9");
    CHECK(doc.at("cost_effective") == true);
    CHECK(doc.at("critical_task_count") == "2");
    const auto& last = doc.at("curve").back();
    CHECK(last.at("tasks") == 30);
    CHECK(last.at("reduction_factor_exact") == "18/5");
    CHECK(last.at("reduction_factor") == 3.6);

    // degenerate report renders explicit sentinels instead of numbers
    ordered_json flat = cost_report_json(make_params(10, 2, 50, 8, 8, 10, 1), 5);
    CHECK(flat.at("threshold") == "infinity");
    CHECK(flat.at("critical_task_count") == "infinity");
}
