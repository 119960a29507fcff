#include <catch2/catch_amalgamated.hpp>

#include "configym/synth.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace configym;

namespace {

SynthSpec spec_for(const std::string& kind, std::uint64_t seed = 7, double noise = 0.0) {
    SynthSpec spec;
    spec.task_kind = kind;
    spec.seed = seed;
    spec.noise_amplitude = noise;
    return spec;
}

std::string argbest_canonical(const ExperimentTable& table, bool maximize) {
    const std::string* best = nullptr;
    double best_score = 0.0;
    for (const auto& [canon, record] : table.records) {
        double s = record.outcome.score;
        if (best == nullptr || (maximize ? s > best_score : s < best_score)) {
            best = &canon;
            best_score = s;
        }
    }
    return *best;
}

std::string scalar(const Configuration& config, const std::string& key) {
    return std::get<std::string>(config.values.at(key));
}

int tier_count(const TaskBundle& bundle, FidelityLevel level) {
    int n = 0;
    for (const auto& table : bundle.experiments)
        if (table.fidelity.level == level) ++n;
    return n;
}

} // namespace

TEST_CASE("generators are deterministic in the seed") {
    for (const auto& kind : {"pretrain_hp", "architecture", "grpo", "mixture"}) {
        SynthResult a = generate(spec_for(kind, 11, 0.01));
        SynthResult b = generate(spec_for(kind, 11, 0.01));
        SynthResult c = generate(spec_for(kind, 12, 0.01));
        CHECK(bundle_to_json(a.bundle).dump() == bundle_to_json(b.bundle).dump());
        CHECK(bundle_to_json(a.bundle).dump() != bundle_to_json(c.bundle).dump());
        CHECK(a.manifest.at("synthetic") == true);
        CHECK(a.manifest.at("seed") == 11);
    }
}

TEST_CASE("generated bundles survive a serialization round-trip") {
    for (const auto& kind : {"pretrain_hp", "architecture", "grpo", "mixture"}) {
        SynthResult result = generate(spec_for(kind, 3, 0.01));
        std::string once = bundle_to_json(result.bundle).dump();
        std::istringstream in(once);
        TaskBundle reloaded = load_bundle(in); // also runs all schema checks
        CHECK(bundle_to_json(reloaded).dump() == once);
    }
}

TEST_CASE("pretrain roster has the expected tier shape") {
    SynthResult result = generate(spec_for("pretrain_hp"));
    const TaskBundle& bundle = result.bundle;
    REQUIRE(bundle.experiments.size() == 14);
    CHECK(tier_count(bundle, FidelityLevel::low) == 4);
    CHECK(tier_count(bundle, FidelityLevel::medium) == 5);
    CHECK(tier_count(bundle, FidelityLevel::high) == 5);
    CHECK(bundle.direction == Direction::minimize);
    for (const auto& table : bundle.experiments) CHECK(table.records.size() == 48); // 8 lr x 6 bs
}

TEST_CASE("noiseless pretrain argmin tracks the drifting optimal learning rate") {
    SynthResult result = generate(spec_for("pretrain_hp", 7, 0.0));
    const double lr_ref = 0.001953, n_ref = 268304384.0, d_ref = 2e9;
    for (const auto& table : result.bundle.experiments) {
        double n = table.fidelity.metadata.at("params");
        double d = table.fidelity.metadata.at("tokens");
        double lr_opt = lr_ref * std::pow(n / n_ref, -0.8) * std::pow(d / d_ref, 0.12);

        // oracle: grid token closest to lr* in log space
        std::string closest;
        double best_gap = std::numeric_limits<double>::infinity();
        for (const auto& dim : table.space.dimensions)
            if (dim.name == "lr")
                for (const auto& tok : dim.allowed) {
                    double gap = std::abs(std::log2(std::stod(tok)) - std::log2(lr_opt));
                    if (gap < best_gap) {
                        best_gap = gap;
                        closest = tok;
                    }
                }
        std::string argmin = argbest_canonical(table, /*maximize=*/false);
        CHECK(scalar(parse_canonical(argmin), "lr") == closest);
    }
}

TEST_CASE("pretrain optimal learning rate falls as model size grows") {
    SynthResult result = generate(spec_for("pretrain_hp", 7, 0.0));
    // the three 2e9-token experiments, ordered by ascending params
    std::vector<std::pair<double, double>> params_and_lr;
    for (const auto& table : result.bundle.experiments) {
        if (table.fidelity.metadata.at("tokens") != 2e9) continue;
        std::string argmin = argbest_canonical(table, false);
        params_and_lr.emplace_back(table.fidelity.metadata.at("params"),
                                   std::stod(scalar(parse_canonical(argmin), "lr")));
    }
    std::sort(params_and_lr.begin(), params_and_lr.end());
    REQUIRE(params_and_lr.size() >= 3);
    for (std::size_t i = 1; i < params_and_lr.size(); ++i)
        CHECK(params_and_lr[i].second <= params_and_lr[i - 1].second);
}

TEST_CASE("pretrain with zero shift has a tier-independent optimum") {
    SynthSpec spec = spec_for("pretrain_hp", 7, 0.0);
    spec.shift = 0.0;
    SynthResult result = generate(spec);
    std::set<std::string> argmins;
    for (const auto& table : result.bundle.experiments)
        argmins.insert(argbest_canonical(table, false));
    CHECK(argmins.size() == 1);
}

TEST_CASE("pretrain honors a restricted learning-rate grid and rejects bad tokens") {
    SynthSpec spec = spec_for("pretrain_hp");
    spec.lr_grid = {"0.001953", "0.003906"};
    SynthResult result = generate(spec);
    for (const auto& table : result.bundle.experiments) CHECK(table.records.size() == 12);

    spec.lr_grid = {"0.001953", "0.12345"};
    try {
        generate(spec);
        FAIL("expected invalid-grid-token");
    } catch (const SynthError& e) {
        CHECK(std::string(e.what()).find("invalid-grid-token: 0.12345") != std::string::npos);
    }
}

TEST_CASE("architecture scales expose disjoint embed grids") {
    SynthResult result = generate(spec_for("architecture"));
    REQUIRE(result.bundle.experiments.size() == 3);
    std::set<std::string> all_embed;
    for (const auto& table : result.bundle.experiments) {
        CHECK(table.space.candidate_mode == CandidateMode::explicit_list);
        CHECK(table.space.explicit_candidates.size() == 20);
        CHECK(table.records.size() == 20);
        for (const auto& dim : table.space.dimensions)
            if (dim.name == "sample_embed_dim")
                for (const auto& tok : dim.allowed)
                    CHECK(all_embed.insert(tok).second); // never shared across scales
    }
    CHECK(all_embed.size() == 9);
}

TEST_CASE("noiseless architecture scores follow the capacity trade-off") {
    SynthResult result = generate(spec_for("architecture", 7, 0.0));
    for (const auto& table : result.bundle.experiments) {
        // independent capacity oracle recomputed from each stored config
        long l_min = std::numeric_limits<long>::max();
        for (const auto& dim : table.space.dimensions)
            if (dim.name == "sample_n_layer")
                for (const auto& tok : dim.allowed) l_min = std::min(l_min, std::stol(tok));

        auto capacity = [&](const Configuration& config) {
            double embed = std::stod(scalar(config, "sample_embed_dim"));
            long layers = std::stol(scalar(config, "sample_n_layer"));
            const auto& mlp = std::get<std::vector<std::string>>(
                config.values.at("sample_mlp_ratio"));
            double mlp_sum = 0.0;
            for (const auto& m : mlp) mlp_sum += std::stod(m);
            return embed * (1.0 + 0.03 * static_cast<double>(layers - l_min) +
                            0.02 * (mlp_sum / static_cast<double>(layers) - 2.0));
        };

        double cap_min = std::numeric_limits<double>::infinity(), cap_max = 0.0;
        for (const auto& [canon, record] : table.records) {
            double cap = capacity(record.config);
            cap_min = std::min(cap_min, cap);
            cap_max = std::max(cap_max, cap);
        }
        const ExperimentTable::Record* best = nullptr;
        for (const auto& [canon, record] : table.records) {
            double cap = capacity(record.config);
            // noiseless score is exactly the normalized capacity trade-off
            CHECK(record.outcome.score ==
                  Catch::Approx(cap_min / cap + cap / cap_max).margin(1e-9));
            if (best == nullptr || record.outcome.score < best->outcome.score) best = &record;
        }
        // the optimum sits strictly inside the capacity range
        double best_cap = capacity(best->config);
        CHECK(best_cap > cap_min);
        CHECK(best_cap < cap_max);
    }
}

TEST_CASE("grpo tiers share one space but not one optimum") {
    SynthResult result = generate(spec_for("grpo", 7, 0.0));
    const TaskBundle& bundle = result.bundle;
    REQUIRE(bundle.experiments.size() == 8);
    CHECK(tier_count(bundle, FidelityLevel::low) == 3);
    CHECK(tier_count(bundle, FidelityLevel::medium) == 1);
    CHECK(tier_count(bundle, FidelityLevel::high) == 4);

    std::string space_dump = detail::space_to_json(bundle.experiments[0].space).dump();
    for (const auto& table : bundle.experiments) {
        CHECK(table.records.size() == 18);
        CHECK(detail::space_to_json(table.space).dump() == space_dump);
    }

    std::set<std::string> low_opt, high_opt;
    for (const auto& table : bundle.experiments) {
        if (table.fidelity.level == FidelityLevel::low)
            low_opt.insert(argbest_canonical(table, true));
        if (table.fidelity.level == FidelityLevel::high)
            high_opt.insert(argbest_canonical(table, true));
    }
    CHECK(low_opt.size() == 1);
    CHECK(high_opt.size() == 1);
    CHECK(*high_opt.begin() == "kl=0;lr=5e-06;mb=32"); // center cell of the grid
    CHECK(*low_opt.begin() != *high_opt.begin());      // the shift
}

TEST_CASE("grpo with zero shift aligns every tier optimum") {
    SynthSpec spec = spec_for("grpo", 7, 0.0);
    spec.shift = 0.0;
    SynthResult result = generate(spec);
    std::set<std::string> argmaxes;
    for (const auto& table : result.bundle.experiments)
        argmaxes.insert(argbest_canonical(table, true));
    CHECK(argmaxes.size() == 1);
}

TEST_CASE("reversed grpo puts the train optimum on the test pessimum") {
    SynthSpec spec = spec_for("grpo", 7, 0.0);
    spec.reversed = true;
    SynthResult result = generate(spec);
    std::string test_worst, train_best;
    for (const auto& table : result.bundle.experiments) {
        if (table.fidelity.level == FidelityLevel::high && test_worst.empty())
            test_worst = argbest_canonical(table, /*maximize=*/false); // worst cell
        if (table.fidelity.level == FidelityLevel::low && train_best.empty())
            train_best = argbest_canonical(table, /*maximize=*/true);
    }
    CHECK(train_best == test_worst);
}

TEST_CASE("mixture candidates live exactly on the rounded simplex") {
    SynthResult result = generate(spec_for("mixture"));
    REQUIRE(result.bundle.experiments.size() == 3);
    for (const auto& table : result.bundle.experiments) {
        CHECK(table.space.dimensions.size() == 19);
        CHECK(table.space.candidate_mode == CandidateMode::explicit_list);
        for (const auto& candidate : table.space.explicit_candidates) {
            REQUIRE(candidate.values.size() == 19);
            long units = 0;
            for (const auto& [name, value] : candidate.values) {
                CHECK(name.rfind("ratio_", 0) == 0);
                units += std::lround(std::stod(std::get<std::string>(value)) * 10000.0);
            }
            CHECK(units == 10000); // ratios sum to exactly 1 in 1e-4 units
        }
    }
}

TEST_CASE("mixture tiers never share a candidate mixture") {
    SynthResult result = generate(spec_for("mixture"));
    std::set<std::string> seen;
    for (const auto& table : result.bundle.experiments)
        for (const auto& [canon, record] : table.records)
            CHECK(seen.insert(canon).second);
}

TEST_CASE("sparse coverage shrinks train tiers but freezes the test tier") {
    SynthSpec full = spec_for("mixture", 21, 0.01);
    SynthSpec sparse = full;
    sparse.coverage = 0.5;
    SynthResult a = generate(full);
    SynthResult b = generate(sparse);

    auto tier = [](const TaskBundle& bundle, FidelityLevel level) -> const ExperimentTable& {
        for (const auto& table : bundle.experiments)
            if (table.fidelity.level == level) return table;
        throw std::logic_error("missing tier");
    };
    CHECK(tier(a.bundle, FidelityLevel::low).records.size() == 20);
    CHECK(tier(b.bundle, FidelityLevel::low).records.size() == 10);
    CHECK(tier(b.bundle, FidelityLevel::medium).records.size() == 10);
    // byte-identical held-out tier across coverage variants
    CHECK(bundle_to_json(a.bundle).dump() != bundle_to_json(b.bundle).dump());
    ordered_json high_a, high_b;
    for (const auto& ej : bundle_to_json(a.bundle).at("experiments"))
        if (ej.at("experiment_id") == "qwen2.5-7b") high_a = ej;
    for (const auto& ej : bundle_to_json(b.bundle).at("experiments"))
        if (ej.at("experiment_id") == "qwen2.5-7b") high_b = ej;
    CHECK(high_a.dump() == high_b.dump());
    CHECK(b.manifest.at("coverage") == 0.5);
}

TEST_CASE("generate resolves aliases and rejects unknown kinds") {
    CHECK(bundle_to_json(generate(spec_for("pretrain")).bundle).dump() ==
          bundle_to_json(generate(spec_for("pretrain_hp")).bundle).dump());
    CHECK(bundle_to_json(generate(spec_for("arch")).bundle).dump() ==
          bundle_to_json(generate(spec_for("architecture")).bundle).dump());
    CHECK_THROWS_AS(generate(spec_for("bogus")), SynthError);
}
