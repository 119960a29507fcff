#include <catch2/catch_amalgamated.hpp>

#include "configym/core.hpp"
#include "configym/rng.hpp"

#include <set>

using namespace configym;

namespace {

ConfigSpace grpo_space() {
    ConfigSpace space;
    space.dimensions = {
        {"lr", DimensionKind::scalar_choice, {"1e-06", "5e-06", "1e-05"}, ""},
        {"mb", DimensionKind::scalar_choice, {"16", "32", "64"}, ""},
        {"kl", DimensionKind::scalar_choice, {"0", "0.001"}, ""},
    };
    return space;
}

Configuration make_config(std::initializer_list<std::pair<std::string, std::string>> kv) {
    Configuration c;
    for (const auto& [k, v] : kv) c.values[k] = v;
    return c;
}

} // namespace

TEST_CASE("canonicalize sorts keys and renders tokens verbatim") {
    ConfigSpace space = grpo_space();
    Configuration c = make_config({{"lr", "1e-05"}, {"mb", "64"}, {"kl", "0"}});
    CHECK(canonicalize(c, space) == "kl=0;lr=1e-05;mb=64");
}

TEST_CASE("canonicalize is insertion-order independent") {
    ConfigSpace space = grpo_space();
    Configuration a, b;
    a.values["lr"] = std::string("5e-06");
    a.values["kl"] = std::string("0.001");
    a.values["mb"] = std::string("32");
    b.values["mb"] = std::string("32");
    b.values["lr"] = std::string("5e-06");
    b.values["kl"] = std::string("0.001");
    CHECK(canonicalize(a, space) == canonicalize(b, space));
}

TEST_CASE("canonicalize drops dimensions absent from the space") {
    ConfigSpace space = grpo_space();
    Configuration c = make_config({{"lr", "1e-05"}, {"mb", "64"}, {"kl", "0"}, {"zz", "9"}});
    CHECK(canonicalize(c, space) == "kl=0;lr=1e-05;mb=64");
}

TEST_CASE("canonicalize renders per-layer lists with exact token counts") {
    ConfigSpace space;
    space.dimensions = {
        {"sample_n_layer", DimensionKind::scalar_choice, {"36"}, ""},
        {"sample_n_head", DimensionKind::per_layer_list, {"8", "16", "20"}, "sample_n_layer"},
    };
    Configuration c;
    c.values["sample_n_layer"] = std::string("36");
    std::vector<std::string> heads(36, "8");
    heads[1] = "16";
    c.values["sample_n_head"] = heads;
    std::string canon = canonicalize(c, space);
    std::string list_part = canon.substr(canon.find("sample_n_head=["));
    std::size_t commas = std::count(list_part.begin(), list_part.end(), ',');
    CHECK(commas == 35); // 36 tokens
    CHECK(canon.find("sample_n_head=[8,16,") != std::string::npos);
    CHECK(canon.find(' ') == std::string::npos);
}

TEST_CASE("canonicalize is injective on valid configurations of a fixed space") {
    ConfigSpace space = grpo_space();
    Rng rng(42);
    std::set<std::string> canonicals;
    std::set<std::string> fingerprints;
    for (int i = 0; i < 500; ++i) {
        Configuration c;
        std::string fingerprint;
        for (const auto& dim : space.dimensions) {
            const std::string& token = dim.allowed[rng.below(dim.allowed.size())];
            c.values[dim.name] = token;
            fingerprint += dim.name + ":" + token + "|";
        }
        REQUIRE(validate(c, space).valid);
        bool new_config = fingerprints.insert(fingerprint).second;
        bool new_canonical = canonicals.insert(canonicalize(c, space)).second;
        CHECK(new_config == new_canonical); // distinct configs never collide
    }
}

TEST_CASE("valid configurations round-trip through canonical text losslessly") {
    ConfigSpace space = grpo_space();
    for (const auto& lr : {"1e-06", "5e-06", "1e-05"})
        for (const auto& mb : {"16", "32", "64"}) {
            Configuration c = make_config({{"lr", lr}, {"mb", mb}, {"kl", "0.001"}});
            Configuration back = parse_canonical(canonicalize(c, space));
            CHECK(back == c);
        }
}

TEST_CASE("canonical round-trip covers list values") {
    ConfigSpace space;
    space.dimensions = {
        {"l", DimensionKind::scalar_choice, {"2", "3"}, ""},
        {"h", DimensionKind::per_layer_list, {"4", "8"}, "l"},
    };
    Configuration c;
    c.values["l"] = std::string("3");
    c.values["h"] = std::vector<std::string>{"4", "8", "4"};
    Configuration back = parse_canonical(canonicalize(c, space));
    CHECK(back == c);
}

TEST_CASE("utility flips sign for minimize tasks") {
    CHECK(utility(2.5, Direction::maximize) == 2.5);
    CHECK(utility(2.5, Direction::minimize) == -2.5);
    // score a < score b <=> utility a > utility b under minimize
    CHECK(utility(1.0, Direction::minimize) > utility(2.0, Direction::minimize));
}

TEST_CASE("validate accepts an on-grid configuration") {
    ConfigSpace space = grpo_space();
    CHECK(validate(make_config({{"lr", "5e-06"}, {"mb", "32"}, {"kl", "0.001"}}), space).valid);
}

TEST_CASE("validate diagnoses off-grid tokens") {
    ConfigSpace space = grpo_space();
    auto report = validate(make_config({{"lr", "2e-06"}, {"mb", "32"}, {"kl", "0"}}), space);
    REQUIRE_FALSE(report.valid);
    REQUIRE(report.diagnostics.size() == 1);
    CHECK(report.diagnostics[0].dimension == "lr");
    CHECK(report.diagnostics[0].problem == "token-not-allowed");
}

TEST_CASE("validate diagnoses missing and extraneous keys") {
    ConfigSpace space = grpo_space();
    auto report = validate(make_config({{"lr", "1e-06"}, {"extra", "1"}}), space);
    REQUIRE_FALSE(report.valid);
    bool missing_mb = false, missing_kl = false, extraneous = false;
    for (const auto& d : report.diagnostics) {
        if (d.dimension == "mb" && d.problem == "missing") missing_mb = true;
        if (d.dimension == "kl" && d.problem == "missing") missing_kl = true;
        if (d.dimension == "extra" && d.problem == "extraneous") extraneous = true;
    }
    CHECK(missing_mb);
    CHECK(missing_kl);
    CHECK(extraneous);
}

TEST_CASE("validate ties per-layer list length to the chosen layer count") {
    ConfigSpace space;
    space.dimensions = {
        {"sample_n_layer", DimensionKind::scalar_choice, {"35", "36"}, ""},
        {"sample_n_head", DimensionKind::per_layer_list, {"8", "16"}, "sample_n_layer"},
    };
    Configuration c;
    c.values["sample_n_layer"] = std::string("36");
    c.values["sample_n_head"] = std::vector<std::string>(35, "8");
    auto report = validate(c, space);
    REQUIRE_FALSE(report.valid);
    CHECK(report.diagnostics[0].dimension == "sample_n_head");
    CHECK(report.diagnostics[0].problem == "length-mismatch");

    c.values["sample_n_head"] = std::vector<std::string>(36, "8");
    CHECK(validate(c, space).valid);
}

TEST_CASE("validate diagnoses kind mismatches") {
    ConfigSpace space = grpo_space();
    Configuration c;
    c.values["lr"] = std::vector<std::string>{"1e-06"};
    c.values["mb"] = std::string("32");
    c.values["kl"] = std::string("0");
    auto report = validate(c, space);
    REQUIRE_FALSE(report.valid);
    CHECK(report.diagnostics[0].dimension == "lr");
    CHECK(report.diagnostics[0].problem == "kind-mismatch");
}

TEST_CASE("explicit-list mode requires candidate membership") {
    ConfigSpace space = grpo_space();
    space.candidate_mode = CandidateMode::explicit_list;
    space.explicit_candidates = {
        make_config({{"lr", "1e-06"}, {"mb", "16"}, {"kl", "0"}}),
        make_config({{"lr", "5e-06"}, {"mb", "32"}, {"kl", "0.001"}}),
    };
    CHECK(validate(space.explicit_candidates[0], space).valid);
    auto report = validate(make_config({{"lr", "1e-05"}, {"mb", "64"}, {"kl", "0"}}), space);
    REQUIRE_FALSE(report.valid);
    CHECK(report.diagnostics[0].problem == "not-a-candidate");
}

TEST_CASE("parse_config_text reads python-style dicts without numeric coercion") {
    ConfigSpace space = grpo_space();
    auto parsed = parse_config_text("{'lr': 1e-05, 'mb': 64, 'kl': 0}", space);
    REQUIRE(parsed.has_value());
    CHECK(canonicalize(*parsed, space) == "kl=0;lr=1e-05;mb=64");
    CHECK(std::get<std::string>(parsed->values.at("lr")) == "1e-05"); // token preserved

    auto quoted = parse_config_text(R"({"lr": "5e-06", "mb": "32", "kl": "0.001"})", space);
    REQUIRE(quoted.has_value());
    CHECK(canonicalize(*quoted, space) == "kl=0.001;lr=5e-06;mb=32");
}

TEST_CASE("parse_config_text reads dicts with list values") {
    ConfigSpace space;
    space.dimensions = {
        {"l", DimensionKind::scalar_choice, {"2"}, ""},
        {"h", DimensionKind::per_layer_list, {"4", "8"}, "l"},
    };
    auto parsed = parse_config_text("{'l': 2, 'h': [4, 8]}", space);
    REQUIRE(parsed.has_value());
    CHECK(canonicalize(*parsed, space) == "h=[4,8];l=2");
}

TEST_CASE("parse_config_text zips bare arrays onto all-scalar spaces positionally") {
    ConfigSpace space;
    space.dimensions = {
        {"a", DimensionKind::scalar_choice, {"0.5"}, ""},
        {"b", DimensionKind::scalar_choice, {"0.3"}, ""},
        {"c", DimensionKind::scalar_choice, {"0.2"}, ""},
    };
    auto parsed = parse_config_text("[0.5, 0.3, 0.2]", space);
    REQUIRE(parsed.has_value());
    CHECK(canonicalize(*parsed, space) == "a=0.5;b=0.3;c=0.2");
    // size mismatch refuses to zip
    CHECK_FALSE(parse_config_text("[0.5, 0.3]", space).has_value());
}

TEST_CASE("parse_config_text accepts canonical text and rejects garbage") {
    ConfigSpace space = grpo_space();
    auto parsed = parse_config_text("kl=0;lr=1e-06;mb=16", space);
    REQUIRE(parsed.has_value());
    CHECK(canonicalize(*parsed, space) == "kl=0;lr=1e-06;mb=16");
    CHECK_FALSE(parse_config_text("", space).has_value());
    CHECK_FALSE(parse_config_text("   \n", space).has_value());
    CHECK_FALSE(parse_config_text("just some prose", space).has_value());
}
