#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstdio>
#include <string>
#include <vector>

#include "configym/lookup.hpp"
#include "configym/rng.hpp"

namespace configym {

struct SynthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parametric surrogate bundles reproducing the cross-fidelity shift
// phenomena at desk scale. All functional forms are synthetic inventions;
// every generated bundle carries a manifest saying so, and grid tokens are
// kept verbatim from the real task grids so rendered prompts are drop-in
// compatible with the production templates.
struct SynthSpec {
    std::string task_kind; // architecture | pretrain_hp | grpo | mixture
    std::uint64_t seed = 0;
    double noise_amplitude = 0.01; // fraction of the noiseless score range
    double shift = 1.0;            // 0 disables the cross-fidelity drift
    int candidates_per_experiment = 20; // explicit-list tasks
    double coverage = 1.0;              // mixture: fraction of train candidates kept
    bool reversed = false;              // grpo: train optimum = test pessimum
    std::vector<std::string> lr_grid;   // pretrain: optional subset of the known lr tokens
};

struct SynthResult {
    TaskBundle bundle;
    ordered_json manifest;
};

namespace detail {

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

// ratio token from integer 1e-4 units: "0.0", "0.209", "0.0108"
inline std::string format_ratio(long units) {
    if (units == 0) return "0.0";
    std::string s = format_fixed(static_cast<double>(units) / 10000.0, 4);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s += '0';
    return s;
}

inline ordered_json base_manifest(const SynthSpec& spec, const std::string& form) {
    ordered_json m = ordered_json::object();
    m["generator"] = spec.task_kind;
    m["seed"] = spec.seed;
    m["noise_amplitude"] = spec.noise_amplitude;
    m["shift"] = spec.shift;
    m["synthetic"] = true;
    m["functional_form"] = form;
    return m;
}

inline void add_record(ExperimentTable& table, Configuration config, double score,
                       Direction direction, std::map<std::string, std::string> details = {}) {
    ExperimentTable::Record record;
    record.outcome.score = score;
    record.outcome.direction = direction;
    record.outcome.details = std::move(details);
    std::string canon = canonicalize(config, table.space);
    record.config = std::move(config);
    table.records[canon] = std::move(record);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Task 2 surrogate: pretraining hyperparameters (optimization landscape shift)
// ---------------------------------------------------------------------------

// Quadratic-in-log loss bowl whose optimal learning rate drifts with model
// size and token count: params up => lr* down, tokens up => lr* slightly up.
inline SynthResult gen_pretrain_task(const SynthSpec& spec) {
    // 2^-10.5 .. 2^-7.0 in half-exponent steps, decimal tokens as rendered
    // in the production prompts
    std::vector<std::string> lr_tokens = {"0.0006905", "0.0009766", "0.001381",
                                          "0.001953",  "0.002762",  "0.003906",
                                          "0.005524",  "0.007812"};
    if (!spec.lr_grid.empty()) {
        for (const auto& token : spec.lr_grid)
            if (std::find(lr_tokens.begin(), lr_tokens.end(), token) == lr_tokens.end())
                throw SynthError("invalid-grid-token: " + token);
        lr_tokens = spec.lr_grid;
    }
    const std::vector<std::string> bs_tokens = {"32", "64", "128", "256", "512", "1024"};
    struct Fid { double tokens; double params; FidelityLevel level; };
    const std::vector<Fid> roster = {
        {2e9, 268304384, FidelityLevel::low},
        {2e9, 429260800, FidelityLevel::low},
        {2e9, 536872960, FidelityLevel::low},
        {4e9, 59968512, FidelityLevel::low},
        {4e9, 119992320, FidelityLevel::medium},
        {4e9, 268304384, FidelityLevel::medium},
        {4e9, 429260800, FidelityLevel::medium},
        {8e9, 59968512, FidelityLevel::medium},
        {8e9, 119992320, FidelityLevel::medium},
        {2e10, 268304384, FidelityLevel::high},
        {2e10, 429260800, FidelityLevel::high},
        {2e10, 536872960, FidelityLevel::high},
        {8e10, 268304384, FidelityLevel::high},
        {1e11, 214663680, FidelityLevel::high},
    };

    TaskBundle bundle;
    bundle.task_id = "pretrain_hp";
    bundle.direction = Direction::minimize;
    bundle.task_text =
        "Pretraining hyperparameter configuration: propose a learning rate and batch size "
        "for the given model size and token budget to minimize the final smooth training loss.";
    bundle.fidelity_key = {"tokens", "params"};
    bundle.top_k = 3;

    const double lr_ref = 0.001953, n_ref = 268304384.0, d_ref = 2e9, bs_ref = 128.0;
    const double drift_n = 0.8 * spec.shift;
    const double drift_d = 0.12 * spec.shift;
    const double bs_drift = 0.3 * spec.shift;
    const double curvature_lr = 0.08, curvature_bs = 0.02;

    Rng root(spec.seed);
    int experiment_index = 0;
    for (const auto& fid : roster) {
        ExperimentTable table;
        table.experiment_id =
            "D" + detail::format_fixed(fid.tokens, 0) + "_N" + detail::format_fixed(fid.params, 0);
        table.fidelity.metadata = {{"tokens", fid.tokens}, {"params", fid.params}};
        table.fidelity.level = fid.level;
        table.env_text =
            "the total number of training tokens seen by the model during training is: " +
            detail::format_fixed(fid.tokens, 0) +
            ", and the count of trainable model parameters excluding token embedding "
            "matrices is: " +
            detail::format_fixed(fid.params, 0);
        Dimension lr_dim{"lr", DimensionKind::scalar_choice, lr_tokens, ""};
        Dimension bs_dim{"bs", DimensionKind::scalar_choice, bs_tokens, ""};
        table.space.dimensions = {lr_dim, bs_dim};

        const double lr_opt = lr_ref * std::pow(fid.params / n_ref, -drift_n) *
                              std::pow(fid.tokens / d_ref, drift_d);
        const double bs_opt = bs_ref * std::pow(fid.tokens / d_ref, bs_drift);
        const double base = 3.2 - 0.25 * std::log2(fid.params / n_ref) -
                            0.12 * std::log2(fid.tokens / d_ref);

        auto noiseless = [&](double lr, double bs) {
            double dl = std::log2(lr) - std::log2(lr_opt);
            double db = std::log2(bs) - std::log2(bs_opt);
            return base + curvature_lr * dl * dl + curvature_bs * db * db;
        };
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& lr_tok : lr_tokens)
            for (const auto& bs_tok : bs_tokens) {
                double v = noiseless(std::stod(lr_tok), std::stod(bs_tok));
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        Rng rng = root.fork(static_cast<std::uint64_t>(experiment_index++));
        for (const auto& lr_tok : lr_tokens)
            for (const auto& bs_tok : bs_tokens) {
                double loss = noiseless(std::stod(lr_tok), std::stod(bs_tok)) +
                              spec.noise_amplitude * (hi - lo) * rng.gaussian();
                Configuration config;
                config.values["lr"] = lr_tok;
                config.values["bs"] = bs_tok;
                detail::add_record(table, std::move(config), loss, bundle.direction,
                                   {{"smooth_loss", detail::format_fixed(loss, 6)}});
            }
        bundle.experiments.push_back(std::move(table));
    }

    SynthResult result;
    result.bundle = std::move(bundle);
    result.manifest = detail::base_manifest(
        spec, "loss = base(N,D) + a*(log2 lr - log2 lr*(N,D))^2 + b*(log2 bs - log2 bs*(D))^2 "
              "+ noise; lr*(N,D) = c*N^-alpha*D^beta");
    return result;
}

// ---------------------------------------------------------------------------
// Task 1 surrogate: model architecture (configuration space shift)
// ---------------------------------------------------------------------------

// Perplexity decreases and latency increases monotonically in a capacity
// proxy dominated by the embedding dimension; the normalized sum puts the
// optimum at mid capacity.
inline SynthResult gen_arch_task(const SynthSpec& spec) {
    struct Scale {
        std::string name;
        std::vector<std::string> embed, layers, heads;
        FidelityLevel level;
        double scale_rank;
    };
    const std::vector<Scale> scales = {
        {"gpt-s", {"192", "384", "768"}, {"10", "11", "12"}, {"4", "8", "12"},
         FidelityLevel::low, 1},
        {"gpt-m", {"256", "512", "1024"}, {"22", "23", "24"}, {"8", "12", "16"},
         FidelityLevel::medium, 2},
        {"gpt-l", {"320", "640", "1280"}, {"34", "35", "36"}, {"8", "16", "20"},
         FidelityLevel::high, 3},
    };
    const std::vector<std::string> mlp_tokens = {"2", "3", "4"};
    const std::vector<std::string> bias_tokens = {"True", "False"};

    for (std::size_t i = 0; i < scales.size(); ++i)
        for (std::size_t j = i + 1; j < scales.size(); ++j)
            for (const auto& e : scales[i].embed)
                if (std::find(scales[j].embed.begin(), scales[j].embed.end(), e) !=
                    scales[j].embed.end())
                    throw SynthError("overlapping-grids: embed token " + e +
                                     " shared between scales");

    TaskBundle bundle;
    bundle.task_id = "architecture";
    bundle.direction = Direction::minimize;
    bundle.task_text =
        "Model architecture configuration: select a Transformer architecture from the "
        "candidate list to balance validation perplexity against latency (minimize the "
        "normalized sum of both).";
    bundle.fidelity_key = {"model_scale"};
    bundle.top_k = 5;

    Rng root(spec.seed);
    int scale_index = 0;
    for (const auto& scale : scales) {
        ExperimentTable table;
        table.experiment_id = scale.name;
        table.fidelity.metadata = {{"model_scale", scale.scale_rank}};
        table.fidelity.level = scale.level;
        table.env_text =
            (scale.level == FidelityLevel::low
                 ? "Small"
                 : scale.level == FidelityLevel::medium ? "Medium" : "Large") +
            std::string(" Transformer architecture search over embed dim, layers, per-layer "
                        "heads and MLP ratios, and a bias flag.");

        Dimension embed{"sample_embed_dim", DimensionKind::scalar_choice, scale.embed, ""};
        Dimension layers{"sample_n_layer", DimensionKind::scalar_choice, scale.layers, ""};
        Dimension heads{"sample_n_head", DimensionKind::per_layer_list, scale.heads,
                        "sample_n_layer"};
        Dimension mlp{"sample_mlp_ratio", DimensionKind::per_layer_list, mlp_tokens,
                      "sample_n_layer"};
        Dimension bias{"sample_bias", DimensionKind::scalar_choice, bias_tokens, ""};
        table.space.dimensions = {embed, layers, heads, mlp, bias};
        table.space.candidate_mode = CandidateMode::explicit_list;

        Rng rng = root.fork(static_cast<std::uint64_t>(scale_index++));
        const int n = std::max(spec.candidates_per_experiment, 3);
        std::vector<Configuration> candidates;
        std::vector<double> caps;
        const long l_min = std::stol(scale.layers.front());
        while (static_cast<int>(candidates.size()) < n) {
            Configuration config;
            // round-robin over embed tokens so every token appears
            const std::string& e_tok = scale.embed[candidates.size() % scale.embed.size()];
            const std::string& l_tok = scale.layers[rng.below(scale.layers.size())];
            const long layer_count = std::stol(l_tok);
            std::vector<std::string> head_list, mlp_list;
            double mlp_sum = 0.0;
            for (long t = 0; t < layer_count; ++t) {
                head_list.push_back(scale.heads[rng.below(scale.heads.size())]);
                const std::string& m = mlp_tokens[rng.below(mlp_tokens.size())];
                mlp_sum += std::stod(m);
                mlp_list.push_back(m);
            }
            config.values["sample_embed_dim"] = e_tok;
            config.values["sample_n_layer"] = l_tok;
            config.values["sample_n_head"] = head_list;
            config.values["sample_mlp_ratio"] = mlp_list;
            config.values["sample_bias"] = bias_tokens[rng.below(bias_tokens.size())];

            std::string canon = canonicalize(config, table.space);
            bool duplicate = false;
            for (const auto& existing : candidates)
                if (canonicalize(existing, table.space) == canon) duplicate = true;
            if (duplicate) continue;

            double cap = std::stod(e_tok) *
                         (1.0 + 0.03 * static_cast<double>(layer_count - l_min) +
                          0.02 * (mlp_sum / static_cast<double>(layer_count) - 2.0));
            candidates.push_back(std::move(config));
            caps.push_back(cap);
        }
        table.space.explicit_candidates = candidates;

        double cap_min = *std::min_element(caps.begin(), caps.end());
        double cap_max = *std::max_element(caps.begin(), caps.end());
        // ppl/max_ppl + lat/max_lat collapses to cap_min/cap + cap/cap_max,
        // minimized at sqrt(cap_min*cap_max), i.e. mid-capacity
        std::vector<double> noiseless(candidates.size());
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            noiseless[i] = cap_min / caps[i] + caps[i] / cap_max;
            lo = std::min(lo, noiseless[i]);
            hi = std::max(hi, noiseless[i]);
        }
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            double score = noiseless[i] + spec.noise_amplitude * (hi - lo) * rng.gaussian();
            double ppl = 18.0 + 12.0 * (cap_min / caps[i]);
            double latency = 0.1 * caps[i] / cap_min;
            detail::add_record(table, candidates[i], score, bundle.direction,
                               {{"perplexity", detail::format_fixed(ppl, 4)},
                                {"latency", detail::format_fixed(latency, 4)}});
        }
        bundle.experiments.push_back(std::move(table));
    }

    SynthResult result;
    result.bundle = std::move(bundle);
    result.manifest = detail::base_manifest(
        spec, "score = cap_min/cap + cap/cap_max + noise over sampled explicit candidates; "
              "cap = embed * (1 + 0.03*(layers-min) + 0.02*(mean_mlp-2))");
    return result;
}

// ---------------------------------------------------------------------------
// Task 3 surrogate: GRPO tuning (optimization landscape shift)
// ---------------------------------------------------------------------------

inline SynthResult gen_grpo_task(const SynthSpec& spec) {
    const std::vector<std::string> lr_tokens = {"1e-06", "5e-06", "1e-05"};
    const std::vector<std::string> mb_tokens = {"16", "32", "64"};
    const std::vector<std::string> kl_tokens = {"0", "0.001"};

    struct Env {
        std::string id, dataset;
        double training_size, epoch;
        FidelityLevel level;
    };
    const std::vector<Env> roster = {
        {"mmlu_chemistry-256-e15", "mmlu_chemistry", 256, 15, FidelityLevel::low},
        {"mmlu_history-256-e15", "mmlu_history", 256, 15, FidelityLevel::low},
        {"mmlu_physics-256-e15", "mmlu_physics", 256, 15, FidelityLevel::low},
        {"mmlu_math-256-e30", "mmlu_math", 256, 30, FidelityLevel::medium},
        {"gsm8k-768-e30", "gsm8k", 768, 30, FidelityLevel::high},
        {"gsm8k-1536-e30", "gsm8k", 1536, 30, FidelityLevel::high},
        {"dapo-768-e30", "dapo", 768, 30, FidelityLevel::high},
        {"dapo-1536-e30", "dapo", 1536, 30, FidelityLevel::high},
    };

    TaskBundle bundle;
    bundle.task_id = "grpo";
    bundle.direction = Direction::maximize;
    bundle.task_text =
        "GRPO tuning configuration: propose a learning rate, mini-batch size and KL weight "
        "to maximize the validation score of RL training.";
    bundle.fidelity_key = {"training_size", "epoch"};
    bundle.top_k = 3;

    // index-space optimum per tier; the test (high) optimum anchors the drift
    const std::array<int, 3> high_opt = {1, 1, 0};
    auto tier_opt = [&](FidelityLevel level) {
        std::array<int, 3> opt = high_opt;
        if (spec.shift > 0.0 && level != FidelityLevel::high) {
            int d = level == FidelityLevel::low ? 1 : 1;
            opt = {std::min(2, high_opt[0] + d), std::min(2, high_opt[1] + d),
                   std::min(1, high_opt[2] + d)};
        }
        return opt;
    };

    auto surface = [&](const std::array<int, 3>& opt, int il, int im, int ik) {
        double penalty = 0.08 * (il - opt[0]) * (il - opt[0]) +
                         0.05 * (im - opt[1]) * (im - opt[1]) +
                         0.10 * (ik - opt[2]) * (ik - opt[2]);
        // small tilt so argmax/argmin cells are unique
        return 0.8 - penalty - 0.004 * il - 0.002 * im - 0.003 * ik;
    };

    // reversed regime: train-tier optimum sits at the test surface's pessimum
    std::array<int, 3> reversed_opt = high_opt;
    if (spec.reversed) {
        double worst = std::numeric_limits<double>::infinity();
        for (int il = 0; il < 3; ++il)
            for (int im = 0; im < 3; ++im)
                for (int ik = 0; ik < 2; ++ik)
                    if (double v = surface(high_opt, il, im, ik); v < worst) {
                        worst = v;
                        reversed_opt = {il, im, ik};
                    }
    }

    Rng root(spec.seed);
    int experiment_index = 0;
    for (const auto& env : roster) {
        ExperimentTable table;
        table.experiment_id = env.id;
        table.fidelity.metadata = {{"training_size", env.training_size}, {"epoch", env.epoch}};
        table.fidelity.level = env.level;
        table.env_text = "the dataset is " + env.dataset + ", the model is " +
                         (env.level == FidelityLevel::high ? "Qwen2.5-3B-Instruct"
                                                           : "Qwen2.5-1.5B-Instruct") +
                         ", Note the Training epoch is " + detail::format_fixed(env.epoch, 0);
        Dimension lr{"lr", DimensionKind::scalar_choice, lr_tokens, ""};
        Dimension mb{"mb", DimensionKind::scalar_choice, mb_tokens, ""};
        Dimension kl{"kl", DimensionKind::scalar_choice, kl_tokens, ""};
        table.space.dimensions = {lr, mb, kl};

        std::array<int, 3> opt =
            spec.reversed && env.level != FidelityLevel::high ? reversed_opt : tier_opt(env.level);

        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int il = 0; il < 3; ++il)
            for (int im = 0; im < 3; ++im)
                for (int ik = 0; ik < 2; ++ik) {
                    double v = surface(opt, il, im, ik);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
        Rng rng = root.fork(static_cast<std::uint64_t>(experiment_index++));
        for (int il = 0; il < 3; ++il)
            for (int im = 0; im < 3; ++im)
                for (int ik = 0; ik < 2; ++ik) {
                    double score = surface(opt, il, im, ik) +
                                   spec.noise_amplitude * (hi - lo) * rng.gaussian();
                    Configuration config;
                    config.values["lr"] = lr_tokens[il];
                    config.values["mb"] = mb_tokens[im];
                    config.values["kl"] = kl_tokens[ik];
                    detail::add_record(table, std::move(config), score, bundle.direction,
                                       {{"critic_score_mean", detail::format_fixed(score, 4)}});
                }
        bundle.experiments.push_back(std::move(table));
    }

    SynthResult result;
    result.bundle = std::move(bundle);
    result.manifest = detail::base_manifest(
        spec, "score = 0.8 - weighted squared index distance to a tier-dependent optimal cell "
              "- tilt + noise");
    return result;
}

// ---------------------------------------------------------------------------
// Task 4 surrogate: data mixtures (configuration space shift)
// ---------------------------------------------------------------------------

inline SynthResult gen_mixture_task(const SynthSpec& spec) {
    const std::vector<std::string> domains = {
        "ratio_coconot_converted",
        "ratio_evol_codealpaca_heval_decontaminated",
        "ratio_flan_v2_converted",
        "ratio_no_robots_converted",
        "ratio_numinamath_tir_math_decontaminated",
        "ratio_oasst1_converted",
        "ratio_personahub_code_v2_34999",
        "ratio_personahub_ifdata_manual_seed_v3_29980",
        "ratio_personahub_math_v5_regen_149960",
        "ratio_tulu_hard_coded_repeated_10",
        "ratio_tulu_v3.9_aya_100k",
        "ratio_tulu_v3.9_open_math_2_gsm8k_50k",
        "ratio_tulu_v3.9_personahub_math_interm_algebra_20k",
        "ratio_tulu_v3.9_sciriff_10k",
        "ratio_tulu_v3.9_synthetic_finalresp_wildguardmixtrain_decontaminated_50k",
        "ratio_tulu_v3.9_table_gpt_5k",
        "ratio_tulu_v3.9_wildchat_100k",
        "ratio_tulu_v3.9_wildjailbreak_decontaminated_50k",
        "ratio_tulu-3-sft-personas-math-grade",
    };
    const std::size_t d = domains.size();

    struct Tier {
        std::string id;
        double params;
        FidelityLevel level;
    };
    const std::vector<Tier> tiers = {
        {"qwen2.5-500m", 0.5e9, FidelityLevel::low},
        {"qwen2.5-3b", 3e9, FidelityLevel::medium},
        {"qwen2.5-7b", 7e9, FidelityLevel::high},
    };

    TaskBundle bundle;
    bundle.task_id = "mixture";
    bundle.direction = Direction::maximize;
    bundle.task_text =
        "Data mixture configuration: select one of the precomputed training data mixtures "
        "(a point on the probability simplex over instruction datasets) to maximize the "
        "average overall performance score.";
    bundle.fidelity_key = {"params"};
    bundle.top_k = 5;

    Rng root(spec.seed);
    // tier-dependent ideal mixtures; the test ideal is the drift target
    auto make_ideal = [&](Rng rng, double drift_step) {
        std::vector<double> ideal(d);
        double sum = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            ideal[i] = -std::log(std::max(rng.uniform(), 1e-12)) *
                       (1.0 + drift_step * spec.shift * std::sin(static_cast<double>(i)));
            ideal[i] = std::max(ideal[i], 1e-6);
            sum += ideal[i];
        }
        for (auto& v : ideal) v /= sum;
        return ideal;
    };

    auto sample_candidate = [&](Rng& rng) {
        std::vector<double> pi(d);
        double sum = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            pi[i] = -std::log(std::max(rng.uniform(), 1e-12));
            sum += pi[i];
        }
        // round to 4 decimals in integer units, repair the residual on the
        // largest coordinate so the simplex constraint holds exactly
        std::vector<long> units(d);
        long total = 0;
        std::size_t argmax = 0;
        for (std::size_t i = 0; i < d; ++i) {
            units[i] = std::lround(pi[i] / sum * 10000.0);
            total += units[i];
            if (pi[i] > pi[argmax]) argmax = i;
        }
        units[argmax] += 10000 - total;
        return units;
    };

    int tier_index = 0;
    for (const auto& tier : tiers) {
        ExperimentTable table;
        table.experiment_id = tier.id;
        table.fidelity.metadata = {{"params", tier.params}};
        table.fidelity.level = tier.level;
        table.env_text = "The data mixture ratios on " + tier.id +
                         ", the count of model parameters is " +
                         detail::format_fixed(tier.params, 0);
        table.space.candidate_mode = CandidateMode::explicit_list;

        // the test tier draws from a fixed sub-stream so sparse-coverage
        // variants of the training tiers share one test tier per seed
        Rng rng = tier.level == FidelityLevel::high ? root.fork(1000) : root.fork(tier_index);
        ++tier_index;

        int n = std::max(spec.candidates_per_experiment, 2);
        if (tier.level != FidelityLevel::high)
            n = std::max(2, static_cast<int>(std::ceil(n * spec.coverage)));
        std::vector<std::vector<long>> candidate_units;
        while (static_cast<int>(candidate_units.size()) < n) {
            auto units = sample_candidate(rng);
            if (std::find(candidate_units.begin(), candidate_units.end(), units) ==
                candidate_units.end())
                candidate_units.push_back(std::move(units));
        }

        std::vector<Configuration> candidates;
        for (const auto& units : candidate_units) {
            Configuration config;
            for (std::size_t i = 0; i < d; ++i)
                config.values[domains[i]] = detail::format_ratio(units[i]);
            candidates.push_back(std::move(config));
        }
        for (std::size_t i = 0; i < d; ++i) {
            Dimension dim{domains[i], DimensionKind::scalar_choice, {}, ""};
            for (const auto& units : candidate_units) {
                std::string token = detail::format_ratio(units[i]);
                if (!dim.allows(token)) dim.allowed.push_back(token);
            }
            table.space.dimensions.push_back(std::move(dim));
        }
        table.space.explicit_candidates = candidates;

        double drift_step = tier.level == FidelityLevel::high
                                ? 0.0
                                : (tier.level == FidelityLevel::medium ? 0.3 : 0.6);
        std::vector<double> ideal = make_ideal(root.fork(500), drift_step);

        std::vector<double> noiseless(candidates.size());
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t c = 0; c < candidate_units.size(); ++c) {
            double dist2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                double diff = static_cast<double>(candidate_units[c][i]) / 10000.0 - ideal[i];
                dist2 += diff * diff;
            }
            noiseless[c] = 1.0 - 2.0 * dist2;
            lo = std::min(lo, noiseless[c]);
            hi = std::max(hi, noiseless[c]);
        }
        double range = hi > lo ? hi - lo : 1.0;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            double score = noiseless[c] + spec.noise_amplitude * range * rng.gaussian();
            detail::add_record(table, candidates[c], score, bundle.direction,
                               {{"metric_avg_id_ood", detail::format_fixed(score, 4)}});
        }
        bundle.experiments.push_back(std::move(table));
    }

    // Challenge-2 certification at generation time: tiers never share a
    // candidate (collisions on the rounded simplex are astronomically rare,
    // but a clash would silently break the shift property)
    for (std::size_t i = 0; i < bundle.experiments.size(); ++i)
        for (std::size_t j = i + 1; j < bundle.experiments.size(); ++j)
            for (const auto& [canon, record] : bundle.experiments[i].records)
                if (bundle.experiments[j].records.count(canon))
                    throw SynthError("candidate collision across tiers: " + canon);

    SynthResult result;
    result.bundle = std::move(bundle);
    result.manifest = detail::base_manifest(
        spec, "score = 1 - 2*||pi - ideal_tier||^2 + noise over simplex candidates rounded "
              "to 4 decimals");
    result.manifest["coverage"] = spec.coverage;
    return result;
}

inline SynthResult generate(const SynthSpec& spec) {
    if (spec.task_kind == "pretrain_hp" || spec.task_kind == "pretrain")
        return gen_pretrain_task(spec);
    if (spec.task_kind == "architecture" || spec.task_kind == "arch")
        return gen_arch_task(spec);
    if (spec.task_kind == "grpo") return gen_grpo_task(spec);
    if (spec.task_kind == "mixture") return gen_mixture_task(spec);
    throw SynthError("unknown task kind: " + spec.task_kind);
}

} // namespace configym
