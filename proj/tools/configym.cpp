// configym: generate lookup bundles, curate prompt samples, run policies and
// agents against episodes, aggregate reports, evaluate the cost model, and
// serve the gym over HTTP.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "configym/baselines.hpp"
#include "configym/cost.hpp"
#include "configym/curation.hpp"
#include "configym/protocol.hpp"
#include "configym/report.hpp"
#include "configym/server.hpp"
#include "configym/synth.hpp"
#include "configym/transport.hpp"

namespace fs = std::filesystem;
using namespace configym;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

TaskBundle load_bundle_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open bundle " + path.string());
    return load_bundle(in);
}

std::string hex64(std::uint64_t value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// Demos for an experiment: everything strictly below its tier (medium
// targets see the low tier, high targets see the medium tier).
std::vector<std::string> demo_ids_for(const TaskBundle& bundle,
                                      const std::string& experiment_id) {
    FidelitySplit split = order_by_fidelity(bundle);
    auto contains = [&](const std::vector<std::string>& v) {
        return std::find(v.begin(), v.end(), experiment_id) != v.end();
    };
    if (contains(split.high)) return split.medium;
    if (contains(split.medium)) return split.low;
    return {};
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

int cmd_gen(const SynthSpec& spec, const std::string& out_dir) {
    SynthResult result = generate(spec);
    fs::create_directories(out_dir);
    fs::path bundle_path = fs::path(out_dir) / (result.bundle.task_id + ".bundle.json");
    fs::path manifest_path = fs::path(out_dir) / (result.bundle.task_id + ".manifest.json");
    write_file(bundle_path, bundle_to_json(result.bundle).dump(2) + "\n");
    write_file(manifest_path, result.manifest.dump(2) + "\n");
    std::cout << "wrote " << bundle_path.string() << " (" << result.bundle.experiments.size()
              << " experiments)\n";
    std::cout << "wrote " << manifest_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// curate
// ---------------------------------------------------------------------------

int cmd_curate(const std::string& bundle_path, const std::string& out_dir,
               const SampleOptions& options) {
    TaskBundle bundle = load_bundle_file(bundle_path);
    FidelitySplit split = order_by_fidelity(bundle);
    std::vector<CurationSample> samples = build_samples(split, options);
    fs::create_directories(out_dir);
    fs::path out_path = fs::path(out_dir) / (bundle.task_id + ".samples.jsonl");
    std::string text;
    for (const auto& sample : samples) text += sample_to_json(sample, bundle).dump() + "\n";
    write_file(out_path, text);
    std::cout << "wrote " << out_path.string() << " (" << samples.size() << " samples)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunSpec {
    std::string bundle_path;
    std::vector<std::string> experiments; // empty = all
    std::string policy;                   // baseline or scripted agent name
    std::string agent_cmd;
    std::string agent_host;
    int agent_port = 0;
    std::vector<int> budgets = {1};
    std::vector<std::uint64_t> seeds = {0};
    bool matching = true;
    std::string reward_mode = "strict";
    bool no_demos = false;
    bool no_rich_text = false;
    double malformation_rate = 0.32;
    std::string out_dir = "runs";
    int jobs = 1;
    int timeout_seconds = 300;
    std::string gym_host;
    int gym_port = 0;
};

struct EpisodeJob {
    std::string experiment_id;
    int budget = 0;
    std::uint64_t seed = 0;
};

bool is_scripted(const std::string& name) {
    return name == "optimal_replay" || name == "noisy_format";
}

// One manifest row identifies an episode; its hash is both the episode id
// and the log filename, so identical reruns are no-ops.
std::string manifest_row(const RunSpec& spec, const TaskBundle& bundle, const EpisodeJob& job) {
    std::string method = !spec.agent_cmd.empty() ? "cmd:" + spec.agent_cmd
                         : spec.agent_port != 0
                             ? "http:" + spec.agent_host + ":" + std::to_string(spec.agent_port)
                             : spec.policy;
    return bundle.task_id + "|" + job.experiment_id + "|" + method + "|b" +
           std::to_string(job.budget) + "|s" + std::to_string(job.seed) + "|m" +
           (spec.matching ? "on" : "off") + "|" + spec.reward_mode + "|d" +
           (spec.no_demos ? "0" : "1") + "|r" + (spec.no_rich_text ? "0" : "1");
}

std::string run_policy_episode_local(const RunSpec& spec, const TaskBundle& bundle,
                                     const EpisodeJob& job, const std::string& episode_id) {
    std::vector<const ExperimentTable*> demos;
    if (!spec.no_demos)
        for (const auto& id : demo_ids_for(bundle, job.experiment_id))
            demos.push_back(bundle.find_experiment(id));
    auto policy = make_policy({spec.policy, job.seed}, demos);

    EpisodeOptions options;
    options.matching = spec.matching;
    EpisodeState state = init_episode(bundle, job.experiment_id, job.budget, options);
    TaskBounds bounds = bounds_for(bundle, *state.table);
    while (!state.finished()) step(state, policy->propose(state));
    TrajectoryRecord record = finalize_episode(
        state, bounds, reward_mode_from_string(spec.reward_mode), episode_id);
    record.policy = spec.policy;
    return episode_log_text(record, bounds);
}

// Same episode, but every turn goes through a running gym server; the
// policy is driven off a local shadow state that mirrors the server's.
std::string run_policy_episode_http(const RunSpec& spec, const TaskBundle& bundle,
                                    const EpisodeJob& job, const std::string& episode_id) {
    std::vector<const ExperimentTable*> demos;
    if (!spec.no_demos)
        for (const auto& id : demo_ids_for(bundle, job.experiment_id))
            demos.push_back(bundle.find_experiment(id));
    auto policy = make_policy({spec.policy, job.seed}, demos);

    httplib::Client client(spec.gym_host, spec.gym_port);
    client.set_read_timeout(spec.timeout_seconds, 0);
    ordered_json create = ordered_json::object();
    create["task"] = bundle.task_id;
    create["env"] = job.experiment_id;
    create["budget"] = job.budget;
    create["episode_id"] = episode_id;
    create["matching"] = spec.matching;
    create["reward_mode"] = spec.reward_mode;
    create["policy"] = spec.policy;
    auto res = client.Post("/episodes", create.dump(), "application/json");
    if (!res || res->status != 200)
        throw std::runtime_error("gym endpoint rejected episode creation" +
                                 (res ? ": " + res->body : std::string()));

    EpisodeOptions options;
    options.matching = spec.matching;
    EpisodeState shadow = init_episode(bundle, job.experiment_id, job.budget, options);
    while (!shadow.finished()) {
        std::string proposal = policy->propose(shadow);
        ordered_json body = ordered_json::object();
        body["config"] = proposal;
        auto step_res = client.Post("/episodes/" + episode_id + "/step", body.dump(),
                                    "application/json");
        if (!step_res || step_res->status != 200)
            throw std::runtime_error("gym endpoint rejected step" +
                                     (step_res ? ": " + step_res->body : std::string()));
        step(shadow, proposal);
    }
    auto log_res = client.Get("/episodes/" + episode_id + "/log");
    if (!log_res || log_res->status != 200)
        throw std::runtime_error("gym endpoint did not return the episode log");
    return log_res->body;
}

std::string run_agent_episode(const RunSpec& spec, const TaskBundle& bundle,
                              const EpisodeJob& job, const std::string& episode_id,
                              std::string* transcript_out) {
    const ExperimentTable* table = bundle.find_experiment(job.experiment_id);
    if (table == nullptr) throw std::runtime_error("unknown experiment " + job.experiment_id);

    CurationSample sample;
    sample.role = SampleRole::test;
    sample.target_experiment_id = job.experiment_id;
    sample.budget = job.budget;
    sample.top_k = bundle.top_k;
    if (!spec.no_demos) sample.demo_experiment_ids = demo_ids_for(bundle, job.experiment_id);

    std::unique_ptr<Agent> agent;
    std::string label;
    if (!spec.agent_cmd.empty()) {
        agent = std::make_unique<SubprocessAgent>(spec.agent_cmd, spec.timeout_seconds);
        label = "agent";
    } else if (spec.agent_port != 0) {
        agent = std::make_unique<HttpAgent>(spec.agent_host, spec.agent_port,
                                            spec.timeout_seconds);
        label = "agent";
    } else {
        ScriptedAgentSpec scripted;
        scripted.kind = spec.policy;
        scripted.malformation_rate = spec.malformation_rate;
        scripted.seed = job.seed;
        agent = scripted_agent(scripted, *table);
        label = spec.policy;
    }

    AgentRunParams params;
    params.episode_id = episode_id;
    params.policy_label = label;
    params.reward_mode = reward_mode_from_string(spec.reward_mode);
    params.options.matching = spec.matching;
    AgentRunResult result = run_episode_with_agent(
        *agent, bundle, job.experiment_id, job.budget, render_context(sample, bundle), params);
    if (transcript_out) *transcript_out = transcript_log_text(result);
    TaskBounds bounds = bounds_for(bundle, *table);
    return episode_log_text(result.record, bounds);
}

int cmd_run(RunSpec spec) {
    TaskBundle bundle = load_bundle_file(spec.bundle_path);
    if (spec.no_rich_text)
        for (auto& table : bundle.experiments) table.redact = true;
    std::vector<std::string> experiments = spec.experiments;
    if (experiments.empty())
        for (const auto& table : bundle.experiments)
            experiments.push_back(table.experiment_id);

    std::vector<EpisodeJob> jobs;
    for (const auto& experiment : experiments)
        for (int budget : spec.budgets)
            for (std::uint64_t seed : spec.seeds) jobs.push_back({experiment, budget, seed});

    fs::create_directories(spec.out_dir);
    std::atomic<std::size_t> cursor{0};
    std::atomic<int> failures{0};
    std::atomic<int> written{0};
    std::mutex stderr_mutex;

    auto worker = [&]() {
        while (true) {
            std::size_t index = cursor.fetch_add(1);
            if (index >= jobs.size()) return;
            const EpisodeJob& job = jobs[index];
            std::string row = manifest_row(spec, bundle, job);
            std::string episode_id = "ep-" + hex64(fnv1a64(row));
            fs::path log_path = fs::path(spec.out_dir) / (episode_id + ".jsonl");
            if (fs::exists(log_path)) continue; // content-addressed: rerun is a no-op
            try {
                std::string log_text, transcript;
                bool agent_mode = !spec.agent_cmd.empty() || spec.agent_port != 0 ||
                                  is_scripted(spec.policy);
                if (agent_mode)
                    log_text = run_agent_episode(spec, bundle, job, episode_id, &transcript);
                else if (spec.gym_port != 0)
                    log_text = run_policy_episode_http(spec, bundle, job, episode_id);
                else
                    log_text = run_policy_episode_local(spec, bundle, job, episode_id);
                write_file(log_path, log_text);
                if (!transcript.empty())
                    write_file(fs::path(spec.out_dir) / (episode_id + ".transcript.jsonl"),
                               transcript);
                ++written;
            } catch (const std::exception& e) {
                // per-episode failures never abort the batch
                std::lock_guard<std::mutex> lock(stderr_mutex);
                std::cerr << "episode " << row << " failed: " << e.what() << "\n";
                ++failures;
            }
        }
    };

    int n_threads = std::max(1, spec.jobs);
    std::vector<std::thread> pool;
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::cout << "episodes: " << jobs.size() << ", written: " << written.load()
              << ", failed: " << failures.load() << "\n";
    return failures.load() == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& logs_dir, const std::string& out_dir) {
    std::vector<EpisodeSummary> episodes;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(logs_dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 6 &&
            name.substr(name.size() - 6) == ".jsonl" &&
            name.find(".transcript.") == std::string::npos)
            paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& path : paths) episodes.push_back(parse_episode_log(read_file(path)));

    AggregateReport report = aggregate_report(std::move(episodes));
    std::string table = report_table(report);
    std::cout << table;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "report.txt", table);
        write_file(fs::path(out_dir) / "report.csv", report_csv(report));
        write_file(fs::path(out_dir) / "report.json", report_json(report).dump(2) + "\n");
        write_file(fs::path(out_dir) / "regret_vs_budget.svg", report_plot_svg(report));
        std::cout << "wrote report.{txt,csv,json} and regret_vs_budget.svg under " << out_dir
                  << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

int cmd_cost(const std::string& params_path, long max_tasks, const std::string& out_path) {
    json doc = json::parse(read_file(params_path));
    CostModelParams params = cost_params_from_json(doc);
    std::string text = cost_report_json(params, max_tasks).dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) write_file(out_path, text);
    return 0;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

int cmd_serve(std::vector<std::string> bundle_paths, const std::string& bundle_dir,
              const std::string& host, int port) {
    if (!bundle_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(bundle_dir)) {
            const std::string name = entry.path().filename().string();
            if (entry.is_regular_file() && name.size() > 12 &&
                name.substr(name.size() - 12) == ".bundle.json")
                bundle_paths.push_back(entry.path().string());
        }
        std::sort(bundle_paths.begin(), bundle_paths.end());
    }
    if (bundle_paths.empty()) {
        std::cerr << "no bundles to serve\n";
        return 1;
    }
    std::vector<TaskBundle> bundles;
    for (const auto& path : bundle_paths) bundles.push_back(load_bundle_file(path));
    GymServer server(std::move(bundles));
    std::cout << "serving " << bundle_paths.size() << " task(s) on " << host << ":" << port
              << "\n";
    return server.listen(host, port) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

int cmd_replay(const std::string& log_path, const std::string& bundle_path) {
    TaskBundle bundle = load_bundle_file(bundle_path);
    std::string text = read_file(log_path);
    EpisodeSummary logged = parse_episode_log(text);
    TrajectoryRecord replayed = replay_episode_log(text, bundle);
    bool ok = logged.reward == replayed.reward && logged.regret == replayed.regret &&
              logged.execution_rate == replayed.metrics.execution_rate &&
              logged.unique_config_rate == replayed.metrics.unique_config_rate;
    std::cout << (ok ? "replay OK" : "replay MISMATCH") << ": reward " << logged.reward
              << " -> " << replayed.reward << ", regret " << logged.regret << " -> "
              << replayed.regret << "\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"configym: a multi-fidelity experiment-configuration gym over lookup tables"};
    app.require_subcommand(1);

    // gen
    SynthSpec synth_spec;
    std::string gen_out = ".";
    auto* gen = app.add_subcommand("gen", "generate a synthetic task bundle");
    gen->add_option("--task", synth_spec.task_kind,
                    "architecture | pretrain_hp | grpo | mixture")
        ->required()
        ->envname("CONFIGYM_TASK");
    gen->add_option("--seed", synth_spec.seed, "generator seed")->envname("CONFIGYM_SEED");
    gen->add_option("--out", gen_out, "output directory")->envname("CONFIGYM_OUT");
    gen->add_option("--noise", synth_spec.noise_amplitude,
                    "noise amplitude as a fraction of the score range");
    gen->add_option("--shift", synth_spec.shift, "cross-fidelity drift scale (0 = control)");
    gen->add_option("--candidates", synth_spec.candidates_per_experiment,
                    "explicit candidates per experiment");
    gen->add_option("--coverage", synth_spec.coverage,
                    "mixture: fraction of train candidates kept");
    gen->add_flag("--reversed", synth_spec.reversed,
                  "grpo: place the train optimum at the test pessimum");
    gen->add_option("--lr-grid", synth_spec.lr_grid,
                    "pretrain: restrict the learning-rate grid to these tokens");

    // curate
    std::string curate_bundle, curate_out = ".";
    SampleOptions sample_options;
    std::string demo_tiers = "medium";
    auto* curate = app.add_subcommand("curate", "build train/test prompt samples");
    curate->add_option("--bundle", curate_bundle, "bundle file")->required();
    curate->add_option("--out", curate_out, "output directory")->envname("CONFIGYM_OUT");
    curate->add_option("--budgets", sample_options.budgets, "episode budgets");
    curate->add_option("--top-k", sample_options.top_k, "demo depth per block");
    curate->add_option("--demo-tiers", demo_tiers,
                       "test-sample demo tiers: medium | low+medium");
    curate->add_flag("--no-demos", sample_options.no_demos, "render without demo blocks");

    // run
    RunSpec run_spec;
    std::string matching_flag = "on", agent_endpoint, gym_endpoint;
    auto* run = app.add_subcommand("run", "run policies or agents over episodes");
    run->add_option("--bundle", run_spec.bundle_path, "bundle file")->required();
    run->add_option("--experiment", run_spec.experiments,
                    "experiment ids (default: every experiment)");
    run->add_option("--policy", run_spec.policy,
                    "random | topk_warmstart | exhaustive | greedy_local | optimal_replay | "
                    "noisy_format")
        ->envname("CONFIGYM_POLICY");
    run->add_option("--agent-cmd", run_spec.agent_cmd,
                    "subprocess agent command speaking the line protocol");
    run->add_option("--agent-endpoint", agent_endpoint, "HTTP agent endpoint host:port");
    run->add_option("--budget", run_spec.budgets, "episode budgets")
        ->envname("CONFIGYM_BUDGET");
    run->add_option("--seed", run_spec.seeds, "episode seeds")->envname("CONFIGYM_SEED");
    run->add_option("--matching", matching_flag, "most-similar matching: on | off")
        ->envname("CONFIGYM_MATCHING");
    run->add_option("--reward-mode", run_spec.reward_mode, "strict | lenient")
        ->envname("CONFIGYM_REWARD_MODE");
    run->add_flag("--no-demos", run_spec.no_demos, "ablation: no demo blocks in prompts");
    run->add_flag("--no-rich-text", run_spec.no_rich_text,
                  "ablation: withhold environment descriptions");
    run->add_option("--malformation-rate", run_spec.malformation_rate,
                    "noisy_format corruption probability");
    run->add_option("--out", run_spec.out_dir, "log directory")->envname("CONFIGYM_OUT");
    run->add_option("--jobs", run_spec.jobs, "parallel episodes")->envname("CONFIGYM_JOBS");
    run->add_option("--timeout", run_spec.timeout_seconds, "agent reply timeout in seconds");
    run->add_option("--gym-endpoint", gym_endpoint,
                    "drive episodes through a running gym server host:port");

    // report
    std::string report_logs, report_out;
    auto* report = app.add_subcommand("report", "aggregate episode logs");
    report->add_option("--logs", report_logs, "log directory")->required();
    report->add_option("--out", report_out, "report output directory")
        ->envname("CONFIGYM_OUT");

    // cost
    std::string cost_params, cost_out;
    long cost_max_tasks = 30;
    auto* cost = app.add_subcommand("cost", "evaluate the amortized-compute model");
    cost->add_option("--params", cost_params, "cost parameter JSON file")->required();
    cost->add_option("--max-tasks", cost_max_tasks, "curve length");
    cost->add_option("--out", cost_out, "write the report here too");

    // serve
    std::vector<std::string> serve_bundles;
    std::string serve_dir, serve_host = "127.0.0.1";
    int serve_port = 8080;
    auto* serve = app.add_subcommand("serve", "serve the gym over HTTP");
    serve->add_option("--bundle", serve_bundles, "bundle files");
    serve->add_option("--dir", serve_dir, "directory of *.bundle.json files");
    serve->add_option("--host", serve_host, "bind host")->envname("CONFIGYM_HOST");
    serve->add_option("--port", serve_port, "bind port")->envname("CONFIGYM_PORT");

    // replay
    std::string replay_log, replay_bundle;
    auto* replay = app.add_subcommand("replay", "recompute a log and verify its metrics");
    replay->add_option("--log", replay_log, "episode log file")->required();
    replay->add_option("--bundle", replay_bundle, "bundle file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(synth_spec, gen_out);
        if (curate->parsed()) {
            if (demo_tiers == "medium")
                sample_options.test_demo_tiers = TestDemoTiers::medium_only;
            else if (demo_tiers == "low+medium")
                sample_options.test_demo_tiers = TestDemoTiers::low_and_medium;
            else
                throw std::runtime_error("unknown --demo-tiers value: " + demo_tiers);
            return cmd_curate(curate_bundle, curate_out, sample_options);
        }
        if (run->parsed()) {
            if (matching_flag == "on") run_spec.matching = true;
            else if (matching_flag == "off") run_spec.matching = false;
            else throw std::runtime_error("--matching must be on or off");
            auto split_endpoint = [](const std::string& endpoint, std::string& host,
                                     int& port) {
                std::size_t colon = endpoint.rfind(':');
                if (colon == std::string::npos)
                    throw std::runtime_error("endpoint must be host:port: " + endpoint);
                host = endpoint.substr(0, colon);
                port = std::stoi(endpoint.substr(colon + 1));
            };
            if (!agent_endpoint.empty())
                split_endpoint(agent_endpoint, run_spec.agent_host, run_spec.agent_port);
            if (!gym_endpoint.empty())
                split_endpoint(gym_endpoint, run_spec.gym_host, run_spec.gym_port);
            if (run_spec.policy.empty() && run_spec.agent_cmd.empty() &&
                run_spec.agent_port == 0)
                throw std::runtime_error(
                    "one of --policy, --agent-cmd or --agent-endpoint is required");
            return cmd_run(std::move(run_spec));
        }
        if (report->parsed()) return cmd_report(report_logs, report_out);
        if (cost->parsed()) return cmd_cost(cost_params, cost_max_tasks, cost_out);
        if (serve->parsed()) return cmd_serve(serve_bundles, serve_dir, serve_host, serve_port);
        if (replay->parsed()) return cmd_replay(replay_log, replay_bundle);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
