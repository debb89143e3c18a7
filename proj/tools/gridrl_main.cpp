#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridrl/checkpoint.hpp"
#include "gridrl/env.hpp"
#include "gridrl/eval.hpp"
#include "gridrl/grid_model.hpp"
#include "gridrl/ppo.hpp"
#include "gridrl/run_config.hpp"
#include "gridrl/scenario.hpp"
#include "gridrl/tda.hpp"

namespace {

using namespace gridrl;

constexpr int kExitGeneral = 1;
constexpr int kExitScenarioExhaustion = 2;
constexpr int kExitNonFiniteLoss = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitHashMismatch = 5;

std::string default_out_dir() {
    if (const char* env_out = std::getenv("GRID_RL_OUT")) return env_out;
    return ".";
}

NetworkGraph load_network_file(const std::string& path) {
    return NetworkGraph::load(read_text_file(path));
}

struct GenScenariosArgs {
    std::string network;
    int count = 100;
    std::vector<int> test_counts;
    std::uint64_t seed = 0;
    std::string out = default_out_dir();
    int centers = 25;
    int max_tries_factor = 200;
};

int cmd_gen_scenarios(const GenScenariosArgs& args) {
    NetworkGraph g = load_network_file(args.network);
    Env env(g, EnvConfig{}, SolverConfig{}, WeightsMode::Plain);

    std::vector<int> centers = select_centers(g, std::min(args.centers, g.n()), args.seed);
    Rng rng = make_stream(args.seed, "scenario-gen");

    int need = args.count;
    for (int t : args.test_counts) need += t;

    std::vector<OutageScenario> accepted;
    std::set<std::vector<int>> seen;
    long generated = 0, rejected_invalid = 0, rejected_duplicate = 0;
    long max_tries = static_cast<long>(need) * args.max_tries_factor;
    while (static_cast<int>(accepted.size()) < need) {
        if (generated >= max_tries)
            throw ScenarioExhaustion("exhausted " + std::to_string(max_tries) +
                                     " attempts while collecting " + std::to_string(need) +
                                     " distinct valid scenarios");
        auto batch = generate_scenarios(g, centers, 64, rng);
        for (OutageScenario& sc : batch) {
            ++generated;
            if (static_cast<int>(accepted.size()) >= need) break;
            if (!seen.insert(sc.failed_lines).second) {
                ++rejected_duplicate;
                continue;
            }
            if (!validate_scenario(sc, env)) {
                seen.erase(sc.failed_lines);
                ++rejected_invalid;
                continue;
            }
            accepted.push_back(std::move(sc));
        }
    }

    std::filesystem::create_directories(args.out);
    std::vector<OutageScenario> train(accepted.begin(), accepted.begin() + args.count);
    save_scenarios(args.out + "/train.scn", train, g.content_hash());
    int offset = args.count;
    for (std::size_t i = 0; i < args.test_counts.size(); ++i) {
        std::vector<OutageScenario> test(accepted.begin() + offset,
                                         accepted.begin() + offset + args.test_counts[i]);
        save_scenarios(args.out + "/test" + std::to_string(i + 1) + ".scn", test, g.content_hash());
        offset += args.test_counts[i];
    }

    std::printf("train=%d", args.count);
    for (std::size_t i = 0; i < args.test_counts.size(); ++i)
        std::printf(" test%zu=%d", i + 1, args.test_counts[i]);
    std::printf(" generated=%ld rejected_invalid=%ld rejected_duplicate=%ld rejection_rate=%s\n",
                generated, rejected_invalid, rejected_duplicate,
                format_double(generated > 0
                                  ? static_cast<double>(rejected_invalid + rejected_duplicate) /
                                        static_cast<double>(generated)
                                  : 0.0)
                    .c_str());
    return 0;
}

struct PhWeightsArgs {
    std::string network;
    std::string scenarios;
    int k = 2;
    std::string out;
};

int cmd_ph_weights(const PhWeightsArgs& args) {
    NetworkGraph g = load_network_file(args.network);
    auto cache = std::make_shared<PhCache>();
    auto defaults = g.default_switch_states();

    int topologies = 1;
    ph_edge_weights(g, defaults, {}, args.k, cache.get());
    if (!args.scenarios.empty()) {
        auto scenarios = load_scenarios(args.scenarios, g.content_hash());
        std::set<std::uint64_t> sigs;
        for (const OutageScenario& sc : scenarios) {
            std::set<int> outage(sc.failed_lines.begin(), sc.failed_lines.end());
            TopologicalWeights tw = ph_edge_weights(g, defaults, outage, args.k, cache.get());
            if (sigs.insert(tw.topology_signature).second) ++topologies;
        }
    }
    cache->save(args.out, g.content_hash());
    std::printf("topologies=%d k=%d out=%s\n", topologies, args.k, args.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string resume;
    std::string variant;
    std::string out;
    std::string ph_cache;
    std::int64_t seed = -1;
    int workers = 0;
};

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = load_run_config(args.config);
    if (!args.variant.empty()) cfg.variant = args.variant;
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (args.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(args.seed);
        cfg.train.seed = cfg.seed;
    }
    if (args.workers > 0) {
        cfg.workers = args.workers;
        cfg.train.workers = args.workers;
    }

    NetworkGraph g = load_network_file(cfg.network_path);
    auto scenarios = load_scenarios(cfg.train_scenarios_path, g.content_hash());

    WeightsMode mode = cfg.variant == "plain" ? WeightsMode::Plain : WeightsMode::Ph;
    auto cache = std::make_shared<PhCache>();
    if (!args.ph_cache.empty()) cache->load(args.ph_cache, g.content_hash());

    Env env(g, cfg.env, cfg.solver, mode, cache);
    GcapcnPolicy policy(g, cfg.gcapcn, cfg.seed);
    PpoTrainer trainer(policy, env, scenarios, cfg.train);
    if (!args.resume.empty()) trainer.resume(args.resume);

    trainer.train(cfg.out_dir, [](std::int64_t steps, const UpdateMetrics& m) {
        std::fprintf(stderr, "steps=%lld ratio=%.4f clip=%.3f ploss=%.4f vloss=%.4f entropy=%.4f\n",
                     static_cast<long long>(steps), m.mean_ratio, m.clip_fraction, m.policy_loss,
                     m.value_loss, m.entropy);
    });

    const auto& eps = trainer.episodes();
    double final_ma = 0.0;
    if (!eps.empty()) {
        int window = std::min<int>(cfg.train.ma_window, static_cast<int>(eps.size()));
        for (std::size_t i = eps.size() - window; i < eps.size(); ++i) final_ma += eps[i].reward;
        final_ma /= window;
    }
    std::printf("steps=%lld episodes=%zu final_moving_avg=%s checkpoint=%s/checkpoint.ckpt curve=%s/curve.csv\n",
                static_cast<long long>(trainer.steps_done()), eps.size(),
                format_double(final_ma).c_str(), cfg.out_dir.c_str(), cfg.out_dir.c_str());
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string network;
    std::string scenarios;
    std::string out = default_out_dir();
    int workers = 1;
};

int cmd_eval(const EvalArgs& args) {
    PolicyCheckpoint ck = load_checkpoint_file(args.checkpoint);
    NetworkGraph g = load_network_file(args.network);
    if (ck.network_hash != g.content_hash())
        throw HashMismatch("checkpoint was trained on a different network file");
    auto scenarios = load_scenarios(args.scenarios, g.content_hash());

    GcapcnPolicy policy = instantiate_policy(ck);
    Env env(g, ck.env_cfg, ck.solver_cfg, ck.variant, std::make_shared<PhCache>());
    auto metrics = evaluate(policy, scenarios, env, args.workers);
    MetricSummary s = summarize(metrics);

    std::filesystem::create_directories(args.out);
    export_metrics(args.out + "/metrics.csv", metrics);
    export_summary(args.out + "/summary.csv", s);
    std::printf("n=%d reward=%s+/-%s e_supp=%s+/-%s v_viol=%s+/-%s\n", s.n,
                format_double(s.mean_reward).c_str(), format_double(s.std_reward).c_str(),
                format_double(s.mean_e_supp).c_str(), format_double(s.std_e_supp).c_str(),
                format_double(s.mean_v_viol).c_str(), format_double(s.std_v_viol).c_str());
    return 0;
}

struct CompareArgs {
    std::string checkpoint_a;
    std::string checkpoint_b;
    std::string name_a = "model_a";
    std::string name_b = "model_b";
    std::string network;
    std::string scenarios;
    std::string out = default_out_dir();
    int workers = 1;
};

int cmd_compare(const CompareArgs& args) {
    PolicyCheckpoint ck_a = load_checkpoint_file(args.checkpoint_a);
    PolicyCheckpoint ck_b = load_checkpoint_file(args.checkpoint_b);
    NetworkGraph g = load_network_file(args.network);
    if (ck_a.network_hash != g.content_hash() || ck_b.network_hash != g.content_hash())
        throw HashMismatch("checkpoint was trained on a different network file");
    auto scenarios = load_scenarios(args.scenarios, g.content_hash());

    GcapcnPolicy policy_a = instantiate_policy(ck_a);
    GcapcnPolicy policy_b = instantiate_policy(ck_b);
    auto cache = std::make_shared<PhCache>();
    Env env_a(g, ck_a.env_cfg, ck_a.solver_cfg, ck_a.variant, cache);
    Env env_b(g, ck_b.env_cfg, ck_b.solver_cfg, ck_b.variant, cache);
    auto metrics_a = evaluate(policy_a, scenarios, env_a, args.workers);
    auto metrics_b = evaluate(policy_b, scenarios, env_b, args.workers);

    std::filesystem::create_directories(args.out);
    export_metrics(args.out + "/metrics_a.csv", metrics_a);
    export_metrics(args.out + "/metrics_b.csv", metrics_b);
    std::string report = comparison_report(args.name_a, metrics_a, args.name_b, metrics_b);
    write_text_file(args.out + "/report.txt", report);
    std::fputs(report.c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"topology-aware graph RL for distribution-network outage management"};
    app.require_subcommand(1);

    GenScenariosArgs gen_args;
    auto* gen = app.add_subcommand("gen-scenarios", "generate and validate outage scenarios");
    gen->add_option("--network", gen_args.network, "network file")->required();
    gen->add_option("--count", gen_args.count, "training scenario count")->required();
    gen->add_option("--test-count", gen_args.test_counts, "disjoint test set size (repeatable)");
    gen->add_option("--seed", gen_args.seed, "root seed");
    gen->add_option("--out", gen_args.out, "output directory");
    gen->add_option("--centers", gen_args.centers, "number of outage centers");
    gen->add_option("--max-tries-factor", gen_args.max_tries_factor,
                    "attempts per requested scenario before giving up");

    PhWeightsArgs ph_args;
    auto* phw = app.add_subcommand("ph-weights", "precompute topological edge weights");
    phw->add_option("--network", ph_args.network, "network file")->required();
    phw->add_option("--scenarios", ph_args.scenarios, "also compute post-outage topologies");
    phw->add_option("--k", ph_args.k, "hop radius");
    phw->add_option("--out", ph_args.out, "weight cache file")->required();

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "run PPO training");
    tr->add_option("--config", train_args.config, "run config file")->required();
    tr->add_option("--resume", train_args.resume, "checkpoint to resume from");
    tr->add_option("--variant", train_args.variant, "ph or plain")
        ->check(CLI::IsMember({"ph", "plain"}));
    tr->add_option("--out", train_args.out, "output directory");
    tr->add_option("--seed", train_args.seed, "override config seed");
    tr->add_option("--workers", train_args.workers, "rollout workers");
    tr->add_option("--ph-cache", train_args.ph_cache, "preload a ph-weights cache");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on scenarios");
    ev->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
    ev->add_option("--network", eval_args.network, "network file")->required();
    ev->add_option("--scenarios", eval_args.scenarios, "scenario file")->required();
    ev->add_option("--out", eval_args.out, "output directory");
    ev->add_option("--workers", eval_args.workers, "parallel eval workers");

    CompareArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "compare two checkpoints on matched scenarios");
    cmp->add_option("--checkpoint-a", cmp_args.checkpoint_a, "first checkpoint")->required();
    cmp->add_option("--checkpoint-b", cmp_args.checkpoint_b, "second checkpoint")->required();
    cmp->add_option("--name-a", cmp_args.name_a, "label for the first model");
    cmp->add_option("--name-b", cmp_args.name_b, "label for the second model");
    cmp->add_option("--network", cmp_args.network, "network file")->required();
    cmp->add_option("--scenarios", cmp_args.scenarios, "scenario file")->required();
    cmp->add_option("--out", cmp_args.out, "output directory");
    cmp->add_option("--workers", cmp_args.workers, "parallel eval workers");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_scenarios(gen_args);
        if (phw->parsed()) return cmd_ph_weights(ph_args);
        if (tr->parsed()) return cmd_train(train_args);
        if (ev->parsed()) return cmd_eval(eval_args);
        if (cmp->parsed()) return cmd_compare(cmp_args);
    } catch (const ScenarioExhaustion& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitScenarioExhaustion;
    } catch (const NonFiniteLoss& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNonFiniteLoss;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCheckpoint;
    } catch (const HashMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitHashMismatch;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitGeneral;
    }
    return 0;
}
