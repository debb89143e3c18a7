#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gridrl/common.hpp"
#include "gridrl/ppo.hpp"

using namespace gridrl;

namespace {

std::string data_path(const std::string& rel) { return std::string(GRIDRL_DATA_DIR) + "/" + rel; }

NetworkGraph toy() { return NetworkGraph::load(read_text_file(data_path("networks/toy15.net"))); }

std::vector<OutageScenario> small_pool(const NetworkGraph& g) {
    auto centers = select_centers(g, 8, 0);
    Rng rng = make_stream(17, "pool");
    auto pool = generate_scenarios(g, centers, 40, rng);
    Env env(g, EnvConfig{}, SolverConfig{}, WeightsMode::Plain);
    std::vector<OutageScenario> valid;
    for (auto& sc : pool)
        if (validate_scenario(sc, env)) valid.push_back(sc);
    return valid;
}

GcapcnConfig tiny_gcapcn() {
    GcapcnConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 6;
    cfg.moment_order = 2;
    cfg.filter_degree = 1;
    return cfg;
}

TrainConfig tiny_train(std::int64_t steps) {
    TrainConfig cfg;
    cfg.total_steps = steps;
    cfg.rollout_len = 64;
    cfg.minibatch = 32;
    cfg.epochs = 2;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("gae") {
    SUBCASE("lambda 0 degenerates to one-step TD errors") {
        auto [adv, ret] = gae({1, 2, 3}, {0.5, 0.25, 0.125}, {0, 0, 0}, 0.9, 0.0, 0.0625);
        CHECK(adv[0] == doctest::Approx(1 + 0.9 * 0.25 - 0.5));
        CHECK(adv[1] == doctest::Approx(2 + 0.9 * 0.125 - 0.25));
        CHECK(adv[2] == doctest::Approx(3 + 0.9 * 0.0625 - 0.125));
        for (int i = 0; i < 3; ++i) CHECK(ret[i] == doctest::Approx(adv[i] + std::vector<double>{0.5, 0.25, 0.125}[i]));
    }
    SUBCASE("gamma 0 gives r - v") {
        auto [adv, ret] = gae({1, 2}, {0.3, 0.4}, {0, 0}, 0.0, 0.95, 0.0);
        CHECK(adv[0] == doctest::Approx(0.7));
        CHECK(adv[1] == doctest::Approx(1.6));
    }
    SUBCASE("hand-unrolled 3-step case") {
        auto [adv, ret] = gae({1, 1, 1}, {0, 0, 0}, {0, 0, 0}, 1.0, 1.0, 0.0);
        CHECK(adv == std::vector<double>{3, 2, 1});
    }
    SUBCASE("gamma=lambda=1 equals Monte-Carlo advantages on episodic data") {
        std::vector<double> r{0.5, -0.2, 1.0, 0.3, 0.7};
        std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5};
        std::vector<std::uint8_t> d{0, 0, 1, 0, 1};
        auto [adv, ret] = gae(r, v, d, 1.0, 1.0, 9.9);  // bootstrap ignored: last step done
        // episode 1: steps 0..2, episode 2: steps 3..4
        CHECK(adv[0] == doctest::Approx(r[0] + r[1] + r[2] - v[0]));
        CHECK(adv[1] == doctest::Approx(r[1] + r[2] - v[1]));
        CHECK(adv[2] == doctest::Approx(r[2] - v[2]));
        CHECK(adv[3] == doctest::Approx(r[3] + r[4] - v[3]));
        CHECK(adv[4] == doctest::Approx(r[4] - v[4]));
    }
    SUBCASE("length mismatch") { CHECK_THROWS(gae({1}, {1, 2}, {0}, 0.9, 0.9, 0.0)); }
}

TEST_CASE("clip arithmetic of the surrogate") {
    // clip arithmetic exercised through the same tensor ops the update uses
    auto surrogate = [](double ratio, double adv, double eps) {
        Tensor r = Tensor::scalar(ratio);
        Tensor s1 = mul_scalar(r, adv);
        Tensor s2 = mul_scalar(clamp_t(r, 1.0 - eps, 1.0 + eps), adv);
        return minimum(s1, s2).item();
    };
    CHECK(surrogate(1.5, +1.0, 0.2) == doctest::Approx(1.2));
    CHECK(surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
    CHECK(surrogate(1.0, +0.7, 0.2) == doctest::Approx(0.7));
}

TEST_CASE("rollout collection is reproducible and episodic") {
    NetworkGraph g = toy();
    auto pool = small_pool(g);
    REQUIRE(pool.size() > 5);

    EnvConfig env_cfg;
    env_cfg.horizon = 4;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);

    GcapcnPolicy p1(g, tiny_gcapcn(), 11);
    PpoTrainer t1(p1, env, pool, tiny_train(64));
    auto b1 = t1.collect_rollouts(64);
    CHECK(b1.steps.size() == 64);
    CHECK(b1.advantages.size() == 64);

    GcapcnPolicy p2(g, tiny_gcapcn(), 11);
    PpoTrainer t2(p2, env, pool, tiny_train(64));
    auto b2 = t2.collect_rollouts(64);
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(b1.steps[i].action == b2.steps[i].action);
        CHECK(b1.steps[i].reward == b2.steps[i].reward);
        CHECK(b1.steps[i].logprob == b2.steps[i].logprob);
    }
    CHECK(b1.advantages == b2.advantages);

    SUBCASE("episode boundaries fall on the horizon") {
        int dones = 0;
        for (const auto& s : b1.steps) dones += s.done;
        CHECK(dones == 64 / 4);
    }
    SUBCASE("single transition rollout") {
        GcapcnPolicy p3(g, tiny_gcapcn(), 11);
        PpoTrainer t3(p3, env, pool, tiny_train(64));
        auto b3 = t3.collect_rollouts(1);
        CHECK(b3.steps.size() == 1);
    }
}

TEST_CASE("fully masked action spaces roll out as no-ops with rewards intact") {
    // 2-bus net whose only switch sits on the failed line: every slot masked
    const char* text = R"(
[buses]
id=1, phases=1, substation=true
id=2, phases=1
id=3, phases=1
[lines]
id=1, from=1, to=2, r_pu=0.01, x_pu=0
id=2, from=2, to=3, r_pu=0.01, x_pu=0
[switches]
line=2, kind=sectionalizing, default=closed
[loads]
bus=2, p_kw=50, phases=1
)";
    NetworkGraph g = NetworkGraph::load(text);
    EnvConfig env_cfg;
    env_cfg.horizon = 2;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);
    GcapcnConfig pc;
    pc.layers = 1;
    pc.hidden = 4;
    pc.moment_order = 1;
    pc.filter_degree = 0;
    GcapcnPolicy policy(g, pc, 13);
    OutageScenario sc;
    sc.failed_lines = {2};
    std::vector<OutageScenario> pool{sc};
    PpoTrainer trainer(policy, env, pool, tiny_train(8));
    auto buf = trainer.collect_rollouts(8);
    CHECK(buf.steps.size() == 8);
    for (const auto& step : buf.steps) {
        CHECK(step.action == std::vector<std::uint8_t>{0});
        CHECK(step.logprob == 0.0);
        CHECK(step.reward == doctest::Approx(50.0 / 50.0));  // bus-2 load still served
    }
}

TEST_CASE("ppo_update improves a single always-good action") {
    // 1-slot bandit: a 2-bus network with one switch and no sheddable loads.
    const char* text = R"(
[buses]
id=1, phases=1, substation=true
id=2, phases=1
[lines]
id=1, from=1, to=2, r_pu=0.01, x_pu=0
[switches]
line=1, kind=sectionalizing, default=closed
[loads]
bus=2, p_kw=100, phases=1
)";
    NetworkGraph g = NetworkGraph::load(text);
    EnvConfig env_cfg;
    env_cfg.horizon = 1;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);

    GcapcnConfig pc;
    pc.layers = 1;
    pc.hidden = 4;
    pc.moment_order = 1;
    pc.filter_degree = 0;
    GcapcnPolicy policy(g, pc, 21);

    OutageScenario none;
    std::vector<OutageScenario> pool{none};
    TrainConfig cfg = tiny_train(64);
    cfg.rollout_len = 64;
    cfg.minibatch = 64;
    cfg.epochs = 1;
    cfg.entropy_coef = 0.0;
    cfg.value_coef = 0.0;  // isolate the policy-gradient direction
    PpoTrainer trainer(policy, env, pool, cfg);

    // mean probability of the ON action before
    Env probe_env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);
    auto obs = probe_env.reset(none);
    auto l_pows = policy.laplacian_powers(probe_env.current_laplacian());
    auto mask = obs.action_mask(1);
    double p_before;
    {
        NoGradGuard ng;
        p_before = policy.forward(obs.voltages, obs.e_supp, obs.v_viol, obs.branch_flows, mask, l_pows)
                       .probs.values()[0];
    }

    // bandit buffer: ON always carries positive advantage, OFF negative; the
    // sampled mix keeps both signs present after normalization
    RolloutBuffer buf = trainer.collect_rollouts(64);
    bool saw_on = false, saw_off = false;
    for (std::size_t i = 0; i < buf.steps.size(); ++i) {
        (buf.steps[i].action[0] ? saw_on : saw_off) = true;
        buf.advantages[i] = buf.steps[i].action[0] ? 1.0 : -1.0;
        buf.returns[i] = buf.steps[i].value;  // keep the value head quiet
    }
    REQUIRE(saw_on);
    REQUIRE(saw_off);
    trainer.ppo_update(buf);

    double p_after;
    {
        NoGradGuard ng;
        p_after = policy.forward(obs.voltages, obs.e_supp, obs.v_viol, obs.branch_flows, mask, l_pows)
                      .probs.values()[0];
    }
    CHECK(p_after >= p_before);
}

TEST_CASE("identical policies give unit ratios and zero clip fraction") {
    NetworkGraph g = toy();
    auto pool = small_pool(g);
    EnvConfig env_cfg;
    env_cfg.horizon = 4;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);
    GcapcnPolicy policy(g, tiny_gcapcn(), 31);
    TrainConfig cfg = tiny_train(64);
    cfg.epochs = 1;
    cfg.minibatch = 64;
    cfg.lr = 0.0;  // no movement within the update
    PpoTrainer trainer(policy, env, pool, cfg);
    auto buf = trainer.collect_rollouts(64);
    auto metrics = trainer.ppo_update(buf);
    CHECK(metrics.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics.clip_fraction == 0.0);
}

TEST_CASE("train writes curve and checkpoint; moving average of constants is the constant") {
    SUBCASE("curve csv moving average") {
        std::vector<EpisodeRecord> eps;
        for (int i = 0; i < 10; ++i) eps.push_back({i + 1, 0.5});
        std::string csv = curve_csv(eps, 4);
        CHECK(csv.find("step,episode,reward,moving_avg") == 0);
        CHECK(csv.find("0.5,0.5") != std::string::npos);
    }

    NetworkGraph g = toy();
    auto pool = small_pool(g);
    EnvConfig env_cfg;
    env_cfg.horizon = 4;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);
    GcapcnPolicy policy(g, tiny_gcapcn(), 41);
    TrainConfig cfg = tiny_train(128);  // exactly two updates
    PpoTrainer trainer(policy, env, pool, cfg);
    std::string out_dir = "/tmp/gridrl_test_train";
    std::filesystem::remove_all(out_dir);
    trainer.train(out_dir);
    CHECK(trainer.steps_done() == 128);
    CHECK(std::filesystem::exists(out_dir + "/curve.csv"));
    CHECK(std::filesystem::exists(out_dir + "/checkpoint.ckpt"));

    SUBCASE("total_steps equal to rollout length runs exactly one update") {
        GcapcnPolicy p2(g, tiny_gcapcn(), 41);
        PpoTrainer t2(p2, env, pool, tiny_train(64));
        t2.train("");
        CHECK(t2.steps_done() == 64);
    }
}

TEST_CASE("split-run resume is bit-identical to the uninterrupted run") {
    NetworkGraph g = toy();
    auto pool = small_pool(g);
    EnvConfig env_cfg;
    env_cfg.horizon = 4;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Ph);

    // uninterrupted: 192 steps
    GcapcnPolicy p_full(g, tiny_gcapcn(), 77);
    TrainConfig cfg_full = tiny_train(192);
    PpoTrainer t_full(p_full, env, pool, cfg_full);
    std::string dir_full = "/tmp/gridrl_full";
    std::filesystem::remove_all(dir_full);
    t_full.train(dir_full);

    // split: 64 steps, checkpoint, then resume to 192
    GcapcnPolicy p_a(g, tiny_gcapcn(), 77);
    TrainConfig cfg_a = tiny_train(64);
    PpoTrainer t_a(p_a, env, pool, cfg_a);
    std::string dir_a = "/tmp/gridrl_split_a";
    std::filesystem::remove_all(dir_a);
    t_a.train(dir_a);

    GcapcnPolicy p_b(g, tiny_gcapcn(), 77);
    TrainConfig cfg_b = tiny_train(192);
    PpoTrainer t_b(p_b, env, pool, cfg_b);
    t_b.resume(dir_a + "/checkpoint.ckpt");
    CHECK(t_b.steps_done() == 64);
    std::string dir_b = "/tmp/gridrl_split_b";
    std::filesystem::remove_all(dir_b);
    t_b.train(dir_b);

    // curves byte-identical
    CHECK(read_text_file(dir_full + "/curve.csv") == read_text_file(dir_b + "/curve.csv"));
    // parameters bit-identical
    const auto& full_items = p_full.params().items();
    const auto& split_items = p_b.params().items();
    REQUIRE(full_items.size() == split_items.size());
    for (std::size_t i = 0; i < full_items.size(); ++i)
        CHECK(full_items[i].second.values() == split_items[i].second.values());
}

TEST_CASE("checkpoint round-trip restores forward outputs bit-exactly") {
    NetworkGraph g = toy();
    GcapcnPolicy policy(g, tiny_gcapcn(), 88);
    EnvConfig env_cfg;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);
    auto ck = snapshot_policy(policy, g.content_hash(), WeightsMode::Plain, env_cfg, SolverConfig{});
    std::string path = "/tmp/gridrl_test_policy.ckpt";
    save_checkpoint_file(path, ck);

    auto loaded = load_checkpoint_file(path);
    GcapcnPolicy restored = instantiate_policy(loaded);

    auto obs = env.reset(OutageScenario{});
    auto l_pows = policy.laplacian_powers(env.current_laplacian());
    auto mask = obs.action_mask(policy.sizes().action_size());
    NoGradGuard ng;
    auto f1 = policy.forward(obs.voltages, obs.e_supp, obs.v_viol, obs.branch_flows, mask, l_pows);
    auto f2 = restored.forward(obs.voltages, obs.e_supp, obs.v_viol, obs.branch_flows, mask, l_pows);
    CHECK(f1.logits.values() == f2.logits.values());
    CHECK(f1.value.item() == f2.value.item());

    SUBCASE("corrupt magic is rejected") {
        write_text_file("/tmp/gridrl_bad.ckpt", "not a checkpoint");
        CHECK_THROWS_AS(load_checkpoint_file("/tmp/gridrl_bad.ckpt"), CheckpointError);
    }
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    NetworkGraph g = toy();
    auto pool = small_pool(g);
    EnvConfig env_cfg;
    env_cfg.horizon = 4;
    Env env(g, env_cfg, SolverConfig{}, WeightsMode::Plain);
    GcapcnPolicy policy(g, tiny_gcapcn(), 51);
    TrainConfig cfg = tiny_train(64);
    PpoTrainer trainer(policy, env, pool, cfg);
    auto buf = trainer.collect_rollouts(64);
    buf.returns[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(trainer.ppo_update(buf), NonFiniteLoss);
}
