#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gridrl/checkpoint.hpp"
#include "gridrl/env.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/scenario.hpp"

namespace gridrl {

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::int64_t total_steps = 100000;
    int rollout_len = 2048;
    int minibatch = 256;
    int epochs = 10;
    double clip = 0.2;
    double gamma = 0.99;
    double lam = 0.95;
    double lr = 3e-4;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_interval = 0;  // env steps; 0 = final checkpoint only
    int ma_window = 100;                   // moving-average window, episodes
    int workers = 1;
};

// delta_t = r_t + gamma*v_{t+1}*(1-done_t) - v_t;
// A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}; returns = A + v.
std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                        const std::vector<double>& values,
                                                        const std::vector<std::uint8_t>& dones,
                                                        double gamma, double lam,
                                                        double bootstrap_value);

struct StepRecord {
    Observation obs;  // pre-action observation
    std::shared_ptr<const std::vector<Matrix>> l_powers;
    std::vector<std::uint8_t> action;
    std::vector<std::uint8_t> mask;
    double logprob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    std::uint8_t done = 0;
};

struct RolloutBuffer {
    std::vector<StepRecord> steps;
    std::vector<double> advantages;
    std::vector<double> returns;
};

struct UpdateMetrics {
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
};

class Adam {
public:
    void step(ParamStore& params, double lr);
    void serialize(BinWriter& w) const;
    void deserialize(BinReader& r, const ParamStore& params);

private:
    struct Slot {
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    std::int64_t t_ = 0;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

struct EpisodeRecord {
    std::int64_t step = 0;  // global env step at episode end
    double reward = 0.0;    // episode-cumulative reward
};

std::string curve_csv(const std::vector<EpisodeRecord>& episodes, int window);

// Clipped-surrogate PPO over one policy and N independent worker envs.
// Deterministic for fixed seed and worker count; save/resume reproduces the
// uninterrupted run bit-exactly.
class PpoTrainer {
public:
    using Progress = std::function<void(std::int64_t steps, const UpdateMetrics&)>;

    PpoTrainer(GcapcnPolicy& policy, const Env& env_prototype,
               std::vector<OutageScenario> train_pool, TrainConfig cfg);

    RolloutBuffer collect_rollouts(std::int64_t total_steps);
    UpdateMetrics ppo_update(RolloutBuffer& buffer);

    // Runs until total_steps; writes curve.csv and checkpoint.ckpt into
    // out_dir (empty = no files).
    void train(const std::string& out_dir, const Progress& progress = nullptr);

    void resume(const std::string& checkpoint_path);
    void save_checkpoint(const std::string& path) const;

    std::int64_t steps_done() const { return steps_done_; }
    const std::vector<EpisodeRecord>& episodes() const { return episodes_; }
    const TrainConfig& config() const { return cfg_; }

private:
    GcapcnPolicy& policy_;
    TrainConfig cfg_;
    std::vector<OutageScenario> pool_;

    struct Worker {
        Env env;
        Rng action_rng;
        Rng scenario_rng;
        bool episode_open = false;
        double ep_reward = 0.0;
        Observation obs;
        std::shared_ptr<const std::vector<Matrix>> l_powers;
        std::uint64_t l_epoch = 0;
    };
    std::vector<Worker> workers_;
    Rng shuffle_rng_;
    Adam adam_;
    std::int64_t steps_done_ = 0;
    std::vector<EpisodeRecord> episodes_;

    void collect_worker(Worker& w, std::int64_t steps, std::int64_t global_offset,
                        RolloutBuffer& out);
    std::string trainer_blob() const;
    void restore_trainer_blob(const std::string& blob);
    void write_outputs(const std::string& out_dir) const;
};

}  // namespace gridrl
