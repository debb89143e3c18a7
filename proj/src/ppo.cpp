#include "gridrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

namespace gridrl {

std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                        const std::vector<double>& values,
                                                        const std::vector<std::uint8_t>& dones,
                                                        double gamma, double lam,
                                                        double bootstrap_value) {
    std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n) throw std::invalid_argument("gae: length mismatch");
    std::vector<double> adv(n), ret(n);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        double not_done = dones[i] ? 0.0 : 1.0;
        double v_next = (i + 1 < n) ? values[i + 1] : bootstrap_value;
        double delta = rewards[i] + gamma * v_next * not_done - values[i];
        running = delta + gamma * lam * not_done * running;
        adv[i] = running;
        ret[i] = adv[i] + values[i];
    }
    return {std::move(adv), std::move(ret)};
}

void Adam::step(ParamStore& params, double lr) {
    auto& items = params.items();
    if (slots_.empty()) {
        slots_.resize(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            slots_[i].m.assign(items[i].second.numel(), 0.0);
            slots_[i].v.assign(items[i].second.numel(), 0.0);
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < items.size(); ++i) {
        Tensor& t = items[i].second;
        const auto& g = t.grad();
        auto& vals = t.values_mut();
        auto& m = slots_[i].m;
        auto& v = slots_[i].v;
        for (std::size_t j = 0; j < vals.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            double m_hat = m[j] / bc1;
            double v_hat = v[j] / bc2;
            vals[j] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

void Adam::serialize(BinWriter& w) const {
    w.i64(t_);
    w.u32(static_cast<std::uint32_t>(slots_.size()));
    for (const auto& s : slots_) {
        w.doubles(s.m);
        w.doubles(s.v);
    }
}

void Adam::deserialize(BinReader& r, const ParamStore& params) {
    t_ = r.i64();
    std::uint32_t n = r.u32();
    slots_.resize(n);
    for (auto& s : slots_) {
        s.m = r.doubles();
        s.v = r.doubles();
    }
    if (n != 0 && n != params.items().size())
        throw CheckpointError("optimizer state does not match the parameter store");
}

std::string curve_csv(const std::vector<EpisodeRecord>& episodes, int window) {
    std::ostringstream out;
    out << "step,episode,reward,moving_avg\n";
    double window_sum = 0.0;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        window_sum += episodes[i].reward;
        if (static_cast<int>(i) >= window) window_sum -= episodes[i - window].reward;
        int denom = std::min<int>(window, static_cast<int>(i) + 1);
        out << episodes[i].step << "," << (i + 1) << "," << format_double(episodes[i].reward) << ","
            << format_double(window_sum / denom) << "\n";
    }
    return out.str();
}

PpoTrainer::PpoTrainer(GcapcnPolicy& policy, const Env& env_prototype,
                       std::vector<OutageScenario> train_pool, TrainConfig cfg)
    : policy_(policy), cfg_(cfg), pool_(std::move(train_pool)) {
    if (pool_.empty()) throw std::invalid_argument("training scenario pool is empty");
    if (cfg_.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (!(cfg_.clip > 0.0 && cfg_.clip < 1.0)) throw std::invalid_argument("clip must be in (0,1)");
    if (cfg_.gamma < 0.0 || cfg_.gamma > 1.0 || cfg_.lam < 0.0 || cfg_.lam > 1.0)
        throw std::invalid_argument("gamma and lambda must lie in [0,1]");
    if (cfg_.total_steps < 1 || cfg_.rollout_len < 1 || cfg_.minibatch < 1 || cfg_.epochs < 1)
        throw std::invalid_argument("step, rollout, minibatch and epoch counts must be positive");
    for (int w = 0; w < cfg_.workers; ++w) {
        workers_.push_back(Worker{env_prototype, make_stream(cfg_.seed, "action." + std::to_string(w)),
                                  make_stream(cfg_.seed, "scenario." + std::to_string(w)), false, 0.0,
                                  Observation{}, nullptr, 0});
    }
    shuffle_rng_ = make_stream(cfg_.seed, "shuffle");
}

void PpoTrainer::collect_worker(Worker& w, std::int64_t steps, std::int64_t global_offset,
                                RolloutBuffer& out) {
    NoGradGuard ng;
    std::vector<double> rewards, values;
    std::vector<std::uint8_t> dones;
    for (std::int64_t i = 0; i < steps; ++i) {
        if (!w.episode_open) {
            const OutageScenario& sc =
                pool_[uniform_int(w.scenario_rng, 0, static_cast<std::int64_t>(pool_.size()) - 1)];
            w.obs = w.env.reset(sc);
            w.episode_open = true;
            w.ep_reward = 0.0;
        }
        if (!w.l_powers || w.l_epoch != w.env.laplacian_epoch()) {
            w.l_powers = std::make_shared<const std::vector<Matrix>>(
                policy_.laplacian_powers(w.env.current_laplacian()));
            w.l_epoch = w.env.laplacian_epoch();
        }
        StepRecord rec;
        rec.obs = w.obs;
        rec.l_powers = w.l_powers;
        rec.mask = w.obs.action_mask(policy_.sizes().action_size());

        auto fw = policy_.forward(w.obs.voltages, w.obs.e_supp, w.obs.v_viol, w.obs.branch_flows,
                                  rec.mask, *w.l_powers);
        auto [action, logp] = GcapcnPolicy::sample_action(fw.probs.values(), rec.mask, w.action_rng);
        rec.action = action;
        rec.logprob = logp;
        rec.value = fw.value.item();

        Env::StepResult sr = w.env.step(action);
        rec.reward = sr.reward;
        rec.done = sr.done ? 1 : 0;
        w.ep_reward += sr.reward;
        w.obs = sr.obs;

        rewards.push_back(rec.reward);
        values.push_back(rec.value);
        dones.push_back(rec.done);
        out.steps.push_back(std::move(rec));

        if (sr.done) {
            episodes_.push_back({global_offset + i + 1, w.ep_reward});
            w.episode_open = false;
            w.ep_reward = 0.0;
        }
    }
    double bootstrap = 0.0;
    if (w.episode_open) {
        if (w.l_epoch != w.env.laplacian_epoch()) {
            w.l_powers = std::make_shared<const std::vector<Matrix>>(
                policy_.laplacian_powers(w.env.current_laplacian()));
            w.l_epoch = w.env.laplacian_epoch();
        }
        auto fw = policy_.forward(w.obs.voltages, w.obs.e_supp, w.obs.v_viol, w.obs.branch_flows,
                                  w.obs.action_mask(policy_.sizes().action_size()), *w.l_powers);
        bootstrap = fw.value.item();
    }
    auto [adv, ret] = gae(rewards, values, dones, cfg_.gamma, cfg_.lam, bootstrap);
    out.advantages.insert(out.advantages.end(), adv.begin(), adv.end());
    out.returns.insert(out.returns.end(), ret.begin(), ret.end());
}

RolloutBuffer PpoTrainer::collect_rollouts(std::int64_t total_steps) {
    RolloutBuffer buf;
    std::int64_t per = total_steps / cfg_.workers;
    std::int64_t extra = total_steps % cfg_.workers;
    std::int64_t offset = steps_done_;
    for (int w = 0; w < cfg_.workers; ++w) {
        std::int64_t steps = per + (w < extra ? 1 : 0);
        collect_worker(workers_[w], steps, offset, buf);
        offset += steps;
    }
    return buf;
}

UpdateMetrics PpoTrainer::ppo_update(RolloutBuffer& buffer) {
    std::size_t n = buffer.steps.size();
    if (n == 0) throw std::invalid_argument("empty rollout buffer");

    // Advantage normalization over the whole update batch.
    double m = 0.0;
    for (double a : buffer.advantages) m += a;
    m /= static_cast<double>(n);
    double var = 0.0;
    for (double a : buffer.advantages) var += (a - m) * (a - m);
    double sd = std::sqrt(var / static_cast<double>(n));
    double inv = 1.0 / std::max(sd, 1e-8);
    std::vector<double> adv(n);
    for (std::size_t i = 0; i < n; ++i) adv[i] = (buffer.advantages[i] - m) * inv;

    UpdateMetrics metrics;
    std::int64_t samples_seen = 0;

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(idx[i - 1], idx[uniform_int(shuffle_rng_, 0, static_cast<std::int64_t>(i) - 1)]);
        for (std::size_t start = 0; start < n; start += cfg_.minibatch) {
            std::size_t stop = std::min(n, start + cfg_.minibatch);
            double batch_inv = 1.0 / static_cast<double>(stop - start);
            policy_.params().zero_grad();
            for (std::size_t pos = start; pos < stop; ++pos) {
                const StepRecord& rec = buffer.steps[idx[pos]];
                double a_norm = adv[idx[pos]];
                auto fw = policy_.forward(rec.obs.voltages, rec.obs.e_supp, rec.obs.v_viol,
                                          rec.obs.branch_flows, rec.mask, *rec.l_powers);
                Tensor logp_new = policy_.log_prob(fw, rec.action, rec.mask);
                Tensor ratio = exp_t(add_scalar(logp_new, -rec.logprob));
                Tensor surr1 = mul_scalar(ratio, a_norm);
                Tensor surr2 = mul_scalar(clamp_t(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip), a_norm);
                Tensor policy_term = mul_scalar(minimum(surr1, surr2), -1.0);
                Tensor value_err = add_scalar(fw.value, -buffer.returns[idx[pos]]);
                Tensor value_term = mul(value_err, value_err);
                Tensor entropy_term = policy_.entropy(fw, rec.mask);
                Tensor loss = mul_scalar(
                    add(add(policy_term, mul_scalar(value_term, cfg_.value_coef)),
                        mul_scalar(entropy_term, -cfg_.entropy_coef)),
                    batch_inv);
                double loss_val = loss.item();
                if (!std::isfinite(loss_val))
                    throw NonFiniteLoss("non-finite loss at step " + std::to_string(steps_done_) +
                                        ", sample " + std::to_string(idx[pos]));
                loss.backward();

                double r = ratio.item();
                metrics.mean_ratio += r;
                metrics.clip_fraction += (std::abs(r - 1.0) > cfg_.clip) ? 1.0 : 0.0;
                metrics.policy_loss += policy_term.item();
                metrics.value_loss += value_term.item();
                metrics.entropy += entropy_term.item();
                ++samples_seen;
            }
            adam_.step(policy_.params(), cfg_.lr);
        }
    }
    double inv_seen = 1.0 / static_cast<double>(samples_seen);
    metrics.mean_ratio *= inv_seen;
    metrics.clip_fraction *= inv_seen;
    metrics.policy_loss *= inv_seen;
    metrics.value_loss *= inv_seen;
    metrics.entropy *= inv_seen;
    return metrics;
}

void PpoTrainer::train(const std::string& out_dir, const Progress& progress) {
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    std::int64_t last_interval = cfg_.checkpoint_interval > 0 ? steps_done_ / cfg_.checkpoint_interval : 0;
    while (steps_done_ < cfg_.total_steps) {
        std::int64_t want = std::min<std::int64_t>(cfg_.rollout_len, cfg_.total_steps - steps_done_);
        RolloutBuffer buf = collect_rollouts(want);
        steps_done_ += static_cast<std::int64_t>(buf.steps.size());
        UpdateMetrics metrics = ppo_update(buf);
        if (progress) progress(steps_done_, metrics);
        if (!out_dir.empty() && cfg_.checkpoint_interval > 0) {
            std::int64_t interval = steps_done_ / cfg_.checkpoint_interval;
            if (interval > last_interval) {
                last_interval = interval;
                write_outputs(out_dir);
            }
        }
    }
    if (!out_dir.empty()) write_outputs(out_dir);
}

void PpoTrainer::write_outputs(const std::string& out_dir) const {
    save_checkpoint(out_dir + "/checkpoint.ckpt");
    write_text_file(out_dir + "/curve.csv", curve_csv(episodes_, cfg_.ma_window));
}

std::string PpoTrainer::trainer_blob() const {
    BinWriter w;
    w.i64(steps_done_);
    // config echo; resume restores these to guarantee an identical continuation
    w.i64(cfg_.total_steps);
    w.u32(cfg_.rollout_len);
    w.u32(cfg_.minibatch);
    w.u32(cfg_.epochs);
    w.f64(cfg_.clip);
    w.f64(cfg_.gamma);
    w.f64(cfg_.lam);
    w.f64(cfg_.lr);
    w.f64(cfg_.value_coef);
    w.f64(cfg_.entropy_coef);
    w.u64(cfg_.seed);
    w.i64(cfg_.checkpoint_interval);
    w.u32(cfg_.ma_window);
    w.u32(cfg_.workers);
    adam_.serialize(w);
    w.str(save_rng(shuffle_rng_));
    w.u32(static_cast<std::uint32_t>(workers_.size()));
    for (const Worker& wrk : workers_) {
        Env::Snapshot snap = wrk.env.snapshot();
        w.u64(snap.scenario.seed);
        w.u32(snap.scenario.center);
        w.u32(snap.scenario.radius);
        w.f64(snap.scenario.severity);
        w.u32(static_cast<std::uint32_t>(snap.scenario.failed_lines.size()));
        for (int id : snap.scenario.failed_lines) w.u32(id);
        w.u32(static_cast<std::uint32_t>(snap.switch_state.size()));
        for (auto s : snap.switch_state) w.u8(s);
        w.u32(static_cast<std::uint32_t>(snap.load_state.size()));
        for (auto s : snap.load_state) w.u8(s);
        w.u32(snap.t);
        w.u8(snap.in_episode ? 1 : 0);
        w.str(save_rng(wrk.action_rng));
        w.str(save_rng(wrk.scenario_rng));
        w.u8(wrk.episode_open ? 1 : 0);
        w.f64(wrk.ep_reward);
    }
    w.u32(static_cast<std::uint32_t>(episodes_.size()));
    for (const EpisodeRecord& e : episodes_) {
        w.i64(e.step);
        w.f64(e.reward);
    }
    return w.buffer();
}

void PpoTrainer::restore_trainer_blob(const std::string& blob) {
    BinReader r(blob);
    steps_done_ = r.i64();
    std::int64_t requested_total = cfg_.total_steps;
    r.i64();  // stored total_steps; the caller's target wins
    cfg_.rollout_len = static_cast<int>(r.u32());
    cfg_.minibatch = static_cast<int>(r.u32());
    cfg_.epochs = static_cast<int>(r.u32());
    cfg_.clip = r.f64();
    cfg_.gamma = r.f64();
    cfg_.lam = r.f64();
    cfg_.lr = r.f64();
    cfg_.value_coef = r.f64();
    cfg_.entropy_coef = r.f64();
    cfg_.seed = r.u64();
    cfg_.checkpoint_interval = r.i64();
    cfg_.ma_window = static_cast<int>(r.u32());
    std::uint32_t stored_workers = r.u32();
    cfg_.total_steps = requested_total;
    if (static_cast<int>(stored_workers) != cfg_.workers)
        throw CheckpointError("checkpoint was trained with " + std::to_string(stored_workers) +
                              " workers");
    adam_.deserialize(r, policy_.params());
    load_rng(shuffle_rng_, r.str());
    std::uint32_t worker_count = r.u32();
    if (worker_count != workers_.size()) throw CheckpointError("worker count mismatch");
    for (Worker& wrk : workers_) {
        Env::Snapshot snap;
        snap.scenario.seed = r.u64();
        snap.scenario.center = static_cast<int>(r.u32());
        snap.scenario.radius = static_cast<int>(r.u32());
        snap.scenario.severity = r.f64();
        std::uint32_t nf = r.u32();
        for (std::uint32_t i = 0; i < nf; ++i) snap.scenario.failed_lines.push_back(static_cast<int>(r.u32()));
        std::uint32_t ns = r.u32();
        snap.switch_state.resize(ns);
        for (auto& s : snap.switch_state) s = r.u8();
        std::uint32_t nl = r.u32();
        snap.load_state.resize(nl);
        for (auto& s : snap.load_state) s = r.u8();
        snap.t = static_cast<int>(r.u32());
        snap.in_episode = r.u8() != 0;
        load_rng(wrk.action_rng, r.str());
        load_rng(wrk.scenario_rng, r.str());
        wrk.episode_open = r.u8() != 0;
        wrk.ep_reward = r.f64();
        wrk.env.restore(snap);
        if (wrk.episode_open) {
            wrk.obs = wrk.env.observation();
            wrk.l_powers = std::make_shared<const std::vector<Matrix>>(
                policy_.laplacian_powers(wrk.env.current_laplacian()));
            wrk.l_epoch = wrk.env.laplacian_epoch();
        } else {
            wrk.l_powers = nullptr;
            wrk.l_epoch = 0;
        }
    }
    std::uint32_t ep_count = r.u32();
    episodes_.clear();
    episodes_.reserve(ep_count);
    for (std::uint32_t i = 0; i < ep_count; ++i) {
        EpisodeRecord e;
        e.step = r.i64();
        e.reward = r.f64();
        episodes_.push_back(e);
    }
}

void PpoTrainer::save_checkpoint(const std::string& path) const {
    const Env& env = workers_.front().env;
    PolicyCheckpoint ck = snapshot_policy(policy_, env.graph().content_hash(), env.weights_mode(),
                                          env.config(), env.solver_config());
    std::string blob = trainer_blob();
    save_checkpoint_file(path, ck, &blob);
}

void PpoTrainer::resume(const std::string& checkpoint_path) {
    std::optional<std::string> blob;
    PolicyCheckpoint ck = load_checkpoint_file(checkpoint_path, &blob);
    if (!blob) throw CheckpointError("checkpoint has no trainer state to resume from");
    const Env& env = workers_.front().env;
    if (ck.network_hash != env.graph().content_hash())
        throw CheckpointError("checkpoint was trained on a different network");
    if ((ck.variant == WeightsMode::Ph) != (env.weights_mode() == WeightsMode::Ph))
        throw CheckpointError("checkpoint variant does not match the requested variant");
    restore_params(policy_, ck);
    restore_trainer_blob(*blob);
}

}  // namespace gridrl
