#include "gridrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gridrl {

double compute_v_viol(const Matrix& voltages, const std::vector<PhaseSet>& active_phases,
                      double v_min, double v_max) {
    int n = voltages.rows();
    if (static_cast<int>(active_phases.size()) != n)
        throw std::invalid_argument("compute_v_viol: phase list length mismatch");
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int ph = 0; ph < 3; ++ph) {
            if (!active_phases[i][ph]) continue;
            double v = voltages(i, ph);
            total += std::max(v - v_max, 0.0) + std::max(v_min - v, 0.0);
        }
    return total / (3.0 * n);
}

Env::Env(const NetworkGraph& g, EnvConfig env_cfg, SolverConfig solver_cfg, WeightsMode mode,
         std::shared_ptr<PhCache> cache)
    : graph_(&g), env_cfg_(env_cfg), solver_cfg_(solver_cfg), mode_(mode), cache_(std::move(cache)) {
    if (env_cfg_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(env_cfg_.v_min < env_cfg_.v_max)) throw std::invalid_argument("v_min must be < v_max");
    if (mode_ == WeightsMode::Ph && !cache_) cache_ = std::make_shared<PhCache>();
}

int Env::action_size() const { return n_switch_slots() + n_load_slots(); }

std::vector<bool> Env::switch_states_bool() const {
    return std::vector<bool>(switch_state_.begin(), switch_state_.end());
}

std::vector<bool> Env::load_states_bool() const {
    return std::vector<bool>(load_state_.begin(), load_state_.end());
}

Observation Env::reset(const OutageScenario& scenario) {
    for (int id : scenario.failed_lines) graph_->line_index(id);  // throws on unknown line
    scenario_ = scenario;
    outage_ = std::set<int>(scenario.failed_lines.begin(), scenario.failed_lines.end());

    auto defaults = graph_->default_switch_states();
    switch_state_.assign(defaults.size(), 0);
    for (std::size_t i = 0; i < defaults.size(); ++i) switch_state_[i] = defaults[i] ? 1 : 0;

    load_state_.assign(graph_->loads().size(), 1);

    outage_mask_.assign(graph_->switches().size(), 0);
    for (std::size_t s = 0; s < graph_->switches().size(); ++s)
        if (outage_.count(graph_->switches()[s].line_id)) {
            outage_mask_[s] = 1;
            switch_state_[s] = 0;  // a failed line's switch is held open
        }

    t_ = 0;
    in_episode_ = true;
    refresh_laplacian();
    obs_ = observe();
    return obs_;
}

void Env::refresh_laplacian() { refresh_laplacian_from(switch_states_bool()); }

void Env::refresh_laplacian_from(const std::vector<bool>& switch_states) {
    Matrix adj = effective_adjacency(*graph_, switch_states, outage_);
    if (mode_ == WeightsMode::Ph) {
        TopologicalWeights tw = ph_edge_weights_from_adjacency(adj, env_cfg_.k, cache_.get());
        laplacian_ = laplacian(tw.a_ph);
    } else {
        laplacian_ = laplacian(adj);
    }
    ++laplacian_epoch_;
}

// The switch configuration reset() starts an episode from: defaults with the
// failed lines' switches held open.
std::vector<bool> Env::reset_switch_states() const {
    auto defaults = graph_->default_switch_states();
    std::vector<bool> st(defaults.begin(), defaults.end());
    for (std::size_t s = 0; s < graph_->switches().size(); ++s)
        if (outage_.count(graph_->switches()[s].line_id)) st[s] = false;
    return st;
}

Observation Env::observe() {
    PowerFlowResult pf = solve(*graph_, switch_states_bool(), outage_, load_states_bool(), solver_cfg_);

    Observation obs;
    obs.voltages = pf.voltages;
    obs.e_supp = energy_supplied(pf, *graph_);

    // Energized phases: the bus's own phases when its island is energized.
    std::vector<PhaseSet> active(graph_->n(), PhaseSet{false, false, false});
    for (const IslandReport& rep : pf.island_report) {
        if (!rep.energized) continue;
        for (int v : rep.nodes) active[v] = graph_->buses()[v].phases;
    }
    obs.v_viol = compute_v_viol(pf.voltages, active, env_cfg_.v_min, env_cfg_.v_max);

    // Branch flows ordered by line id.
    std::vector<int> line_order(graph_->lines().size());
    std::iota(line_order.begin(), line_order.end(), 0);
    std::sort(line_order.begin(), line_order.end(),
              [&](int a, int b) { return graph_->lines()[a].id < graph_->lines()[b].id; });
    obs.branch_flows.reserve(line_order.size());
    for (int li : line_order) obs.branch_flows.push_back(pf.branch_flows[li]);

    obs.switch_state = switch_state_;
    obs.load_state = load_state_;
    obs.outage_mask = outage_mask_;

    bool finite = std::isfinite(obs.e_supp) && std::isfinite(obs.v_viol);
    for (double v : obs.voltages.data()) finite = finite && std::isfinite(v);
    for (double f : obs.branch_flows) finite = finite && std::isfinite(f);
    obs.c_viol = !pf.converged || !finite;
    return obs;
}

Env::StepResult Env::step(const std::vector<std::uint8_t>& action) {
    if (!in_episode_) throw std::logic_error("step before reset");
    if (static_cast<int>(action.size()) != action_size())
        throw std::invalid_argument("action length must be " + std::to_string(action_size()));

    for (int s = 0; s < n_switch_slots(); ++s)
        switch_state_[s] = outage_mask_[s] ? 0 : (action[s] ? 1 : 0);
    const auto& sheddable = graph_->sheddable_loads();
    for (int j = 0; j < n_load_slots(); ++j)
        load_state_[sheddable[j]] = action[n_switch_slots() + j] ? 1 : 0;

    if (env_cfg_.ph_refresh == EnvConfig::Refresh::PerStep) refresh_laplacian();

    obs_ = observe();
    ++t_;

    StepResult out;
    out.obs = obs_;
    out.reward = obs_.c_viol ? -1.0 : obs_.e_supp - obs_.v_viol;
    out.done = t_ >= env_cfg_.horizon;
    if (out.done) in_episode_ = false;
    return out;
}

Env::Snapshot Env::snapshot() const {
    return Snapshot{scenario_, switch_state_, load_state_, t_, in_episode_};
}

void Env::restore(const Snapshot& snap) {
    scenario_ = snap.scenario;
    outage_ = std::set<int>(snap.scenario.failed_lines.begin(), snap.scenario.failed_lines.end());
    switch_state_ = snap.switch_state;
    load_state_ = snap.load_state;
    outage_mask_.assign(graph_->switches().size(), 0);
    for (std::size_t s = 0; s < graph_->switches().size(); ++s)
        if (outage_.count(graph_->switches()[s].line_id)) outage_mask_[s] = 1;
    t_ = snap.t;
    in_episode_ = snap.in_episode;
    if (in_episode_) {
        // Reproduce the Laplacian the uninterrupted run would be holding:
        // the reset-time topology under per-episode refresh, the current
        // topology under per-step refresh.
        if (env_cfg_.ph_refresh == EnvConfig::Refresh::PerEpisode)
            refresh_laplacian_from(reset_switch_states());
        else
            refresh_laplacian();
        obs_ = observe();
    }
}

}  // namespace gridrl
