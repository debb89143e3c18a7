#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/scenario.hpp"
#include "gridrl/tda.hpp"

namespace gridrl {

struct Observation {
    Matrix voltages;                          // n x 3 pu
    double e_supp = 0.0;
    double v_viol = 0.0;
    std::vector<double> branch_flows;         // ordered by line id
    std::vector<std::uint8_t> switch_state;   // 1 = closed, switch slot order
    std::vector<std::uint8_t> load_state;     // 1 = connected, all loads in file order
    std::vector<std::uint8_t> outage_mask;    // 1 = switch sits on a failed line
    bool c_viol = false;

    // Full action-length mask: outage-masked switch slots, load slots never masked.
    std::vector<std::uint8_t> action_mask(int action_size) const {
        std::vector<std::uint8_t> m(outage_mask);
        m.resize(action_size, 0);
        return m;
    }
};

struct EnvConfig {
    int horizon = 8;
    double v_min = 0.95;
    double v_max = 1.05;
    enum class Refresh { PerEpisode, PerStep } ph_refresh = Refresh::PerEpisode;
    int k = 2;  // PH hop radius
};

enum class WeightsMode { Ph, Plain };

// Eq-style aggregate voltage violation: per-phase band deviations summed over
// energized phases, normalized by 3|N| regardless of how many phases exist.
double compute_v_viol(const Matrix& voltages, const std::vector<PhaseSet>& active_phases,
                      double v_min, double v_max);

// The outage-management MDP: actions are target switch/load states, rewards
// follow E_supp - V_viol with a -1 convergence penalty. Deterministic given
// (scenario, action sequence).
class Env {
public:
    Env(const NetworkGraph& g, EnvConfig env_cfg, SolverConfig solver_cfg, WeightsMode mode,
        std::shared_ptr<PhCache> cache = nullptr);

    Observation reset(const OutageScenario& scenario);

    struct StepResult {
        Observation obs;
        double reward = 0.0;
        bool done = false;
    };
    StepResult step(const std::vector<std::uint8_t>& action);

    int action_size() const;
    int n_switch_slots() const { return static_cast<int>(graph_->switches().size()); }
    int n_load_slots() const { return static_cast<int>(graph_->sheddable_loads().size()); }

    const NetworkGraph& graph() const { return *graph_; }
    const EnvConfig& config() const { return env_cfg_; }
    const SolverConfig& solver_config() const { return solver_cfg_; }
    WeightsMode weights_mode() const { return mode_; }

    const Observation& observation() const { return obs_; }
    const Matrix& current_laplacian() const { return laplacian_; }
    // Bumped whenever current_laplacian changes; lets callers cache L powers.
    std::uint64_t laplacian_epoch() const { return laplacian_epoch_; }

    int steps_taken() const { return t_; }

    struct Snapshot {
        OutageScenario scenario;
        std::vector<std::uint8_t> switch_state;
        std::vector<std::uint8_t> load_state;
        int t = 0;
        bool in_episode = false;
    };
    Snapshot snapshot() const;
    void restore(const Snapshot& snap);

private:
    const NetworkGraph* graph_;
    EnvConfig env_cfg_;
    SolverConfig solver_cfg_;
    WeightsMode mode_;
    std::shared_ptr<PhCache> cache_;

    OutageScenario scenario_;
    std::set<int> outage_;
    std::vector<std::uint8_t> switch_state_;
    std::vector<std::uint8_t> load_state_;
    std::vector<std::uint8_t> outage_mask_;
    int t_ = 0;
    bool in_episode_ = false;

    Observation obs_;
    Matrix laplacian_;
    std::uint64_t laplacian_epoch_ = 0;

    Observation observe();
    void refresh_laplacian();
    void refresh_laplacian_from(const std::vector<bool>& switch_states);
    std::vector<bool> reset_switch_states() const;
    std::vector<bool> switch_states_bool() const;
    std::vector<bool> load_states_bool() const;
};

}  // namespace gridrl
