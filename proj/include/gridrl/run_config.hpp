#pragma once

#include <string>

#include "gridrl/env.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/ppo.hpp"

namespace gridrl {

// Everything a run needs, parsed from an INI-style config with sections
// [paths], [run], [env], [ph], [gcapcn], [train]. CLI flags may override the
// scalar fields after parsing.
struct RunConfig {
    std::string network_path;
    std::string train_scenarios_path;
    std::string out_dir;  // falls back to $GRID_RL_OUT, then "."
    std::uint64_t seed = 0;
    int workers = 1;
    std::string variant = "ph";  // "ph" or "plain"

    EnvConfig env;
    SolverConfig solver;
    GcapcnConfig gcapcn;
    TrainConfig train;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace gridrl
