#pragma once

#include <set>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/linalg.hpp"

namespace gridrl {

struct SolverConfig {
    double base_kw = 1000.0;  // per-unit power base
    double v_slack = 1.0;     // slack magnitude, pu
};

struct IslandReport {
    std::vector<int> nodes;     // bus indices, sorted
    int slack = -1;             // bus index of the slack, -1 when de-energized
    double capacity_kw = 0.0;   // +inf when the substation is present
    double demand_kw = 0.0;     // connected load in the island
    bool energized = false;
    bool overloaded = false;
};

struct PowerFlowResult {
    Matrix voltages;                    // n x 3 pu, 0 on de-energized phases
    std::vector<double> branch_flows;   // per line index, pu, signed from->to, summed over phases
    std::vector<bool> served;           // per load index
    bool converged = true;
    std::vector<IslandReport> island_report;
};

// Linearized resistive power flow: per energized island and phase, solve
// v_i - v_j = r_ij f_ij with nodal balance sum_j f_ij = p_i and the slack
// voltage fixed. Islands without the substation or an enabled grid-forming
// DER are de-energized. An island whose connected demand exceeds its DER
// capacity marks the whole result converged=false.
PowerFlowResult solve(const NetworkGraph& g, const std::vector<bool>& switch_states,
                      const std::set<int>& outage_line_ids, const std::vector<bool>& load_states,
                      const SolverConfig& cfg);

// Served energy as a fraction of the total network demand (connected or not).
// Throws std::invalid_argument when the network carries no load at all.
double energy_supplied(const PowerFlowResult& result, const NetworkGraph& g);

}  // namespace gridrl
