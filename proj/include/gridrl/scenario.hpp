#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

class Env;

class ScenarioExhaustion : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HashMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OutageScenario {
    std::uint64_t seed = 0;
    int center = 0;                 // bus id
    int radius = 0;                 // hops
    double severity = 0.0;          // s in [0, 0.3]
    std::vector<int> failed_lines;  // line ids, sorted

    bool operator==(const OutageScenario&) const = default;
};

// Farthest-point sampling on hop distance over the default-configuration
// adjacency; fully deterministic (seed reserved for interface stability).
std::vector<int> select_centers(const NetworkGraph& g, int m, std::uint64_t seed);

// One scenario per master-rng draw: the draw seeds a per-scenario stream that
// picks center, radius r in [1, diam/3], severity s ~ U(0, 0.3) and
// k = max(1, ceil(s * |E_sub|)) failed lines without replacement from the
// (center, r) subgraph. Centers/radii yielding edgeless subgraphs are
// redrawn a bounded number of times.
std::vector<OutageScenario> generate_scenarios(const NetworkGraph& g,
                                               const std::vector<int>& centers, int n, Rng& rng,
                                               int max_retries = 100);

// True iff reset(scenario) yields a converged, finite observation with
// C_viol = 0 under default switch states.
bool validate_scenario(const OutageScenario& scenario, Env& env);

// Collapses duplicates (by failed-line set), then splits so no test
// failed-line set appears in train. Throws ScenarioExhaustion when fewer
// distinct scenarios exist than requested.
std::pair<std::vector<OutageScenario>, std::vector<OutageScenario>> split_disjoint(
    const std::vector<OutageScenario>& pool, int n_test, Rng& rng);

void save_scenarios(const std::string& path, const std::vector<OutageScenario>& scenarios,
                    std::uint64_t network_hash);
// Throws HashMismatch when the file was generated for another network.
std::vector<OutageScenario> load_scenarios(const std::string& path, std::uint64_t network_hash);

}  // namespace gridrl
