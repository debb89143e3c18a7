#pragma once

#include <string>
#include <vector>

#include "gridrl/env.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/scenario.hpp"
#include "gridrl/stats.hpp"

namespace gridrl {

struct ScenarioMetrics {
    int scenario = 0;         // index within the scenario list
    double reward = 0.0;      // terminal-step reward under the greedy policy
    double e_supp = 0.0;
    double v_viol = 0.0;
    double cum_reward = 0.0;  // episode-cumulative reward, auxiliary
};

struct MetricSummary {
    int n = 0;
    double mean_reward = 0.0, std_reward = 0.0;
    double mean_e_supp = 0.0, std_e_supp = 0.0;
    double mean_v_viol = 0.0, std_v_viol = 0.0;
    double mean_cum = 0.0, std_cum = 0.0;
};

// One greedy episode per scenario at the environment's horizon. Environment
// failures are recorded as reward -1, never aborted. `env` is a prototype;
// workers > 1 evaluate on copies in parallel, output stays ordered by
// scenario index.
std::vector<ScenarioMetrics> evaluate(const GcapcnPolicy& policy,
                                      const std::vector<OutageScenario>& scenarios, const Env& env,
                                      int workers = 1);

MetricSummary summarize(const std::vector<ScenarioMetrics>& metrics);

void export_metrics(const std::string& path, const std::vector<ScenarioMetrics>& metrics);
void export_summary(const std::string& path, const MetricSummary& summary);
std::vector<ScenarioMetrics> load_metrics(const std::string& path);

// Table-style comparison block plus paired t-tests and win counts for two
// models evaluated on matched scenarios.
std::string comparison_report(const std::string& name_a, const std::vector<ScenarioMetrics>& a,
                              const std::string& name_b, const std::vector<ScenarioMetrics>& b);

}  // namespace gridrl
