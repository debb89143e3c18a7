#include "gridrl/power_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridrl {

namespace {

struct IslandLines {
    std::vector<int> line_indices;  // in-service lines with both ends in the island
};

}  // namespace

PowerFlowResult solve(const NetworkGraph& g, const std::vector<bool>& switch_states,
                      const std::set<int>& outage_line_ids, const std::vector<bool>& load_states,
                      const SolverConfig& cfg) {
    if (load_states.size() != g.loads().size())
        throw std::invalid_argument("load state vector does not cover all loads");
    if (!(cfg.base_kw > 0.0)) throw std::invalid_argument("base_kw must be > 0");

    Matrix adj = effective_adjacency(g, switch_states, outage_line_ids);
    auto comps = islands(adj);

    int n = g.n();
    PowerFlowResult res;
    res.voltages = Matrix(n, 3);
    res.branch_flows.assign(g.lines().size(), 0.0);
    res.served.assign(g.loads().size(), false);
    res.converged = true;

    // In-service line set, island membership
    std::vector<bool> in_service(g.lines().size(), false);
    for (std::size_t li = 0; li < g.lines().size(); ++li) {
        const Line& l = g.lines()[li];
        if (outage_line_ids.count(l.id)) continue;
        int sw = g.switch_of_line(static_cast<int>(li));
        if (sw >= 0 && !switch_states[sw]) continue;
        in_service[li] = true;
    }
    std::vector<int> comp_of(n, -1);
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (int v : comps[c]) comp_of[v] = static_cast<int>(c);

    std::vector<IslandLines> comp_lines(comps.size());
    for (std::size_t li = 0; li < g.lines().size(); ++li) {
        if (!in_service[li]) continue;
        int a = g.bus_index(g.lines()[li].from_bus);
        comp_lines[comp_of[a]].line_indices.push_back(static_cast<int>(li));
    }

    // Loads and DERs by bus index
    std::vector<std::vector<int>> loads_at(n), ders_at(n);
    for (std::size_t i = 0; i < g.loads().size(); ++i) loads_at[g.bus_index(g.loads()[i].bus_id)].push_back(static_cast<int>(i));
    for (std::size_t i = 0; i < g.ders().size(); ++i) ders_at[g.bus_index(g.ders()[i].bus_id)].push_back(static_cast<int>(i));

    for (std::size_t c = 0; c < comps.size(); ++c) {
        IslandReport rep;
        rep.nodes = comps[c];

        bool has_substation = false;
        int best_former = -1;  // der index of the largest-rating grid-forming DER
        double der_capacity = 0.0;
        for (int v : comps[c]) {
            if (v == g.substation_index()) has_substation = true;
            for (int di : ders_at[v]) {
                const Der& d = g.ders()[di];
                if (!d.enabled) continue;
                der_capacity += d.rating_kw;
                if (d.mode == DerMode::GridForming) {
                    if (best_former < 0 || d.rating_kw > g.ders()[best_former].rating_kw ||
                        (d.rating_kw == g.ders()[best_former].rating_kw &&
                         d.bus_id < g.ders()[best_former].bus_id))
                        best_former = di;
                }
            }
            for (int li : loads_at[v])
                if (load_states[li]) rep.demand_kw += g.loads()[li].total_kw();
        }

        rep.energized = has_substation || best_former >= 0;
        rep.capacity_kw = has_substation ? std::numeric_limits<double>::infinity() : der_capacity;
        if (rep.energized) {
            rep.slack = has_substation ? g.substation_index() : g.bus_index(g.ders()[best_former].bus_id);
            if (rep.demand_kw > rep.capacity_kw) {
                rep.overloaded = true;
                res.converged = false;
            }
        }

        if (rep.energized) {
            // Net per-phase injections in pu at every island node. The slack
            // DER's own rating is excluded: the slack supplies the balance.
            int m = static_cast<int>(comps[c].size());
            std::vector<int> local(n, -1);
            for (int i = 0; i < m; ++i) local[comps[c][i]] = i;

            Matrix inj(m, 3);
            for (int i = 0; i < m; ++i) {
                int v = comps[c][i];
                for (int li : loads_at[v]) {
                    if (!load_states[li]) continue;
                    const Load& ld = g.loads()[li];
                    for (int ph = 0; ph < 3; ++ph)
                        if (ld.phases[ph]) inj(i, ph) -= ld.p_kw / cfg.base_kw;
                }
                for (int di : ders_at[v]) {
                    const Der& d = g.ders()[di];
                    if (!d.enabled) continue;
                    if (!has_substation && di == best_former) continue;  // the slack supplies the balance
                    const PhaseSet& ph_set = g.buses()[v].phases;
                    double per_phase = d.rating_kw / cfg.base_kw / phase_count(ph_set);
                    for (int ph = 0; ph < 3; ++ph)
                        if (ph_set[ph]) inj(i, ph) += per_phase;
                }
            }

            int slack_local = local[rep.slack];
            if (m == 1) {
                for (int ph = 0; ph < 3; ++ph)
                    if (g.buses()[comps[c][0]].phases[ph]) res.voltages(comps[c][0], ph) = cfg.v_slack;
            } else {
                // Weighted Laplacian with conductances 1/r, slack row folded out.
                Matrix lap(m, m);
                for (int li : comp_lines[c].line_indices) {
                    const Line& l = g.lines()[li];
                    int a = local[g.bus_index(l.from_bus)];
                    int b = local[g.bus_index(l.to_bus)];
                    double w = 1.0 / l.r_pu;
                    lap(a, a) += w;
                    lap(b, b) += w;
                    lap(a, b) -= w;
                    lap(b, a) -= w;
                }
                std::vector<int> unknown;  // local indices excluding slack
                for (int i = 0; i < m; ++i)
                    if (i != slack_local) unknown.push_back(i);
                int u = static_cast<int>(unknown.size());
                Matrix a_red(u, u);
                for (int i = 0; i < u; ++i)
                    for (int j = 0; j < u; ++j) a_red(i, j) = lap(unknown[i], unknown[j]);

                Matrix volts(m, 3);
                for (int ph = 0; ph < 3; ++ph) {
                    std::vector<double> rhs(u);
                    for (int i = 0; i < u; ++i)
                        rhs[i] = inj(unknown[i], ph) - lap(unknown[i], slack_local) * cfg.v_slack;
                    std::vector<double> x = solve_linear(a_red, rhs);
                    volts(slack_local, ph) = cfg.v_slack;
                    for (int i = 0; i < u; ++i) volts(unknown[i], ph) = x[i];
                }
                for (int i = 0; i < m; ++i) {
                    int v = comps[c][i];
                    for (int ph = 0; ph < 3; ++ph)
                        if (g.buses()[v].phases[ph]) res.voltages(v, ph) = volts(i, ph);
                }
                for (int li : comp_lines[c].line_indices) {
                    const Line& l = g.lines()[li];
                    int a = local[g.bus_index(l.from_bus)];
                    int b = local[g.bus_index(l.to_bus)];
                    double f = 0.0;
                    for (int ph = 0; ph < 3; ++ph) f += (volts(a, ph) - volts(b, ph)) / l.r_pu;
                    res.branch_flows[li] = f;
                }
            }
            for (int v : comps[c])
                for (int li : loads_at[v]) res.served[li] = load_states[li];
        }
        res.island_report.push_back(std::move(rep));
    }
    return res;
}

double energy_supplied(const PowerFlowResult& result, const NetworkGraph& g) {
    double total = g.total_demand_kw();
    if (!(total > 0.0)) throw std::invalid_argument("network has zero total demand");
    double served = 0.0;
    for (std::size_t i = 0; i < g.loads().size(); ++i)
        if (result.served[i]) served += g.loads()[i].total_kw();
    return served / total;
}

}  // namespace gridrl
