#include "gridrl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gridrl/env.hpp"

namespace gridrl {

namespace {

Matrix default_adjacency(const NetworkGraph& g) {
    return effective_adjacency(g, g.default_switch_states(), {});
}

// Deterministic Fisher-Yates using our stateless draw helpers.
template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1)]);
}

}  // namespace

std::vector<int> select_centers(const NetworkGraph& g, int m, std::uint64_t /*seed*/) {
    if (m > g.n()) throw std::invalid_argument("cannot select more centers than nodes");
    Matrix adj = default_adjacency(g);
    int n = g.n();
    const int unreachable = std::numeric_limits<int>::max() / 2;

    std::vector<std::vector<int>> dist(n);
    for (int i = 0; i < n; ++i) {
        dist[i] = bfs_distances(adj, i);
        for (int& d : dist[i])
            if (d < 0) d = unreachable;
    }

    // First center: lowest-id node of maximum (finite) eccentricity.
    int first = 0, best_ecc = -1;
    for (int i = 0; i < n; ++i) {
        int ecc = 0;
        for (int d : dist[i])
            if (d != unreachable) ecc = std::max(ecc, d);
        if (ecc > best_ecc) {
            best_ecc = ecc;
            first = i;
        }
    }

    std::vector<int> chosen{first};
    std::vector<int> min_dist = dist[first];
    while (static_cast<int>(chosen.size()) < m) {
        int next = -1, best = -1;
        for (int i = 0; i < n; ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
            if (min_dist[i] > best) {
                best = min_dist[i];
                next = i;
            }
        }
        chosen.push_back(next);
        for (int i = 0; i < n; ++i) min_dist[i] = std::min(min_dist[i], dist[next][i]);
    }

    std::vector<int> ids;
    ids.reserve(chosen.size());
    for (int idx : chosen) ids.push_back(g.buses()[idx].id);
    return ids;
}

std::vector<OutageScenario> generate_scenarios(const NetworkGraph& g,
                                               const std::vector<int>& centers, int n, Rng& rng,
                                               int max_retries) {
    if (centers.empty()) throw std::invalid_argument("no centers");
    Matrix adj = default_adjacency(g);
    int diam = graph_diameter(adj);
    if (diam < 3)
        throw std::invalid_argument("network diameter must be >= 3 for scenario generation");
    int r_max = diam / 3;

    // In-service line ids per (node index) pair are recovered by re-scanning
    // the line list against the subgraph's node set.
    auto default_states = g.default_switch_states();
    std::vector<bool> in_service(g.lines().size(), false);
    for (std::size_t li = 0; li < g.lines().size(); ++li) {
        int sw = g.switch_of_line(static_cast<int>(li));
        in_service[li] = sw < 0 || default_states[sw];
    }

    std::vector<OutageScenario> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        OutageScenario sc;
        sc.seed = rng();
        Rng local(sc.seed);
        bool ok = false;
        for (int attempt = 0; attempt < max_retries && !ok; ++attempt) {
            sc.center = centers[uniform_int(local, 0, static_cast<std::int64_t>(centers.size()) - 1)];
            sc.radius = static_cast<int>(uniform_int(local, 1, r_max));
            AdjSubgraph sub = k_hop_subgraph(adj, g.bus_index(sc.center), sc.radius);
            std::vector<bool> in_sub(g.n(), false);
            for (int v : sub.nodes) in_sub[v] = true;
            std::vector<int> e_sub;
            for (std::size_t li = 0; li < g.lines().size(); ++li) {
                if (!in_service[li]) continue;
                const Line& l = g.lines()[li];
                if (in_sub[g.bus_index(l.from_bus)] && in_sub[g.bus_index(l.to_bus)])
                    e_sub.push_back(l.id);
            }
            if (e_sub.empty()) continue;
            sc.severity = uniform_real(local, 0.0, 0.3);
            int k = std::max(1, static_cast<int>(std::ceil(sc.severity * e_sub.size())));
            shuffle_inplace(e_sub, local);
            sc.failed_lines.assign(e_sub.begin(), e_sub.begin() + k);
            std::sort(sc.failed_lines.begin(), sc.failed_lines.end());
            ok = true;
        }
        if (!ok) throw ScenarioExhaustion("no outage subgraph with lines found after retries");
        out.push_back(std::move(sc));
    }
    return out;
}

bool validate_scenario(const OutageScenario& scenario, Env& env) {
    Observation obs = env.reset(scenario);
    return !obs.c_viol;
}

std::pair<std::vector<OutageScenario>, std::vector<OutageScenario>> split_disjoint(
    const std::vector<OutageScenario>& pool, int n_test, Rng& rng) {
    std::vector<OutageScenario> distinct;
    std::set<std::vector<int>> seen;
    for (const OutageScenario& sc : pool)
        if (seen.insert(sc.failed_lines).second) distinct.push_back(sc);
    if (static_cast<int>(distinct.size()) < n_test)
        throw ScenarioExhaustion("insufficient distinct scenarios: have " +
                                 std::to_string(distinct.size()) + ", need " + std::to_string(n_test));
    shuffle_inplace(distinct, rng);
    std::vector<OutageScenario> test(distinct.begin(), distinct.begin() + n_test);
    std::vector<OutageScenario> train(distinct.begin() + n_test, distinct.end());
    return {std::move(train), std::move(test)};
}

void save_scenarios(const std::string& path, const std::vector<OutageScenario>& scenarios,
                    std::uint64_t network_hash) {
    std::ostringstream out;
    out << "network=" << to_hex(network_hash) << " seed,center,r,s,line_ids\n";
    for (const OutageScenario& sc : scenarios) {
        out << sc.seed << "," << sc.center << "," << sc.radius << "," << format_double(sc.severity)
            << ",";
        for (std::size_t i = 0; i < sc.failed_lines.size(); ++i) {
            if (i) out << ";";
            out << sc.failed_lines[i];
        }
        out << "\n";
    }
    write_text_file(path, out.str());
}

std::vector<OutageScenario> load_scenarios(const std::string& path, std::uint64_t network_hash) {
    std::istringstream in(read_text_file(path));
    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty scenario file", 1);
    std::string expected = "network=" + to_hex(network_hash);
    if (header.substr(0, expected.size()) != expected)
        throw HashMismatch("scenario file was generated for a different network");

    std::vector<OutageScenario> out;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != 5) throw ParseError("expected seed,center,r,s,line_ids", line_no);
        OutageScenario sc;
        sc.seed = static_cast<std::uint64_t>(std::stoull(std::string(trim(parts[0]))));
        sc.center = static_cast<int>(parse_int(parts[1], line_no));
        sc.radius = static_cast<int>(parse_int(parts[2], line_no));
        sc.severity = parse_double(parts[3], line_no);
        for (std::string_view id : split(parts[4], ';'))
            if (!trim(id).empty()) sc.failed_lines.push_back(static_cast<int>(parse_int(id, line_no)));
        std::sort(sc.failed_lines.begin(), sc.failed_lines.end());
        out.push_back(std::move(sc));
    }
    return out;
}

}  // namespace gridrl
