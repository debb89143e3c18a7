#include <doctest.h>

#include <cmath>
#include <set>

#include "gridrl/common.hpp"
#include "gridrl/env.hpp"
#include "gridrl/scenario.hpp"

using namespace gridrl;

namespace {

std::string data_path(const std::string& rel) { return std::string(GRIDRL_DATA_DIR) + "/" + rel; }

NetworkGraph toy() { return NetworkGraph::load(read_text_file(data_path("networks/toy15.net"))); }

}  // namespace

TEST_CASE("select_centers") {
    NetworkGraph g = toy();
    SUBCASE("m = |N| selects every node") {
        auto centers = select_centers(g, g.n(), 0);
        CHECK(static_cast<int>(centers.size()) == g.n());
        std::set<int> uniq(centers.begin(), centers.end());
        CHECK(static_cast<int>(uniq.size()) == g.n());
    }
    SUBCASE("path of 5 with m=2 picks the endpoints") {
        const char* text = R"(
[buses]
id=1, phases=1, substation=true
id=2, phases=1
id=3, phases=1
id=4, phases=1
id=5, phases=1
[lines]
id=1, from=1, to=2, r_pu=0.01, x_pu=0
id=2, from=2, to=3, r_pu=0.01, x_pu=0
id=3, from=3, to=4, r_pu=0.01, x_pu=0
id=4, from=4, to=5, r_pu=0.01, x_pu=0
[loads]
bus=5, p_kw=1, phases=1
)";
        NetworkGraph path = NetworkGraph::load(text);
        auto centers = select_centers(path, 2, 7);
        REQUIRE(centers.size() == 2);
        CHECK(centers[0] == 1);  // lowest-id max-eccentricity node
        CHECK(centers[1] == 5);  // farthest from it
    }
    SUBCASE("deterministic under any seed") {
        CHECK(select_centers(g, 5, 1) == select_centers(g, 5, 999));
    }
    SUBCASE("m beyond |N| is rejected") { CHECK_THROWS(select_centers(g, g.n() + 1, 0)); }
}

TEST_CASE("generate_scenarios") {
    NetworkGraph g = toy();
    auto centers = select_centers(g, 10, 0);

    SUBCASE("k formula holds exactly and radii stay in range") {
        Rng rng = make_stream(5, "gen");
        auto pool = generate_scenarios(g, centers, 500, rng);
        Matrix adj = effective_adjacency(g, g.default_switch_states(), {});
        int diam = graph_diameter(adj);
        CHECK(diam == 9);
        auto default_states = g.default_switch_states();
        for (const auto& sc : pool) {
            CHECK(sc.radius >= 1);
            CHECK(sc.radius <= diam / 3);
            CHECK(sc.severity >= 0.0);
            CHECK(sc.severity <= 0.3);
            // recompute |E_sub| and the k formula
            AdjSubgraph sub = k_hop_subgraph(adj, g.bus_index(sc.center), sc.radius);
            std::set<int> in_sub(sub.nodes.begin(), sub.nodes.end());
            int e_sub = 0;
            for (std::size_t li = 0; li < g.lines().size(); ++li) {
                const Line& l = g.lines()[li];
                int sw = g.switch_of_line(static_cast<int>(li));
                if (sw >= 0 && !default_states[sw]) continue;
                if (in_sub.count(g.bus_index(l.from_bus)) && in_sub.count(g.bus_index(l.to_bus)))
                    ++e_sub;
            }
            int expect_k = std::max(1, static_cast<int>(std::ceil(sc.severity * e_sub)));
            CHECK(static_cast<int>(sc.failed_lines.size()) == expect_k);
        }
    }
    SUBCASE("same master seed regenerates the identical list") {
        Rng r1 = make_stream(8, "gen");
        Rng r2 = make_stream(8, "gen");
        auto p1 = generate_scenarios(g, centers, 50, r1);
        auto p2 = generate_scenarios(g, centers, 50, r2);
        CHECK(p1 == p2);
    }
    SUBCASE("k clamps at 1 for tiny severity") {
        // s=0 would give k=0 without the max clause; verify the formula directly
        CHECK(std::max(1, static_cast<int>(std::ceil(0.0 * 10))) == 1);
        CHECK(std::max(1, static_cast<int>(std::ceil(0.3 * 10))) == 3);
    }
    SUBCASE("generation requires diameter >= 3") {
        const char* tiny = R"(
[buses]
id=1, phases=1, substation=true
id=2, phases=1
[lines]
id=1, from=1, to=2, r_pu=0.01, x_pu=0
[loads]
bus=2, p_kw=1, phases=1
)";
        NetworkGraph g2 = NetworkGraph::load(tiny);
        Rng rng = make_stream(1, "gen");
        CHECK_THROWS_AS(generate_scenarios(g2, {1}, 1, rng), std::invalid_argument);
    }
}

TEST_CASE("validate_scenario") {
    NetworkGraph g = toy();
    Env env(g, EnvConfig{}, SolverConfig{}, WeightsMode::Plain);

    SUBCASE("empty outage on a feasible network is valid") {
        CHECK(validate_scenario(OutageScenario{}, env));
    }
    SUBCASE("a scenario isolating an overloaded DER island is invalid") {
        // cutting line 8 (8-9) and line 13 (9-14) leaves {9,10}: 180 kW on a
        // 60 kW grid-feeding DER -> de-energized but fine; instead island
        // {9,10,14} via line 8 only: 200+60 capacity vs 200 demand is fine,
        // so overload needs the bigger island: cut line 6 (1-7) and line 15
        // is open anyway; feeder B holds 230 kW vs 260 capacity - fine. Use a
        // bespoke network instead.
        const char* text = R"(
[buses]
id=1, phases=1, substation=true
id=2, phases=1
id=3, phases=1
[lines]
id=1, from=1, to=2, r_pu=0.01, x_pu=0
id=2, from=2, to=3, r_pu=0.01, x_pu=0
[loads]
bus=3, p_kw=400, phases=1
[ders]
bus=2, kw=250, mode=grid_forming
)";
        NetworkGraph g2 = NetworkGraph::load(text);
        Env env2(g2, EnvConfig{}, SolverConfig{}, WeightsMode::Plain);
        OutageScenario sc;
        sc.failed_lines = {1};
        CHECK_FALSE(validate_scenario(sc, env2));
    }
    SUBCASE("validation is deterministic") {
        OutageScenario sc;
        sc.failed_lines = {9};
        CHECK(validate_scenario(sc, env) == validate_scenario(sc, env));
    }
}

TEST_CASE("split_disjoint") {
    auto mk = [](std::vector<int> lines) {
        OutageScenario sc;
        sc.failed_lines = std::move(lines);
        return sc;
    };
    SUBCASE("10 distinct split 7/3 with no overlap") {
        std::vector<OutageScenario> pool;
        for (int i = 1; i <= 10; ++i) pool.push_back(mk({i}));
        Rng rng = make_stream(3, "split");
        auto [train, test] = split_disjoint(pool, 3, rng);
        CHECK(train.size() == 7);
        CHECK(test.size() == 3);
        std::set<std::vector<int>> train_sets;
        for (const auto& sc : train) train_sets.insert(sc.failed_lines);
        for (const auto& sc : test) CHECK_FALSE(train_sets.count(sc.failed_lines));
    }
    SUBCASE("duplicates collapse before splitting") {
        std::vector<OutageScenario> pool{mk({1}), mk({1}), mk({2}), mk({2}), mk({3})};
        Rng rng = make_stream(4, "split");
        auto [train, test] = split_disjoint(pool, 1, rng);
        CHECK(train.size() + test.size() == 3);
    }
    SUBCASE("insufficient distinct scenarios throw") {
        std::vector<OutageScenario> pool{mk({1}), mk({1})};
        Rng rng = make_stream(5, "split");
        CHECK_THROWS_AS(split_disjoint(pool, 2, rng), ScenarioExhaustion);
    }
}

TEST_CASE("scenario files round-trip and enforce the network hash") {
    NetworkGraph g = toy();
    auto centers = select_centers(g, 8, 0);
    Rng rng = make_stream(6, "file");
    auto pool = generate_scenarios(g, centers, 20, rng);

    std::string path = "/tmp/gridrl_test_scenarios.scn";
    save_scenarios(path, pool, g.content_hash());
    auto loaded = load_scenarios(path, g.content_hash());
    CHECK(loaded == pool);

    CHECK_THROWS_AS(load_scenarios(path, g.content_hash() + 1), HashMismatch);
}

TEST_CASE("scenario statistics over a large pool") {
    NetworkGraph g = toy();
    auto centers = select_centers(g, 10, 0);
    Rng rng = make_stream(7, "stats");
    auto pool = generate_scenarios(g, centers, 5000, rng);
    double s_sum = 0.0;
    int min_k = 1 << 30;
    for (const auto& sc : pool) {
        s_sum += sc.severity;
        min_k = std::min(min_k, static_cast<int>(sc.failed_lines.size()));
    }
    CHECK(s_sum / pool.size() == doctest::Approx(0.15).epsilon(0.15));
    CHECK(min_k == 1);
}
