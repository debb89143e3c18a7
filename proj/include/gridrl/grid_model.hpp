#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridrl/common.hpp"
#include "gridrl/linalg.hpp"

namespace gridrl {

using PhaseSet = std::array<bool, 3>;

inline int phase_count(const PhaseSet& p) { return int(p[0]) + int(p[1]) + int(p[2]); }

struct Bus {
    int id = 0;
    std::string name;
    PhaseSet phases{false, false, false};
    bool is_substation = false;
};

struct Line {
    int id = 0;
    int from_bus = 0;
    int to_bus = 0;
    double r_pu = 0.0;
    double x_pu = 0.0;  // parsed for format fidelity; unused by the resistive model
    bool has_switch = false;
};

enum class SwitchKind { Sectionalizing, Tie };

struct Switch {
    int line_id = 0;
    SwitchKind kind = SwitchKind::Sectionalizing;
    bool default_closed = true;
};

struct Load {
    int bus_id = 0;
    double p_kw = 0.0;  // per active phase
    PhaseSet phases{false, false, false};
    bool sheddable = false;
    bool connected = true;  // initial state; runtime state travels separately

    double total_kw() const { return p_kw * phase_count(phases); }
};

enum class DerMode { GridForming, GridFeeding };

struct Der {
    int bus_id = 0;
    double rating_kw = 0.0;
    DerMode mode = DerMode::GridFeeding;
    bool enabled = true;
};

// Subgraph of the network in node-index space: `nodes` are parent indices,
// `lines` are parent line indices with both endpoints inside `nodes`.
struct Subgraph {
    std::vector<int> nodes;
    std::vector<int> lines;
};

// Immutable after load. Switch/outage/load state is passed explicitly to the
// topology and power-flow functions, never stored here.
class NetworkGraph {
public:
    static NetworkGraph load(const std::string& text);

    std::string serialize() const;

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    // Sorted by line id; this order defines the switch slot indexing everywhere.
    const std::vector<Switch>& switches() const { return switches_; }
    const std::vector<Load>& loads() const { return loads_; }
    const std::vector<Der>& ders() const { return ders_; }

    int n() const { return static_cast<int>(buses_.size()); }
    int bus_index(int bus_id) const;
    int line_index(int line_id) const;
    int substation_index() const { return substation_index_; }

    // Indices into loads() of sheddable loads, in file order. Defines the
    // load slot indexing of the action vector.
    const std::vector<int>& sheddable_loads() const { return sheddable_loads_; }

    // Switch index for a line index, or -1.
    int switch_of_line(int line_index) const { return switch_of_line_[line_index]; }

    std::vector<bool> default_switch_states() const;

    double total_demand_kw() const;

    std::uint64_t content_hash() const { return content_hash_; }

    bool operator==(const NetworkGraph& o) const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::vector<Switch> switches_;
    std::vector<Load> loads_;
    std::vector<Der> ders_;
    std::map<int, int> bus_index_;
    std::map<int, int> line_index_;
    std::vector<int> switch_of_line_;
    std::vector<int> sheddable_loads_;
    int substation_index_ = -1;
    std::uint64_t content_hash_ = 0;

    void build_indexes(const std::string& source_text);
};

// Binary symmetric adjacency over bus indices: 1 iff a line exists, is not in
// the outage set, and either has no switch or its switch is closed.
Matrix effective_adjacency(const NetworkGraph& g, const std::vector<bool>& switch_states,
                           const std::set<int>& outage_line_ids);

// Connected components of a binary symmetric adjacency, each sorted, ordered
// by smallest member.
std::vector<std::vector<int>> islands(const Matrix& adjacency);

// Nodes within hop distance <= k of `node`, plus induced edges as (i,j) pairs
// of node indices. Line identities are recovered by grid-aware callers.
struct AdjSubgraph {
    std::vector<int> nodes;                      // sorted parent indices
    std::vector<std::pair<int, int>> edges;      // parent index pairs, i < j
};

AdjSubgraph k_hop_subgraph(const Matrix& adjacency, int node, int k);

// Max hop distance over connected pairs, restricted to the largest connected
// component (ties broken toward the component containing the lowest index).
int graph_diameter(const Matrix& adjacency);

// All-nodes BFS hop distances from `source` (-1 where unreachable).
std::vector<int> bfs_distances(const Matrix& adjacency, int source);

}  // namespace gridrl
