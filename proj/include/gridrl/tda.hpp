#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/linalg.hpp"

namespace gridrl {

struct PersistencePoint {
    double birth = 0.0;
    double death = 0.0;

    bool operator==(const PersistencePoint&) const = default;
};

struct PersistenceDiagram {
    int dim = 0;                           // homology dimension, 0 or 1
    std::vector<PersistencePoint> points;  // kept sorted by (birth, death)

    bool operator==(const PersistenceDiagram&) const = default;
};

struct NodeDiagrams {
    PersistenceDiagram pd0;
    PersistenceDiagram pd1;
};

struct TopologicalWeights {
    Matrix a_ph;                       // entries in (0,1] exactly on the adjacency support
    int k = 0;                         // hop radius the diagrams were computed with
    std::uint64_t topology_signature = 0;
};

// Shortest-path hop counts between every node pair of a connected subgraph.
// Throws std::invalid_argument on disconnected input.
Matrix hop_distance_matrix(const AdjSubgraph& sg);

// Stable hash of a binary adjacency; keys the diagram memo cache.
std::uint64_t topology_signature(const Matrix& adjacency);

// Persistence of the Vietoris-Rips filtration over a finite metric space:
// H0 by union-find over edges in filtration order (elder rule, the lone
// essential bar capped at `cap`), H1 by Z2 reduction of the triangle boundary
// matrix. Zero-persistence points are dropped. Requires cap >= max entry.
std::pair<PersistenceDiagram, PersistenceDiagram> vietoris_rips_persistence(const Matrix& dist,
                                                                            double cap);

// 2-Wasserstein distance between diagrams of the same dimension: exact
// assignment over the augmented cost matrix of squared Euclidean costs with
// diagonal slots, square-rooted.
double wasserstein2(const PersistenceDiagram& d1, const PersistenceDiagram& d2);

// Exact solution of the square min-cost assignment problem (O(n^3)).
double solve_assignment(const Matrix& cost);

// Thread-safe memo of per-node diagrams and per-topology weight matrices.
// Values are pure functions of the key, so concurrent insert-or-get is
// idempotent.
class PhCache {
public:
    NodeDiagrams node(std::uint64_t signature, int k, int node,
                      const Matrix& adjacency);
    bool lookup_weights(std::uint64_t signature, int k, Matrix& out) const;
    void store_weights(std::uint64_t signature, int k, const Matrix& weights);

    void save(const std::string& path, std::uint64_t network_hash) const;
    // Merges entries from a weight-cache file; rejects other networks' caches.
    void load(const std::string& path, std::uint64_t network_hash);

private:
    mutable std::mutex mu_;
    std::map<std::tuple<std::uint64_t, int, int>, NodeDiagrams> diagrams_;
    std::map<std::pair<std::uint64_t, int>, Matrix> weights_;
};

NodeDiagrams node_diagrams(const Matrix& adjacency, int node, int k);

// sqrt(W2(PD0_i,PD0_j)^2 + W2(PD1_i,PD1_j)^2) on k-hop neighborhood diagrams.
double node_diagram_distance(const Matrix& adjacency, int i, int j, int k, PhCache* cache = nullptr);

// The topologically aware adjacency: for every effective edge (i,j),
// A_PH[i][j] = 1 / (1 + node_diagram_distance(i,j,k)); zero elsewhere.
TopologicalWeights ph_edge_weights(const NetworkGraph& g, const std::vector<bool>& switch_states,
                                   const std::set<int>& outage_line_ids, int k,
                                   PhCache* cache = nullptr);

TopologicalWeights ph_edge_weights_from_adjacency(const Matrix& adjacency, int k,
                                                  PhCache* cache = nullptr);

// Symmetric normalized Laplacian I - D^{-1/2} W D^{-1/2}; isolated nodes get
// an identity row. Accepts A_PH or a plain binary adjacency.
Matrix laplacian(const Matrix& weights);

}  // namespace gridrl
