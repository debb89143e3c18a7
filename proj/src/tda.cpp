#include "gridrl/tda.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "gridrl/common.hpp"

namespace gridrl {

Matrix hop_distance_matrix(const AdjSubgraph& sg) {
    int m = static_cast<int>(sg.nodes.size());
    std::vector<int> local(sg.nodes.empty() ? 0 : *std::max_element(sg.nodes.begin(), sg.nodes.end()) + 1, -1);
    for (int i = 0; i < m; ++i) local[sg.nodes[i]] = i;

    std::vector<std::vector<int>> nbrs(m);
    for (auto [a, b] : sg.edges) {
        nbrs[local[a]].push_back(local[b]);
        nbrs[local[b]].push_back(local[a]);
    }

    Matrix dist(m, m, -1.0);
    for (int s = 0; s < m; ++s) {
        std::vector<int> d(m, -1);
        std::vector<int> queue{s};
        d[s] = 0;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            int u = queue[head];
            for (int v : nbrs[u])
                if (d[v] < 0) {
                    d[v] = d[u] + 1;
                    queue.push_back(v);
                }
        }
        for (int t = 0; t < m; ++t) {
            if (d[t] < 0) throw std::invalid_argument("hop_distance_matrix: disconnected subgraph");
            dist(s, t) = d[t];
        }
    }
    return dist;
}

std::uint64_t topology_signature(const Matrix& adjacency) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a64(static_cast<std::uint64_t>(adjacency.rows()), h);
    for (int i = 0; i < adjacency.rows(); ++i)
        for (int j = i + 1; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) {
                h = fnv1a64(static_cast<std::uint64_t>(i), h);
                h = fnv1a64(static_cast<std::uint64_t>(j), h);
            }
    return h;
}

namespace {

struct FiltEdge {
    double value;
    int a, b;  // a < b

    bool operator<(const FiltEdge& o) const {
        return std::tie(value, a, b) < std::tie(o.value, o.a, o.b);
    }
};

struct FiltTriangle {
    double value;
    int a, b, c;  // a < b < c

    bool operator<(const FiltTriangle& o) const {
        return std::tie(value, a, b, c) < std::tie(o.value, o.a, o.b, o.c);
    }
};

// Union-find with the elder rule: the component containing the lower node id
// survives a merge.
struct ElderUnionFind {
    std::vector<int> parent, min_id;

    explicit ElderUnionFind(int n) : parent(n), min_id(n) {
        std::iota(parent.begin(), parent.end(), 0);
        std::iota(min_id.begin(), min_id.end(), 0);
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    // Returns false when already joined.
    bool unite(int x, int y) {
        int rx = find(x), ry = find(y);
        if (rx == ry) return false;
        if (min_id[ry] < min_id[rx]) std::swap(rx, ry);  // rx is the elder
        parent[ry] = rx;
        min_id[rx] = std::min(min_id[rx], min_id[ry]);
        return true;
    }
};

void sort_diagram(PersistenceDiagram& d) {
    std::sort(d.points.begin(), d.points.end(), [](const PersistencePoint& x, const PersistencePoint& y) {
        return std::tie(x.birth, x.death) < std::tie(y.birth, y.death);
    });
}

}  // namespace

std::pair<PersistenceDiagram, PersistenceDiagram> vietoris_rips_persistence(const Matrix& dist,
                                                                            double cap) {
    int n = dist.rows();
    PersistenceDiagram pd0{0, {}};
    PersistenceDiagram pd1{1, {}};

    std::vector<FiltEdge> edges;
    edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    double max_entry = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            edges.push_back({dist(i, j), i, j});
            max_entry = std::max(max_entry, dist(i, j));
        }
    if (cap < max_entry) throw std::invalid_argument("vietoris_rips_persistence: cap below max distance");
    std::sort(edges.begin(), edges.end());

    // H0: vertices are all born at 0; each merging edge kills the younger
    // component at the edge's filtration value.
    ElderUnionFind uf(n);
    for (const FiltEdge& e : edges)
        if (uf.unite(e.a, e.b) && e.value > 0.0) pd0.points.push_back({0.0, e.value});
    if (n > 0 && cap > 0.0) pd0.points.push_back({0.0, cap});  // the essential component

    // H1: reduce the triangle->edge boundary matrix over Z2. Columns are kept
    // as sorted row-index lists; rows are edges in filtration order.
    if (n >= 3) {
        std::vector<FiltTriangle> tris;
        tris.reserve(static_cast<std::size_t>(n) * (n - 1) * (n - 2) / 6);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = j + 1; k < n; ++k) {
                    double v = std::max({dist(i, j), dist(i, k), dist(j, k)});
                    tris.push_back({v, i, j, k});
                }
        std::sort(tris.begin(), tris.end());

        std::map<std::pair<int, int>, int> edge_row;
        for (std::size_t r = 0; r < edges.size(); ++r) edge_row[{edges[r].a, edges[r].b}] = static_cast<int>(r);

        std::vector<std::vector<int>> reduced;  // reduced columns that own a pivot
        std::vector<int> pivot_owner(edges.size(), -1);
        reduced.reserve(tris.size());

        for (const FiltTriangle& t : tris) {
            std::vector<int> col{edge_row[{t.a, t.b}], edge_row[{t.a, t.c}], edge_row[{t.b, t.c}]};
            std::sort(col.begin(), col.end());
            while (!col.empty()) {
                int low = col.back();
                int owner = pivot_owner[low];
                if (owner < 0) break;
                // symmetric difference with the owning column
                std::vector<int> merged;
                std::set_symmetric_difference(col.begin(), col.end(), reduced[owner].begin(),
                                              reduced[owner].end(), std::back_inserter(merged));
                col = std::move(merged);
            }
            if (!col.empty()) {
                int low = col.back();
                pivot_owner[low] = static_cast<int>(reduced.size());
                reduced.push_back(std::move(col));
                double birth = edges[low].value;
                if (t.value > birth) pd1.points.push_back({birth, t.value});
            }
        }
    }

    sort_diagram(pd0);
    sort_diagram(pd1);
    return {pd0, pd1};
}

double solve_assignment(const Matrix& cost) {
    // Kuhn-Munkres with potentials, 1-based internals.
    int n = cost.rows();
    if (n == 0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = match[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
    return total;
}

namespace {

// Orders diagram pairs canonically so W2(a,b) and W2(b,a) run the identical
// arithmetic and symmetry holds bit-exactly.
bool diagram_before(const PersistenceDiagram& a, const PersistenceDiagram& b) {
    if (a.points.size() != b.points.size()) return a.points.size() < b.points.size();
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        if (a.points[i].birth != b.points[i].birth) return a.points[i].birth < b.points[i].birth;
        if (a.points[i].death != b.points[i].death) return a.points[i].death < b.points[i].death;
    }
    return false;
}

}  // namespace

double wasserstein2(const PersistenceDiagram& d1, const PersistenceDiagram& d2) {
    if (d1.dim != d2.dim) throw std::invalid_argument("wasserstein2: dimension mismatch");
    if (diagram_before(d2, d1)) return wasserstein2(d2, d1);
    int n1 = static_cast<int>(d1.points.size());
    int n2 = static_cast<int>(d2.points.size());
    int n = n1 + n2;
    if (n == 0) return 0.0;

    auto diag_sq = [](const PersistencePoint& p) {
        double t = (p.death - p.birth);
        return t * t / 2.0;  // squared distance to the diagonal projection
    };

    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i < n1 && j < n2) {
                double db = d1.points[i].birth - d2.points[j].birth;
                double dd = d1.points[i].death - d2.points[j].death;
                cost(i, j) = db * db + dd * dd;
            } else if (i < n1) {
                cost(i, j) = diag_sq(d1.points[i]);
            } else if (j < n2) {
                cost(i, j) = diag_sq(d2.points[j]);
            } else {
                cost(i, j) = 0.0;
            }
        }
    return std::sqrt(solve_assignment(cost));
}

NodeDiagrams node_diagrams(const Matrix& adjacency, int node, int k) {
    AdjSubgraph sg = k_hop_subgraph(adjacency, node, k);
    Matrix dist = hop_distance_matrix(sg);
    double cap = 0.0;
    for (int i = 0; i < dist.rows(); ++i)
        for (int j = 0; j < dist.cols(); ++j) cap = std::max(cap, dist(i, j));
    cap = std::max(cap, 1.0);  // keep the essential H0 bar finite on singletons
    auto [pd0, pd1] = vietoris_rips_persistence(dist, cap);
    return {pd0, pd1};
}

NodeDiagrams PhCache::node(std::uint64_t signature, int k, int node, const Matrix& adjacency) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = diagrams_.find({signature, k, node});
        if (it != diagrams_.end()) return it->second;
    }
    NodeDiagrams d = node_diagrams(adjacency, node, k);
    std::lock_guard<std::mutex> lock(mu_);
    return diagrams_.emplace(std::make_tuple(signature, k, node), std::move(d)).first->second;
}

bool PhCache::lookup_weights(std::uint64_t signature, int k, Matrix& out) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = weights_.find({signature, k});
    if (it == weights_.end()) return false;
    out = it->second;
    return true;
}

void PhCache::store_weights(std::uint64_t signature, int k, const Matrix& weights) {
    std::lock_guard<std::mutex> lock(mu_);
    weights_.emplace(std::make_pair(signature, k), weights);
}

double node_diagram_distance(const Matrix& adjacency, int i, int j, int k, PhCache* cache) {
    if (i == j) return 0.0;
    std::uint64_t sig = cache ? topology_signature(adjacency) : 0;
    NodeDiagrams di = cache ? cache->node(sig, k, i, adjacency) : node_diagrams(adjacency, i, k);
    NodeDiagrams dj = cache ? cache->node(sig, k, j, adjacency) : node_diagrams(adjacency, j, k);
    double w0 = wasserstein2(di.pd0, dj.pd0);
    double w1 = wasserstein2(di.pd1, dj.pd1);
    return std::sqrt(w0 * w0 + w1 * w1);
}

TopologicalWeights ph_edge_weights_from_adjacency(const Matrix& adjacency, int k, PhCache* cache) {
    if (k < 1) throw std::invalid_argument("ph_edge_weights: k must be >= 1");
    int n = adjacency.rows();
    TopologicalWeights tw;
    tw.k = k;
    tw.topology_signature = topology_signature(adjacency);
    if (cache && cache->lookup_weights(tw.topology_signature, k, tw.a_ph)) return tw;

    tw.a_ph = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (adjacency(i, j) == 0.0) continue;
            NodeDiagrams di = cache ? cache->node(tw.topology_signature, k, i, adjacency)
                                    : node_diagrams(adjacency, i, k);
            NodeDiagrams dj = cache ? cache->node(tw.topology_signature, k, j, adjacency)
                                    : node_diagrams(adjacency, j, k);
            double w0 = wasserstein2(di.pd0, dj.pd0);
            double w1 = wasserstein2(di.pd1, dj.pd1);
            double w = 1.0 / (1.0 + std::sqrt(w0 * w0 + w1 * w1));
            tw.a_ph(i, j) = w;
            tw.a_ph(j, i) = w;
        }
    }
    if (cache) cache->store_weights(tw.topology_signature, k, tw.a_ph);
    return tw;
}

TopologicalWeights ph_edge_weights(const NetworkGraph& g, const std::vector<bool>& switch_states,
                                   const std::set<int>& outage_line_ids, int k, PhCache* cache) {
    return ph_edge_weights_from_adjacency(effective_adjacency(g, switch_states, outage_line_ids), k,
                                          cache);
}

Matrix laplacian(const Matrix& weights) {
    int n = weights.rows();
    std::vector<double> inv_sqrt_deg(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double deg = 0.0;
        for (int j = 0; j < n; ++j) deg += weights(i, j);
        if (deg > 0.0) inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        l(i, i) = 1.0;  // isolated nodes keep the identity row
        for (int j = 0; j < n; ++j)
            if (weights(i, j) != 0.0) l(i, j) -= inv_sqrt_deg[i] * weights(i, j) * inv_sqrt_deg[j];
    }
    return l;
}

void PhCache::save(const std::string& path, std::uint64_t network_hash) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::ostringstream out;
    out << "phweights v1 network=" << to_hex(network_hash) << "\n";
    for (const auto& [key, w] : weights_) {
        out << "topology sig=" << to_hex(key.first) << " k=" << key.second << " n=" << w.rows() << "\n";
        for (int i = 0; i < w.rows(); ++i)
            for (int j = i + 1; j < w.cols(); ++j)
                if (w(i, j) != 0.0) out << i << "," << j << "," << format_double(w(i, j)) << "\n";
        out << "end\n";
    }
    write_text_file(path, out.str());
}

void PhCache::load(const std::string& path, std::uint64_t network_hash) {
    std::istringstream in(read_text_file(path));
    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty weight cache", 1);
    std::string expected = "phweights v1 network=" + to_hex(network_hash);
    if (header != expected) throw ParseError("weight cache does not match this network", 1);

    std::lock_guard<std::mutex> lock(mu_);
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::istringstream hs(line);
        std::string tag, sig_field, k_field, n_field;
        hs >> tag >> sig_field >> k_field >> n_field;
        if (tag != "topology" || sig_field.rfind("sig=", 0) != 0)
            throw ParseError("expected topology header", line_no);
        std::uint64_t sig = std::stoull(sig_field.substr(4), nullptr, 16);
        int k = static_cast<int>(parse_int(k_field.substr(2), line_no));
        int n = static_cast<int>(parse_int(n_field.substr(2), line_no));
        Matrix w(n, n);
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line) == "end") break;
            auto parts = split(line, ',');
            if (parts.size() != 3) throw ParseError("expected i,j,weight", line_no);
            int i = static_cast<int>(parse_int(parts[0], line_no));
            int j = static_cast<int>(parse_int(parts[1], line_no));
            double val = parse_double(parts[2], line_no);
            w(i, j) = val;
            w(j, i) = val;
        }
        weights_.emplace(std::make_pair(sig, k), std::move(w));
    }
}

}  // namespace gridrl
