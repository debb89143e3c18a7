// Independent reference implementations used to check the library. Everything
// here is deliberately naive and kept apart from the code paths under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "gridrl/linalg.hpp"
#include "gridrl/tda.hpp"

namespace oracles {

// All-pairs hop distances by repeated BFS over an adjacency list (not the
// library's matrix BFS).
inline std::vector<std::vector<int>> bfs_all_pairs(const std::vector<std::vector<int>>& nbrs) {
    int n = static_cast<int>(nbrs.size());
    std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
    for (int s = 0; s < n; ++s) {
        std::vector<int> queue{s};
        dist[s][s] = 0;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            int u = queue[head];
            for (int v : nbrs[u])
                if (dist[s][v] < 0) {
                    dist[s][v] = dist[s][u] + 1;
                    queue.push_back(v);
                }
        }
    }
    return dist;
}

inline gridrl::Matrix naive_matmul(const gridrl::Matrix& a, const gridrl::Matrix& b) {
    gridrl::Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// Exact 2-Wasserstein by enumerating every augmented matching (diagrams with
// a handful of points only).
inline double brute_force_w2(const gridrl::PersistenceDiagram& d1,
                             const gridrl::PersistenceDiagram& d2) {
    int n1 = static_cast<int>(d1.points.size());
    int n2 = static_cast<int>(d2.points.size());
    int n = n1 + n2;
    if (n == 0) return 0.0;
    auto diag_sq = [](const gridrl::PersistencePoint& p) {
        double t = p.death - p.birth;
        return t * t / 2.0;
    };
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            int j = perm[i];
            if (i < n1 && j < n2) {
                double db = d1.points[i].birth - d2.points[j].birth;
                double dd = d1.points[i].death - d2.points[j].death;
                total += db * db + dd * dd;
            } else if (i < n1) {
                total += diag_sq(d1.points[i]);
            } else if (j < n2) {
                total += diag_sq(d2.points[j]);
            }
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best);
}

// PD0 of a Vietoris-Rips filtration by full reduction of the vertex-edge
// boundary matrix (no union-find).
inline std::vector<gridrl::PersistencePoint> boundary_reduction_pd0(const gridrl::Matrix& dist,
                                                                    double cap) {
    int n = dist.rows();
    struct E {
        double v;
        int a, b;
    };
    std::vector<E> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.push_back({dist(i, j), i, j});
    std::sort(edges.begin(), edges.end(), [](const E& x, const E& y) {
        return std::tie(x.v, x.a, x.b) < std::tie(y.v, y.a, y.b);
    });

    std::vector<std::vector<int>> reduced;
    std::vector<int> pivot_owner(n, -1);  // vertex row -> column index
    std::vector<gridrl::PersistencePoint> bars;
    for (const E& e : edges) {
        std::vector<int> col{e.a, e.b};
        std::sort(col.begin(), col.end());
        while (!col.empty()) {
            int low = col.back();
            if (pivot_owner[low] < 0) break;
            std::vector<int> merged;
            std::set_symmetric_difference(col.begin(), col.end(), reduced[pivot_owner[low]].begin(),
                                          reduced[pivot_owner[low]].end(), std::back_inserter(merged));
            col = std::move(merged);
        }
        if (!col.empty()) {
            pivot_owner[col.back()] = static_cast<int>(reduced.size());
            reduced.push_back(col);
            if (e.v > 0.0) bars.push_back({0.0, e.v});  // vertex born at 0 dies here
        }
    }
    if (n > 0 && cap > 0.0) bars.push_back({0.0, cap});  // essential component
    std::sort(bars.begin(), bars.end(), [](auto& x, auto& y) {
        return std::tie(x.birth, x.death) < std::tie(y.birth, y.death);
    });
    return bars;
}

// Jacobi eigenvalue iteration for small symmetric matrices.
inline std::vector<double> symmetric_eigenvalues(gridrl::Matrix a) {
    int n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-18) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace oracles
