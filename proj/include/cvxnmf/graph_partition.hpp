#pragma once

// Graph partitioning experiment: random block graphs, the NMF relaxation
// partitioner, a spectral-clustering baseline, the perf score and the
// (alpha, beta) benchmark sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cp_factorize.hpp"
#include "decompositions.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace cvxnmf {

/// Undirected simple graph: symmetric 0/1 adjacency with zero diagonal.
class Graph {
public:
    Graph() = default;
    explicit Graph(SymMatrix adjacency) : adj_(std::move(adjacency)) {
        for (std::size_t i = 0; i < adj_.dim(); ++i) {
            if (adj_(i, i) != 0.0) throw InvalidInput("Graph: adjacency diagonal must be zero");
            for (std::size_t j = 0; j < adj_.dim(); ++j)
                if (adj_(i, j) != 0.0 && adj_(i, j) != 1.0)
                    throw InvalidInput("Graph: adjacency entries must be 0 or 1");
        }
    }
    std::size_t n() const noexcept { return adj_.dim(); }
    const SymMatrix& adjacency() const noexcept { return adj_; }

private:
    SymMatrix adj_;
};

struct PartitionLabels {
    std::vector<std::size_t> labels;
    std::size_t k = 1;

    PartitionLabels() = default;
    PartitionLabels(std::vector<std::size_t> l, std::size_t clusters)
        : labels(std::move(l)), k(clusters) {
        if (k == 0) throw InvalidInput("PartitionLabels: k must be >= 1");
        for (std::size_t v : labels)
            if (v >= k) throw InvalidInput("PartitionLabels: cluster id out of range");
    }
    std::size_t size() const noexcept { return labels.size(); }
};

/// Renumbers cluster ids by order of first appearance.
inline PartitionLabels canonical_labels(const std::vector<std::size_t>& raw, std::size_t k) {
    std::vector<std::size_t> map(k, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> out(raw.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& m = map[raw[i]];
        if (m == std::numeric_limits<std::size_t>::max()) m = next++;
        out[i] = m;
    }
    return PartitionLabels(std::move(out), k);
}

struct GraphGenConfig {
    std::vector<std::size_t> block_sizes{30, 30};
    double alpha = 0.1;  ///< within-block edge iff uniform draw ≥ alpha
    double beta = 0.9;   ///< between-block edge iff uniform draw ≥ beta
    std::uint64_t seed = 0;
};

struct GeneratedGraph {
    Graph graph;
    PartitionLabels truth;
};

/// Block graph: upper-triangle pairs (i < j, row-major) draw u ~ U[0,1);
/// an edge exists iff u ≥ alpha inside a block or u ≥ beta across blocks.
/// Nodes are then relabeled by a Fisher–Yates permutation drawn from the
/// same stream. Stream key: CounterRng::derive(seed, {}).
inline GeneratedGraph generate_block_graph(const GraphGenConfig& cfg) {
    if (cfg.block_sizes.empty()) throw InvalidInput("generate_block_graph: no blocks");
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0) || !(cfg.beta >= 0.0 && cfg.beta <= 1.0))
        throw InvalidInput("generate_block_graph: alpha and beta must lie in [0,1]");
    std::vector<std::size_t> block;
    for (std::size_t b = 0; b < cfg.block_sizes.size(); ++b) {
        if (cfg.block_sizes[b] == 0) throw InvalidInput("generate_block_graph: empty block");
        block.insert(block.end(), cfg.block_sizes[b], b);
    }
    const std::size_t n = block.size();
    if (n < 2) throw InvalidInput("generate_block_graph: need at least two nodes");

    CounterRng rng(CounterRng::derive(cfg.seed, {}));
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double u = rng.uniform();
            const double threshold = block[i] == block[j] ? cfg.alpha : cfg.beta;
            const double e = u >= threshold ? 1.0 : 0.0;
            a(i, j) = e;
            a(j, i) = e;
        }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

    Matrix p(n, n);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = block[perm[i]];
        for (std::size_t j = 0; j < n; ++j) p(i, j) = a(perm[i], perm[j]);
    }
    return {Graph(SymMatrix(std::move(p))), PartitionLabels(std::move(labels), cfg.block_sizes.size())};
}

/// perf = 1 − #{(i,j) : A_ij ≠ (XXᵀ)_ij} / n² over all ordered pairs, X the
/// indicator matrix of the labels. With ignore_diagonal the self-pairs are
/// excluded from both counts.
inline double partition_performance(const Graph& g, const PartitionLabels& labels,
                                    bool ignore_diagonal = false) {
    const std::size_t n = g.n();
    if (labels.size() != n) throw InvalidInput("partition_performance: label count differs from n");
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (ignore_diagonal && i == j) continue;
            const double same = labels.labels[i] == labels.labels[j] ? 1.0 : 0.0;
            if (g.adjacency()(i, j) != same) ++mismatches;
        }
    const double cells = ignore_diagonal ? static_cast<double>(n * n - n) : static_cast<double>(n * n);
    if (cells == 0.0) return 1.0;
    return 1.0 - static_cast<double>(mismatches) / cells;
}

namespace detail {

inline std::size_t row_argmax(const Matrix& h, std::size_t r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < h.cols(); ++c)
        if (h(r, c) > h(r, best)) best = c;
    return best;
}

/// Symmetric NMF refinement X ≈ HHᵀ, H ≥ 0, by the damped multiplicative
/// rule H ← H ∘ (1/2 + (XH) / (2 HHᵀH)).
inline void refine_symmetric_factor(const SymMatrix& x, Matrix& h, int iters) {
    for (int it = 0; it < iters; ++it) {
        const Matrix xh = matmul(x.matrix(), h);
        const Matrix hth = matmul_tn(h, h);
        const Matrix denom = matmul(h, hth);
        for (std::size_t i = 0; i < h.rows(); ++i)
            for (std::size_t c = 0; c < h.cols(); ++c)
                if (denom(i, c) > 0.0) h(i, c) *= std::max(0.0, 0.5 + 0.5 * xh(i, c) / denom(i, c));
    }
}

} // namespace detail

inline constexpr double kPartitionNu = 0.1;

/// Nonnegative n×k factor H with HHᵀ ≈ X.
/// k = 2: the two √λ-scaled top eigenvector columns are rotated so that the
/// cone spanned by their rows is centred in the nonnegative quadrant (exact
/// for a doubly nonnegative rank-2 X).
/// k ≥ 3: anchor columns j_c of X are picked by successive projection and
/// H(:, c) = X(:, j_c) / √X(j_c, j_c), which is exact when every cluster has
/// a node loading on it alone; symmetric multiplicative updates then refine H.
inline Matrix relaxation_factor(const SymMatrix& x, std::size_t k) {
    const std::size_t n = x.dim();
    if (k == 2) {
        const auto eig = sym_eig(x);
        Matrix h(n, k);
        for (std::size_t c = 0; c < k; ++c) {
            const double s = std::sqrt(std::max(eig.eigenvalues[c], 0.0));
            for (std::size_t i = 0; i < n; ++i) h(i, c) = s * eig.eigenvectors(i, c);
        }
        Matrix rotated = rotate_into_quadrant(h).rows;
        for (double& v : rotated.values()) v = std::max(v, 0.0);
        return rotated;
    }
    Matrix r = x.matrix();
    std::vector<std::size_t> anchors;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t best = 0;
        double best_norm = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += r(i, j) * r(i, j);
            if (s > best_norm) best_norm = s, best = j;
        }
        anchors.push_back(best);
        if (best_norm <= 0.0) continue;
        std::vector<double> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = r(i, best) / std::sqrt(best_norm);
        for (std::size_t j = 0; j < n; ++j) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += u[i] * r(i, j);
            for (std::size_t i = 0; i < n; ++i) r(i, j) -= d * u[i];
        }
    }
    Matrix h(n, k);
    double hmax = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double d = x(anchors[c], anchors[c]);
        if (d <= 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            h(i, c) = std::max(0.0, x(i, anchors[c])) / std::sqrt(d);
            hmax = std::max(hmax, h(i, c));
        }
    }
    if (hmax == 0.0) return h;
    // Strictly positive start so the multiplicative rule can move every entry.
    for (double& v : h.values()) v += 1e-3 * hmax;
    detail::refine_symmetric_factor(x, h, 300);
    return h;
}

/// Partition by the doubly nonnegative relaxation: X solves
/// sparse_lowrank(A, γ = 0, ν), the rank-k factor H ≈ X comes from
/// relaxation_factor, and node i joins argmax_c H_ic (lowest c on ties; an
/// all-zero row falls in cluster 0).
inline PartitionLabels nmf_partition(const Graph& g, std::size_t k, const SolverOptions& opts = {},
                                     double nu = kPartitionNu) {
    const std::size_t n = g.n();
    if (k < 1 || k > n) throw InvalidInput("nmf_partition: need 1 <= k <= n");
    if (k == 1) return PartitionLabels(std::vector<std::size_t>(n, 0), 1);
    const auto sol = sparse_lowrank(g.adjacency(), {0.0, nu}, opts);
    const Matrix h = relaxation_factor(sol.X, k);
    std::vector<std::size_t> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = detail::row_argmax(h, i);
    return PartitionLabels(std::move(raw), k);
}

struct KMeansResult {
    std::vector<std::size_t> labels;
    double inertia = 0.0;
};

inline constexpr int kKMeansRestarts = 20;
inline constexpr int kKMeansIters = 100;

/// Lloyd's k-means with k-means++ seeding, best inertia over `restarts`.
inline KMeansResult kmeans(const Matrix& pts, std::size_t k, std::uint64_t seed,
                           int restarts = kKMeansRestarts, int iters = kKMeansIters) {
    const std::size_t n = pts.rows();
    const std::size_t d = pts.cols();
    if (k < 1 || k > n) throw InvalidInput("kmeans: need 1 <= k <= n");
    auto dist2 = [&](std::size_t i, const Matrix& c, std::size_t j) {
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            const double diff = pts(i, t) - c(j, t);
            s += diff * diff;
        }
        return s;
    };

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < restarts; ++restart) {
        CounterRng rng(CounterRng::derive(seed, {static_cast<std::uint64_t>(restart)}));
        Matrix centers(k, d);
        std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
        std::size_t pick = rng.below(n);
        for (std::size_t c = 0; c < k; ++c) {
            if (c > 0) {
                double total = 0.0;
                for (double v : nearest) total += v;
                if (total > 0.0) {
                    const double r = rng.uniform() * total;
                    double acc = 0.0;
                    pick = n - 1;
                    for (std::size_t i = 0; i < n; ++i) {
                        acc += nearest[i];
                        if (r < acc) {
                            pick = i;
                            break;
                        }
                    }
                } else {
                    pick = rng.below(n);
                }
            }
            for (std::size_t t = 0; t < d; ++t) centers(c, t) = pts(pick, t);
            for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist2(i, centers, c));
        }

        std::vector<std::size_t> assign(n, k);
        for (int it = 0; it < iters; ++it) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t arg = 0;
                double bd = dist2(i, centers, 0);
                for (std::size_t c = 1; c < k; ++c) {
                    const double dc = dist2(i, centers, c);
                    if (dc < bd) {
                        bd = dc;
                        arg = c;
                    }
                }
                if (assign[i] != arg) {
                    assign[i] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
            Matrix sums(k, d);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++counts[assign[i]];
                for (std::size_t t = 0; t < d; ++t) sums(assign[i], t) += pts(i, t);
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) {
                    // Empty cluster: reseed at the point farthest from its center.
                    std::size_t far = 0;
                    double fd = -1.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double di = dist2(i, centers, assign[i]);
                        if (di > fd) {
                            fd = di;
                            far = i;
                        }
                    }
                    for (std::size_t t = 0; t < d; ++t) centers(c, t) = pts(far, t);
                    continue;
                }
                for (std::size_t t = 0; t < d; ++t) centers(c, t) = sums(c, t) / static_cast<double>(counts[c]);
            }
        }
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += dist2(i, centers, assign[i]);
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = assign;
        }
    }
    return best;
}

/// Spectral clustering on D^{-1/2} A D^{-1/2} (isolated nodes get D_ii = 1):
/// top-k eigenvectors, rows scaled to unit length, then seeded k-means.
inline PartitionLabels spectral_partition(const Graph& g, std::size_t k, std::uint64_t seed) {
    const std::size_t n = g.n();
    if (k < 1 || k > n) throw InvalidInput("spectral_partition: need 1 <= k <= n");
    if (k == 1) return PartitionLabels(std::vector<std::size_t>(n, 0), 1);
    const SymMatrix& a = g.adjacency();
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        inv_sqrt[i] = 1.0 / std::sqrt(deg > 0.0 ? deg : 1.0);
    }
    Matrix norm(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) norm(i, j) = inv_sqrt[i] * a(i, j) * inv_sqrt[j];
    const auto eig = sym_eig(SymMatrix::assume_symmetric(std::move(norm)));
    Matrix emb(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double len = 0.0;
        for (std::size_t c = 0; c < k; ++c) len += eig.eigenvectors(i, c) * eig.eigenvectors(i, c);
        len = std::sqrt(len);
        for (std::size_t c = 0; c < k; ++c) emb(i, c) = len > 0.0 ? eig.eigenvectors(i, c) / len : 0.0;
    }
    return canonical_labels(kmeans(emb, k, seed).labels, k);
}

enum class PartitionMethod { nmf, spectral };

inline std::string_view to_string(PartitionMethod m) {
    return m == PartitionMethod::nmf ? "nmf" : "spectral";
}

struct SweepResultRow {
    double alpha = 0.0;
    double beta = 0.0;
    PartitionMethod method = PartitionMethod::nmf;
    double mean_perf = 0.0;
    double std_perf = 0.0;
    std::size_t n = 0;
    std::size_t trials = 0;  ///< trials that completed
};

struct SweepPoint {
    double alpha = 0.0;
    double beta = 0.0;
};

/// Splits n nodes into k blocks of near-equal size (larger blocks first).
inline std::vector<std::size_t> equal_blocks(std::size_t n, std::size_t k) {
    if (k < 1 || k > n) throw InvalidInput("equal_blocks: need 1 <= k <= n");
    std::vector<std::size_t> sizes(k, n / k);
    for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
    return sizes;
}

/// For each grid point g and trial t the graph uses seed
/// derive(seed, {g, t, 0}) and spectral k-means derive(seed, {g, t, 1}).
/// Rows come in grid order, nmf before spectral; std is the population
/// standard deviation. A trial that throws is dropped from that method's
/// count.
inline std::vector<SweepResultRow> benchmark_sweep(const std::vector<SweepPoint>& grid, std::size_t n,
                                                   std::size_t trials, std::size_t k,
                                                   std::uint64_t seed, const SolverOptions& opts = {}) {
    if (trials < 1) throw InvalidInput("benchmark_sweep: trials must be >= 1");
    const auto sizes = equal_blocks(n, k);
    std::vector<SweepResultRow> rows;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        std::vector<double> perf_nmf;
        std::vector<double> perf_spectral;
        for (std::size_t t = 0; t < trials; ++t) {
            GraphGenConfig cfg{sizes, grid[gi].alpha, grid[gi].beta,
                               CounterRng::derive(seed, {gi, t, 0})};
            GeneratedGraph gen;
            try {
                gen = generate_block_graph(cfg);
            } catch (const std::exception&) {
                continue;
            }
            try {
                perf_nmf.push_back(partition_performance(gen.graph, nmf_partition(gen.graph, k, opts)));
            } catch (const std::exception&) {
            }
            try {
                perf_spectral.push_back(partition_performance(
                    gen.graph, spectral_partition(gen.graph, k, CounterRng::derive(seed, {gi, t, 1}))));
            } catch (const std::exception&) {
            }
        }
        auto summarize = [&](PartitionMethod m, const std::vector<double>& v) {
            SweepResultRow r{grid[gi].alpha, grid[gi].beta, m, 0.0, 0.0, n, v.size()};
            if (!v.empty()) {
                r.mean_perf = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                double var = 0.0;
                for (double p : v) var += (p - r.mean_perf) * (p - r.mean_perf);
                r.std_perf = std::sqrt(var / static_cast<double>(v.size()));
            }
            rows.push_back(r);
        };
        summarize(PartitionMethod::nmf, perf_nmf);
        summarize(PartitionMethod::spectral, perf_spectral);
    }
    return rows;
}

} // namespace cvxnmf
