#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpda/sparse.hpp"

namespace mpda {

struct Observation {
    int node;
    double value;
    double noise_variance;
};

struct ObservationSet {
    std::vector<Observation> entries;

    void validate(int n) const {
        for (const auto& o : entries) {
            if (o.node < 0 || o.node >= n)
                throw std::invalid_argument("observation node index out of range");
            if (!(o.noise_variance > 0.0) || !std::isfinite(o.value))
                throw std::invalid_argument("observation needs finite value and variance > 0");
        }
    }
};

/// Pairwise Gaussian factor graph: per-node precision diagonal P_ii and
/// shift h_i, plus off-diagonal edge weights P_ij. Edges are stored once
/// (i < j) and mirrored into a CSR neighbor table for the message engine.
class FactorGraph {
public:
    struct Edge {
        int a;  // a < b
        int b;
        double weight;
    };

    FactorGraph(std::vector<double> node_precision, std::vector<double> node_shift,
                std::vector<Edge> edges)
        : node_precision_(std::move(node_precision)),
          node_shift_(std::move(node_shift)),
          edges_(std::move(edges)) {
        const int n = num_nodes();
        if (node_shift_.size() != node_precision_.size())
            throw std::invalid_argument("shift/precision length mismatch");
        for (double p : node_precision_)
            if (!(p > 0.0)) throw std::invalid_argument("node precision must be > 0");
        for (const auto& e : edges_)
            if (e.a < 0 || e.b >= n || e.a >= e.b)
                throw std::invalid_argument("edge endpoints invalid");
        build_adjacency();
    }

    int num_nodes() const { return static_cast<int>(node_precision_.size()); }
    std::size_t num_undirected_edges() const { return edges_.size(); }
    std::size_t num_directed_edges() const { return 2 * edges_.size(); }

    double node_precision(int i) const { return node_precision_[static_cast<std::size_t>(i)]; }
    double node_shift(int i) const { return node_shift_[static_cast<std::size_t>(i)]; }
    const std::vector<Edge>& edges() const { return edges_; }

    // CSR adjacency. Slot s in [adj_begin(i), adj_end(i)) describes the
    // directed edge neighbor(s) -> i; the message store indexes by s.
    std::size_t adj_begin(int i) const { return adj_offsets_[static_cast<std::size_t>(i)]; }
    std::size_t adj_end(int i) const { return adj_offsets_[static_cast<std::size_t>(i) + 1]; }
    int neighbor(std::size_t slot) const { return adj_neighbor_[slot]; }
    double edge_weight(std::size_t slot) const { return adj_weight_[slot]; }
    /// Slot of the reverse directed edge (i -> neighbor(slot)).
    std::size_t reverse_slot(std::size_t slot) const { return adj_reverse_[slot]; }
    int degree(int i) const { return static_cast<int>(adj_end(i) - adj_begin(i)); }

    /// Slot of directed edge from -> to, if the edge exists.
    std::optional<std::size_t> find_slot(int from, int to) const {
        for (std::size_t s = adj_begin(to); s < adj_end(to); ++s)
            if (adj_neighbor_[s] == from) return s;
        return std::nullopt;
    }

    /// Fold observations in as Gaussian natural-parameter updates:
    /// P_ii += 1/v, h_i += y/v. Unobserved nodes are untouched.
    FactorGraph with_observations(const ObservationSet& obs) const {
        obs.validate(num_nodes());
        FactorGraph g = *this;
        for (const auto& o : obs.entries) {
            g.node_precision_[static_cast<std::size_t>(o.node)] += 1.0 / o.noise_variance;
            g.node_shift_[static_cast<std::size_t>(o.node)] += o.value / o.noise_variance;
        }
        return g;
    }

    /// Dense (P, h) reconstruction, for oracles and small-problem solves.
    void densify(std::vector<double>& p_dense, std::vector<double>& h) const {
        const std::size_t n = node_precision_.size();
        p_dense.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) p_dense[i * n + i] = node_precision_[i];
        for (const auto& e : edges_) {
            p_dense[static_cast<std::size_t>(e.a) * n + static_cast<std::size_t>(e.b)] = e.weight;
            p_dense[static_cast<std::size_t>(e.b) * n + static_cast<std::size_t>(e.a)] = e.weight;
        }
        h = node_shift_;
    }

private:
    void build_adjacency() {
        const std::size_t n = node_precision_.size();
        adj_offsets_.assign(n + 1, 0);
        for (const auto& e : edges_) {
            ++adj_offsets_[static_cast<std::size_t>(e.a) + 1];
            ++adj_offsets_[static_cast<std::size_t>(e.b) + 1];
        }
        for (std::size_t i = 0; i < n; ++i) adj_offsets_[i + 1] += adj_offsets_[i];
        const std::size_t m = adj_offsets_[n];
        adj_neighbor_.resize(m);
        adj_weight_.resize(m);
        adj_reverse_.resize(m);
        std::vector<std::size_t> fill(adj_offsets_.begin(), adj_offsets_.end() - 1);
        for (const auto& e : edges_) {
            const std::size_t sa = fill[static_cast<std::size_t>(e.a)]++;
            const std::size_t sb = fill[static_cast<std::size_t>(e.b)]++;
            // sa: directed edge b -> a (incoming slot at a); sb: a -> b.
            adj_neighbor_[sa] = e.b;
            adj_neighbor_[sb] = e.a;
            adj_weight_[sa] = adj_weight_[sb] = e.weight;
            adj_reverse_[sa] = sb;
            adj_reverse_[sb] = sa;
        }
    }

    std::vector<double> node_precision_;
    std::vector<double> node_shift_;
    std::vector<Edge> edges_;

    std::vector<std::size_t> adj_offsets_;
    std::vector<int> adj_neighbor_;
    std::vector<double> adj_weight_;
    std::vector<std::size_t> adj_reverse_;
};

/// Read a factor graph off a symmetric precision matrix: diagonal becomes
/// the node potentials, strict upper-triangle nonzeros the edges.
inline FactorGraph from_precision(const SparseOperator& p,
                                  std::span<const double> shift = {}) {
    const int n = p.size();
    std::vector<double> diag(static_cast<std::size_t>(n));
    std::vector<FactorGraph::Edge> edges;
    for (int i = 0; i < n; ++i) {
        for (const auto& e : p.row(i)) {
            if (e.col == i) {
                if (!(e.value > 0.0))
                    throw std::invalid_argument("precision diagonal must be > 0");
                diag[static_cast<std::size_t>(i)] = e.value;
            } else if (e.col > i) {
                edges.push_back({i, e.col, e.value});
            }
        }
        if (diag[static_cast<std::size_t>(i)] == 0.0)
            throw std::invalid_argument("precision diagonal must be > 0");
    }
    std::vector<double> h;
    if (shift.empty()) {
        h.assign(static_cast<std::size_t>(n), 0.0);
    } else {
        if (static_cast<int>(shift.size()) != n)
            throw std::invalid_argument("shift length mismatch");
        h.assign(shift.begin(), shift.end());
    }
    return FactorGraph(std::move(diag), std::move(h), std::move(edges));
}

/// Shift vector h = P * mean, so the prior exp(-f'Pf/2 + h'f) centers at mean.
inline std::vector<double> prior_shift_from_mean(const SparseOperator& p,
                                                 std::span<const double> mean) {
    if (static_cast<int>(mean.size()) != p.size())
        throw std::invalid_argument("mean length mismatch");
    return p.apply(mean);
}

}  // namespace mpda
