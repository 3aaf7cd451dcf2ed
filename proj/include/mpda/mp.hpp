#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/spde.hpp"

namespace mpda {

/// Quadratic / linear coefficient pair of a Gaussian message.
struct Message {
    double a = 0.0;
    double b = 0.0;
};

constexpr Message kInitialMessage{0.0, 1e-8};
constexpr double kDivergenceMeanLimit = 1e8;

/// One Message per directed edge, indexed by the FactorGraph adjacency
/// slot: slot s at node i holds the incoming message neighbor(s) -> i.
struct MessageStore {
    std::vector<Message> slots;

    static MessageStore initial(const FactorGraph& g) {
        return MessageStore{std::vector<Message>(g.num_directed_edges(), kInitialMessage)};
    }
};

enum class RunStatus { Converged, MaxIters, Diverged };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Converged: return "converged";
        case RunStatus::MaxIters: return "max_iters";
        default: return "diverged";
    }
}

/// Posterior marginals. Means are trustworthy at convergence; the
/// variances (1/precision) are known to be biased on loopy graphs and are
/// exposed for inspection only.
struct Marginals {
    std::vector<double> mean;
    std::vector<double> precision;
    static constexpr bool biased_variances = true;
};

/// Re-weighted outgoing message along an edge with weight p_ij, given the
/// sums of all incoming message coefficients at node i and the incoming
/// message on the excluded edge. Degree-independent cost.
inline Message reweighted_outgoing(double c, double p_ii, double h_i, double sum_a,
                                   double sum_b, Message excluded, double p_ij) {
    // c * (sum - excluded) + (c - 1) * excluded = c * sum - excluded
    const double alpha = p_ii + c * sum_a - excluded.a;
    // b enters the sender's linear coefficient with the opposite sign of h
    const double beta = -h_i - (c * sum_b - excluded.b);
    if (p_ij == 0.0) return Message{0.0, 0.0};
    if (alpha == 0.0) throw std::domain_error("singular message update (alpha = 0)");
    const double w = p_ij / c;
    return Message{-w * w / alpha, beta * w / alpha};
}

/// Spec-shaped variant taking the incoming messages explicitly (the
/// excluded edge's message is passed separately, not in `incoming`).
inline Message compute_outgoing_message(double c, double p_ii, double h_i,
                                        std::span<const Message> incoming,
                                        Message excluded, double p_ij) {
    double sa = excluded.a, sb = excluded.b;
    for (const auto& m : incoming) {
        sa += m.a;
        sb += m.b;
    }
    return reweighted_outgoing(c, p_ii, h_i, sa, sb, excluded, p_ij);
}

inline Message damped_update(Message old_msg, Message new_msg, double eta) {
    return Message{(1.0 - eta) * old_msg.a + eta * new_msg.a,
                   (1.0 - eta) * old_msg.b + eta * new_msg.b};
}

/// mean|m_t - m_{t-1}| < tau * mean|m_1 - m_2|; a zero reference means the
/// iteration was already at a fixed point.
inline bool early_stop(double first_delta, double reference_delta, double current_delta,
                       double tau) {
    if (first_delta == 0.0 || reference_delta == 0.0) return true;
    return current_delta < tau * reference_delta;
}

/// Update all outgoing messages of node i from the previous iteration's
/// store (Jacobi schedule). `read_in(slot)` supplies incoming messages and
/// lets the partitioned executor substitute stale halo copies. Writes only
/// slots owned by i's outgoing edges. Returns false on a singular update.
template <class ReadIncoming>
inline bool sweep_node(const FactorGraph& g, double c, double eta, int i,
                       ReadIncoming&& read_in, const std::vector<Message>& prev,
                       std::vector<Message>& next, double& abs_delta_sum) {
    const double p_ii = g.node_precision(i);
    const double h_i = g.node_shift(i);
    const std::size_t begin = g.adj_begin(i), end = g.adj_end(i);

    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t s = begin; s < end; ++s) {
        const Message m = read_in(s);
        sum_a += m.a;
        sum_b += m.b;
    }
    for (std::size_t s = begin; s < end; ++s) {
        const Message excluded = read_in(s);
        const double alpha = p_ii + c * sum_a - excluded.a;
        if (alpha == 0.0) return false;
        const double beta = -h_i - (c * sum_b - excluded.b);
        const double w = g.edge_weight(s) / c;
        const Message fresh{-w * w / alpha, beta * w / alpha};

        const std::size_t out = g.reverse_slot(s);  // directed edge i -> neighbor(s)
        const Message old_msg = prev[out];
        const Message damped = damped_update(old_msg, fresh, eta);
        next[out] = damped;
        abs_delta_sum += std::abs(damped.a - old_msg.a) + std::abs(damped.b - old_msg.b);
    }
    return true;
}

struct SweepResult {
    double mean_abs_delta = 0.0;
    bool ok = true;  // false: singular update or non-finite values
};

/// One Jacobi sweep over every node; delta is the mean over all directed
/// edges and both coefficients of the damped stored values.
inline SweepResult sweep(const FactorGraph& g, const std::vector<Message>& prev,
                         std::vector<Message>& next, const Hyperparams& hyper) {
    SweepResult r;
    if (g.num_directed_edges() == 0) return r;
    double delta_sum = 0.0;
    auto read_in = [&](std::size_t s) { return prev[s]; };
    for (int i = 0; i < g.num_nodes(); ++i) {
        if (!sweep_node(g, hyper.c, hyper.eta, i, read_in, prev, next, delta_sum)) {
            r.ok = false;
            return r;
        }
    }
    r.mean_abs_delta = delta_sum / static_cast<double>(2 * g.num_directed_edges());
    if (!std::isfinite(r.mean_abs_delta)) r.ok = false;
    return r;
}

inline Marginals compute_marginals(const FactorGraph& g, const MessageStore& msgs,
                                   double c) {
    const int n = g.num_nodes();
    Marginals m;
    m.mean.resize(static_cast<std::size_t>(n));
    m.precision.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double sum_a = 0.0, sum_b = 0.0;
        for (std::size_t s = g.adj_begin(i); s < g.adj_end(i); ++s) {
            sum_a += msgs.slots[s].a;
            sum_b += msgs.slots[s].b;
        }
        const double prec = g.node_precision(i) + c * sum_a;
        const double shift = g.node_shift(i) + c * sum_b;
        m.precision[static_cast<std::size_t>(i)] = prec;
        m.mean[static_cast<std::size_t>(i)] = shift / prec;
    }
    return m;
}

struct RunResult {
    Marginals marginals;
    int iterations = 0;
    RunStatus status = RunStatus::Converged;
    MessageStore messages;
};

namespace detail {

inline bool marginals_sane(const Marginals& m, bool require_positive_precision) {
    for (std::size_t i = 0; i < m.mean.size(); ++i) {
        if (!std::isfinite(m.mean[i]) || !std::isfinite(m.precision[i])) return false;
        if (std::abs(m.mean[i]) > kDivergenceMeanLimit) return false;
        if (require_positive_precision && !(m.precision[i] > 0.0)) return false;
    }
    return true;
}

}  // namespace detail

/// Damped re-weighted message passing until early stop, divergence, or the
/// iteration cap. Messages start at (0, 1e-8) unless an initial store
/// (e.g. upscaled from a coarser grid) is provided. The early-stop
/// reference is the mean change of the run's own second sweep, so a warm
/// start with a large initial relaxation stops once that transient has
/// settled.
inline RunResult run(const FactorGraph& g, const Hyperparams& hyper,
                     const MessageStore* init = nullptr) {
    hyper.validate();
    MessageStore store = init ? *init : MessageStore::initial(g);
    if (store.slots.size() != g.num_directed_edges())
        throw std::invalid_argument("message store does not match graph topology");

    std::vector<Message> next(store.slots.size());
    double first_delta = 0.0, reference_delta = 0.0;
    RunResult result;
    result.status = RunStatus::MaxIters;

    for (int t = 1; t <= hyper.max_iters; ++t) {
        const SweepResult sr = sweep(g, store.slots, next, hyper);
        if (!sr.ok) {
            result.status = RunStatus::Diverged;
            result.iterations = t;
            result.messages = std::move(store);
            result.marginals = compute_marginals(g, result.messages, hyper.c);
            return result;
        }
        store.slots.swap(next);
        result.iterations = t;

        const Marginals current = compute_marginals(g, store, hyper.c);
        if (!detail::marginals_sane(current, /*require_positive_precision=*/false)) {
            result.status = RunStatus::Diverged;
            result.messages = std::move(store);
            result.marginals = current;
            return result;
        }

        if (t == 1) {
            first_delta = sr.mean_abs_delta;
            if (first_delta == 0.0) {
                result.status = RunStatus::Converged;
                break;
            }
        } else if (t == 2) {
            reference_delta = sr.mean_abs_delta;
            if (reference_delta == 0.0) {
                result.status = RunStatus::Converged;
                break;
            }
        } else if (early_stop(first_delta, reference_delta, sr.mean_abs_delta, hyper.tau)) {
            result.status = RunStatus::Converged;
            break;
        }
    }

    result.messages = std::move(store);
    result.marginals = compute_marginals(g, result.messages, hyper.c);
    if (result.status == RunStatus::Converged &&
        !detail::marginals_sane(result.marginals, /*require_positive_precision=*/true)) {
        result.status = RunStatus::Diverged;
    }
    return result;
}

}  // namespace mpda
