#pragma once

#include <atomic>
#include <barrier>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/grid.hpp"
#include "mpda/mp.hpp"

namespace mpda {

/// Non-overlapping block decomposition of the grid into px * py
/// subdomains. Halo slots are the directed edges whose endpoints have
/// different owners; their messages are the only cross-subdomain traffic.
struct Partition {
    int px = 1;
    int py = 1;
    std::vector<int> ownership;            // node -> subdomain id
    std::vector<std::size_t> halo_slots;   // directed-edge slots crossing owners
    std::vector<int> nodes_per_subdomain;

    int num_subdomains() const { return px * py; }
    std::size_t num_directed_halo_edges() const { return halo_slots.size(); }
};

inline Partition make_partition(const GridSpec& g, const FactorGraph& graph, int px,
                                int py) {
    if (px < 1 || py < 1 || px > g.nx || py > g.ny)
        throw std::invalid_argument("invalid partition counts");
    if (graph.num_nodes() != g.num_nodes())
        throw std::invalid_argument("graph does not match grid");

    Partition part;
    part.px = px;
    part.py = py;
    part.ownership.resize(static_cast<std::size_t>(g.num_nodes()));
    part.nodes_per_subdomain.assign(static_cast<std::size_t>(px * py), 0);

    auto block_of = [](int coord, int extent, int blocks) {
        // block sizes differ by at most one
        return static_cast<int>((static_cast<std::int64_t>(coord) + 1) * blocks - 1) / extent;
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int sub = block_of(j, g.ny, py) * px + block_of(i, g.nx, px);
            part.ownership[static_cast<std::size_t>(g.linear_index(i, j))] = sub;
            ++part.nodes_per_subdomain[static_cast<std::size_t>(sub)];
        }
    }
    for (int v = 0; v < graph.num_nodes(); ++v) {
        const int owner_v = part.ownership[static_cast<std::size_t>(v)];
        for (std::size_t s = graph.adj_begin(v); s < graph.adj_end(v); ++s) {
            const int u = graph.neighbor(s);
            if (part.ownership[static_cast<std::size_t>(u)] != owner_v)
                part.halo_slots.push_back(s);
        }
    }
    return part;
}

struct ParallelStats {
    int sweeps = 0;
    int exchanges = 0;
    std::size_t bytes_exchanged = 0;
    std::size_t directed_halo_edges = 0;
    std::vector<int> subdomain_sweeps;
};

struct ParallelResult {
    Marginals marginals;
    int iterations = 0;
    RunStatus status = RunStatus::Converged;
    MessageStore messages;
    ParallelStats stats;
};

/// One worker thread per subdomain; each sweeps only its own nodes.
/// Incoming messages on halo edges are read from a frozen copy that is
/// republished every exchange_period sweeps, so subdomains run on stale
/// border data in between. exchange_period = 1 reproduces the serial
/// Jacobi sweep bitwise.
inline ParallelResult run_partitioned(const FactorGraph& g, const Partition& part,
                                      const Hyperparams& hyper, int exchange_period,
                                      const MessageStore* init = nullptr) {
    hyper.validate();
    if (exchange_period < 1) throw std::invalid_argument("exchange_period must be >= 1");
    if (static_cast<int>(part.ownership.size()) != g.num_nodes())
        throw std::invalid_argument("partition does not match graph");

    const int workers = part.num_subdomains();
    const std::size_t m = g.num_directed_edges();

    std::vector<std::vector<int>> owned(static_cast<std::size_t>(workers));
    for (int v = 0; v < g.num_nodes(); ++v)
        owned[static_cast<std::size_t>(part.ownership[static_cast<std::size_t>(v)])]
            .push_back(v);

    std::vector<Message> buffers[2];
    buffers[0] = init ? init->slots : std::vector<Message>(m, kInitialMessage);
    if (buffers[0].size() != m)
        throw std::invalid_argument("message store does not match graph topology");
    buffers[1].assign(m, Message{});

    std::vector<char> is_halo(m, 0);
    for (std::size_t s : part.halo_slots) is_halo[s] = 1;
    std::vector<Message> frozen = buffers[0];

    std::vector<double> worker_delta(static_cast<std::size_t>(workers), 0.0);
    std::vector<char> worker_ok(static_cast<std::size_t>(workers), 1);

    ParallelResult result;
    result.stats.directed_halo_edges = part.num_directed_halo_edges();
    result.status = RunStatus::MaxIters;

    int read_idx = 0;
    int t = 0;
    double first_delta = 0.0, reference_delta = 0.0;
    std::atomic<bool> stop{false};

    auto coordinate = [&]() noexcept {
        ++t;
        result.iterations = t;
        read_idx = 1 - read_idx;  // just-written buffer becomes readable
        ++result.stats.sweeps;

        double delta_sum = 0.0;
        bool ok = true;
        for (int w = 0; w < workers; ++w) {
            delta_sum += worker_delta[static_cast<std::size_t>(w)];
            ok = ok && worker_ok[static_cast<std::size_t>(w)];
            worker_delta[static_cast<std::size_t>(w)] = 0.0;
        }
        const double mean_delta =
            m == 0 ? 0.0 : delta_sum / static_cast<double>(2 * m);

        // divergence check on the would-be marginals, allocation free
        const std::vector<Message>& cur = buffers[read_idx];
        for (int i = 0; ok && i < g.num_nodes(); ++i) {
            double sa = 0.0, sb = 0.0;
            for (std::size_t s = g.adj_begin(i); s < g.adj_end(i); ++s) {
                sa += cur[s].a;
                sb += cur[s].b;
            }
            const double prec = g.node_precision(i) + hyper.c * sa;
            const double mean = (g.node_shift(i) + hyper.c * sb) / prec;
            if (!std::isfinite(mean) || !std::isfinite(prec) ||
                std::abs(mean) > kDivergenceMeanLimit)
                ok = false;
        }
        if (!ok || !std::isfinite(mean_delta)) {
            result.status = RunStatus::Diverged;
            stop.store(true, std::memory_order_relaxed);
            return;
        }

        bool converged = false;
        if (t == 1) {
            first_delta = mean_delta;
            converged = first_delta == 0.0;
        } else if (t == 2) {
            reference_delta = mean_delta;
            converged = reference_delta == 0.0;
        } else {
            converged = early_stop(first_delta, reference_delta, mean_delta, hyper.tau);
        }
        if (converged) {
            result.status = RunStatus::Converged;
            stop.store(true, std::memory_order_relaxed);
            return;
        }
        if (t >= hyper.max_iters) {
            stop.store(true, std::memory_order_relaxed);
            return;
        }
        if (t % exchange_period == 0) {
            for (std::size_t s : part.halo_slots) frozen[s] = cur[s];
            ++result.stats.exchanges;
            result.stats.bytes_exchanged += part.halo_slots.size() * 2 * sizeof(double);
        }
    };

    std::barrier sync(workers, coordinate);

    auto worker_fn = [&](int w) {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::vector<Message>& prev = buffers[read_idx];
            std::vector<Message>& next = buffers[1 - read_idx];
            auto read_in = [&](std::size_t s) { return is_halo[s] ? frozen[s] : prev[s]; };
            double delta = 0.0;
            bool ok = true;
            for (int i : owned[static_cast<std::size_t>(w)]) {
                if (!sweep_node(g, hyper.c, hyper.eta, i, read_in, prev, next, delta)) {
                    ok = false;
                    break;
                }
            }
            worker_delta[static_cast<std::size_t>(w)] = delta;
            worker_ok[static_cast<std::size_t>(w)] = ok ? 1 : 0;
            sync.arrive_and_wait();
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker_fn, w);
    for (auto& th : threads) th.join();

    result.stats.subdomain_sweeps.assign(static_cast<std::size_t>(workers),
                                         result.stats.sweeps);
    result.messages = MessageStore{buffers[read_idx]};
    result.marginals = compute_marginals(g, result.messages, hyper.c);
    if (result.status == RunStatus::Converged) {
        for (double p : result.marginals.precision)
            if (!(p > 0.0)) result.status = RunStatus::Diverged;
    }
    return result;
}

}  // namespace mpda
