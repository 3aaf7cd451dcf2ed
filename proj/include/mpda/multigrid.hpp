#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/grid.hpp"
#include "mpda/mp.hpp"
#include "mpda/spde.hpp"

namespace mpda {

/// Grid hierarchy, coarsest first; the last level is the target grid.
struct LevelPlan {
    std::vector<GridSpec> levels;
    int base_min_dim = 32;
};

/// Coarsen the target while the result stays at least base_min_dim wide in
/// both directions. A target already smaller than the base gives a single
/// level.
inline LevelPlan build_hierarchy(const GridSpec& target, int base_min_dim = 32) {
    LevelPlan plan;
    plan.base_min_dim = base_min_dim;
    plan.levels.push_back(target);
    while (true) {
        const GridSpec& g = plan.levels.back();
        const int cnx = (g.nx + 1) / 2, cny = (g.ny + 1) / 2;
        if (std::min(cnx, cny) < base_min_dim || cnx < 2 || cny < 2) break;
        plan.levels.push_back(coarsen(g));
    }
    std::reverse(plan.levels.begin(), plan.levels.end());
    return plan;
}

/// Coarsening depth of `level` below `finest`; error if `level` is not in
/// the coarsening chain of `finest`.
inline int level_depth(const GridSpec& finest, const GridSpec& level) {
    GridSpec g = finest;
    for (int k = 0; k < 64; ++k) {
        if (g.nx == level.nx && g.ny == level.ny) return k;
        if (g.nx < level.nx || g.ny < level.ny) break;
        const int cnx = (g.nx + 1) / 2, cny = (g.ny + 1) / 2;
        if (cnx < 2 || cny < 2) break;
        g = coarsen(g);
    }
    throw std::invalid_argument("grid is not a coarsening of the finest grid");
}

/// Keep observations whose finest-grid coordinates land exactly on the
/// level grid (both coordinates divisible by 2^depth), re-indexed to it.
inline ObservationSet restrict_observations(const ObservationSet& obs,
                                            const GridSpec& finest,
                                            const GridSpec& level) {
    const int k = level_depth(finest, level);
    if (k == 0) return obs;
    ObservationSet out;
    const int mask = (1 << k) - 1;
    for (const auto& o : obs.entries) {
        const int i = finest.coord_i(o.node), j = finest.coord_j(o.node);
        if ((i & mask) == 0 && (j & mask) == 0)
            out.entries.push_back({level.linear_index(i >> k, j >> k), o.value,
                                   o.noise_variance});
    }
    return out;
}

/// Initialize fine-grid messages from a converged coarser store. A fine
/// directed edge copies the coarse message between the parents
/// (floor(i/2), floor(j/2)) of its endpoints when those parents are
/// distinct and adjacent on the coarse graph; all other slots get the
/// default initial message.
inline MessageStore upscale_messages(const FactorGraph& coarse_graph,
                                     const GridSpec& coarse_grid,
                                     const MessageStore& coarse_msgs,
                                     const FactorGraph& fine_graph,
                                     const GridSpec& fine_grid) {
    if (coarse_grid.nx != (fine_grid.nx + 1) / 2 || coarse_grid.ny != (fine_grid.ny + 1) / 2)
        throw std::invalid_argument("upscale level mismatch");
    if (coarse_msgs.slots.size() != coarse_graph.num_directed_edges())
        throw std::invalid_argument("coarse store does not match coarse graph");

    MessageStore fine = MessageStore::initial(fine_graph);
    for (int v = 0; v < fine_graph.num_nodes(); ++v) {
        const int iv = fine_grid.coord_i(v), jv = fine_grid.coord_j(v);
        const int pv = coarse_grid.linear_index(iv / 2, jv / 2);
        for (std::size_t s = fine_graph.adj_begin(v); s < fine_graph.adj_end(v); ++s) {
            const int u = fine_graph.neighbor(s);  // directed edge u -> v
            const int iu = fine_grid.coord_i(u), ju = fine_grid.coord_j(u);
            const int pu = coarse_grid.linear_index(iu / 2, ju / 2);
            if (pu == pv) continue;
            if (auto cs = coarse_graph.find_slot(pu, pv)) fine.slots[s] = coarse_msgs.slots[*cs];
        }
    }
    return fine;
}

struct MultigridResult {
    Marginals marginals;
    std::vector<int> level_iterations;
    RunStatus status = RunStatus::Converged;
    int diverged_level = -1;  // index into plan.levels when status == Diverged
    MessageStore messages;    // finest-level store
};

/// Coarse-to-fine pass: per level rebuild the precision at that level's
/// spacing (kappa, sigma2, nu fixed in physical units; gamma follows
/// dx * dy), inject the coinciding observations, and run message passing
/// initialized from the upscaled coarser messages.
inline MultigridResult run_multigrid(const Hyperparams& hyper, const ObservationSet& obs,
                                     const LevelPlan& plan,
                                     std::span<const double> prior_mean = {}) {
    if (plan.levels.empty()) throw std::invalid_argument("empty level plan");
    const GridSpec& finest = plan.levels.back();
    if (!prior_mean.empty() &&
        static_cast<int>(prior_mean.size()) != finest.num_nodes())
        throw std::invalid_argument("prior mean length mismatch");

    MultigridResult result;
    std::optional<FactorGraph> prev_graph;
    GridSpec prev_grid;
    MessageStore prev_msgs;

    for (std::size_t l = 0; l < plan.levels.size(); ++l) {
        const GridSpec& grid = plan.levels[l];
        const SparseOperator precision = build_precision(grid, hyper);

        std::vector<double> shift;
        if (!prior_mean.empty()) {
            const int k = level_depth(finest, grid);
            std::vector<double> mean_level(static_cast<std::size_t>(grid.num_nodes()));
            for (int j = 0; j < grid.ny; ++j)
                for (int i = 0; i < grid.nx; ++i)
                    mean_level[static_cast<std::size_t>(grid.linear_index(i, j))] =
                        prior_mean[static_cast<std::size_t>(
                            finest.linear_index(i << k, j << k))];
            shift = prior_shift_from_mean(precision, mean_level);
        }
        FactorGraph graph =
            from_precision(precision, shift).with_observations(
                restrict_observations(obs, finest, grid));

        MessageStore init;
        const MessageStore* init_ptr = nullptr;
        if (prev_graph) {
            init = upscale_messages(*prev_graph, prev_grid, prev_msgs, graph, grid);
            init_ptr = &init;
        }

        RunResult rr = run(graph, hyper, init_ptr);
        result.level_iterations.push_back(rr.iterations);
        if (rr.status == RunStatus::Diverged) {
            result.status = RunStatus::Diverged;
            result.diverged_level = static_cast<int>(l);
            result.marginals = std::move(rr.marginals);
            return result;
        }
        if (l + 1 == plan.levels.size()) {
            result.status = rr.status;
            result.marginals = std::move(rr.marginals);
            result.messages = std::move(rr.messages);
            return result;
        }
        prev_graph.emplace(std::move(graph));
        prev_grid = grid;
        prev_msgs = std::move(rr.messages);
    }
    return result;  // unreachable
}

}  // namespace mpda
