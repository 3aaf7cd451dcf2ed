#pragma once

#include <chrono>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mpda/multigrid.hpp"
#include "mpda/oracle.hpp"
#include "mpda/var3d.hpp"

namespace mpda {

enum class Method { Mp, MpMultigrid, Var3d, Exact };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Mp: return "mp";
        case Method::MpMultigrid: return "mp-multigrid";
        case Method::Var3d: return "3dvar";
        default: return "exact";
    }
}

inline Method method_from_string(const std::string& s) {
    if (s == "mp") return Method::Mp;
    if (s == "mp-multigrid") return Method::MpMultigrid;
    if (s == "3dvar") return Method::Var3d;
    if (s == "exact") return Method::Exact;
    throw std::invalid_argument("unknown method: " + s);
}

struct BenchResult {
    std::string method;
    int size = 0;  // grid is size x size
    double density = 0.0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    int iterations = 0;
    double rmse_vs_truth = 0.0;
    double rmse_vs_oracle = -1.0;  // -1 when the dense oracle is infeasible
    bool diverged = false;
};

struct BenchConfig {
    std::vector<int> sizes;
    std::vector<double> densities;
    std::vector<Method> methods;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    Hyperparams hyper;
    int multigrid_base = 32;
    double var3d_tol = 1e-3;
    int var3d_max_iters = 500;
    int oracle_limit = kDenseNodeLimit;
};

/// Assimilate one synthetic problem with one method. Wall time covers the
/// solver call only, not data generation or I/O.
inline BenchResult bench_cell(const BenchConfig& cfg, Method method, int size,
                              double density, std::uint64_t seed) {
    const GridSpec grid(size, size, 1.0 / (size - 1), 1.0 / (size - 1));
    const SyntheticData data = make_synthetic(grid, cfg.hyper, density, seed);

    BenchResult row;
    row.method = to_string(method);
    row.size = size;
    row.density = density;
    row.seed = seed;

    Field estimate = Field::zeros(grid);
    const auto t0 = std::chrono::steady_clock::now();
    switch (method) {
        case Method::Mp: {
            const FactorGraph graph =
                from_precision(build_precision(grid, cfg.hyper)).with_observations(data.obs);
            const RunResult rr = run(graph, cfg.hyper);
            row.iterations = rr.iterations;
            row.diverged = rr.status == RunStatus::Diverged;
            estimate.values = rr.marginals.mean;
            break;
        }
        case Method::MpMultigrid: {
            const LevelPlan plan = build_hierarchy(grid, cfg.multigrid_base);
            const MultigridResult mr = run_multigrid(cfg.hyper, data.obs, plan);
            for (int it : mr.level_iterations) row.iterations += it;
            row.diverged = mr.status == RunStatus::Diverged;
            if (!row.diverged) estimate.values = mr.marginals.mean;
            break;
        }
        case Method::Var3d: {
            const SparseOperator precision = build_precision(grid, cfg.hyper);
            VarProblem problem;
            problem.precision = &precision;
            problem.prior_mean.assign(static_cast<std::size_t>(grid.num_nodes()), 0.0);
            problem.obs = data.obs;
            const MinimizeResult mr =
                var3d_minimize(problem, problem.prior_mean, 10, cfg.var3d_tol,
                               cfg.var3d_max_iters);
            row.iterations = mr.iterations;
            estimate.values = mr.state;
            break;
        }
        case Method::Exact: {
            const FactorGraph graph =
                from_precision(build_precision(grid, cfg.hyper)).with_observations(data.obs);
            estimate = dense_posterior_mean(graph, grid, cfg.oracle_limit);
            break;
        }
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    if (!row.diverged) {
        row.rmse_vs_truth = rmse(estimate, data.truth);
        if (grid.num_nodes() <= cfg.oracle_limit && method != Method::Exact) {
            const FactorGraph graph =
                from_precision(build_precision(grid, cfg.hyper)).with_observations(data.obs);
            row.rmse_vs_oracle = rmse(estimate, dense_posterior_mean(graph, grid));
        }
    }
    return row;
}

/// All (method, size, density, seed) combinations, plus per-cell aggregate
/// rows averaging over seeds.
inline std::vector<BenchResult> run_suite(const BenchConfig& cfg) {
    std::vector<BenchResult> rows;
    for (Method method : cfg.methods) {
        for (int size : cfg.sizes) {
            for (double density : cfg.densities) {
                BenchResult agg;
                agg.method = std::string(to_string(method)) + "/mean";
                agg.size = size;
                agg.density = density;
                int converged = 0;
                for (std::uint64_t seed : cfg.seeds) {
                    rows.push_back(bench_cell(cfg, method, size, density, seed));
                    const BenchResult& r = rows.back();
                    if (!r.diverged) {
                        agg.wall_seconds += r.wall_seconds;
                        agg.iterations += r.iterations;
                        agg.rmse_vs_truth += r.rmse_vs_truth;
                        ++converged;
                    }
                }
                if (converged > 0) {
                    agg.wall_seconds /= converged;
                    agg.iterations /= converged;
                    agg.rmse_vs_truth /= converged;
                } else {
                    agg.diverged = true;
                }
                rows.push_back(agg);
            }
        }
    }
    return rows;
}

inline void write_bench_csv(const std::vector<BenchResult>& rows, std::ostream& out) {
    out << "method,size,density,seed,wall_seconds,iterations,rmse_vs_truth,"
           "rmse_vs_oracle,diverged\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.size << ',' << r.density << ',' << r.seed << ','
            << r.wall_seconds << ',' << r.iterations << ',';
        if (r.diverged)
            out << "-,";
        else
            out << r.rmse_vs_truth << ',';
        if (r.rmse_vs_oracle >= 0.0)
            out << r.rmse_vs_oracle;
        else
            out << '-';
        out << ',' << (r.diverged ? 1 : 0) << '\n';
    }
}

}  // namespace mpda
