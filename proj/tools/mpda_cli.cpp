// Command-line front end: synthetic data generation, assimilation with the
// message-passing / 3D-Var / exact solvers, evaluation, rendering, the
// (c, eta) grid search, and the timing benchmark.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpda/mpda.hpp"

namespace {

struct HyperFlags {
    double sigma = 1.1;
    double sigma_y2 = -1.0;  // default: 0.01 * sigma^2
    mpda::Hyperparams hyper;

    mpda::Hyperparams resolve() const {
        mpda::Hyperparams h = hyper;
        h.sigma2 = sigma * sigma;
        h.sigma_y2 = sigma_y2 > 0.0 ? sigma_y2 : 0.01 * h.sigma2;
        h.validate();
        return h;
    }
};

void add_hyper_options(CLI::App* cmd, HyperFlags& f) {
    cmd->add_option("--alpha", f.hyper.alpha, "SPDE exponent (even integer)")
        ->capture_default_str();
    cmd->add_option("--nu", f.hyper.nu, "Matern smoothness")->capture_default_str();
    cmd->add_option("--lengthscale", f.hyper.lengthscale, "Matern lengthscale")
        ->capture_default_str();
    cmd->add_option("--sigma", f.sigma, "marginal standard deviation")
        ->capture_default_str();
    cmd->add_option("--sigma-y2", f.sigma_y2,
                    "observation noise variance (default 0.01 * sigma^2)");
    cmd->add_option("-c,--reweight", f.hyper.c, "message re-weighting constant")
        ->capture_default_str();
    cmd->add_option("--eta", f.hyper.eta, "damping / learning rate")
        ->capture_default_str();
    cmd->add_option("--tau", f.hyper.tau, "early-stop threshold")->capture_default_str();
    cmd->add_option("-T,--max-iters", f.hyper.max_iters, "iteration cap")
        ->capture_default_str();
}

mpda::GridSpec make_grid(int nx, int ny, double dx, double dy) {
    if (dx <= 0.0) dx = 1.0 / (nx - 1);
    if (dy <= 0.0) dy = 1.0 / (ny - 1);
    return mpda::GridSpec(nx, ny, dx, dy);
}

void print_hyper(std::ostream& out, const mpda::Hyperparams& h) {
    out << "alpha=" << h.alpha << "\nnu=" << h.nu << "\nlengthscale=" << h.lengthscale
        << "\nsigma2=" << h.sigma2 << "\nsigma_y2=" << h.sigma_y2 << "\nkappa="
        << h.kappa() << "\nc=" << h.c << "\neta=" << h.eta << "\ntau=" << h.tau
        << "\nmax_iters=" << h.max_iters << "\n";
}

// --- synth ------------------------------------------------------------

struct SynthArgs {
    int nx = 256, ny = 256;
    double dx = -1.0, dy = -1.0;
    double density = 0.05;
    std::uint64_t seed = 1;
    std::string out_truth = "truth.mpda";
    std::string out_obs = "obs.txt";
    HyperFlags hyper;
};

int cmd_synth(const SynthArgs& a) {
    const mpda::Hyperparams h = a.hyper.resolve();
    const mpda::GridSpec grid = make_grid(a.nx, a.ny, a.dx, a.dy);
    const mpda::SyntheticData data = mpda::make_synthetic(grid, h, a.density, a.seed);
    mpda::write_field(data.truth, a.out_truth);
    mpda::write_observations(data.obs, grid, a.out_obs);
    std::cout << "seed=" << a.seed << "\ngrid=" << grid.nx << "x" << grid.ny
              << "\ndensity=" << a.density << "\nobservations=" << data.obs.entries.size()
              << "\n";
    print_hyper(std::cout, h);
    return 0;
}

// --- assimilate -------------------------------------------------------

struct AssimilateArgs {
    std::string obs_path;
    std::string grid_like;  // field file providing the grid
    int nx = 0, ny = 0;
    double dx = -1.0, dy = -1.0;
    std::string method = "mp-multigrid";
    std::string out = "mean.mpda";
    std::string diagnostics;
    std::string prior_mean_path;
    int base = 32;
    int threads = 1;
    int px = 0, py = 0;
    int exchange_period = 1;
    double var_tol = 1e-3;
    int var_max_iters = 500;
    HyperFlags hyper;
};

int cmd_assimilate(const AssimilateArgs& a) {
    const mpda::Hyperparams h = a.hyper.resolve();
    mpda::GridSpec grid = a.grid_like.empty()
                              ? make_grid(a.nx, a.ny, a.dx, a.dy)
                              : mpda::read_field(a.grid_like).grid;
    const mpda::ObservationSet obs = mpda::read_observations(a.obs_path, grid);

    std::vector<double> prior_mean;
    if (!a.prior_mean_path.empty()) {
        mpda::Field pm = mpda::read_field(a.prior_mean_path);
        if (!(pm.grid == grid)) throw std::runtime_error("prior mean grid mismatch");
        prior_mean = std::move(pm.values);
    }

    mpda::Field estimate = mpda::Field::zeros(grid);
    std::string status = "converged";
    int iterations = 0;
    std::ostringstream extra;

    const auto t0 = std::chrono::steady_clock::now();
    if (a.method == "mp") {
        const mpda::SparseOperator precision = mpda::build_precision(grid, h);
        std::vector<double> shift;
        if (!prior_mean.empty()) shift = mpda::prior_shift_from_mean(precision, prior_mean);
        const mpda::FactorGraph graph =
            mpda::from_precision(precision, shift).with_observations(obs);

        int px = a.px, py = a.py;
        if (px == 0 && py == 0 && a.threads > 1) {
            px = a.threads;
            py = 1;
            while (px % 2 == 0 && px / 2 >= py * 2) {
                px /= 2;
                py *= 2;
            }
        }
        if (px >= 1 && py >= 1 && px * py > 1) {
            const mpda::Partition part = mpda::make_partition(grid, graph, px, py);
            const mpda::ParallelResult pr =
                mpda::run_partitioned(graph, part, h, a.exchange_period);
            estimate.values = pr.marginals.mean;
            status = mpda::to_string(pr.status);
            iterations = pr.iterations;
            extra << "partition=" << px << "x" << py
                  << "\nexchange_period=" << a.exchange_period
                  << "\nexchanges=" << pr.stats.exchanges
                  << "\nbytes_exchanged=" << pr.stats.bytes_exchanged
                  << "\ndirected_halo_edges=" << pr.stats.directed_halo_edges << "\n";
        } else {
            const mpda::RunResult rr = mpda::run(graph, h);
            estimate.values = rr.marginals.mean;
            status = mpda::to_string(rr.status);
            iterations = rr.iterations;
        }
    } else if (a.method == "mp-multigrid") {
        const mpda::LevelPlan plan = mpda::build_hierarchy(grid, a.base);
        const mpda::MultigridResult mr =
            mpda::run_multigrid(h, obs, plan, prior_mean);
        if (mr.status != mpda::RunStatus::Diverged) estimate.values = mr.marginals.mean;
        status = mpda::to_string(mr.status);
        extra << "levels=" << plan.levels.size() << "\nlevel_iterations=";
        for (std::size_t i = 0; i < mr.level_iterations.size(); ++i) {
            if (i) extra << ',';
            extra << mr.level_iterations[i];
            iterations += mr.level_iterations[i];
        }
        extra << "\n";
        if (mr.diverged_level >= 0) extra << "diverged_level=" << mr.diverged_level << "\n";
    } else if (a.method == "3dvar") {
        const mpda::SparseOperator precision = mpda::build_precision(grid, h);
        mpda::VarProblem problem;
        problem.precision = &precision;
        problem.prior_mean = prior_mean.empty()
                                 ? std::vector<double>(
                                       static_cast<std::size_t>(grid.num_nodes()), 0.0)
                                 : prior_mean;
        problem.obs = obs;
        const mpda::MinimizeResult mr = mpda::var3d_minimize(
            problem, problem.prior_mean, 10, a.var_tol, a.var_max_iters);
        estimate.values = mr.state;
        status = mpda::to_string(mr.status);
        iterations = mr.iterations;
        extra << "final_cost=" << mr.cost << "\ntol=" << a.var_tol << "\n";
    } else if (a.method == "exact") {
        const mpda::SparseOperator precision = mpda::build_precision(grid, h);
        std::vector<double> shift;
        if (!prior_mean.empty()) shift = mpda::prior_shift_from_mean(precision, prior_mean);
        const mpda::FactorGraph graph =
            mpda::from_precision(precision, shift).with_observations(obs);
        estimate = mpda::dense_posterior_mean(graph, grid);
    } else {
        throw CLI::ValidationError("--method", "unknown method " + a.method);
    }
    const auto t1 = std::chrono::steady_clock::now();

    mpda::write_field(estimate, a.out);
    std::ostringstream diag;
    diag << "method=" << a.method << "\nstatus=" << status
         << "\niterations=" << iterations << "\nwall_seconds="
         << std::chrono::duration<double>(t1 - t0).count() << "\ngrid=" << grid.nx << "x"
         << grid.ny << "\ndx=" << grid.dx << "\ndy=" << grid.dy
         << "\nobservations=" << obs.entries.size() << "\n";
    print_hyper(diag, h);
    diag << extra.str();
    if (!a.diagnostics.empty()) {
        std::ofstream out(a.diagnostics);
        if (!out) throw std::runtime_error(a.diagnostics + ": cannot open for writing");
        out << diag.str();
    }
    std::cout << diag.str();
    return status == "diverged" ? 2 : 0;
}

// --- eval ---------------------------------------------------------------

struct EvalArgs {
    std::string estimate, truth, weights, out_l1;
};

int cmd_eval(const EvalArgs& a) {
    const mpda::Field estimate = mpda::read_field(a.estimate);
    const mpda::Field truth = mpda::read_field(a.truth);
    if (a.weights.empty()) {
        std::cout << "rmse=" << std::setprecision(10) << mpda::rmse(estimate, truth)
                  << "\n";
    } else {
        const mpda::Field weights = mpda::read_field(a.weights);
        std::cout << "weighted_rmse=" << std::setprecision(10)
                  << mpda::rmse(estimate, truth, &weights) << "\n";
    }
    if (!a.out_l1.empty())
        mpda::write_field(mpda::l1_error_field(estimate, truth), a.out_l1);
    return 0;
}

// --- render -------------------------------------------------------------

struct RenderArgs {
    std::string field, out;
    std::string mode = "gray";
};

int cmd_render(const RenderArgs& a) {
    const mpda::Field f = mpda::read_field(a.field);
    mpda::RenderMode mode;
    if (a.mode == "gray")
        mode = mpda::RenderMode::Gray;
    else if (a.mode == "diverging")
        mode = mpda::RenderMode::Diverging;
    else
        throw CLI::ValidationError("--mode", "expected gray or diverging");
    mpda::render_field(f, a.out, mode);
    return 0;
}

// --- gridsearch -----------------------------------------------------------

struct GridsearchArgs {
    int nx = 128, ny = 128;
    double density = 0.05;
    std::uint64_t seed = 1;
    std::vector<double> c_values = {-10, -2, -1, 1, 5, 10, 20};
    std::vector<double> eta_values = {0.6, 0.7, 0.8};
    std::string out;
    HyperFlags hyper;
};

int cmd_gridsearch(const GridsearchArgs& a) {
    mpda::Hyperparams h = a.hyper.resolve();
    const mpda::GridSpec grid = make_grid(a.nx, a.ny, -1.0, -1.0);
    const mpda::SyntheticData data = mpda::make_synthetic(grid, h, a.density, a.seed);
    const mpda::SparseOperator precision = mpda::build_precision(grid, h);
    const mpda::FactorGraph graph = mpda::from_precision(precision).with_observations(data.obs);

    // reference: exact posterior where feasible, otherwise tightly converged 3D-Var
    mpda::Field reference = mpda::Field::zeros(grid);
    if (grid.num_nodes() <= mpda::kDenseNodeLimit) {
        reference = mpda::dense_posterior_mean(graph, grid);
    } else {
        mpda::VarProblem problem;
        problem.precision = &precision;
        problem.prior_mean.assign(static_cast<std::size_t>(grid.num_nodes()), 0.0);
        problem.obs = data.obs;
        reference.values =
            mpda::var3d_minimize(problem, problem.prior_mean, 10, 1e-8, 2000).state;
    }
    const double reference_rmse = mpda::rmse(reference, data.truth);

    std::ostringstream table;
    table << "# RMSE(mp) / RMSE(reference); '-' = diverged\n";
    table << std::left << std::setw(8) << "eta\\c";
    for (double c : a.c_values) table << std::setw(10) << c;
    table << "\n";
    for (double eta : a.eta_values) {
        table << std::left << std::setw(8) << eta;
        for (double c : a.c_values) {
            h.c = c;
            h.eta = eta;
            const mpda::RunResult rr = mpda::run(graph, h);
            if (rr.status == mpda::RunStatus::Diverged) {
                table << std::setw(10) << "-";
            } else {
                const mpda::Field est(grid, rr.marginals.mean);
                table << std::setw(10) << std::setprecision(4)
                      << mpda::rmse(est, data.truth) / reference_rmse;
            }
        }
        table << "\n";
    }
    if (!a.out.empty()) {
        std::ofstream out(a.out);
        if (!out) throw std::runtime_error(a.out + ": cannot open for writing");
        out << table.str();
    }
    std::cout << table.str();
    return 0;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
    std::vector<int> sizes = {64, 128};
    std::vector<double> densities = {0.01, 0.05, 0.10};
    std::vector<std::string> methods = {"mp-multigrid", "3dvar"};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out;
    HyperFlags hyper;
};

int cmd_bench(const BenchArgs& a) {
    mpda::BenchConfig cfg;
    cfg.sizes = a.sizes;
    cfg.densities = a.densities;
    for (const auto& m : a.methods) cfg.methods.push_back(mpda::method_from_string(m));
    cfg.seeds = a.seeds;
    cfg.hyper = a.hyper.resolve();
    const auto rows = mpda::run_suite(cfg);
    if (!a.out.empty()) {
        std::ofstream out(a.out);
        if (!out) throw std::runtime_error(a.out + ": cannot open for writing");
        mpda::write_bench_csv(rows, out);
    }
    mpda::write_bench_csv(rows, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial data assimilation with Gaussian message passing"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic truth + observations");
    synth_cmd->add_option("--nx", synth.nx)->capture_default_str();
    synth_cmd->add_option("--ny", synth.ny)->capture_default_str();
    synth_cmd->add_option("--dx", synth.dx, "spacing (default 1/(nx-1))");
    synth_cmd->add_option("--dy", synth.dy, "spacing (default 1/(ny-1))");
    synth_cmd->add_option("--density", synth.density)->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
    synth_cmd->add_option("--out-truth", synth.out_truth)->capture_default_str();
    synth_cmd->add_option("--out-obs", synth.out_obs)->capture_default_str();
    add_hyper_options(synth_cmd, synth.hyper);

    AssimilateArgs asml;
    auto* asml_cmd = app.add_subcommand("assimilate", "compute a posterior mean field");
    asml_cmd->add_option("--obs", asml.obs_path, "observation file")->required();
    asml_cmd->add_option("--grid-like", asml.grid_like, "take the grid from this field file");
    asml_cmd->add_option("--nx", asml.nx);
    asml_cmd->add_option("--ny", asml.ny);
    asml_cmd->add_option("--dx", asml.dx);
    asml_cmd->add_option("--dy", asml.dy);
    asml_cmd->add_option("--method", asml.method, "mp | mp-multigrid | 3dvar | exact")
        ->capture_default_str();
    asml_cmd->add_option("--out", asml.out)->capture_default_str();
    asml_cmd->add_option("--diagnostics", asml.diagnostics, "diagnostics record path");
    asml_cmd->add_option("--prior-mean", asml.prior_mean_path, "prior mean field file");
    asml_cmd->add_option("--base", asml.base, "multigrid base grid size")
        ->capture_default_str();
    asml_cmd->add_option("--threads", asml.threads, "worker threads for method=mp")
        ->capture_default_str();
    asml_cmd->add_option("--px", asml.px, "subdomains in x (method=mp)");
    asml_cmd->add_option("--py", asml.py, "subdomains in y (method=mp)");
    asml_cmd->add_option("--exchange-period", asml.exchange_period)->capture_default_str();
    asml_cmd->add_option("--tol", asml.var_tol, "3D-Var stopping tolerance")
        ->capture_default_str();
    asml_cmd->add_option("--var-max-iters", asml.var_max_iters)->capture_default_str();
    add_hyper_options(asml_cmd, asml.hyper);

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "RMSE between estimate and truth");
    eval_cmd->add_option("--estimate", eval.estimate)->required();
    eval_cmd->add_option("--truth", eval.truth)->required();
    eval_cmd->add_option("--weights", eval.weights, "per-cell weight field");
    eval_cmd->add_option("--out-l1", eval.out_l1, "write the pointwise |error| field");

    RenderArgs render;
    auto* render_cmd = app.add_subcommand("render", "render a field to a portable pixmap");
    render_cmd->add_option("--field", render.field)->required();
    render_cmd->add_option("--out", render.out)->required();
    render_cmd->add_option("--mode", render.mode, "gray | diverging")->capture_default_str();

    GridsearchArgs gs;
    auto* gs_cmd = app.add_subcommand("gridsearch", "convergence table over (c, eta)");
    gs_cmd->add_option("--nx", gs.nx)->capture_default_str();
    gs_cmd->add_option("--ny", gs.ny)->capture_default_str();
    gs_cmd->add_option("--density", gs.density)->capture_default_str();
    gs_cmd->add_option("--seed", gs.seed)->capture_default_str();
    gs_cmd->add_option("--c-values", gs.c_values)->delimiter(',');
    gs_cmd->add_option("--eta-values", gs.eta_values)->delimiter(',');
    gs_cmd->add_option("--out", gs.out, "table file");
    add_hyper_options(gs_cmd, gs.hyper);

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "timing suite over sizes and densities");
    bench_cmd->add_option("--sizes", bench.sizes)->delimiter(',');
    bench_cmd->add_option("--densities", bench.densities)->delimiter(',');
    bench_cmd->add_option("--methods", bench.methods)->delimiter(',');
    bench_cmd->add_option("--seeds", bench.seeds)->delimiter(',');
    bench_cmd->add_option("--out", bench.out, "CSV output path");
    add_hyper_options(bench_cmd, bench.hyper);

    CLI11_PARSE(app, argc, argv);
    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (asml_cmd->parsed()) return cmd_assimilate(asml);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (render_cmd->parsed()) return cmd_render(render);
        if (gs_cmd->parsed()) return cmd_gridsearch(gs);
        if (bench_cmd->parsed()) return cmd_bench(bench);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
