#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/grid.hpp"
#include "mpda/rng.hpp"
#include "mpda/spde.hpp"

namespace mpda {

struct Field {
    GridSpec grid;
    std::vector<double> values;

    Field() = default;
    Field(GridSpec g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != grid.num_nodes())
            throw std::invalid_argument("field length does not match grid");
    }

    static Field zeros(const GridSpec& g) {
        return Field(g, std::vector<double>(static_cast<std::size_t>(g.num_nodes()), 0.0));
    }
};

constexpr int kDenseNodeLimit = 4096;

struct DensePosterior {
    Field mean;
    std::vector<double> variance;  // filled only when requested
};

/// Exact posterior by dense symmetric factorization of the graph's
/// (P, h). Small problems only; this is the reference the iterative
/// methods are checked against.
inline DensePosterior dense_posterior(const FactorGraph& g, const GridSpec& grid,
                                      bool with_variances = false,
                                      int dense_limit = kDenseNodeLimit) {
    const int n = g.num_nodes();
    if (n != grid.num_nodes()) throw std::invalid_argument("graph/grid size mismatch");
    if (n > dense_limit)
        throw std::invalid_argument("problem too large for the dense oracle");

    std::vector<double> p_dense, h;
    g.densify(p_dense, h);
    Eigen::Map<const Eigen::MatrixXd> p(p_dense.data(), n, n);
    Eigen::Map<const Eigen::VectorXd> hv(h.data(), n);

    Eigen::LLT<Eigen::MatrixXd> llt(p);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("posterior precision is not positive definite");
    const Eigen::VectorXd mu = llt.solve(hv);

    DensePosterior out;
    out.mean = Field(grid, std::vector<double>(mu.data(), mu.data() + n));
    if (with_variances) {
        const Eigen::MatrixXd cov =
            llt.solve(Eigen::MatrixXd::Identity(n, n));
        out.variance.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) out.variance[static_cast<std::size_t>(i)] = cov(i, i);
    }
    return out;
}

inline Field dense_posterior_mean(const FactorGraph& g, const GridSpec& grid,
                                  int dense_limit = kDenseNodeLimit) {
    return dense_posterior(g, grid, false, dense_limit).mean;
}

/// Jacobi-preconditioned conjugate gradients for SPD stencil operators.
inline std::vector<double> pcg_solve(const SparseOperator& a, std::span<const double> rhs,
                                     double rel_tol = 1e-8, int max_iters = -1) {
    const std::size_t n = rhs.size();
    if (static_cast<int>(n) != a.size()) throw std::invalid_argument("pcg size mismatch");
    if (max_iters < 0) max_iters = 10 * static_cast<int>(n);

    const std::vector<double> diag = a.diagonal();
    std::vector<double> x(n, 0.0), r(rhs.begin(), rhs.end()), z(n), p(n), ap(n);

    double rhs_norm = 0.0;
    for (double v : rhs) rhs_norm += v * v;
    rhs_norm = std::sqrt(rhs_norm);
    if (rhs_norm == 0.0) return x;

    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

    for (int it = 0; it < max_iters; ++it) {
        a.apply(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
        const double alpha = rz / pap;
        double rnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            rnorm += r[i] * r[i];
        }
        if (std::sqrt(rnorm) <= rel_tol * rhs_norm) return x;
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = r[i] / diag[i];
            rz_new += r[i] * z[i];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw std::runtime_error("conjugate gradients did not converge");
}

/// Draw a prior sample by solving L^(alpha/2) f = sqrt(sigma2 q / (dx dy)) z
/// with seeded white noise z. Deterministic per seed.
inline Field sample_gmrf(const GridSpec& g, const Hyperparams& h, std::uint64_t seed) {
    if (g.boundary != Boundary::Dirichlet)
        throw std::invalid_argument("sampler requires the Dirichlet boundary");
    h.validate();
    const SparseOperator op = build_spde_operator(g, h);
    const double scale =
        std::sqrt(h.sigma2 * compute_q(h.nu, h.kappa()) / (g.dx * g.dy));

    CounterRng rng(seed, CounterRng::kFieldNoise);
    std::vector<double> rhs(static_cast<std::size_t>(g.num_nodes()));
    for (double& v : rhs) v = scale * rng.next_normal();

    return Field(g, pcg_solve(op, rhs));
}

struct SyntheticData {
    Field truth;
    ObservationSet obs;
};

/// Sample a ground truth from the prior, observe floor(density * n)
/// distinct uniformly-chosen nodes with additive noise of variance
/// sigma_y2. Separate RNG streams keep the three noise sources
/// independent of each other and of evaluation order.
inline SyntheticData make_synthetic(const GridSpec& g, const Hyperparams& h,
                                    double density, std::uint64_t seed) {
    if (!(density > 0.0) || density > 1.0)
        throw std::invalid_argument("density must lie in (0, 1]");
    SyntheticData out;
    out.truth = sample_gmrf(g, h, seed);

    const int n = g.num_nodes();
    const int m = static_cast<int>(density * n);

    // Fisher-Yates prefix over the node indices.
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    CounterRng pick(seed, CounterRng::kNodeSelection);
    for (int i = 0; i < m; ++i) {
        const int j = i + static_cast<int>(pick.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }

    CounterRng noise(seed, CounterRng::kObsNoise);
    const double sd = std::sqrt(h.sigma_y2);
    out.obs.entries.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const int node = perm[static_cast<std::size_t>(i)];
        out.obs.entries.push_back(
            {node, out.truth.values[static_cast<std::size_t>(node)] + sd * noise.next_normal(),
             h.sigma_y2});
    }
    return out;
}

inline double rmse(const Field& estimate, const Field& truth,
                   const Field* weights = nullptr) {
    if (!(estimate.grid == truth.grid))
        throw std::invalid_argument("rmse grid mismatch");
    if (weights && !(weights->grid == truth.grid))
        throw std::invalid_argument("rmse weight grid mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < estimate.values.size(); ++i) {
        const double w = weights ? weights->values[i] : 1.0;
        if (w < 0.0) throw std::invalid_argument("rmse weights must be nonnegative");
        const double e = estimate.values[i] - truth.values[i];
        num += w * e * e;
        den += w;
    }
    if (den == 0.0) throw std::invalid_argument("rmse weights sum to zero");
    return std::sqrt(num / den);
}

inline Field l1_error_field(const Field& estimate, const Field& truth) {
    if (!(estimate.grid == truth.grid))
        throw std::invalid_argument("error-field grid mismatch");
    Field out = Field::zeros(estimate.grid);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::abs(estimate.values[i] - truth.values[i]);
    return out;
}

}  // namespace mpda
