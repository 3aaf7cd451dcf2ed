#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mpda/grid.hpp"
#include "mpda/sparse.hpp"

namespace mpda {

/// Hyperparameters of the Matern SPDE prior and the inference engines.
/// kappa, q and gamma are derived quantities; gamma depends on the grid
/// spacing and is computed per level.
struct Hyperparams {
    int alpha = 2;             // SPDE exponent; alpha/2 must be a positive integer
    double nu = 1.0;           // smoothness, nu = alpha - d/2 with d = 2
    double lengthscale = 0.15;
    double sigma2 = 1.21;      // marginal variance (sigma = 1.1)
    double sigma_y2 = 0.0121;  // observation noise variance, default 0.01 * sigma2
    double c = 10.0;           // message re-weighting constant
    double eta = 0.6;          // damping / learning rate
    double tau = 1e-3;         // early-stop threshold
    int max_iters = 10000;     // T

    double kappa() const { return std::sqrt(2.0 * nu) / lengthscale; }

    void validate() const {
        if (alpha <= 0 || alpha % 2 != 0)
            throw std::invalid_argument("alpha must be a positive even integer");
        if (!(nu > 0.0) || !(lengthscale > 0.0) || !(sigma2 > 0.0) || !(sigma_y2 > 0.0))
            throw std::invalid_argument("nu, lengthscale, sigma2, sigma_y2 must be > 0");
        if (!(eta > 0.0) || eta > 1.0)
            throw std::invalid_argument("eta must lie in (0, 1]");
        if (c == 0.0) throw std::invalid_argument("c must be nonzero");
        if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
        if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    }
};

/// White-noise spectral constant q = (4pi)^(d/2) kappa^(2 nu) Gamma(nu + d/2) / Gamma(nu).
inline double compute_q(double nu, double kappa, int d = 2) {
    if (!(nu > 0.0) || !(kappa > 0.0)) throw std::invalid_argument("nu, kappa must be > 0");
    return std::pow(4.0 * std::numbers::pi, 0.5 * d) * std::pow(kappa, 2.0 * nu) *
           std::tgamma(nu + 0.5 * d) / std::tgamma(nu);
}

inline double compute_gamma(const GridSpec& g, const Hyperparams& h) {
    return g.dx * g.dy / (h.sigma2 * compute_q(h.nu, h.kappa()));
}

/// 5-point finite-difference discretization of (kappa^2 - Laplacian):
/// diagonal kappa^2 + 2/dx^2 + 2/dy^2, x-neighbors -1/dx^2, y-neighbors
/// -1/dy^2. Dirichlet drops boundary-crossing legs (zero exterior values);
/// Periodic wraps them around.
inline SparseOperator build_shift_operator(const GridSpec& g, double kappa) {
    g.validate();
    const int n = g.num_nodes();
    const double ix2 = 1.0 / (g.dx * g.dx);
    const double iy2 = 1.0 / (g.dy * g.dy);
    const double diag = kappa * kappa + 2.0 * ix2 + 2.0 * iy2;
    const bool periodic = g.boundary == Boundary::Periodic;

    SparseOperator op(n);
    auto leg = [&](int idx, int i, int j, double v) {
        if (periodic) {
            i = (i + g.nx) % g.nx;
            j = (j + g.ny) % g.ny;
        } else if (i < 0 || i >= g.nx || j < 0 || j >= g.ny) {
            return;
        }
        op.add(idx, g.linear_index(i, j), v);
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int idx = g.linear_index(i, j);
            op.add(idx, idx, diag);
            leg(idx, i - 1, j, -ix2);
            leg(idx, i + 1, j, -ix2);
            leg(idx, i, j - 1, -iy2);
            leg(idx, i, j + 1, -iy2);
        }
    }
    return op;
}

inline SparseOperator operator_power(const SparseOperator& base, int p) {
    if (p < 1) throw std::invalid_argument("operator power must be >= 1");
    SparseOperator result = base;
    for (int k = 1; k < p; ++k) result = SparseOperator::multiply(result, base);
    return result;
}

/// L^(alpha/2), the discrete (kappa^2 - Laplacian)^(alpha/2).
inline SparseOperator build_spde_operator(const GridSpec& g, const Hyperparams& h) {
    h.validate();
    return operator_power(build_shift_operator(g, h.kappa()), h.alpha / 2);
}

/// GMRF precision P = gamma * (L^(alpha/2))^T (L^(alpha/2)); gamma is folded
/// in at assembly so downstream code sees one canonical precision object.
inline SparseOperator build_precision(const GridSpec& g, const Hyperparams& h) {
    SparseOperator m = build_spde_operator(g, h);
    SparseOperator p = SparseOperator::multiply(m, m);  // m is symmetric
    p.scale(compute_gamma(g, h));
    return p;
}

}  // namespace mpda
