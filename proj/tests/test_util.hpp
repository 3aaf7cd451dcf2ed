#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/oracle.hpp"
#include "mpda/rng.hpp"
#include "mpda/sparse.hpp"

namespace test_util {

/// Tridiagonal (kappa^2 + 2/h^2, -1/h^2) chain operator: the 1D analogue
/// of the 2D shift operator, used as a tree-graph test case.
inline mpda::SparseOperator chain_operator(int n, double kappa = 1.0, double h = 1.0) {
    mpda::SparseOperator op(n);
    const double diag = kappa * kappa + 2.0 / (h * h);
    const double off = -1.0 / (h * h);
    for (int i = 0; i < n; ++i) {
        op.add(i, i, diag);
        if (i > 0) op.add(i, i - 1, off);
        if (i + 1 < n) op.add(i, i + 1, off);
    }
    return op;
}

inline Eigen::MatrixXd to_dense(const mpda::SparseOperator& a) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.size(), a.size());
    for (int i = 0; i < a.size(); ++i)
        for (const auto& e : a.row(i)) m(i, e.col) = e.value;
    return m;
}

/// Independent dense route to the posterior mean: densify (P, h) and solve
/// with a pivoted factorization, no Cholesky shared with the oracle module.
inline std::vector<double> dense_solve(const mpda::FactorGraph& g) {
    std::vector<double> p_dense, h;
    g.densify(p_dense, h);
    const int n = g.num_nodes();
    Eigen::Map<const Eigen::MatrixXd> p(p_dense.data(), n, n);
    Eigen::Map<const Eigen::VectorXd> hv(h.data(), n);
    const Eigen::VectorXd mu = Eigen::FullPivLU<Eigen::MatrixXd>(p).solve(hv);
    return std::vector<double>(mu.data(), mu.data() + n);
}

inline double rel_error(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline std::vector<double> random_vector(int n, std::uint64_t seed) {
    mpda::CounterRng rng(seed, 99);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = rng.next_normal();
    return v;
}

}  // namespace test_util
