#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpda/graph.hpp"
#include "mpda/sparse.hpp"

namespace mpda {

/// Precision-form variational problem:
///   J(f) = 1/2 sum_obs (y_i - f_i)^2 / v_i + 1/2 (f - f_b)' P (f - f_b).
struct VarProblem {
    const SparseOperator* precision = nullptr;
    std::vector<double> prior_mean;
    ObservationSet obs;

    int size() const { return precision->size(); }

    void validate() const {
        if (!precision) throw std::invalid_argument("VarProblem needs a precision matrix");
        if (static_cast<int>(prior_mean.size()) != precision->size())
            throw std::invalid_argument("prior mean length mismatch");
        obs.validate(precision->size());
    }
};

inline double var3d_cost(const VarProblem& p, std::span<const double> f) {
    const std::size_t n = p.prior_mean.size();
    if (f.size() != n) throw std::invalid_argument("state length mismatch");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = f[i] - p.prior_mean[i];
    const std::vector<double> pd = p.precision->apply(d);
    double j = 0.0;
    for (std::size_t i = 0; i < n; ++i) j += 0.5 * d[i] * pd[i];
    for (const auto& o : p.obs.entries) {
        const double r = o.value - f[static_cast<std::size_t>(o.node)];
        j += 0.5 * r * r / o.noise_variance;
    }
    return j;
}

inline std::vector<double> var3d_gradient(const VarProblem& p, std::span<const double> f) {
    const std::size_t n = p.prior_mean.size();
    if (f.size() != n) throw std::invalid_argument("state length mismatch");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = f[i] - p.prior_mean[i];
    std::vector<double> g = p.precision->apply(d);
    for (const auto& o : p.obs.entries)
        g[static_cast<std::size_t>(o.node)] +=
            (f[static_cast<std::size_t>(o.node)] - o.value) / o.noise_variance;
    return g;
}

enum class MinimizeStatus { Converged, MaxIters, LineSearchFailed };

inline const char* to_string(MinimizeStatus s) {
    switch (s) {
        case MinimizeStatus::Converged: return "converged";
        case MinimizeStatus::MaxIters: return "max_iters";
        default: return "line_search_failed";
    }
}

struct MinimizeResult {
    std::vector<double> state;
    double cost = 0.0;
    int iterations = 0;
    MinimizeStatus status = MinimizeStatus::Converged;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct LineSearchResult {
    double step = 0.0;
    double cost = 0.0;
    std::vector<double> state;
    std::vector<double> grad;
    bool ok = false;
};

/// Strong Wolfe line search (bracket + zoom, bisection refinement).
/// phi(t) = J(x + t d); c1 Armijo, c2 curvature.
template <class Eval>
LineSearchResult wolfe_line_search(Eval&& eval, std::span<const double> x,
                                   std::span<const double> dir, double f0, double g0,
                                   double c1 = 1e-4, double c2 = 0.1) {
    LineSearchResult best;
    LineSearchResult fallback;  // best sufficient-decrease point seen
    const std::size_t n = x.size();
    std::vector<double> xt(n), gt;

    auto phi = [&](double t, double& dphi) {
        for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + t * dir[i];
        double ft = eval(xt, gt);
        dphi = dot(gt, dir);
        if (ft <= f0 + c1 * t * g0 && (!fallback.ok || ft < fallback.cost)) {
            fallback.step = t;
            fallback.cost = ft;
            fallback.state = xt;
            fallback.grad = gt;
            fallback.ok = true;
        }
        return ft;
    };

    double lo = 0.0, f_lo = f0, g_lo = g0;
    double t = 1.0, t_prev = 0.0, f_prev = f0;
    double hi = 0.0, f_hi = 0.0;
    bool bracketed = false;

    for (int iter = 0; iter < 25 && !bracketed; ++iter) {
        double dphi;
        const double ft = phi(t, dphi);
        if (ft > f0 + c1 * t * g0 || (iter > 0 && ft >= f_prev)) {
            lo = t_prev;
            f_lo = f_prev;
            hi = t;
            f_hi = ft;
            bracketed = true;
            break;
        }
        if (std::abs(dphi) <= -c2 * g0) {
            best.step = t;
            best.cost = ft;
            best.state = xt;
            best.grad = gt;
            best.ok = true;
            return best;
        }
        if (dphi >= 0.0) {
            lo = t;
            f_lo = ft;
            g_lo = dphi;
            hi = t_prev;
            f_hi = f_prev;
            bracketed = true;
            break;
        }
        t_prev = t;
        f_prev = ft;
        // secant step: exact for a quadratic phi, otherwise fall back to
        // doubling when the slope estimate is not increasing
        const double k = (dphi - g0) / t;
        const double secant = k > 0.0 ? -g0 / k : 0.0;
        t = secant > t ? std::min(secant, 1e6 * t) : 2.0 * t;
    }
    if (!bracketed) return fallback;

    for (int iter = 0; iter < 50; ++iter) {
        const double tm = 0.5 * (lo + hi);
        double dphi;
        const double fm = phi(tm, dphi);
        // strict comparison: near the numerical floor all costs tie, and the
        // curvature test below must still get a chance to accept
        if (fm > f0 + c1 * tm * g0 || fm > f_lo) {
            hi = tm;
            f_hi = fm;
        } else {
            if (std::abs(dphi) <= -c2 * g0) {
                best.step = tm;
                best.cost = fm;
                best.state = xt;
                best.grad = gt;
                best.ok = true;
                return best;
            }
            if (dphi * (hi - lo) >= 0.0) {
                hi = lo;
                f_hi = f_lo;
            }
            lo = tm;
            f_lo = fm;
            g_lo = dphi;
        }
        if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    (void)f_hi;
    // the curvature condition can be unreachable in floating point near the
    // minimum; fall back to the best sufficient-decrease point
    return fallback;
}

}  // namespace detail

/// Two-loop-recursion L-BFGS with a strong Wolfe line search. Stops when
/// the gradient infinity norm drops below tol * max(1, |J|).
inline MinimizeResult var3d_minimize(const VarProblem& p, std::span<const double> init,
                                     int memory = 10, double tol = 1e-3,
                                     int max_iters = 500) {
    p.validate();
    if (memory < 1) throw std::invalid_argument("L-BFGS memory must be >= 1");
    const std::size_t n = p.prior_mean.size();
    if (init.size() != n) throw std::invalid_argument("initial state length mismatch");

    auto eval = [&](std::span<const double> x, std::vector<double>& g) {
        g = var3d_gradient(p, x);
        return var3d_cost(p, x);
    };

    MinimizeResult result;
    result.state.assign(init.begin(), init.end());
    std::vector<double> grad;
    result.cost = eval(result.state, grad);

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history;
    std::vector<double> dir(n), q(n);
    std::vector<double> alpha_buf;

    for (int iter = 0; iter < max_iters; ++iter) {
        if (detail::inf_norm(grad) <= tol * std::max(1.0, std::abs(result.cost))) {
            result.status = MinimizeStatus::Converged;
            return result;
        }

        // two-loop recursion
        q = grad;
        alpha_buf.assign(history.size(), 0.0);
        for (std::size_t k = history.size(); k-- > 0;) {
            const Pair& h = history[k];
            const double a = h.rho * detail::dot(h.s, q);
            alpha_buf[k] = a;
            for (std::size_t i = 0; i < n; ++i) q[i] -= a * h.y[i];
        }
        if (!history.empty()) {
            const Pair& h = history.back();
            const double gamma = detail::dot(h.s, h.y) / detail::dot(h.y, h.y);
            for (double& v : q) v *= gamma;
        }
        for (std::size_t k = 0; k < history.size(); ++k) {
            const Pair& h = history[k];
            const double b = h.rho * detail::dot(h.y, q);
            for (std::size_t i = 0; i < n; ++i) q[i] += (alpha_buf[k] - b) * h.s[i];
        }
        for (std::size_t i = 0; i < n; ++i) dir[i] = -q[i];

        double g0 = detail::dot(grad, dir);
        if (g0 >= 0.0) {  // not a descent direction, restart from steepest descent
            history.clear();
            for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
            g0 = detail::dot(grad, dir);
        }

        auto ls = detail::wolfe_line_search(eval, result.state, dir, result.cost, g0);
        if (!ls.ok) {
            result.status = MinimizeStatus::LineSearchFailed;
            result.iterations = iter;
            return result;
        }

        Pair pair;
        pair.s.resize(n);
        pair.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            pair.s[i] = ls.state[i] - result.state[i];
            pair.y[i] = ls.grad[i] - grad[i];
        }
        const double sy = detail::dot(pair.s, pair.y);
        const double scale =
            std::sqrt(detail::dot(pair.s, pair.s) * detail::dot(pair.y, pair.y));
        if (sy > 1e-12 * scale && sy > 0.0) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (static_cast<int>(history.size()) > memory) history.pop_front();
        }

        result.state = std::move(ls.state);
        grad = std::move(ls.grad);
        result.cost = ls.cost;
        result.iterations = iter + 1;
    }
    result.status =
        detail::inf_norm(grad) <= tol * std::max(1.0, std::abs(result.cost))
            ? MinimizeStatus::Converged
            : MinimizeStatus::MaxIters;
    return result;
}

}  // namespace mpda
