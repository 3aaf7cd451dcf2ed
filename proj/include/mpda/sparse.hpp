#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpda {

/// Symmetric sparse matrix stored as per-row sequences of (column, value),
/// sorted by column. No explicit zeros.
class SparseOperator {
public:
    struct Entry {
        int col;
        double value;
    };

    SparseOperator() = default;
    explicit SparseOperator(int n) : rows_(static_cast<std::size_t>(n)) {}

    int size() const { return static_cast<int>(rows_.size()); }

    std::span<const Entry> row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

    /// Insert or accumulate a single entry; callers are responsible for
    /// keeping the matrix symmetric.
    void add(int i, int j, double v) {
        auto& r = rows_[static_cast<std::size_t>(i)];
        auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const Entry& e, int c) { return e.col < c; });
        if (it != r.end() && it->col == j)
            it->value += v;
        else
            r.insert(it, Entry{j, v});
    }

    double get(int i, int j) const {
        const auto& r = rows_[static_cast<std::size_t>(i)];
        auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const Entry& e, int c) { return e.col < c; });
        return (it != r.end() && it->col == j) ? it->value : 0.0;
    }

    std::size_t num_nonzeros() const {
        std::size_t c = 0;
        for (const auto& r : rows_) c += r.size();
        return c;
    }

    void scale(double s) {
        for (auto& r : rows_)
            for (auto& e : r) e.value *= s;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(rows_.size());
        for (int i = 0; i < size(); ++i) d[static_cast<std::size_t>(i)] = get(i, i);
        return d;
    }

    void apply(std::span<const double> x, std::span<double> y) const {
        if (x.size() != rows_.size() || y.size() != rows_.size())
            throw std::invalid_argument("matvec dimension mismatch");
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            double s = 0.0;
            for (const auto& e : rows_[i]) s += e.value * x[static_cast<std::size_t>(e.col)];
            y[i] = s;
        }
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(rows_.size());
        apply(x, y);
        return y;
    }

    bool is_symmetric(double tol = 0.0) const {
        for (int i = 0; i < size(); ++i)
            for (const auto& e : row(i))
                if (std::abs(get(e.col, i) - e.value) > tol) return false;
        return true;
    }

    /// Row-wise sparse product with sorted merge; contributions below
    /// `prune` in absolute value are dropped to avoid structural fill from
    /// numerically-zero entries.
    static SparseOperator multiply(const SparseOperator& a, const SparseOperator& b,
                                   double prune = 1e-14) {
        if (a.size() != b.size())
            throw std::invalid_argument("sparse product dimension mismatch");
        const int n = a.size();
        SparseOperator c(n);
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        std::vector<int> touched;
        for (int i = 0; i < n; ++i) {
            touched.clear();
            for (const auto& ea : a.row(i)) {
                for (const auto& eb : b.row(ea.col)) {
                    auto& slot = acc[static_cast<std::size_t>(eb.col)];
                    if (slot == 0.0) touched.push_back(eb.col);
                    slot += ea.value * eb.value;
                }
            }
            std::sort(touched.begin(), touched.end());
            auto& out = c.rows_[static_cast<std::size_t>(i)];
            out.reserve(touched.size());
            for (int col : touched) {
                const double v = acc[static_cast<std::size_t>(col)];
                acc[static_cast<std::size_t>(col)] = 0.0;
                if (std::abs(v) > prune) out.push_back(Entry{col, v});
            }
        }
        return c;
    }

private:
    std::vector<std::vector<Entry>> rows_;
};

}  // namespace mpda
