#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mpda/graph.hpp"
#include "mpda/spde.hpp"
#include "test_util.hpp"

using namespace mpda;

namespace {

SparseOperator two_node_precision() {
    SparseOperator p(2);
    p.add(0, 0, 2.0);
    p.add(1, 1, 2.0);
    p.add(0, 1, -1.0);
    p.add(1, 0, -1.0);
    return p;
}

}  // namespace

TEST_CASE("from_precision reads node potentials and edges off the matrix") {
    const FactorGraph g = from_precision(two_node_precision());
    CHECK(g.num_nodes() == 2);
    CHECK(g.num_undirected_edges() == 1);
    CHECK(g.node_precision(0) == 2.0);
    CHECK(g.node_precision(1) == 2.0);
    CHECK(g.edges()[0].weight == -1.0);
    CHECK(g.node_shift(0) == 0.0);
}

TEST_CASE("diagonal-only precision gives zero edges") {
    SparseOperator p(3);
    for (int i = 0; i < 3; ++i) p.add(i, i, 1.0 + i);
    const FactorGraph g = from_precision(p);
    CHECK(g.num_undirected_edges() == 0);
}

TEST_CASE("nonpositive diagonal is rejected") {
    SparseOperator p(2);
    p.add(0, 0, 1.0);
    p.add(1, 1, -1.0);
    CHECK_THROWS(from_precision(p));
}

TEST_CASE("alpha=2 interior nodes have 12 neighbors") {
    const GridSpec g(16, 16, 1.0, 1.0);
    const Hyperparams h;
    const FactorGraph graph = from_precision(build_precision(g, h));
    CHECK(graph.degree(g.linear_index(8, 8)) == 12);
}

TEST_CASE("densify reconstructs the precision exactly") {
    const GridSpec g(6, 5, 0.3, 0.4);
    const SparseOperator p = build_precision(g, Hyperparams{});
    const FactorGraph graph = from_precision(p);
    std::vector<double> dense, h;
    graph.densify(dense, h);
    const int n = p.size();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            CHECK(dense[static_cast<std::size_t>(i) * n + j] == p.get(i, j));
}

TEST_CASE("prior_shift_from_mean") {
    const SparseOperator p = two_node_precision();
    SUBCASE("zero mean gives zero shift") {
        const std::vector<double> zero(2, 0.0);
        const auto h = prior_shift_from_mean(p, zero);
        CHECK(h == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("constant mean gives row sums") {
        const std::vector<double> ones(2, 1.0);
        const auto h = prior_shift_from_mean(p, ones);
        CHECK(h[0] == doctest::Approx(1.0));
        CHECK(h[1] == doctest::Approx(1.0));
    }
    SUBCASE("sparse product equals dense matvec on a random 8x8 case") {
        const GridSpec g(8, 8, 0.2, 0.2);
        const SparseOperator precision = build_precision(g, Hyperparams{});
        const auto mean = test_util::random_vector(g.num_nodes(), 7);
        const auto sparse = prior_shift_from_mean(precision, mean);
        const Eigen::VectorXd dense =
            test_util::to_dense(precision) *
            Eigen::Map<const Eigen::VectorXd>(mean.data(), g.num_nodes());
        for (int i = 0; i < g.num_nodes(); ++i)
            CHECK(sparse[static_cast<std::size_t>(i)] ==
                  doctest::Approx(dense(i)).epsilon(1e-12));
    }
    SUBCASE("dimension mismatch throws") {
        const std::vector<double> wrong(3, 0.0);
        CHECK_THROWS(prior_shift_from_mean(p, wrong));
    }
}

TEST_CASE("with_observations adds natural parameters") {
    const FactorGraph g = from_precision(two_node_precision());

    SUBCASE("single observation") {
        ObservationSet obs;
        obs.entries.push_back({0, 2.0, 0.5});
        const FactorGraph posterior = g.with_observations(obs);
        CHECK(posterior.node_precision(0) == doctest::Approx(4.0));
        CHECK(posterior.node_shift(0) == doctest::Approx(4.0));
        CHECK(posterior.node_precision(1) == 2.0);  // unobserved untouched
        CHECK(posterior.node_shift(1) == 0.0);
    }
    SUBCASE("empty set leaves the graph unchanged") {
        const FactorGraph same = g.with_observations(ObservationSet{});
        CHECK(same.node_precision(0) == g.node_precision(0));
        CHECK(same.node_shift(0) == g.node_shift(0));
    }
    SUBCASE("two observations accumulate like their Gaussian product") {
        ObservationSet two;
        two.entries.push_back({0, 1.0, 1.0});
        two.entries.push_back({0, 3.0, 1.0});
        ObservationSet one;
        one.entries.push_back({0, 2.0, 0.5});
        const FactorGraph a = g.with_observations(two);
        const FactorGraph b = g.with_observations(one);
        CHECK(a.node_precision(0) == doctest::Approx(b.node_precision(0)));
        CHECK(a.node_shift(0) == doctest::Approx(b.node_shift(0)));
    }
    SUBCASE("precision never decreases") {
        ObservationSet obs;
        obs.entries.push_back({1, -5.0, 3.0});
        const FactorGraph posterior = g.with_observations(obs);
        for (int i = 0; i < g.num_nodes(); ++i)
            CHECK(posterior.node_precision(i) >= g.node_precision(i));
    }
    SUBCASE("invalid entries are rejected") {
        ObservationSet bad;
        bad.entries.push_back({5, 0.0, 1.0});
        CHECK_THROWS(g.with_observations(bad));
        bad.entries[0] = {0, 0.0, 0.0};
        CHECK_THROWS(g.with_observations(bad));
    }
}

TEST_CASE("posterior graph equals (P + H'R^-1 H, h + H'R^-1 y) densely") {
    const GridSpec g(12, 12, 1.0 / 11, 1.0 / 11);
    const SparseOperator p = build_precision(g, Hyperparams{});
    ObservationSet obs;
    obs.entries.push_back({5, 1.5, 0.1});
    obs.entries.push_back({77, -0.3, 0.25});
    obs.entries.push_back({140, 0.8, 0.05});
    const FactorGraph posterior = from_precision(p).with_observations(obs);

    std::vector<double> dense, h;
    posterior.densify(dense, h);
    const int n = p.size();
    // independent dense construction
    std::vector<double> expect_p(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> expect_h(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            expect_p[static_cast<std::size_t>(i) * n + j] = p.get(i, j);
    for (const auto& o : obs.entries) {
        expect_p[static_cast<std::size_t>(o.node) * n + o.node] += 1.0 / o.noise_variance;
        expect_h[static_cast<std::size_t>(o.node)] += o.value / o.noise_variance;
    }
    CHECK(test_util::max_abs_diff(dense, expect_p) == 0.0);
    CHECK(test_util::max_abs_diff(h, expect_h) == 0.0);
}

TEST_CASE("adjacency slots and reverse slots are consistent") {
    const GridSpec g(5, 4, 1.0, 1.0);
    const FactorGraph graph = from_precision(build_precision(g, Hyperparams{}));
    std::size_t slots = 0;
    for (int i = 0; i < graph.num_nodes(); ++i) {
        for (std::size_t s = graph.adj_begin(i); s < graph.adj_end(i); ++s) {
            ++slots;
            const int u = graph.neighbor(s);
            const std::size_t rev = graph.reverse_slot(s);
            CHECK(graph.neighbor(rev) == i);
            CHECK(rev >= graph.adj_begin(u));
            CHECK(rev < graph.adj_end(u));
            CHECK(graph.edge_weight(rev) == graph.edge_weight(s));
            CHECK(graph.find_slot(u, i) == s);
        }
    }
    CHECK(slots == graph.num_directed_edges());
}
