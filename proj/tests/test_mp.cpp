#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mpda/mp.hpp"
#include "mpda/oracle.hpp"
#include "mpda/spde.hpp"
#include "test_util.hpp"

using namespace mpda;

namespace {

FactorGraph two_node_chain() {
    SparseOperator p(2);
    p.add(0, 0, 2.0);
    p.add(1, 1, 2.0);
    p.add(0, 1, -1.0);
    p.add(1, 0, -1.0);
    const std::vector<double> h = {1.0, 0.0};
    return from_precision(p, h);
}

Hyperparams plain_bp() {
    Hyperparams h;
    h.c = 1.0;
    h.eta = 1.0;
    h.tau = 1e-12;
    return h;
}

}  // namespace

TEST_CASE("compute_outgoing_message hand cases") {
    SUBCASE("single-neighbor prior message") {
        // c=1, P_ii=2, h=0, no other incoming, excluded message (0,0), P_ij=1
        const Message m = compute_outgoing_message(1.0, 2.0, 0.0, {}, Message{0, 0}, 1.0);
        CHECK(m.a == doctest::Approx(-0.5));
        CHECK(m.b == doctest::Approx(0.0));
    }
    SUBCASE("shift feeds the linear coefficient") {
        const Message m = compute_outgoing_message(1.0, 1.0, 5.0, {}, Message{0, 0}, 1.0);
        CHECK(m.b == doctest::Approx(-5.0));
    }
    SUBCASE("zero edge weight kills the message") {
        const std::vector<Message> incoming = {{0.4, -2.0}, {-0.1, 3.0}};
        const Message m =
            compute_outgoing_message(10.0, 2.0, 1.0, incoming, Message{0.2, 0.2}, 0.0);
        CHECK(m.a == 0.0);
        CHECK(m.b == 0.0);
    }
    SUBCASE("singular alpha throws") {
        // alpha = P_ii + c * sum_{k != j} a = 1 - 1 = 0
        const std::vector<Message> incoming = {{-1.0, 0.0}};
        CHECK_THROWS_AS(
            compute_outgoing_message(1.0, 1.0, 0.0, incoming, Message{0.0, 0.0}, 1.0),
            std::domain_error);
    }
    SUBCASE("matches the cached-sum engine path") {
        const std::vector<Message> incoming = {{0.4, -2.0}, {-0.1, 3.0}};
        const Message excluded{0.25, -0.5};
        const double sum_a = 0.4 - 0.1 + excluded.a;
        const double sum_b = -2.0 + 3.0 + excluded.b;
        const Message a =
            compute_outgoing_message(10.0, 2.0, 1.0, incoming, excluded, -0.7);
        const Message b = reweighted_outgoing(10.0, 2.0, 1.0, sum_a, sum_b, excluded, -0.7);
        CHECK(a.a == b.a);
        CHECK(a.b == b.b);
    }
}

TEST_CASE("damped_update") {
    const Message old_msg{0.0, 0.0}, new_msg{1.0, 1.0};
    const Message d = damped_update(old_msg, new_msg, 0.6);
    CHECK(d.a == doctest::Approx(0.6));
    CHECK(d.b == doctest::Approx(0.6));

    const Message undamped = damped_update(old_msg, new_msg, 1.0);
    CHECK(undamped.a == new_msg.a);
    CHECK(undamped.b == new_msg.b);

    const Message fixed = damped_update(new_msg, new_msg, 0.3);
    CHECK(fixed.a == new_msg.a);
    CHECK(fixed.b == new_msg.b);
}

TEST_CASE("early_stop") {
    CHECK(early_stop(1.0, 1.0, 0.0005, 1e-3));
    CHECK_FALSE(early_stop(1.0, 1.0, 0.002, 1e-3));
    CHECK(early_stop(0.0, 0.0, 1.0, 1e-3));  // degenerate: converged at start
}

TEST_CASE("sweep on a zero-edge graph is a no-op") {
    SparseOperator p(3);
    for (int i = 0; i < 3; ++i) p.add(i, i, 2.0);
    const FactorGraph g = from_precision(p);
    const MessageStore store = MessageStore::initial(g);
    std::vector<Message> next;
    const SweepResult r = sweep(g, store.slots, next, plain_bp());
    CHECK(r.ok);
    CHECK(r.mean_abs_delta == 0.0);
}

TEST_CASE("symmetric two-node graph keeps symmetric messages") {
    SparseOperator p(2);
    p.add(0, 0, 2.0);
    p.add(1, 1, 2.0);
    p.add(0, 1, -1.0);
    p.add(1, 0, -1.0);
    const FactorGraph g = from_precision(p);
    Hyperparams h;
    h.c = 1.0;
    h.eta = 0.5;
    std::vector<Message> prev = MessageStore::initial(g).slots;
    std::vector<Message> next(prev.size());
    for (int t = 0; t < 10; ++t) {
        sweep(g, prev, next, h);
        prev.swap(next);
        CHECK(prev[0].a == prev[1].a);
        CHECK(prev[0].b == prev[1].b);
    }
}

TEST_CASE("two-node chain converges to the dense solution") {
    const FactorGraph g = two_node_chain();
    const RunResult r = run(g, plain_bp());
    CHECK(r.status == RunStatus::Converged);
    CHECK(r.marginals.mean[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
    CHECK(r.marginals.mean[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("compute_marginals") {
    SUBCASE("isolated node") {
        SparseOperator p(1);
        p.add(0, 0, 4.0);
        const std::vector<double> h = {2.0};
        const FactorGraph g = from_precision(p, h);
        const Marginals m = compute_marginals(g, MessageStore::initial(g), 10.0);
        CHECK(m.mean[0] == doctest::Approx(0.5));
        CHECK(m.precision[0] == doctest::Approx(4.0));
    }
    SUBCASE("all-zero messages give the nodewise prior mean") {
        const FactorGraph g = two_node_chain();
        MessageStore zeros{std::vector<Message>(g.num_directed_edges(), Message{0, 0})};
        const Marginals m = compute_marginals(g, zeros, 7.0);
        CHECK(m.mean[0] == doctest::Approx(0.5));  // h/P_ii = 1/2
        CHECK(m.mean[1] == doctest::Approx(0.0));
    }
}

TEST_CASE("tree exactness: chain graphs match the dense solve") {
    for (int n : {16, 64, 256}) {
        const SparseOperator p = test_util::chain_operator(n);
        const auto shift = test_util::random_vector(n, 42 + n);
        const FactorGraph g = from_precision(p, shift);
        const RunResult r = run(g, plain_bp());
        CHECK(r.status == RunStatus::Converged);
        const auto expect = test_util::dense_solve(g);
        CHECK(test_util::max_abs_diff(r.marginals.mean, expect) < 1e-8);
    }
}

TEST_CASE("loopy fixed point has exact means (16x16, 5% observed)") {
    const GridSpec grid(16, 16, 1.0 / 15, 1.0 / 15);
    const Hyperparams prior;
    const SyntheticData data = make_synthetic(grid, prior, 0.05, 3);
    const FactorGraph g =
        from_precision(build_precision(grid, prior)).with_observations(data.obs);

    Hyperparams h = prior;
    h.c = 10.0;
    h.eta = 0.6;
    h.tau = 1e-8;
    const RunResult r = run(g, h);
    CHECK(r.status == RunStatus::Converged);
    const auto expect = test_util::dense_solve(g);
    CHECK(test_util::rel_error(r.marginals.mean, expect) < 1e-4);
    for (double p : r.marginals.precision) CHECK(p > 0.0);
}

TEST_CASE("fixed point is invariant to c") {
    const GridSpec grid(16, 16, 1.0 / 15, 1.0 / 15);
    const Hyperparams prior;
    const SyntheticData data = make_synthetic(grid, prior, 0.05, 5);
    const FactorGraph g =
        from_precision(build_precision(grid, prior)).with_observations(data.obs);

    Hyperparams h = prior;
    h.eta = 0.6;
    h.tau = 1e-9;
    h.c = 10.0;
    const RunResult r10 = run(g, h);
    h.c = 20.0;
    const RunResult r20 = run(g, h);
    REQUIRE(r10.status == RunStatus::Converged);
    REQUIRE(r20.status == RunStatus::Converged);
    CHECK(test_util::rel_error(r10.marginals.mean, r20.marginals.mean) < 1e-5);
}

TEST_CASE("serial sweeps are bitwise deterministic") {
    const GridSpec grid(12, 12, 1.0 / 11, 1.0 / 11);
    const Hyperparams prior;
    const SyntheticData data = make_synthetic(grid, prior, 0.1, 9);
    const FactorGraph g =
        from_precision(build_precision(grid, prior)).with_observations(data.obs);
    const RunResult a = run(g, prior);
    const RunResult b = run(g, prior);
    CHECK(a.iterations == b.iterations);
    for (std::size_t i = 0; i < a.marginals.mean.size(); ++i)
        CHECK(a.marginals.mean[i] == b.marginals.mean[i]);
}

TEST_CASE("run reports divergence instead of looping to T") {
    // c=1 undamped loopy BP on a dense-loop graph blows up
    const GridSpec grid(24, 24, 1.0 / 23, 1.0 / 23);
    const Hyperparams prior;
    const SyntheticData data = make_synthetic(grid, prior, 0.05, 1);
    const FactorGraph g =
        from_precision(build_precision(grid, prior)).with_observations(data.obs);
    Hyperparams h = prior;
    h.c = 1.0;
    h.eta = 1.0;
    h.max_iters = 2000;
    const RunResult r = run(g, h);
    CHECK(r.status == RunStatus::Diverged);
    CHECK(r.iterations < h.max_iters);
}

TEST_CASE("mismatched init store is rejected") {
    const FactorGraph g = two_node_chain();
    MessageStore bad{std::vector<Message>(5, kInitialMessage)};
    CHECK_THROWS(run(g, plain_bp(), &bad));
}
