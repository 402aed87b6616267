#include <doctest.h>

#include <cmath>

#include "ecgnn/errors.hpp"
#include "ecgnn/gradcheck.hpp"
#include "ecgnn/graph_reasoning.hpp"

using namespace ecgnn;

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal();
    return t;
}

// apply a permutation to the rows of a matrix
Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
    Tensor y = Tensor::zeros(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(perm[i], j);
    return y;
}

}  // namespace

TEST_CASE("adjacency basics") {
    Rng rng(1);
    GraphLayerParams p("g", 5, rng);

    SUBCASE("identical rows give the uniform matrix") {
        Tensor x = Tensor::zeros(4, 5);
        Rng r2(2);
        Tensor row = randn(r2, 1, 5);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 5; ++j) x(i, j) = row.at(j);
        Tape t;
        const Tensor& g = adjacency(t.leaf(x), p).val();
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.at(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("single node gives [[1]]") {
        Tape t;
        Rng r2(3);
        const Tensor& g = adjacency(t.leaf(randn(r2, 1, 5)), p).val();
        REQUIRE(g.size() == 1);
        CHECK(g.at(0) == 1.0);
    }
    SUBCASE("rows are stochastic with positive entries") {
        Rng r2(4);
        for (int trial = 0; trial < 25; ++trial) {
            Tape t;
            const Tensor& g = adjacency(t.leaf(randn(r2, 6, 5)), p).val();
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    s += g(i, j);
                    CHECK(g(i, j) > 0.0);
                    CHECK(g(i, j) <= 1.0);
                }
                CHECK(std::fabs(s - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("gcn_update composition") {
    Rng rng(5);
    GraphLayerParams p("g", 4, rng);
    p.w.value = Tensor::identity(4);

    // all rows equal v, W = I: every output row is relu(layer_norm(v))
    Tensor v = randn(rng, 1, 4);
    Tensor x = Tensor::zeros(3, 4);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) x(i, j) = v.at(j);
    Tape t;
    Var xv = t.leaf(x);
    Var g = adjacency(xv, p);
    const Tensor& y = gcn_update(xv, g, p).val();
    const Tensor& ref =
        relu(layer_norm_rows(t.leaf(v), t.use(p.ln_gain), t.use(p.ln_bias), p.ln_eps)).val();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(y(i, j) == doctest::Approx(ref.at(j)).epsilon(1e-12));

    // relu forces nonnegativity
    Rng r2(6);
    for (int trial = 0; trial < 10; ++trial) {
        Tape t2;
        Var x2 = t2.leaf(randn(r2, 5, 4));
        const Tensor& y2 = graph_reason(x2, p).val();
        for (std::size_t i = 0; i < y2.size(); ++i) CHECK(y2.at(i) >= 0.0);
    }

    CHECK_THROWS_AS(gcn_update(t.leaf(randn(rng, 3, 4)), t.leaf(randn(rng, 4, 4)), p), ShapeError);
}

TEST_CASE("graph_reason equals the explicit two-step pipeline") {
    Rng rng(7);
    GraphLayerParams p("g", 6, rng);
    Tensor x = randn(rng, 5, 6);
    Tape t;
    Var xv = t.leaf(x);
    const Tensor& composed = graph_reason(xv, p).val();
    Var g = adjacency(xv, p);
    const Tensor& steps = gcn_update(xv, g, p).val();
    CHECK(max_abs_diff(composed, steps) == 0.0);
}

TEST_CASE("graph_reason permutation equivariance") {
    Rng rng(8);
    GraphLayerParams p("g", 7, rng);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = randn(rng, 6, 7);
        Tape t;
        const Tensor& direct = graph_reason(t.leaf(permute_rows(x, perm)), p).val();
        const Tensor& base = graph_reason(t.leaf(x), p).val();
        CHECK(max_abs_diff(direct, permute_rows(base, perm)) < 1e-9);
    }
}

TEST_CASE("graph_reason gradient w.r.t. the graph-conv matrix") {
    Rng rng(9);
    GraphLayerParams p("g", 5, rng);
    Tensor x = randn(rng, 4, 5);
    auto f = [&]() {
        Tape t;
        Var loss = sum(graph_reason(t.leaf(x), p));
        t.backward(loss);
        return loss.val().at(0);
    };
    auto rep = grad_check(f, {&p.w});
    CHECK(rep.worst_rel_err < 1e-5);
}
