#include <doctest.h>

#include <cmath>

#include "ecgnn/fusion.hpp"
#include "ecgnn/gradcheck.hpp"

using namespace ecgnn;

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal();
    return t;
}

void zero_all(std::vector<Param*> params) {
    for (Param* p : params) p->value.fill(0.0);
}

Tensor column_mean(const Tensor& x) {
    Tensor m = Tensor::zeros(1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) m.at(j) += x(i, j);
    for (std::size_t j = 0; j < x.cols(); ++j) m.at(j) /= static_cast<double>(x.rows());
    return m;
}

}  // namespace

TEST_CASE("step_attend with zero parameters pools uniformly") {
    Rng rng(1);
    AttendParams p("a", 5, true, rng);
    std::vector<Param*> all;
    p.collect(all);
    zero_all(all);

    Tape t;
    Tensor feat = randn(rng, 6, 5);
    AttendOut out = step_attend(t.leaf(feat), t.leaf(randn(rng, 1, 5)), t.leaf(randn(rng, 1, 5)), p);
    for (std::size_t i = 0; i < 6; ++i) CHECK(out.att.val().at(i) == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(max_abs_diff(out.pooled.val(), column_mean(feat)) < 1e-15);
}

TEST_CASE("step_attend single row") {
    Rng rng(2);
    AttendParams p("a", 4, true, rng);
    Tape t;
    Tensor feat = randn(rng, 1, 4);
    AttendOut out = step_attend(t.leaf(feat), t.leaf(randn(rng, 1, 4)), t.leaf(randn(rng, 1, 4)), p);
    CHECK(out.att.val().at(0) == 1.0);
    CHECK(max_abs_diff(out.pooled.val(), feat) == 0.0);
}

TEST_CASE("step_attend gradient w.r.t. the feature projection") {
    Rng rng(3);
    AttendParams p("a", 4, true, rng);
    Tensor feat = randn(rng, 5, 4), q = randn(rng, 1, 4), h = randn(rng, 1, 4);
    auto f = [&]() {
        Tape t;
        AttendOut out = step_attend(t.leaf(feat), t.leaf(q), t.leaf(h), p);
        Var loss = sum(out.pooled);
        t.backward(loss);
        return loss.val().at(0);
    };
    auto rep = grad_check(f, {&p.feat_w});
    CHECK(rep.worst_rel_err < 1e-5);
}

TEST_CASE("modality_mix") {
    Rng rng(4);
    FusionParams p("f", 4, {"caption", "video", "question"}, true, rng);

    SUBCASE("zero parameters: uniform alpha, zero mix") {
        std::vector<Param*> all;
        p.collect(all);
        zero_all(all);
        Tape t;
        MixOut out = modality_mix({t.leaf(randn(rng, 1, 4)), t.leaf(randn(rng, 1, 4)), t.leaf(randn(rng, 1, 4))},
                                  t.leaf(randn(rng, 1, 4)), p);
        for (std::size_t m = 0; m < 3; ++m) CHECK(out.alpha.val().at(m) == doctest::Approx(1.0 / 3).epsilon(1e-14));
        CHECK(out.x_t.val().max_abs() == 0.0);
    }
    SUBCASE("alpha on the simplex, x_t inside (-1, 1)") {
        for (int trial = 0; trial < 20; ++trial) {
            Tape t;
            MixOut out = modality_mix({t.leaf(randn(rng, 1, 4)), t.leaf(randn(rng, 1, 4)), t.leaf(randn(rng, 1, 4))},
                                      t.leaf(randn(rng, 1, 4)), p);
            double s = 0.0;
            for (std::size_t m = 0; m < 3; ++m) {
                CHECK(out.alpha.val().at(m) > 0.0);
                s += out.alpha.val().at(m);
            }
            CHECK(std::fabs(s - 1.0) <= 1e-9);
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(out.x_t.val().at(j) > -1.0);
                CHECK(out.x_t.val().at(j) < 1.0);
            }
        }
    }
}

TEST_CASE("lstm_step") {
    Rng rng(5);
    LstmParams p("l", 4, rng);

    SUBCASE("zero parameters and state give zero output") {
        std::vector<Param*> all;
        p.collect(all);
        zero_all(all);
        Tape t;
        LstmState s{t.leaf(Tensor::zeros(1, 4)), t.leaf(Tensor::zeros(1, 4))};
        LstmState out = lstm_step(t.leaf(randn(rng, 1, 4)), s, p);
        CHECK(out.h.val().max_abs() == 0.0);
    }
    SUBCASE("|h| bounded by 1") {
        for (int trial = 0; trial < 20; ++trial) {
            Tape t;
            LstmState s{t.leaf(randn(rng, 1, 4)), t.leaf(randn(rng, 1, 4))};
            LstmState out = lstm_step(t.leaf(randn(rng, 1, 4)), s, p);
            CHECK(out.h.val().max_abs() <= 1.0);
        }
    }
    SUBCASE("gradient through three chained steps") {
        Tensor x0 = randn(rng, 1, 4), x1 = randn(rng, 1, 4), x2 = randn(rng, 1, 4);
        auto f = [&]() {
            Tape t;
            LstmState s{t.leaf(Tensor::zeros(1, 4)), t.leaf(Tensor::zeros(1, 4))};
            s = lstm_step(t.leaf(x0), s, p);
            s = lstm_step(t.leaf(x1), s, p);
            s = lstm_step(t.leaf(x2), s, p);
            Var loss = sum(s.h);
            t.backward(loss);
            return loss.val().at(0);
        };
        GradCheckOptions opt;
        opt.max_coords = 60;
        auto rep = grad_check(f, {&p.w_g, &p.u_o, &p.b_i}, opt);
        CHECK(rep.worst_rel_err < 1e-5);
    }
}

TEST_CASE("fuse composes the three sub-operations") {
    Rng rng(6);
    FusionParams p("f", 4, {"caption", "video", "question"}, true, rng);
    Tensor fc = randn(rng, 3, 4), fv = randn(rng, 5, 4), fq = randn(rng, 2, 4), q = randn(rng, 1, 4);

    Tape t;
    FuseOut fused = fuse({t.leaf(fc), t.leaf(fv), t.leaf(fq)}, t.leaf(q), 1, p);
    REQUIRE(fused.trace.steps.size() == 1);

    // manual single-step composition
    Var h0 = t.leaf(Tensor::zeros(1, 4));
    Var c0 = t.leaf(Tensor::zeros(1, 4));
    Var qv = t.leaf(q);
    std::vector<Var> pooled;
    for (std::size_t m = 0; m < 3; ++m) {
        Var feat = t.leaf(m == 0 ? fc : (m == 1 ? fv : fq));
        pooled.push_back(step_attend(feat, qv, h0, p.attend[m]).pooled);
    }
    MixOut mix = modality_mix(pooled, h0, p);
    LstmState s = lstm_step(mix.x_t, LstmState{h0, c0}, p.lstm);
    CHECK(max_abs_diff(fused.h_final.val(), s.h.val()) == 0.0);
}

TEST_CASE("fuse trace has exactly n_r entries and simplex rows") {
    Rng rng(7);
    FusionParams p("f", 5, {"caption", "video", "question"}, true, rng);
    Tape t;
    FuseOut fused = fuse({t.leaf(randn(rng, 3, 5)), t.leaf(randn(rng, 6, 5)), t.leaf(randn(rng, 4, 5))},
                         t.leaf(randn(rng, 1, 5)), 3, p);
    REQUIRE(fused.trace.steps.size() == 3);
    for (const FusionStepTrace& st : fused.trace.steps) {
        REQUIRE(st.att.size() == 3);
        for (const Tensor& a : st.att) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a.at(i) >= 0.0);
                s += a.at(i);
            }
            CHECK(std::fabs(s - 1.0) <= 1e-9);
        }
        double s = 0.0;
        for (std::size_t i = 0; i < st.alpha.size(); ++i) s += st.alpha.at(i);
        CHECK(std::fabs(s - 1.0) <= 1e-9);
    }
}

TEST_CASE("fuse with zeroed attention scores ignores row order") {
    Rng rng(8);
    FusionParams p("f", 4, {"caption", "video", "question"}, true, rng);
    // zero every attention parameter: pooling becomes uniform
    for (auto& a : p.attend) {
        std::vector<Param*> all;
        a.collect(all);
        zero_all(all);
    }
    Tensor fc = randn(rng, 4, 4), fv = randn(rng, 5, 4), fq = randn(rng, 3, 4), q = randn(rng, 1, 4);
    Tensor fc_perm = Tensor::zeros(4, 4);
    const std::size_t perm[4] = {2, 0, 3, 1};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) fc_perm(i, j) = fc(perm[i], j);

    Tape t;
    FuseOut a = fuse({t.leaf(fc), t.leaf(fv), t.leaf(fq)}, t.leaf(q), 3, p);
    FuseOut b = fuse({t.leaf(fc_perm), t.leaf(fv), t.leaf(fq)}, t.leaf(q), 3, p);
    CHECK(max_abs_diff(a.h_final.val(), b.h_final.val()) < 1e-12);
}

TEST_CASE("fuse is bitwise deterministic") {
    Rng rng(9);
    FusionParams p("f", 4, {"caption", "video", "question"}, true, rng);
    Tensor fc = randn(rng, 3, 4), fv = randn(rng, 4, 4), fq = randn(rng, 2, 4), q = randn(rng, 1, 4);
    Tape t1, t2;
    auto run = [&](Tape& t) {
        return fuse({t.leaf(fc), t.leaf(fv), t.leaf(fq)}, t.leaf(q), 3, p);
    };
    FuseOut a = run(t1), b = run(t2);
    CHECK(max_abs_diff(a.h_final.val(), b.h_final.val()) == 0.0);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(max_abs_diff(a.trace.steps[s].alpha, b.trace.steps[s].alpha) == 0.0);
        CHECK(max_abs_diff(a.trace.steps[s].h, b.trace.steps[s].h) == 0.0);
    }
}

TEST_CASE("gradient reaches every fusion parameter") {
    Rng rng(10);
    FusionParams p("f", 4, {"caption", "video", "question"}, true, rng);
    std::vector<Param*> all;
    p.collect(all);
    for (Param* q : all) q->reset_grad();

    Tape t;
    FuseOut fused = fuse({t.leaf(randn(rng, 3, 4)), t.leaf(randn(rng, 5, 4)), t.leaf(randn(rng, 4, 4))},
                         t.leaf(randn(rng, 1, 4)), 3, p);
    Var w = t.leaf(randn(rng, 1, 4));
    t.backward(sum(mul(fused.h_final, w)));
    for (Param* q : all) {
        INFO(q->name);
        CHECK(q->grad.max_abs() > 1e-12);
    }
}
