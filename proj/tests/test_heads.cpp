#include <doctest.h>

#include <cmath>

#include "ecgnn/errors.hpp"
#include "ecgnn/gradcheck.hpp"
#include "ecgnn/heads.hpp"

using namespace ecgnn;

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("word head") {
    Rng rng(1);

    SUBCASE("zero parameters give uniform probabilities and loss ln C") {
        WordHeadParams p("w", 4, 6, rng);
        p.w.value.fill(0.0);
        p.b.value.fill(0.0);
        Tape t;
        WordHeadOut out = word_head(t.leaf(randn(rng, 1, 6)), p, 2);
        for (std::size_t c = 0; c < 4; ++c) CHECK(out.probs.at(c) == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(out.loss.val().at(0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK(out.prediction == 0);  // ties break to the lowest index
    }
    SUBCASE("probabilities sum to one") {
        WordHeadParams p("w", 7, 5, rng);
        for (int trial = 0; trial < 20; ++trial) {
            Tape t;
            WordHeadOut out = word_head(t.leaf(randn(rng, 1, 5)), p, 1);
            double s = 0.0;
            for (std::size_t c = 0; c < 7; ++c) s += out.probs.at(c);
            CHECK(std::fabs(s - 1.0) <= 1e-12);
        }
    }
    SUBCASE("gradient of the loss w.r.t. logits is probs - one_hot") {
        WordHeadParams p("w", 5, 4, rng);
        Param s_a("s_a", randn(rng, 1, 4));
        // exact identity via the bias parameter (logit-space gradient)
        Tape t;
        WordHeadOut out = word_head(t.use(s_a), p, 3);
        p.b.reset_grad();
        t.backward(out.loss);
        for (std::size_t c = 0; c < 5; ++c) {
            const double expect = out.probs.at(c) - (c == 3 ? 1.0 : 0.0);
            CHECK(p.b.grad.at(c) == doctest::Approx(expect).epsilon(1e-12));
        }
        // and against central differences
        auto f = [&]() {
            Tape t2;
            WordHeadOut o = word_head(t2.use(s_a), p, 3);
            t2.backward(o.loss);
            return o.loss.val().at(0);
        };
        auto rep = grad_check(f, {&p.w, &p.b, &s_a});
        CHECK(rep.worst_rel_err < 1e-6);
    }
    SUBCASE("prediction invariant to constant logit shifts") {
        WordHeadParams p("w", 6, 4, rng);
        Tape t;
        Tensor x = randn(rng, 1, 4);
        WordHeadOut a = word_head(t.leaf(x), p, 0);
        for (std::size_t c = 0; c < 6; ++c) p.b.value.at(c) += 11.25;
        WordHeadOut b = word_head(t.leaf(x), p, 0);
        CHECK(a.prediction == b.prediction);
    }
    SUBCASE("target out of range") {
        WordHeadParams p("w", 3, 4, rng);
        Tape t;
        CHECK_THROWS_AS(word_head(t.leaf(randn(rng, 1, 4)), p, 3), InputError);
    }
}

TEST_CASE("number head") {
    Rng rng(2);

    SUBCASE("rounding and clamping rule") {
        CHECK(round_clamp_0_10(3.5) == 4);
        CHECK(round_clamp_0_10(-0.4) == 0);
        CHECK(round_clamp_0_10(12.2) == 10);
        CHECK(round_clamp_0_10(2.5) == 3);  // halves away from zero
        CHECK(round_clamp_0_10(6.49) == 6);
    }
    SUBCASE("zero loss when raw equals the target") {
        NumberHeadParams p("n", 4, rng);
        p.w.value.fill(0.0);
        p.b.value.at(0) = 7.0;
        Tape t;
        NumberHeadOut out = number_head(t.leaf(randn(rng, 1, 4)), p, 7);
        CHECK(out.loss.val().at(0) == 0.0);
        CHECK(out.prediction == 7);
    }
    SUBCASE("d loss / d raw = 2 (raw - target)") {
        NumberHeadParams p("n", 5, rng);
        Param s_a("s_a", randn(rng, 1, 5));
        Tape t;
        NumberHeadOut out = number_head(t.use(s_a), p, 4);
        p.b.reset_grad();
        t.backward(out.loss);
        CHECK(p.b.grad.at(0) == doctest::Approx(2.0 * (out.raw - 4.0)).epsilon(1e-12));
        auto f = [&]() {
            Tape t2;
            NumberHeadOut o = number_head(t2.use(s_a), p, 4);
            t2.backward(o.loss);
            return o.loss.val().at(0);
        };
        auto rep = grad_check(f, {&p.w, &p.b});
        CHECK(rep.worst_rel_err < 1e-6);
    }
    SUBCASE("prediction always an integer in [0, 10]") {
        NumberHeadParams p("n", 4, rng);
        for (int trial = 0; trial < 50; ++trial) {
            Tape t;
            NumberHeadOut out = number_head(t.leaf(randn(rng, 1, 4)), p, 5);
            CHECK(out.prediction >= 0);
            CHECK(out.prediction <= 10);
        }
    }
    SUBCASE("target outside the answer range") {
        NumberHeadParams p("n", 4, rng);
        Tape t;
        CHECK_THROWS_AS(number_head(t.leaf(randn(rng, 1, 4)), p, 11), InputError);
        CHECK_THROWS_AS(number_head(t.leaf(randn(rng, 1, 4)), p, -1), InputError);
    }
}

TEST_CASE("choice head") {
    Rng rng(3);
    ChoiceHeadParams p("c", 3, rng);

    auto scores_to_reps = [&](const std::vector<double>& want, Tape& t) {
        // w = e_0, b = 0 so the first coordinate is the score
        p.w.value.fill(0.0);
        p.w.value.at(0) = 1.0;
        p.b.value.fill(0.0);
        std::vector<Var> reps;
        for (double s : want) reps.push_back(t.leaf(Tensor::row({s, 0.0, 0.0})));
        return reps;
    };

    SUBCASE("margin satisfied gives zero loss") {
        Tape t;
        ChoiceHeadOut out = choice_head(scores_to_reps({2.0, 0.5, 0.0}, t), p, 0);
        CHECK(out.loss.val().at(0) == 0.0);
        CHECK(out.prediction == 0);
    }
    SUBCASE("unit violation gives loss 1") {
        Tape t;
        ChoiceHeadOut out = choice_head(scores_to_reps({0.0, 0.0}, t), p, 0);
        CHECK(out.loss.val().at(0) == 1.0);
    }
    SUBCASE("accumulates across violating candidates") {
        Tape t;
        ChoiceHeadOut out = choice_head(scores_to_reps({1.0, 1.0, 2.0}, t), p, 0);
        CHECK(out.loss.val().at(0) == 3.0);
        CHECK(out.prediction == 2);
    }
    SUBCASE("zero loss exactly when the margin holds") {
        Rng r2(4);
        ChoiceHeadParams p2("c2", 6, r2);
        for (int trial = 0; trial < 50; ++trial) {
            Tape t;
            std::vector<Var> reps;
            for (int k = 0; k < 4; ++k) reps.push_back(t.leaf(randn(r2, 1, 6)));
            ChoiceHeadOut out = choice_head(reps, p2, 1);
            double sp = out.scores[1], worst = -1e300;
            for (std::size_t k = 0; k < 4; ++k) {
                if (k != 1) worst = std::max(worst, out.scores[k]);
            }
            const bool margin = sp >= 1.0 + worst;
            CHECK((out.loss.val().at(0) == 0.0) == margin);
        }
    }
    SUBCASE("bad correct index") {
        Tape t;
        CHECK_THROWS_AS(choice_head(scores_to_reps({0.0, 1.0}, t), p, 2), InputError);
    }
}
