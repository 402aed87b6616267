#include "ecgnn/heads.hpp"

#include <cmath>

#include "ecgnn/encoders.hpp"
#include "ecgnn/errors.hpp"

namespace ecgnn {

namespace {

std::size_t argmax_lowest(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace

WordHeadParams::WordHeadParams(const std::string& prefix, std::size_t n_classes_, std::size_t d_in_, Rng& rng)
    : n_classes(n_classes_),
      d_in(d_in_),
      w(prefix + ".w", xavier(rng, n_classes_, d_in_)),
      b(prefix + ".b", Tensor::zeros(1, n_classes_)) {
    if (n_classes_ < 2) throw ConfigError("word head: answer set size must be >= 2");
}

void WordHeadParams::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

WordHeadOut word_head(Var s_a, WordHeadParams& p, std::size_t target) {
    if (target >= p.n_classes) {
        throw InputError("word_head: target " + std::to_string(target) + " out of answer set of " +
                         std::to_string(p.n_classes));
    }
    Var logits = linear(s_a, p.w, p.b);
    Tensor probs = k_softmax_rows(logits.val());
    Var loss = softmax_xent(logits, target);
    return WordHeadOut{probs, loss, argmax_lowest(probs.data(), probs.size())};
}

NumberHeadParams::NumberHeadParams(const std::string& prefix, std::size_t d_in_, Rng& rng)
    : d_in(d_in_), w(prefix + ".w", xavier(rng, 1, d_in_)), b(prefix + ".b", Tensor::zeros(1, 1)) {}

void NumberHeadParams::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

int round_clamp_0_10(double raw) {
    const double r = std::round(raw);  // round halves away from zero
    if (r < 0.0) return 0;
    if (r > 10.0) return 10;
    return static_cast<int>(r);
}

NumberHeadOut number_head(Var s_a, NumberHeadParams& p, int target) {
    if (target < 0 || target > 10) {
        throw InputError("number_head: target " + std::to_string(target) + " outside the answer range [0, 10]");
    }
    Var raw = linear(s_a, p.w, p.b);
    Var diff = add_scalar(raw, -static_cast<double>(target));
    Var loss = mul(diff, diff);
    const double raw_value = raw.val().at(0);
    return NumberHeadOut{raw_value, loss, round_clamp_0_10(raw_value)};
}

ChoiceHeadParams::ChoiceHeadParams(const std::string& prefix, std::size_t d_in_, Rng& rng)
    : d_in(d_in_), w(prefix + ".w", xavier(rng, 1, d_in_)), b(prefix + ".b", Tensor::zeros(1, 1)) {}

void ChoiceHeadParams::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

ChoiceHeadOut choice_head(const std::vector<Var>& reps, ChoiceHeadParams& p, std::size_t correct) {
    const std::size_t k = reps.size();
    if (k < 2) throw InputError("choice_head: need at least 2 candidates, got " + std::to_string(k));
    if (correct >= k) {
        throw InputError("choice_head: correct index " + std::to_string(correct) + " out of K=" + std::to_string(k));
    }
    std::vector<Var> score_vars;
    std::vector<double> scores;
    score_vars.reserve(k);
    scores.reserve(k);
    for (Var rep : reps) {
        Var s = linear(rep, p.w, p.b);
        score_vars.push_back(s);
        scores.push_back(s.val().at(0));
    }
    Var loss;
    for (std::size_t i = 0; i < k; ++i) {
        if (i == correct) continue;
        Var term = relu(add_scalar(score_vars[i] - score_vars[correct], 1.0));
        loss = loss.valid() ? loss + term : term;
    }
    const std::size_t prediction = argmax_lowest(scores.data(), scores.size());
    return ChoiceHeadOut{std::move(scores), loss, prediction};
}

}  // namespace ecgnn
