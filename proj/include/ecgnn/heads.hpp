#pragma once

#include <vector>

#include "ecgnn/ops.hpp"
#include "ecgnn/rng.hpp"
#include "ecgnn/tape.hpp"

namespace ecgnn {

// Open-ended words: C-way classification with cross-entropy.
struct WordHeadParams {
    std::size_t n_classes = 0, d_in = 0;
    Param w;  // C x d_in
    Param b;  // 1 x C

    WordHeadParams(const std::string& prefix, std::size_t n_classes_, std::size_t d_in_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t n_classes, std::size_t d_in) { return n_classes * d_in + n_classes; }
};

struct WordHeadOut {
    Tensor probs;          // 1 x C simplex row
    Var loss;              // -ln probs[target]
    std::size_t prediction;  // argmax, lowest-index tie-break
};

WordHeadOut word_head(Var s_a, WordHeadParams& p, std::size_t target);

// Open-ended numbers: scalar regression, answers are integers in [0, 10].
struct NumberHeadParams {
    std::size_t d_in = 0;
    Param w;  // 1 x d_in
    Param b;  // 1 x 1

    NumberHeadParams(const std::string& prefix, std::size_t d_in_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d_in) { return d_in + 1; }
};

struct NumberHeadOut {
    double raw = 0.0;
    Var loss;  // (raw - target)^2
    int prediction = 0;  // clamp(round-half-away-from-zero(raw), 0, 10)
};

NumberHeadOut number_head(Var s_a, NumberHeadParams& p, int target);

int round_clamp_0_10(double raw);

// Multiple choice: shared scoring affine over K final representations,
// hinge loss sum_i max(0, 1 + s_i^n - s^p).
struct ChoiceHeadParams {
    std::size_t d_in = 0;
    Param w;  // 1 x d_in
    Param b;  // 1 x 1

    ChoiceHeadParams(const std::string& prefix, std::size_t d_in_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d_in) { return d_in + 1; }
};

struct ChoiceHeadOut {
    std::vector<double> scores;  // K entries
    Var loss;
    std::size_t prediction = 0;  // argmax score, lowest-index tie-break
};

ChoiceHeadOut choice_head(const std::vector<Var>& reps, ChoiceHeadParams& p, std::size_t correct);

}  // namespace ecgnn
