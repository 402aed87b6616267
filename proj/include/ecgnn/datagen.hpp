#pragma once

#include <string>

#include "ecgnn/data.hpp"

namespace ecgnn {

struct GenSizes {
    std::size_t nc_lo = 3, nc_hi = 8;
    std::size_t nv_lo = 8, nv_hi = 16;
    std::size_t nq_lo = 4, nq_hi = 10;
    std::size_t d = 32;  // d_c = d_v = d_q in synthetic mode
};

struct GenOptions {
    std::uint64_t seed = 0;
    std::size_t n_samples = 512;
    GenSizes sizes;
    std::size_t n_classes = 4;     // word task
    std::size_t n_candidates = 5;  // choice task
    double noise = 0.1;
    double background = 1.0;  // distractor-row stddev
    bool shuffle_labels = false;  // control datasets: labels decoupled from content
};

// Planted-signal generators. The split tag selects an independent sample
// stream; the class codes / event patterns / transition dictionary are a
// pure function of (seed, sizes, counts), so train and test splits of the
// same seed share them.

// Answer class decodable only from the caption modality: one caption row
// (recorded in Sample::planted_row) carries a fixed class code plus noise,
// video rows are distractor noise, question row 0 encodes the slot index.
Dataset gen_word_task(const GenOptions& opt, const std::string& split);

// Answer = number of video rows (0..10) carrying the event pattern;
// caption row 0 redundantly encodes the count.
Dataset gen_count_task(const GenOptions& opt, const std::string& split);

// Correct candidate's embedding matches the ordered transition pattern
// planted across the two halves of the video; distractors are other
// (permuted) pattern pairs.
Dataset gen_choice_task(const GenOptions& opt, const std::string& split);

Dataset generate(Task task, const GenOptions& opt, const std::string& split);

// --- closed-form oracle probes (no learning; regenerate the planted
//     patterns from the dataset seed) ---
double word_oracle_accuracy(const Dataset& data, const GenOptions& opt);
double choice_oracle_accuracy(const Dataset& data, const GenOptions& opt);
// mean-predictor MSE and the empirical count variance (they coincide)
double count_mean_predictor_mse(const Dataset& data);
// chi-square statistic of the label histogram against uniform
double label_chi_square(const Dataset& data);

// --- disk layout: <dir>/manifest.json + <dir>/tensors/*.ecgf ---
void write_dataset(const std::string& dir, const Dataset& data, const GenOptions& opt);
Dataset load_dataset(const std::string& dir);

}  // namespace ecgnn
