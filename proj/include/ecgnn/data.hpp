#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecgnn/tensor.hpp"

namespace ecgnn {

enum class Task { word, number, choice };

std::string task_name(Task t);
Task task_from_string(const std::string& name);

// One QA instance. Synthetic datasets supply per-modality feature
// matrices directly; the token fields carry the word-id path when a
// vocabulary is configured.
struct Sample {
    Tensor f_c;  // N_c x d_c caption features
    Tensor f_v;  // N_v x d_v visual features (common space)
    Tensor f_a, f_m;  // appearance/motion pair, used instead of f_v when configured
    Tensor f_q;  // N_q x d_q question features
    Tensor candidates;  // K x d_q candidate rows (choice task)
    std::vector<std::vector<std::size_t>> caption_tokens;
    std::vector<std::size_t> question_tokens;
    int answer = 0;        // class id / count / correct candidate index
    int planted_row = -1;  // generator descriptor: caption row carrying the signal
};

struct Dataset {
    Task task = Task::word;
    std::size_t n_classes = 0;     // word task
    std::size_t n_candidates = 0;  // choice task
    std::size_t d_c = 0, d_v = 0, d_q = 0;
    std::uint64_t seed = 0;
    std::string split;
    std::vector<Sample> samples;
};

}  // namespace ecgnn
