#pragma once

#include <vector>

#include "ecgnn/ops.hpp"
#include "ecgnn/rng.hpp"
#include "ecgnn/tape.hpp"

namespace ecgnn {

// Xavier-uniform matrix (+-sqrt(6/(fan_in+fan_out))); biases stay zero.
Tensor xavier(Rng& rng, std::size_t rows, std::size_t cols);

// Gated recurrent unit, reset-before-candidate-matmul variant:
//   z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//   r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//   n_t = tanh(W_n x_t + U_n (r_t . h_{t-1}) + b_n)
//   h_t = (1 - z_t) . n_t + z_t . h_{t-1}
struct GruParams {
    std::size_t d_in = 0, d_h = 0;
    Param w_z, w_r, w_n;  // d_h x d_in
    Param u_z, u_r, u_n;  // d_h x d_h
    Param b_z, b_r, b_n;  // 1 x d_h

    GruParams(const std::string& prefix, std::size_t d_in_, std::size_t d_h_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d_in, std::size_t d_h) {
        return 3 * d_h * d_in + 3 * d_h * d_h + 3 * d_h;
    }
};

struct GruOut {
    Var states;  // T x d_h
    Var last;    // 1 x d_h
};

// h0 is a 1 x d_h leaf (zeros in the reference configuration).
GruOut gru_encode(Var seq, GruParams& p, Var h0);
GruOut gru_encode(Tape& tape, const Tensor& seq, GruParams& p);  // h0 = 0

// One shared table for question and caption words.
struct EmbeddingTable {
    std::size_t vocab = 0, dim = 0;
    Param table;  // vocab x dim

    EmbeddingTable(const std::string& prefix, std::size_t vocab_, std::size_t dim_, Rng& rng);
    void collect(std::vector<Param*>& out) { out.push_back(&table); }
    static std::size_t count(std::size_t vocab, std::size_t dim) { return vocab * dim; }
};

// rows of the table at the given token ids (differentiable w.r.t. the table)
Var embed(Tape& tape, EmbeddingTable& emb, const std::vector<std::size_t>& token_ids);

// Two fully-connected layers projecting [f_a || f_m] into the common
// visual space; relu between the layers, hidden width = d_v.
struct VisualProjParams {
    std::size_t d_a = 0, d_m = 0, d_v = 0;
    Param w1, b1;  // d_v x (d_a + d_m), 1 x d_v
    Param w2, b2;  // d_v x d_v, 1 x d_v

    VisualProjParams(const std::string& prefix, std::size_t d_a_, std::size_t d_m_, std::size_t d_v_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d_a, std::size_t d_m, std::size_t d_v) {
        return d_v * (d_a + d_m) + d_v + d_v * d_v + d_v;
    }
};

Var visual_project(Var f_a, Var f_m, VisualProjParams& p);

// caption set -> one monolithic row per caption (last state of the
// sentence GRU over its word embeddings)
Var encode_caption_set(Tape& tape, const std::vector<std::vector<std::size_t>>& captions, EmbeddingTable& emb,
                       GruParams& sentence_gru);

struct ContextualFeatures {
    Var c1, v1, q1;                    // N_c x d, N_v x d, N_q x d
    Var c_last, v_last, q_last;        // 1 x d each
};

// Three independent GRUs contextualize the per-modality sequences.
ContextualFeatures contextualize(Var f_c, Var f_v, Var f_q, GruParams& gru_c, GruParams& gru_v, GruParams& gru_q);

}  // namespace ecgnn
