#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecgnn/ops.hpp"
#include "ecgnn/rng.hpp"
#include "ecgnn/tape.hpp"

namespace ecgnn {

// Additive temporal attention over one modality's rows:
//   logits_i = score_w . tanh(q_w q + h_w h + feat_w feat_i + b)
// q_w is absent when question guidance is ablated.
struct AttendParams {
    std::size_t d = 0;
    Param score_w;  // 1 x d
    Param feat_w;   // d x d
    Param h_w;      // d x d
    Param b;        // 1 x d
    std::optional<Param> q_w;  // d x d

    AttendParams(const std::string& prefix, std::size_t d_, bool question_guided, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d, bool question_guided) {
        return d + 2 * d * d + d + (question_guided ? d * d : 0);
    }
};

struct AttendOut {
    Var att;     // 1 x N, simplex row
    Var pooled;  // 1 x d
};

AttendOut step_attend(Var feat, Var q_last, Var h_prev, AttendParams& p);

struct LstmParams {
    std::size_t d = 0;
    Param w_i, w_f, w_g, w_o;  // d x d
    Param u_i, u_f, u_g, u_o;  // d x d
    Param b_i, b_f, b_g, b_o;  // 1 x d

    LstmParams(const std::string& prefix, std::size_t d_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d) { return 8 * d * d + 4 * d; }
};

struct LstmState {
    Var h, c;
};

LstmState lstm_step(Var x, LstmState state, LstmParams& p);

// Question-guided self-adaptive multi-modal fusion. Modalities are the
// enabled subset of {caption, video, question}, in that fixed order.
struct FusionParams {
    std::size_t d = 0;
    std::size_t n_mod = 0;
    std::vector<std::string> modality_names;

    std::vector<AttendParams> attend;  // per modality
    std::vector<Param> mix_proj;       // d x d per modality
    Param mix_score_w;                 // n_mod x (n_mod d)
    Param mix_h_w;                     // (n_mod d) x d
    Param mix_b;                       // 1 x (n_mod d)
    std::vector<Param> out_proj;       // d x d per modality
    Param out_h_w;                     // d x d
    Param out_b;                       // 1 x d
    LstmParams lstm;

    FusionParams(const std::string& prefix, std::size_t d_, std::vector<std::string> modalities,
                 bool question_guided, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d, std::size_t n_mod, bool question_guided) {
        return n_mod * AttendParams::count(d, question_guided)  // step attention
               + n_mod * d * d + n_mod * (n_mod * d) + (n_mod * d) * d + n_mod * d  // modality mix
               + n_mod * d * d + d * d + d                                          // output map
               + LstmParams::count(d);
    }
};

struct MixOut {
    Var alpha;  // 1 x n_mod, simplex row
    Var x_t;    // 1 x d
};

MixOut modality_mix(const std::vector<Var>& pooled, Var h_prev, FusionParams& p);

struct FusionStepTrace {
    std::vector<Tensor> att;  // per modality, 1 x N_m
    Tensor alpha;             // 1 x n_mod
    Tensor h;                 // 1 x d
};

struct FusionTrace {
    std::vector<std::string> modality_names;
    std::vector<FusionStepTrace> steps;  // exactly N_r entries
};

struct FuseOut {
    Var h_final;
    FusionTrace trace;
};

// N_r reasoning steps of {attend per modality -> modality mix -> LSTM
// controller}; the controller state starts at zero.
FuseOut fuse(const std::vector<Var>& features, Var q_last, std::size_t n_r, FusionParams& p);

}  // namespace ecgnn
