#pragma once

#include <vector>

#include "ecgnn/ops.hpp"
#include "ecgnn/rng.hpp"
#include "ecgnn/tape.hpp"

namespace ecgnn {

struct CamOutput {
    Var attended;  // N_target x d
    Var weights;   // N_target x N_source, row-stochastic
};

// Scaled dot-product cross-modal attention:
//   weights = softmax_rows(M_Q M_K^T / sqrt(d)), attended = weights M_V,
// with d = projected key width.
CamOutput cam(Var m_q, Var m_k, Var m_v);

// Cross-modal reasoning block for one target graph. Holds the target's
// query projection, key/value projections per source modality, the
// feed-forward over [attended_1 || ... || target], and the layer norm of
// the residual update.
struct CmrParams {
    std::size_t d = 0;
    std::size_t n_sources = 0;
    Param w_q;  // d x d
    struct SourceProj {
        Param w_k, w_v;  // d x d each
    };
    std::vector<SourceProj> sources;
    Param ff1_w, ff1_b;      // d x (n_sources+1)d, 1 x d
    Param ff2_w, ff2_b;      // d x d, 1 x d
    Param ln_gain, ln_bias;  // 1 x d
    double ln_eps = 1e-5;

    CmrParams(const std::string& prefix, std::size_t d_, std::size_t n_sources_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d, std::size_t n_sources) {
        return d * d + n_sources * 2 * d * d + d * (n_sources + 1) * d + d + d * d + d + 2 * d;
    }
};

// out = layer_norm(FF([cam_1.attended || ... || target]) + target).
// Sources attend with the target's query projection against their own
// key/value projections; order of sources fixes the concatenation order.
Var cmr_block(Var target, const std::vector<Var>& sources, CmrParams& p,
              std::vector<Tensor>* cam_weights_out = nullptr);

}  // namespace ecgnn
