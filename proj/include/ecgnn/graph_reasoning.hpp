#pragma once

#include <vector>

#include "ecgnn/ops.hpp"
#include "ecgnn/rng.hpp"
#include "ecgnn/tape.hpp"

namespace ecgnn {

// One intra-modal graph layer: similarity adjacency over a projection
// into an interaction space, then a graph-convolution node update.
struct GraphLayerParams {
    std::size_t d = 0;
    Param phi_w, phi_b;      // d x d, 1 x d  (phi = tanh(affine))
    Param w;                 // d x d graph-conv matrix, no bias
    Param ln_gain, ln_bias;  // 1 x d
    double ln_eps = 1e-5;

    GraphLayerParams(const std::string& prefix, std::size_t d_, Rng& rng);
    void collect(std::vector<Param*>& out);
    static std::size_t count(std::size_t d) { return 2 * d * d + 3 * d; }
};

// G = softmax_rows(phi(X) phi(X)^T); row-stochastic by construction.
// No 1/sqrt(d) scaling on the logits.
Var adjacency(Var x, GraphLayerParams& p);

// X_hat = relu(layer_norm(G X W)), layer norm applied per node row.
Var gcn_update(Var x, Var g, GraphLayerParams& p);

// adjacency followed by gcn_update; optionally reports the adjacency
// values for diagnostics.
Var graph_reason(Var x, GraphLayerParams& p, Tensor* adjacency_out = nullptr);

}  // namespace ecgnn
