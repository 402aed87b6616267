#include "ecgnn/graph_reasoning.hpp"

#include "ecgnn/encoders.hpp"
#include "ecgnn/errors.hpp"

namespace ecgnn {

GraphLayerParams::GraphLayerParams(const std::string& prefix, std::size_t d_, Rng& rng)
    : d(d_),
      phi_w(prefix + ".phi_w", xavier(rng, d_, d_)),
      phi_b(prefix + ".phi_b", Tensor::zeros(1, d_)),
      w(prefix + ".w", xavier(rng, d_, d_)),
      ln_gain(prefix + ".ln_gain", Tensor::full(1, d_, 1.0)),
      ln_bias(prefix + ".ln_bias", Tensor::zeros(1, d_)) {}

void GraphLayerParams::collect(std::vector<Param*>& out) {
    for (Param* p : {&phi_w, &phi_b, &w, &ln_gain, &ln_bias}) out.push_back(p);
}

Var adjacency(Var x, GraphLayerParams& p) {
    Var phi = tanh_(linear(x, p.phi_w, p.phi_b));
    return softmax_rows(matmul_nt(phi, phi));
}

Var gcn_update(Var x, Var g, GraphLayerParams& p) {
    Tape& t = *x.tape;
    const Tensor& xv = x.val();
    const Tensor& gv = g.val();
    if (gv.rows() != gv.cols() || gv.rows() != xv.rows()) {
        throw ShapeError("gcn_update: adjacency " + shape_str(gv.shape()) + " vs features " +
                         shape_str(xv.shape()));
    }
    Var conv = matmul(g, matmul(x, t.use(p.w)));
    return relu(layer_norm_rows(conv, t.use(p.ln_gain), t.use(p.ln_bias), p.ln_eps));
}

Var graph_reason(Var x, GraphLayerParams& p, Tensor* adjacency_out) {
    Var g = adjacency(x, p);
    if (adjacency_out) *adjacency_out = g.val();
    return gcn_update(x, g, p);
}

}  // namespace ecgnn
