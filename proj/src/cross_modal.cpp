#include "ecgnn/cross_modal.hpp"

#include <cmath>

#include "ecgnn/encoders.hpp"
#include "ecgnn/errors.hpp"

namespace ecgnn {

CamOutput cam(Var m_q, Var m_k, Var m_v) {
    const Tensor& kv = m_k.val();
    const Tensor& vv = m_v.val();
    if (kv.rows() != vv.rows()) {
        throw ShapeError("cam: key/value row counts disagree, " + shape_str(kv.shape()) + " vs " +
                         shape_str(vv.shape()));
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(kv.cols()));
    Var weights = softmax_rows(scale(matmul_nt(m_q, m_k), inv_sqrt_d));
    return CamOutput{matmul(weights, m_v), weights};
}

CmrParams::CmrParams(const std::string& prefix, std::size_t d_, std::size_t n_sources_, Rng& rng)
    : d(d_),
      n_sources(n_sources_),
      w_q(prefix + ".w_q", xavier(rng, d_, d_)),
      ff1_w(prefix + ".ff1_w", xavier(rng, d_, (n_sources_ + 1) * d_)),
      ff1_b(prefix + ".ff1_b", Tensor::zeros(1, d_)),
      ff2_w(prefix + ".ff2_w", xavier(rng, d_, d_)),
      ff2_b(prefix + ".ff2_b", Tensor::zeros(1, d_)),
      ln_gain(prefix + ".ln_gain", Tensor::full(1, d_, 1.0)),
      ln_bias(prefix + ".ln_bias", Tensor::zeros(1, d_)) {
    sources.reserve(n_sources_);
    for (std::size_t s = 0; s < n_sources_; ++s) {
        const std::string sp = prefix + ".src" + std::to_string(s);
        sources.push_back(SourceProj{Param(sp + ".w_k", xavier(rng, d_, d_)), Param(sp + ".w_v", xavier(rng, d_, d_))});
    }
}

void CmrParams::collect(std::vector<Param*>& out) {
    out.push_back(&w_q);
    for (auto& s : sources) {
        out.push_back(&s.w_k);
        out.push_back(&s.w_v);
    }
    for (Param* p : {&ff1_w, &ff1_b, &ff2_w, &ff2_b, &ln_gain, &ln_bias}) out.push_back(p);
}

Var cmr_block(Var target, const std::vector<Var>& sources, CmrParams& p, std::vector<Tensor>* cam_weights_out) {
    if (sources.size() != p.n_sources) {
        throw ConfigError("cmr_block: got " + std::to_string(sources.size()) + " sources, params built for " +
                          std::to_string(p.n_sources));
    }
    Tape& t = *target.tape;
    Var m_q = matmul_nt(target, t.use(p.w_q));
    std::vector<Var> parts;
    parts.reserve(sources.size() + 1);
    for (std::size_t s = 0; s < sources.size(); ++s) {
        Var m_k = matmul_nt(sources[s], t.use(p.sources[s].w_k));
        Var m_v = matmul_nt(sources[s], t.use(p.sources[s].w_v));
        CamOutput out = cam(m_q, m_k, m_v);
        if (cam_weights_out) cam_weights_out->push_back(out.weights.val());
        parts.push_back(out.attended);
    }
    parts.push_back(target);
    Var ff = linear(relu(linear(concat_cols(parts), p.ff1_w, p.ff1_b)), p.ff2_w, p.ff2_b);
    return layer_norm_rows(ff + target, t.use(p.ln_gain), t.use(p.ln_bias), p.ln_eps);
}

}  // namespace ecgnn
