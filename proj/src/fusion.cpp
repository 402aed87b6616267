#include "ecgnn/fusion.hpp"

#include "ecgnn/encoders.hpp"
#include "ecgnn/errors.hpp"

namespace ecgnn {

AttendParams::AttendParams(const std::string& prefix, std::size_t d_, bool question_guided, Rng& rng)
    : d(d_),
      score_w(prefix + ".score_w", xavier(rng, 1, d_)),
      feat_w(prefix + ".feat_w", xavier(rng, d_, d_)),
      h_w(prefix + ".h_w", xavier(rng, d_, d_)),
      b(prefix + ".b", Tensor::zeros(1, d_)) {
    if (question_guided) q_w.emplace(prefix + ".q_w", xavier(rng, d_, d_));
}

void AttendParams::collect(std::vector<Param*>& out) {
    out.push_back(&score_w);
    out.push_back(&feat_w);
    out.push_back(&h_w);
    out.push_back(&b);
    if (q_w) out.push_back(&*q_w);
}

AttendOut step_attend(Var feat, Var q_last, Var h_prev, AttendParams& p) {
    Tape& t = *feat.tape;
    const std::size_t n = feat.val().rows();
    Var ctx = matmul_nt(h_prev, t.use(p.h_w)) + t.use(p.b);
    if (p.q_w) ctx = ctx + matmul_nt(q_last, t.use(*p.q_w));
    Var pre = tanh_(add_rowvec(matmul_nt(feat, t.use(p.feat_w)), ctx));
    Var logits = reshape(matmul_nt(pre, t.use(p.score_w)), Shape{1, n});
    Var att = softmax_rows(logits);
    return AttendOut{att, matmul(att, feat)};
}

LstmParams::LstmParams(const std::string& prefix, std::size_t d_, Rng& rng)
    : d(d_),
      w_i(prefix + ".w_i", xavier(rng, d_, d_)),
      w_f(prefix + ".w_f", xavier(rng, d_, d_)),
      w_g(prefix + ".w_g", xavier(rng, d_, d_)),
      w_o(prefix + ".w_o", xavier(rng, d_, d_)),
      u_i(prefix + ".u_i", xavier(rng, d_, d_)),
      u_f(prefix + ".u_f", xavier(rng, d_, d_)),
      u_g(prefix + ".u_g", xavier(rng, d_, d_)),
      u_o(prefix + ".u_o", xavier(rng, d_, d_)),
      b_i(prefix + ".b_i", Tensor::zeros(1, d_)),
      b_f(prefix + ".b_f", Tensor::zeros(1, d_)),
      b_g(prefix + ".b_g", Tensor::zeros(1, d_)),
      b_o(prefix + ".b_o", Tensor::zeros(1, d_)) {}

void LstmParams::collect(std::vector<Param*>& out) {
    for (Param* p : {&w_i, &w_f, &w_g, &w_o, &u_i, &u_f, &u_g, &u_o, &b_i, &b_f, &b_g, &b_o}) out.push_back(p);
}

LstmState lstm_step(Var x, LstmState state, LstmParams& p) {
    Tape& t = *x.tape;
    auto gate = [&](Param& w, Param& u, Param& b) {
        return matmul_nt(x, t.use(w)) + matmul_nt(state.h, t.use(u)) + t.use(b);
    };
    Var i = sigmoid(gate(p.w_i, p.u_i, p.b_i));
    Var f = sigmoid(gate(p.w_f, p.u_f, p.b_f));
    Var g = tanh_(gate(p.w_g, p.u_g, p.b_g));
    Var o = sigmoid(gate(p.w_o, p.u_o, p.b_o));
    Var c = mul(f, state.c) + mul(i, g);
    Var h = mul(o, tanh_(c));
    return LstmState{h, c};
}

FusionParams::FusionParams(const std::string& prefix, std::size_t d_, std::vector<std::string> modalities,
                           bool question_guided, Rng& rng)
    : d(d_),
      n_mod(modalities.size()),
      modality_names(std::move(modalities)),
      mix_score_w(prefix + ".mix_score_w", xavier(rng, n_mod, n_mod * d_)),
      mix_h_w(prefix + ".mix_h_w", xavier(rng, n_mod * d_, d_)),
      mix_b(prefix + ".mix_b", Tensor::zeros(1, n_mod * d_)),
      out_h_w(prefix + ".out_h_w", xavier(rng, d_, d_)),
      out_b(prefix + ".out_b", Tensor::zeros(1, d_)),
      lstm(prefix + ".lstm", d_, rng) {
    attend.reserve(n_mod);
    mix_proj.reserve(n_mod);
    out_proj.reserve(n_mod);
    for (const std::string& m : modality_names) {
        attend.emplace_back(prefix + ".attend_" + m, d_, question_guided, rng);
        mix_proj.emplace_back(prefix + ".mix_proj_" + m, xavier(rng, d_, d_));
        out_proj.emplace_back(prefix + ".out_proj_" + m, xavier(rng, d_, d_));
    }
}

void FusionParams::collect(std::vector<Param*>& out) {
    for (auto& a : attend) a.collect(out);
    for (auto& p : mix_proj) out.push_back(&p);
    out.push_back(&mix_score_w);
    out.push_back(&mix_h_w);
    out.push_back(&mix_b);
    for (auto& p : out_proj) out.push_back(&p);
    out.push_back(&out_h_w);
    out.push_back(&out_b);
    lstm.collect(out);
}

MixOut modality_mix(const std::vector<Var>& pooled, Var h_prev, FusionParams& p) {
    if (pooled.size() != p.n_mod) {
        throw ConfigError("modality_mix: got " + std::to_string(pooled.size()) + " pooled features, params built for " +
                          std::to_string(p.n_mod));
    }
    Tape& t = *h_prev.tape;
    std::vector<Var> parts;
    parts.reserve(p.n_mod);
    for (std::size_t m = 0; m < p.n_mod; ++m) parts.push_back(matmul_nt(pooled[m], t.use(p.mix_proj[m])));
    Var pre = tanh_(concat_cols(parts) + matmul_nt(h_prev, t.use(p.mix_h_w)) + t.use(p.mix_b));
    Var alpha = softmax_rows(matmul_nt(pre, t.use(p.mix_score_w)));

    Var acc = matmul_nt(h_prev, t.use(p.out_h_w)) + t.use(p.out_b);
    for (std::size_t m = 0; m < p.n_mod; ++m) {
        acc = acc + smul(element(alpha, 0, m), matmul_nt(pooled[m], t.use(p.out_proj[m])));
    }
    return MixOut{alpha, tanh_(acc)};
}

FuseOut fuse(const std::vector<Var>& features, Var q_last, std::size_t n_r, FusionParams& p) {
    if (features.size() != p.n_mod) {
        throw ConfigError("fuse: got " + std::to_string(features.size()) + " modalities, params built for " +
                          std::to_string(p.n_mod));
    }
    if (n_r < 1) throw ConfigError("fuse: n_r must be >= 1");
    Tape& t = *q_last.tape;
    LstmState state{t.leaf(Tensor::zeros(1, p.d)), t.leaf(Tensor::zeros(1, p.d))};

    FusionTrace trace;
    trace.modality_names = p.modality_names;
    trace.steps.reserve(n_r);
    for (std::size_t step = 0; step < n_r; ++step) {
        std::vector<Var> pooled;
        pooled.reserve(p.n_mod);
        FusionStepTrace st;
        for (std::size_t m = 0; m < p.n_mod; ++m) {
            AttendOut out = step_attend(features[m], q_last, state.h, p.attend[m]);
            st.att.push_back(out.att.val());
            pooled.push_back(out.pooled);
        }
        MixOut mix = modality_mix(pooled, state.h, p);
        st.alpha = mix.alpha.val();
        state = lstm_step(mix.x_t, state, p.lstm);
        st.h = state.h.val();
        trace.steps.push_back(std::move(st));
    }
    return FuseOut{state.h, std::move(trace)};
}

}  // namespace ecgnn
