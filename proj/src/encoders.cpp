#include "ecgnn/encoders.hpp"

#include <cmath>

#include "ecgnn/errors.hpp"

namespace ecgnn {

Tensor xavier(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::zeros(rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-bound, bound);
    return t;
}

GruParams::GruParams(const std::string& prefix, std::size_t d_in_, std::size_t d_h_, Rng& rng)
    : d_in(d_in_),
      d_h(d_h_),
      w_z(prefix + ".w_z", xavier(rng, d_h_, d_in_)),
      w_r(prefix + ".w_r", xavier(rng, d_h_, d_in_)),
      w_n(prefix + ".w_n", xavier(rng, d_h_, d_in_)),
      u_z(prefix + ".u_z", xavier(rng, d_h_, d_h_)),
      u_r(prefix + ".u_r", xavier(rng, d_h_, d_h_)),
      u_n(prefix + ".u_n", xavier(rng, d_h_, d_h_)),
      b_z(prefix + ".b_z", Tensor::zeros(1, d_h_)),
      b_r(prefix + ".b_r", Tensor::zeros(1, d_h_)),
      b_n(prefix + ".b_n", Tensor::zeros(1, d_h_)) {}

void GruParams::collect(std::vector<Param*>& out) {
    for (Param* p : {&w_z, &w_r, &w_n, &u_z, &u_r, &u_n, &b_z, &b_r, &b_n}) out.push_back(p);
}

GruOut gru_encode(Var seq, GruParams& p, Var h0) {
    Tape& t = *seq.tape;
    const Tensor& sv = seq.val();
    if (sv.rank() != 2 || sv.rows() < 1) {
        throw InputError("gru_encode: empty or non-matrix sequence, shape " + shape_str(sv.shape()));
    }
    if (sv.cols() != p.d_in) {
        throw ShapeError("gru_encode: input width " + std::to_string(sv.cols()) + " vs GRU d_in " +
                         std::to_string(p.d_in));
    }
    const std::size_t steps = sv.rows();

    Var wz = t.use(p.w_z), wr = t.use(p.w_r), wn = t.use(p.w_n);
    Var uz = t.use(p.u_z), ur = t.use(p.u_r), un = t.use(p.u_n);
    Var bz = t.use(p.b_z), br = t.use(p.b_r), bn = t.use(p.b_n);

    Var h = h0;
    std::vector<Var> states;
    states.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        Var x = slice_rows(seq, i, i + 1);
        Var z = sigmoid(matmul_nt(x, wz) + matmul_nt(h, uz) + bz);
        Var r = sigmoid(matmul_nt(x, wr) + matmul_nt(h, ur) + br);
        Var n = tanh_(matmul_nt(x, wn) + matmul_nt(mul(r, h), un) + bn);
        h = (n - mul(z, n)) + mul(z, h);  // (1-z).n + z.h
        states.push_back(h);
    }
    return GruOut{concat_rows(states), h};
}

GruOut gru_encode(Tape& tape, const Tensor& seq, GruParams& p) {
    Var s = tape.leaf(seq);
    Var h0 = tape.leaf(Tensor::zeros(1, p.d_h));
    return gru_encode(s, p, h0);
}

EmbeddingTable::EmbeddingTable(const std::string& prefix, std::size_t vocab_, std::size_t dim_, Rng& rng)
    : vocab(vocab_), dim(dim_), table(prefix + ".table", xavier(rng, vocab_, dim_)) {}

Var embed(Tape& tape, EmbeddingTable& emb, const std::vector<std::size_t>& token_ids) {
    if (token_ids.empty()) throw InputError("embed: empty token sequence");
    for (std::size_t id : token_ids) {
        if (id >= emb.vocab) {
            throw InputError("embed: token id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(emb.vocab));
        }
    }
    Var tab = tape.use(emb.table);
    const std::size_t n = token_ids.size(), d = emb.dim;
    auto gather = [token_ids, n, d](const Tensor& src) {
        Tensor y = Tensor::zeros(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) y(i, j) = src(token_ids[i], j);
        return y;
    };
    Tensor y = gather(tab.val());
    const auto ti = tab.id;
    return tape.emit(
        std::move(y), {ti},
        [ti, token_ids, d](Tape& tp, const Tensor& g) {
            Tensor gt(tp.value(ti).shape());
            for (std::size_t i = 0; i < token_ids.size(); ++i)
                for (std::size_t j = 0; j < d; ++j) gt(token_ids[i], j) += g(i, j);
            tp.accum(ti, gt);
        },
        [ti, gather](const Tape& tp) { return gather(tp.value(ti)); });
}

VisualProjParams::VisualProjParams(const std::string& prefix, std::size_t d_a_, std::size_t d_m_, std::size_t d_v_,
                                   Rng& rng)
    : d_a(d_a_),
      d_m(d_m_),
      d_v(d_v_),
      w1(prefix + ".w1", xavier(rng, d_v_, d_a_ + d_m_)),
      b1(prefix + ".b1", Tensor::zeros(1, d_v_)),
      w2(prefix + ".w2", xavier(rng, d_v_, d_v_)),
      b2(prefix + ".b2", Tensor::zeros(1, d_v_)) {}

void VisualProjParams::collect(std::vector<Param*>& out) {
    for (Param* p : {&w1, &b1, &w2, &b2}) out.push_back(p);
}

Var visual_project(Var f_a, Var f_m, VisualProjParams& p) {
    const Tensor& av = f_a.val();
    const Tensor& mv = f_m.val();
    if (av.rows() != mv.rows()) {
        throw ShapeError("visual_project: frame counts disagree, " + shape_str(av.shape()) + " vs " +
                         shape_str(mv.shape()));
    }
    Var joint = concat_cols({f_a, f_m});
    return linear(relu(linear(joint, p.w1, p.b1)), p.w2, p.b2);
}

Var encode_caption_set(Tape& tape, const std::vector<std::vector<std::size_t>>& captions, EmbeddingTable& emb,
                       GruParams& sentence_gru) {
    if (captions.empty()) throw InputError("encode_caption_set: no captions");
    std::vector<Var> rows;
    rows.reserve(captions.size());
    for (const auto& caption : captions) {
        if (caption.empty()) throw InputError("encode_caption_set: empty caption");
        Var words = embed(tape, emb, caption);
        Var h0 = tape.leaf(Tensor::zeros(1, sentence_gru.d_h));
        rows.push_back(gru_encode(words, sentence_gru, h0).last);
    }
    return concat_rows(rows);
}

ContextualFeatures contextualize(Var f_c, Var f_v, Var f_q, GruParams& gru_c, GruParams& gru_v, GruParams& gru_q) {
    Tape& t = *f_q.tape;
    auto run = [&t](Var f, GruParams& p) {
        Var h0 = t.leaf(Tensor::zeros(1, p.d_h));
        return gru_encode(f, p, h0);
    };
    GruOut c = run(f_c, gru_c);
    GruOut v = run(f_v, gru_v);
    GruOut q = run(f_q, gru_q);
    return ContextualFeatures{c.states, v.states, q.states, c.last, v.last, q.last};
}

}  // namespace ecgnn
