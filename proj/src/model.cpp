#include "ecgnn/model.hpp"

#include <algorithm>

#include "ecgnn/errors.hpp"

namespace ecgnn {

std::string task_name(Task t) {
    switch (t) {
        case Task::word: return "word";
        case Task::number: return "number";
        case Task::choice: return "choice";
    }
    return "?";
}

Task task_from_string(const std::string& name) {
    if (name == "word") return Task::word;
    if (name == "number" || name == "count") return Task::number;
    if (name == "choice") return Task::choice;
    throw ConfigError("unknown task '" + name + "' (expected word|count|choice)");
}

std::size_t ModelConfig::s_a_width() const {
    if (use_qmmf) return d * (1 + (use_caption ? 1 : 0) + (use_video ? 1 : 0));
    return d * n_modalities();
}

void ModelConfig::validate() const {
    if (d == 0 || d_q == 0) throw ConfigError("config: zero feature width");
    if (use_caption && d_c == 0) throw ConfigError("config: caption enabled with d_c = 0");
    if (use_video && d_v == 0) throw ConfigError("config: video enabled with d_v = 0");
    if (layers < 1) throw ConfigError("config: need at least one graph layer");
    for (std::size_t l : cmr_after) {
        if (l < 1 || l > layers) {
            throw ConfigError("config: cross-modal round after layer " + std::to_string(l) + " of " +
                              std::to_string(layers));
        }
    }
    if (use_cmr && n_modalities() < 2) {
        throw ConfigError("config: cross-modal reasoning needs at least two modalities");
    }
    if (use_qmmf && n_r < 1) throw ConfigError("config: n_r must be >= 1");
    if (task == Task::word && n_classes < 2) throw ConfigError("config: word task needs n_classes >= 2");
    if (task == Task::choice && n_candidates < 2) throw ConfigError("config: choice task needs n_candidates >= 2");
    if ((d_a == 0) != (d_m == 0)) throw ConfigError("config: d_a and d_m must be set together");
}

std::size_t expected_param_count(const ModelConfig& cfg) {
    const std::size_t d = cfg.d;
    const std::size_t n_mod = cfg.n_modalities();
    std::size_t total = 0;
    // contextual encoders
    if (cfg.use_caption) total += GruParams::count(cfg.d_c, d);
    if (cfg.use_video) total += GruParams::count(cfg.d_v, d);
    total += GruParams::count(cfg.d_q, d);
    // word table + caption sentence encoder
    if (cfg.vocab > 0) {
        total += EmbeddingTable::count(cfg.vocab, cfg.d_q);
        if (cfg.use_caption) total += GruParams::count(cfg.d_q, cfg.d_c);
    }
    // visual projection
    if (cfg.use_video && cfg.d_a > 0) total += VisualProjParams::count(cfg.d_a, cfg.d_m, cfg.d_v);
    // intra-modal graph layers
    total += n_mod * cfg.layers * GraphLayerParams::count(d);
    // cross-modal rounds
    if (cfg.use_cmr) total += cfg.cmr_after.size() * n_mod * CmrParams::count(d, n_mod - 1);
    // fusion + final temporal attention
    if (cfg.use_qmmf) {
        total += FusionParams::count(d, n_mod, cfg.question_guided);
        const std::size_t pooled = (cfg.use_caption ? 1 : 0) + (cfg.use_video ? 1 : 0);
        total += pooled * AttendParams::count(d, true);
    }
    // head
    const std::size_t w = cfg.s_a_width();
    switch (cfg.task) {
        case Task::word: total += WordHeadParams::count(cfg.n_classes, w); break;
        case Task::number: total += NumberHeadParams::count(w); break;
        case Task::choice: total += ChoiceHeadParams::count(w); break;
    }
    return total;
}

struct Model::Members {
    std::optional<EmbeddingTable> embedding;
    std::optional<GruParams> sentence_gru;
    std::optional<VisualProjParams> visual_proj;
    std::optional<GruParams> gru_c, gru_v;
    std::optional<GruParams> gru_q;
    std::vector<std::vector<GraphLayerParams>> graph;  // [modality][layer]
    std::vector<std::vector<CmrParams>> cmr;           // [round][modality]
    std::optional<FusionParams> fusion;
    std::vector<AttendParams> final_attend;  // caption then video, enabled only
    std::optional<WordHeadParams> word;
    std::optional<NumberHeadParams> number;
    std::optional<ChoiceHeadParams> choice;
    std::vector<std::string> modality_names;  // enabled subset of {caption, video, question}
};

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)), m_(std::make_unique<Members>()) {
    cfg_.validate();
    Rng rng = Rng(cfg_.seed).fork(0x6d6f64656cULL);
    const std::size_t d = cfg_.d;

    if (cfg_.use_caption) m_->modality_names.push_back("caption");
    if (cfg_.use_video) m_->modality_names.push_back("video");
    m_->modality_names.push_back("question");
    const std::size_t n_mod = m_->modality_names.size();

    if (cfg_.vocab > 0) {
        m_->embedding.emplace("embedding", cfg_.vocab, cfg_.d_q, rng);
        if (cfg_.use_caption) m_->sentence_gru.emplace("caption_sentence_gru", cfg_.d_q, cfg_.d_c, rng);
    }
    if (cfg_.use_video && cfg_.d_a > 0) m_->visual_proj.emplace("visual_proj", cfg_.d_a, cfg_.d_m, cfg_.d_v, rng);
    if (cfg_.use_caption) m_->gru_c.emplace("gru_caption", cfg_.d_c, d, rng);
    if (cfg_.use_video) m_->gru_v.emplace("gru_video", cfg_.d_v, d, rng);
    m_->gru_q.emplace("gru_question", cfg_.d_q, d, rng);

    m_->graph.resize(n_mod);
    for (std::size_t mi = 0; mi < n_mod; ++mi) {
        for (std::size_t l = 1; l <= cfg_.layers; ++l) {
            GraphLayerParams p("graph_" + m_->modality_names[mi] + ".layer" + std::to_string(l), d, rng);
            p.ln_eps = cfg_.ln_eps;
            m_->graph[mi].push_back(std::move(p));
        }
    }
    if (cfg_.use_cmr) {
        for (std::size_t r = 0; r < cfg_.cmr_after.size(); ++r) {
            std::vector<CmrParams> round;
            for (std::size_t mi = 0; mi < n_mod; ++mi) {
                CmrParams p("cmr_round" + std::to_string(r + 1) + "_" + m_->modality_names[mi], d, n_mod - 1, rng);
                p.ln_eps = cfg_.ln_eps;
                round.push_back(std::move(p));
            }
            m_->cmr.push_back(std::move(round));
        }
    }
    if (cfg_.use_qmmf) {
        m_->fusion.emplace("fusion", d, m_->modality_names, cfg_.question_guided, rng);
        if (cfg_.use_caption) m_->final_attend.emplace_back("final_attend_caption", d, true, rng);
        if (cfg_.use_video) m_->final_attend.emplace_back("final_attend_video", d, true, rng);
    }
    const std::size_t w = cfg_.s_a_width();
    switch (cfg_.task) {
        case Task::word: m_->word.emplace("head_word", cfg_.n_classes, w, rng); break;
        case Task::number: m_->number.emplace("head_number", w, rng); break;
        case Task::choice: m_->choice.emplace("head_choice", w, rng); break;
    }

    // registry, in construction order (checkpoints and Adam follow it)
    if (m_->embedding) m_->embedding->collect(registry_);
    if (m_->sentence_gru) m_->sentence_gru->collect(registry_);
    if (m_->visual_proj) m_->visual_proj->collect(registry_);
    if (m_->gru_c) m_->gru_c->collect(registry_);
    if (m_->gru_v) m_->gru_v->collect(registry_);
    m_->gru_q->collect(registry_);
    for (auto& mod : m_->graph)
        for (auto& layer : mod) layer.collect(registry_);
    for (auto& round : m_->cmr)
        for (auto& block : round) block.collect(registry_);
    if (m_->fusion) m_->fusion->collect(registry_);
    for (auto& fa : m_->final_attend) fa.collect(registry_);
    if (m_->word) m_->word->collect(registry_);
    if (m_->number) m_->number->collect(registry_);
    if (m_->choice) m_->choice->collect(registry_);
}

Model::~Model() = default;

std::size_t Model::param_count() const {
    std::size_t total = 0;
    for (const Param* p : registry_) total += p->size();
    return total;
}

Param* Model::find_param(const std::string& name) const {
    for (Param* p : registry_) {
        if (p->name == name) return p;
    }
    return nullptr;
}

void Model::reset_grads() {
    for (Param* p : registry_) p->reset_grad();
}

namespace {

void check_width(const Tensor& t, std::size_t want, const char* what) {
    if (t.rank() != 2 || t.cols() != want) {
        throw ShapeError(std::string(what) + ": got shape " + shape_str(t.shape()) + ", config expects width " +
                         std::to_string(want));
    }
}

}  // namespace

Var Model::final_rep(Tape& tape, const Sample& sample, const Tensor& f_q, ForwardDiag* diag) {
    const std::size_t d = cfg_.d;

    // per-modality input features
    std::vector<Var> feats;  // aligned with modality_names
    if (cfg_.use_caption) {
        if (cfg_.vocab > 0 && !sample.caption_tokens.empty()) {
            feats.push_back(encode_caption_set(tape, sample.caption_tokens, *m_->embedding, *m_->sentence_gru));
        } else {
            check_width(sample.f_c, cfg_.d_c, "caption features");
            feats.push_back(tape.leaf(sample.f_c));
        }
    }
    if (cfg_.use_video) {
        if (cfg_.d_a > 0) {
            check_width(sample.f_a, cfg_.d_a, "appearance features");
            check_width(sample.f_m, cfg_.d_m, "motion features");
            feats.push_back(visual_project(tape.leaf(sample.f_a), tape.leaf(sample.f_m), *m_->visual_proj));
        } else {
            check_width(sample.f_v, cfg_.d_v, "visual features");
            feats.push_back(tape.leaf(sample.f_v));
        }
    }
    Var q_in;
    if (cfg_.vocab > 0 && !sample.question_tokens.empty() && cfg_.task != Task::choice) {
        q_in = embed(tape, *m_->embedding, sample.question_tokens);
    } else {
        check_width(f_q, cfg_.d_q, "question features");
        q_in = tape.leaf(f_q);
    }
    feats.push_back(q_in);

    // contextualize
    std::vector<Var> x;       // node features per modality graph
    std::vector<Var> first;   // contextualized C^1 / V^1 kept for the final attention
    Var q_last;
    {
        std::size_t fi = 0;
        if (cfg_.use_caption) {
            GruOut o = gru_encode(feats[fi], *m_->gru_c, tape.leaf(Tensor::zeros(1, d)));
            x.push_back(o.states);
            first.push_back(o.states);
            ++fi;
        }
        if (cfg_.use_video) {
            GruOut o = gru_encode(feats[fi], *m_->gru_v, tape.leaf(Tensor::zeros(1, d)));
            x.push_back(o.states);
            first.push_back(o.states);
            ++fi;
        }
        GruOut o = gru_encode(feats[fi], *m_->gru_q, tape.leaf(Tensor::zeros(1, d)));
        x.push_back(o.states);
        q_last = o.last;
    }
    const std::size_t n_mod = x.size();
    const std::size_t qi = n_mod - 1;  // question index
    const std::size_t ci = cfg_.use_caption ? 0 : static_cast<std::size_t>(-1);
    const std::size_t vi = cfg_.use_caption ? (cfg_.use_video ? 1 : static_cast<std::size_t>(-1))
                                            : (cfg_.use_video ? 0 : static_cast<std::size_t>(-1));

    // source ordering per target graph: video <- (question, caption),
    // caption <- (video, question), question <- (video, caption)
    auto sources_for = [&](std::size_t target) {
        std::vector<std::size_t> order;
        if (target == vi) order = {qi, ci};
        else if (target == ci) order = {vi, qi};
        else order = {vi, ci};
        std::vector<std::size_t> present;
        for (std::size_t s : order) {
            if (s != static_cast<std::size_t>(-1)) present.push_back(s);
        }
        return present;
    };

    std::size_t round_idx = 0;
    for (std::size_t l = 1; l <= cfg_.layers; ++l) {
        for (std::size_t mi = 0; mi < n_mod; ++mi) {
            Tensor adj;
            x[mi] = graph_reason(x[mi], m_->graph[mi][l - 1], diag ? &adj : nullptr);
            if (diag) diag->adjacencies.push_back(std::move(adj));
        }
        if (cfg_.use_cmr && std::find(cfg_.cmr_after.begin(), cfg_.cmr_after.end(), l) != cfg_.cmr_after.end()) {
            std::vector<Var> updated(n_mod);
            for (std::size_t mi = 0; mi < n_mod; ++mi) {
                std::vector<Var> srcs;
                for (std::size_t s : sources_for(mi)) srcs.push_back(x[s]);
                updated[mi] = cmr_block(x[mi], srcs, m_->cmr[round_idx][mi], diag ? &diag->cam_weights : nullptr);
            }
            x = std::move(updated);
            ++round_idx;
        }
    }

    if (!cfg_.use_qmmf) {
        std::vector<Var> parts;
        for (std::size_t mi = 0; mi < n_mod; ++mi) parts.push_back(mean_rows(x[mi]));
        return concat_cols(parts);
    }

    FuseOut fused = fuse(x, q_last, cfg_.n_r, *m_->fusion);
    if (diag) diag->fusion.push_back(fused.trace);

    std::vector<Var> parts;
    std::size_t fa = 0;
    for (std::size_t mi = 0; mi < first.size(); ++mi) {
        AttendOut out = step_attend(first[mi], q_last, fused.h_final, m_->final_attend[fa]);
        if (diag) diag->final_att.emplace_back(m_->modality_names[mi], out.att.val());
        parts.push_back(out.pooled);
        ++fa;
    }
    parts.push_back(fused.h_final);
    return concat_cols(parts);
}

ForwardOutput Model::forward(Tape& tape, const Sample& sample, ForwardDiag* diag) {
    ForwardOutput out;
    if (cfg_.task == Task::choice) {
        const std::size_t k = cfg_.n_candidates;
        if (sample.candidates.rank() != 2 || sample.candidates.rows() != k || sample.candidates.cols() != cfg_.d_q) {
            throw ShapeError("choice forward: candidates shape " + shape_str(sample.candidates.shape()) +
                             ", config expects " + std::to_string(k) + "x" + std::to_string(cfg_.d_q));
        }
        if (sample.answer < 0 || static_cast<std::size_t>(sample.answer) >= k) {
            throw InputError("choice forward: answer " + std::to_string(sample.answer) + " out of K=" +
                             std::to_string(k));
        }
        std::vector<Var> reps;
        reps.reserve(k);
        for (std::size_t c = 0; c < k; ++c) {
            // question || candidate word sequence for this option
            Tensor fq = Tensor::zeros(sample.f_q.rows() + 1, cfg_.d_q);
            for (std::size_t i = 0; i < sample.f_q.size(); ++i) fq.at(i) = sample.f_q.at(i);
            for (std::size_t j = 0; j < cfg_.d_q; ++j) fq(sample.f_q.rows(), j) = sample.candidates(c, j);
            reps.push_back(final_rep(tape, sample, fq, diag));
        }
        out.s_a = reps.back();
        ChoiceHeadOut head = choice_head(reps, *m_->choice, static_cast<std::size_t>(sample.answer));
        out.loss = head.loss;
        out.scores = std::move(head.scores);
        out.prediction = head.prediction;
    } else {
        Var rep = final_rep(tape, sample, sample.f_q, diag);
        out.s_a = rep;
        if (cfg_.task == Task::word) {
            if (sample.answer < 0 || static_cast<std::size_t>(sample.answer) >= cfg_.n_classes) {
                throw InputError("word forward: answer " + std::to_string(sample.answer) + " out of C=" +
                                 std::to_string(cfg_.n_classes));
            }
            WordHeadOut head = word_head(rep, *m_->word, static_cast<std::size_t>(sample.answer));
            out.loss = head.loss;
            out.probs = std::move(head.probs);
            out.prediction = head.prediction;
        } else {
            NumberHeadOut head = number_head(rep, *m_->number, sample.answer);
            out.loss = head.loss;
            out.int_prediction = head.prediction;
        }
    }
    out.loss_value = out.loss.val().at(0);
    return out;
}

}  // namespace ecgnn
