#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecgnn/cross_modal.hpp"
#include "ecgnn/data.hpp"
#include "ecgnn/encoders.hpp"
#include "ecgnn/fusion.hpp"
#include "ecgnn/graph_reasoning.hpp"
#include "ecgnn/heads.hpp"

namespace ecgnn {

struct ModelConfig {
    // input feature dims
    std::size_t d_c = 32, d_v = 32, d_q = 32;
    std::size_t d_a = 0, d_m = 0;  // when > 0, video features arrive as (f_a, f_m) and are projected to d_v
    std::size_t vocab = 0;         // when > 0, questions/captions may arrive as token ids over a shared table
    // contextual width d_C = d_V = d_Q
    std::size_t d = 32;
    // architecture
    std::size_t layers = 3;
    std::vector<std::size_t> cmr_after = {1, 2};  // cross-modal rounds after these layers
    std::size_t n_r = 3;
    // task
    Task task = Task::word;
    std::size_t n_classes = 4;     // C (word)
    std::size_t n_candidates = 5;  // K (choice)
    // ablations
    bool use_caption = true;
    bool use_video = true;
    bool use_cmr = true;
    bool use_qmmf = true;
    bool question_guided = true;
    // init / numerics
    std::uint64_t seed = 0;
    double ln_eps = 1e-5;

    std::size_t s_a_width() const;
    std::size_t head_input_width() const { return s_a_width(); }
    std::size_t n_modalities() const {
        return (use_caption ? 1u : 0u) + (use_video ? 1u : 0u) + 1u;  // question always on
    }
    void validate() const;
};

// Closed-form trainable scalar count implied by a configuration; the
// registry total must match exactly (catches silently-unregistered
// parameters).
std::size_t expected_param_count(const ModelConfig& cfg);

struct ForwardDiag {
    std::vector<Tensor> adjacencies;   // every adjacency built, execution order
    std::vector<Tensor> cam_weights;   // every CAM weight matrix, execution order
    std::vector<FusionTrace> fusion;   // one per forward pass (K for choice)
    std::vector<std::pair<std::string, Tensor>> final_att;  // ("caption"/"video", weights)
};

struct ForwardOutput {
    Var loss;
    double loss_value = 0.0;
    std::size_t prediction = 0;   // word class / choice index
    int int_prediction = 0;       // number task
    Tensor probs;                 // word task
    std::vector<double> scores;   // choice task
    Var s_a;                      // last final representation built
};

class Model {
public:
    explicit Model(ModelConfig cfg);
    ~Model();
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const { return cfg_; }
    const std::vector<Param*>& params() const { return registry_; }
    std::size_t param_count() const;
    Param* find_param(const std::string& name) const;
    void reset_grads();

    // Full architecture pass: contextualize -> [graph reasoning x3 with
    // cross-modal rounds after layers 1 and 2] -> fusion -> head.
    // Reads parameter values only; safe to call concurrently on disjoint
    // tapes as long as no backward pass runs at the same time.
    ForwardOutput forward(Tape& tape, const Sample& sample, ForwardDiag* diag = nullptr);

    // Forward through everything up to and including s_a for one question
    // feature matrix (choice candidates call this once each).
    Var final_rep(Tape& tape, const Sample& sample, const Tensor& f_q, ForwardDiag* diag);

private:
    ModelConfig cfg_;
    // mutable parameter structs: forward() is logically const (it only
    // reads values; tapes write grads through registered pointers)
    struct Members;
    std::unique_ptr<Members> m_;
    std::vector<Param*> registry_;
};

}  // namespace ecgnn
