#pragma once

#include <functional>
#include <vector>

#include "ecgnn/data.hpp"
#include "ecgnn/model.hpp"

namespace ecgnn {

// Adam with bias-corrected moments, stepped over the model's registry in
// index order.
class Adam {
public:
    struct Options {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double clip_norm = 0.0;  // 0 disables global-norm gradient clipping
    };

    Adam(Model& model, Options opt);
    void step();
    std::size_t steps_taken() const { return t_; }
    const Options& options() const { return opt_; }

private:
    Model& model_;
    Options opt_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

struct TrainOptions {
    std::size_t batch_size = 64;
    std::size_t threads = 1;
    std::uint64_t shuffle_seed = 0;
};

struct EpochStats {
    double mean_loss = 0.0;
    std::size_t batches = 0;
};

// One pass over the dataset in seeded-shuffle order, gradient-accumulation
// batches of batch_size (mean loss), one Adam step per batch.
// Throws NumericError on a non-finite batch loss.
EpochStats train_epoch(Model& model, const Dataset& data, Adam& opt, const TrainOptions& topt, std::size_t epoch);

struct Metrics {
    double value = 0.0;  // accuracy (word/choice) or MSE (number)
    bool is_accuracy = true;
    std::size_t n = 0;
};

Metrics evaluate(Model& model, const Dataset& data, std::size_t threads = 1);

// Mean per-sample loss without touching gradients.
double dataset_loss(Model& model, const Dataset& data);

}  // namespace ecgnn
