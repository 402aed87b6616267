#include "ecgnn/train.hpp"

#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "ecgnn/errors.hpp"
#include "ecgnn/rng.hpp"

namespace ecgnn {

Adam::Adam(Model& model, Options opt) : model_(model), opt_(opt) {
    m_.reserve(model.params().size());
    v_.reserve(model.params().size());
    for (const Param* p : model.params()) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const auto& params = model_.params();

    if (opt_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Param* p : params)
            for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad.at(i) * p->grad.at(i);
        const double norm = std::sqrt(sq);
        if (norm > opt_.clip_norm) {
            const double s = opt_.clip_norm / norm;
            for (Param* p : params)
                for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad.at(i) *= s;
        }
    }

    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad.at(i);
            m.at(i) = opt_.beta1 * m.at(i) + (1.0 - opt_.beta1) * g;
            v.at(i) = opt_.beta2 * v.at(i) + (1.0 - opt_.beta2) * g * g;
            const double mhat = m.at(i) / bc1;
            const double vhat = v.at(i) / bc2;
            p.value.at(i) -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
        }
    }
}

namespace {

// forward+backward for samples [begin, end) of the batch order, gradients
// into `sink` buffers (index-aligned with the registry), losses by slot
void run_range(Model& model, const Dataset& data, const std::vector<std::size_t>& order, std::size_t begin,
               std::size_t end, double inv_batch, std::vector<Tensor>& sink, std::vector<double>& losses) {
    std::unordered_map<Param*, Tensor*> lookup;
    const auto& params = model.params();
    lookup.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) lookup.emplace(params[i], &sink[i]);
    Tape::GradSink route = [&lookup](Param* p) { return lookup.at(p); };

    for (std::size_t i = begin; i < end; ++i) {
        Tape tape;
        ForwardOutput out = model.forward(tape, data.samples[order[i]]);
        losses[i] = out.loss_value;
        tape.backward(out.loss, inv_batch, route);
    }
}

}  // namespace

EpochStats train_epoch(Model& model, const Dataset& data, Adam& opt, const TrainOptions& topt, std::size_t epoch) {
    if (data.samples.empty()) throw InputError("train_epoch: empty dataset");
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng(topt.shuffle_seed).fork(0x65706f63ULL + epoch).shuffle(order);

    const std::size_t bs = std::max<std::size_t>(1, topt.batch_size);
    EpochStats stats;
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        const std::size_t n = end - start;
        const double inv = 1.0 / static_cast<double>(n);
        model.reset_grads();

        std::vector<double> losses(order.size(), 0.0);
        const std::size_t workers = std::max<std::size_t>(1, std::min(topt.threads, n));
        if (workers == 1) {
            std::vector<Tensor> sink;
            for (const Param* p : model.params()) sink.emplace_back(p->value.shape());
            run_range(model, data, order, start, end, inv, sink, losses);
            const auto& params = model.params();
            for (std::size_t pi = 0; pi < params.size(); ++pi)
                for (std::size_t i = 0; i < sink[pi].size(); ++i) params[pi]->grad.at(i) += sink[pi].at(i);
        } else {
            // contiguous chunks; merge in worker-index order so the
            // reduction is deterministic for a fixed thread count
            std::vector<std::vector<Tensor>> sinks(workers);
            for (auto& s : sinks)
                for (const Param* p : model.params()) s.emplace_back(p->value.shape());
            std::vector<std::thread> pool;
            const std::size_t chunk = (n + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t b = start + w * chunk;
                const std::size_t e = std::min(end, b + chunk);
                if (b >= e) break;
                pool.emplace_back([&, b, e, w] { run_range(model, data, order, b, e, inv, sinks[w], losses); });
            }
            for (auto& th : pool) th.join();
            const auto& params = model.params();
            for (std::size_t w = 0; w < workers; ++w)
                for (std::size_t pi = 0; pi < params.size(); ++pi)
                    for (std::size_t i = 0; i < sinks[w][pi].size(); ++i)
                        params[pi]->grad.at(i) += sinks[w][pi].at(i);
        }

        double batch_loss = 0.0;
        for (std::size_t i = start; i < end; ++i) batch_loss += losses[i];
        batch_loss /= static_cast<double>(n);
        if (!std::isfinite(batch_loss)) {
            throw NumericError("train_epoch: non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(stats.batches));
        }
        opt.step();
        loss_sum += batch_loss;
        ++stats.batches;
    }
    stats.mean_loss = loss_sum / static_cast<double>(stats.batches);
    return stats;
}

Metrics evaluate(Model& model, const Dataset& data, std::size_t threads) {
    if (data.samples.empty()) throw InputError("evaluate: empty dataset");
    const Task mt = model.config().task;
    if (mt != data.task) {
        throw ConfigError("evaluate: model task '" + task_name(mt) + "' vs dataset task '" + task_name(data.task) +
                          "'");
    }
    const std::size_t n = data.samples.size();
    std::vector<double> per_sample(n, 0.0);
    auto run = [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Tape tape;
            ForwardOutput out = model.forward(tape, data.samples[i]);
            if (mt == Task::number) {
                const double diff = static_cast<double>(out.int_prediction - data.samples[i].answer);
                per_sample[i] = diff * diff;
            } else {
                per_sample[i] =
                    (out.prediction == static_cast<std::size_t>(data.samples[i].answer)) ? 1.0 : 0.0;
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        run(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back(run, b, e);
        }
        for (auto& th : pool) th.join();
    }
    double sum = 0.0;
    for (double v : per_sample) sum += v;
    Metrics m;
    m.n = n;
    m.is_accuracy = (mt != Task::number);
    m.value = sum / static_cast<double>(n);
    return m;
}

double dataset_loss(Model& model, const Dataset& data) {
    double sum = 0.0;
    for (const Sample& s : data.samples) {
        Tape tape;
        sum += model.forward(tape, s).loss_value;
    }
    return sum / static_cast<double>(data.samples.size());
}

}  // namespace ecgnn
