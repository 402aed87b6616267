#include "ecgnn/tape.hpp"

#include <cmath>

#include "ecgnn/errors.hpp"

namespace ecgnn {

const Tensor& Var::val() const { return tape->value(id); }

Var Tape::leaf(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::use(Param& p) {
    Node n;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::emit(Tensor value, std::vector<std::int32_t> parents, BackwardFn backward, ReplayFn replay) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    n.replay = std::move(replay);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(std::int32_t id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.param ? n.param->value : n.value;
}

Tensor& Tape::grad_buf(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(value(id).shape());
    return n.grad;
}

void Tape::accum(std::int32_t id, const Tensor& g) {
    Tensor& buf = grad_buf(id);
    if (!buf.same_shape(g)) {
        throw ShapeError("Tape::accum: gradient shape " + shape_str(g.shape()) +
                         " vs value shape " + shape_str(buf.shape()));
    }
    for (std::size_t i = 0; i < buf.size(); ++i) buf.at(i) += g.at(i);
}

void Tape::backward(Var loss, double seed, const GradSink& sink) {
    if (loss.tape != this || loss.id < 0 || static_cast<std::size_t>(loss.id) >= nodes_.size()) {
        throw ContractError("backward: loss does not belong to this tape");
    }
    if (value(loss.id).size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(value(loss.id).shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    grad_buf(loss.id).at(0) = seed;

    for (std::int32_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) continue;  // not reachable from the loss
        if (n.param) {
            Tensor& dst = sink ? *sink(n.param) : n.param->grad;
            for (std::size_t i = 0; i < n.grad.size(); ++i) dst.at(i) += n.grad.at(i);
        } else if (n.backward) {
            n.backward(*this, n.grad);
        }
    }
}

double Tape::replay_max_dev() const {
    double worst = 0.0;
    for (const Node& n : nodes_) {
        if (!n.replay) continue;
        Tensor redo = n.replay(*this);
        worst = std::max(worst, max_abs_diff(redo, n.value));
    }
    return worst;
}

}  // namespace ecgnn
