#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "ecgnn/tensor.hpp"

namespace ecgnn {

// A named tensor with a gradient accumulator; the unit of optimization.
// grad always has the value's shape and is exactly zero after reset()
// and before any backward pass.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string name_, Tensor value_)
        : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

    void reset_grad() { grad.fill(0.0); }
    std::size_t size() const { return value.size(); }
};

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& val() const;
};

// Topologically ordered record of executed primitive operations
// (creation order is execution order, so reverse iteration is a valid
// reverse-topological sweep). Holds forward values, per-node gradient
// buffers, and closures for gradient propagation and forward replay.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
    using ReplayFn = std::function<Tensor(const Tape&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // constant leaf (gradient is tracked but goes nowhere)
    Var leaf(Tensor value);
    // parameter leaf; backward() accumulates into p.grad. The Param must
    // outlive the tape.
    Var use(Param& p);
    // used by primitive ops to record a computed node
    Var emit(Tensor value, std::vector<std::int32_t> parents, BackwardFn backward, ReplayFn replay);

    const Tensor& value(std::int32_t id) const;
    // gradient buffer for a node, zero-materialized on first access
    Tensor& grad_buf(std::int32_t id);
    // accumulate g into the node's gradient buffer
    void accum(std::int32_t id, const Tensor& g);

    // Redirects parameter-gradient accumulation (worker-local buffers in
    // the parallel trainer); must return a tensor shaped like p->grad.
    using GradSink = std::function<Tensor*(Param*)>;

    // Propagates seed * d(loss)/d(node) from a scalar loss node into every
    // reachable Param's grad (accumulating; callers reset Param grads).
    // Node-local gradient buffers are cleared first, so repeated calls
    // are independent passes that sum in the Params.
    void backward(Var loss, double seed = 1.0, const GradSink& sink = {});

    // Recomputes every non-leaf node from its recorded parents and returns
    // the largest deviation from the recorded value (0.0 means bit-exact).
    double replay_max_dev() const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;   // empty for param leaves (value lives in the Param)
        Tensor grad;    // empty until touched by backward
        std::vector<std::int32_t> parents;
        BackwardFn backward;
        ReplayFn replay;
        Param* param = nullptr;
    };
    std::deque<Node> nodes_;  // deque: references to values stay valid as the tape grows
};

}  // namespace ecgnn
