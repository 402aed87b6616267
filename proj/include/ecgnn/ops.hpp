#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecgnn/tape.hpp"
#include "ecgnn/tensor.hpp"

namespace ecgnn {

enum class ActKind { relu, tanh, sigmoid };

ActKind act_from_string(const std::string& name);

// ---- plain kernels (also used for forward replay and oracles) ----
Tensor k_matmul(const Tensor& a, const Tensor& b);     // m x k . k x n
Tensor k_matmul_nt(const Tensor& a, const Tensor& b);  // m x k . (n x k)^T
Tensor k_matmul_tn(const Tensor& a, const Tensor& b);  // (k x m)^T . k x n
Tensor k_softmax_rows(const Tensor& x);
Tensor k_transpose(const Tensor& x);

// ---- differentiable primitives recorded on a tape ----
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a . b^T
Var transpose(Var x);
Var reshape(Var x, Shape shape);

Var add(Var a, Var b);  // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);            // elementwise
Var add_rowvec(Var x, Var v);     // N x d  +  1 x d (broadcast over rows)
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var smul(Var s, Var x);           // scalar node (1x1) times tensor
Var element(Var x, std::size_t r, std::size_t c);  // -> 1x1

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var x, std::size_t r0, std::size_t r1);  // rows [r0, r1)

Var softmax_rows(Var x);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps);

Var relu(Var x);
Var tanh_(Var x);
Var sigmoid(Var x);
Var activation(ActKind kind, Var x);

Var sum(Var x);        // -> 1x1
Var mean_rows(Var x);  // N x d -> 1 x d

// x . W^T + b with W: d_out x d_in, b: 1 x d_out. The W x + b of every
// projection in the model, in row-vector convention.
Var linear(Var x, Param& w, Param& b);
Var affine(Var x, Param& w, Param& b);  // alias of linear

// Numerically fused softmax + cross-entropy for a 1 x C logit row.
// Returns the scalar loss -ln softmax(logits)[target]; gradient w.r.t.
// logits is probs - one_hot(target).
Var softmax_xent(Var logits, std::size_t target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace ecgnn
