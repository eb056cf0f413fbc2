#pragma once

#include <span>
#include <string_view>

#include "jarn/tape.hpp"

namespace jarn::ops {

// Elementwise; operands must share a shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
// x * m elementwise with m held constant (no gradient flows into m).
Tensor cmul(const Tensor& x, std::shared_ptr<const std::vector<double>> m);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// NHWC convolution with square kernel, symmetric zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad);
Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, int64_t stride, int64_t pad,
                         Shape input_shape);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, int64_t stride, int64_t pad,
                          Shape weight_shape);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);

Tensor sum_all(const Tensor& x);           // -> scalar
Tensor mean_all(const Tensor& x);          // -> scalar
Tensor broadcast_scalar(const Tensor& s, Shape shape);

Tensor reshape(const Tensor& x, Shape shape);
Tensor pad2d(const Tensor& x, int64_t top, int64_t bottom, int64_t left, int64_t right);
Tensor crop2d(const Tensor& x, int64_t top, int64_t bottom, int64_t left, int64_t right);
Tensor max_pool2d(const Tensor& x, int64_t window, int64_t stride);
// Routing through frozen argmax indices; the linear adjoint pair of max-pool.
Tensor pool_scatter(const Tensor& pooled, std::shared_ptr<const std::vector<int32_t>> indices,
                    Shape full_shape);
Tensor pool_gather(const Tensor& full, std::shared_ptr<const std::vector<int32_t>> indices,
                   Shape pooled_shape);

Tensor row_sum(const Tensor& x);                 // [R,C] -> [R]
Tensor tile_cols(const Tensor& x, int64_t cols); // [R] -> [R,C]
Tensor col_sum(const Tensor& x);                 // [R,C] -> [C]
Tensor tile_rows(const Tensor& x, int64_t rows); // [C] -> [R,C]
Tensor chan_sum(const Tensor& x);                // [N,H,W,C] -> [C]
Tensor tile_chan(const Tensor& x, int64_t n, int64_t h, int64_t w);

Tensor select(const Tensor& x, int64_t flat_index);  // -> scalar
Tensor scatter_one(const Tensor& s, int64_t flat_index, Shape shape);

// Per-sample stable cross-entropy of logits [N,K] against labels [N,K] -> [N].
// Uses the log-sum-exp identity with a constant per-row shift, so values and
// all derivative orders match the exact expression.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& labels);
// Per-element -[t log sigmoid(z) + (1-t) log(1 - sigmoid(z))], evaluated as
// softplus(z) - t*z so saturated logits stay finite.
Tensor binary_cross_entropy(const Tensor& logits, const Tensor& targets);

// Numeric softmax over the last axis of a detached [N,K] tensor (no record).
std::vector<double> softmax_values(const Tensor& logits);

// String-keyed dispatch over the op table, used by table-driven tests and
// tooling. Attribute fields are read per op kind (conv: stride/pad; pad:
// margins; max-pool: window/stride; reshape/broadcast: aux_shape; leaky-relu
// and scale: c; select: index).
Tensor forward(std::string_view op_kind, std::span<const Tensor> inputs,
               const OpAttrs& attrs = {});

// Op kinds accepted by forward(), in dispatch-table order.
std::span<const std::string_view> forward_op_kinds();

}  // namespace jarn::ops
