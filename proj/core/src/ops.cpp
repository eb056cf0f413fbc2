#include "jarn/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "jarn/errors.hpp"
#include "kernels.hpp"

namespace jarn::ops {

namespace {

Tape& tape_of(const Tensor& t, const char* op) {
  if (!t.has_node()) {
    throw PreconditionError(std::string(op) + ": operand is not recorded on a record");
  }
  return *t.tape();
}

void require_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  tape_of(a, op);
  if (!b.has_node() || b.tape() != a.tape()) {
    throw PreconditionError(std::string(op) + ": operands belong to different records");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename F>
Tensor elementwise2(Op op, const Tensor& a, const Tensor& b, F f) {
  require_same_tape(a, b, op_name(op));
  require_same_shape(a, b, op_name(op));
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
  std::array<Tensor, 2> in{a, b};
  return a.tape()->emit(op, in, a.shape(), std::move(out));
}

template <typename F>
Tensor elementwise1(Op op, const Tensor& x, F f, OpAttrs attrs = {}) {
  tape_of(x, op_name(op));
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape()->emit(op, {&x, 1}, x.shape(), std::move(out), std::move(attrs));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise2(Op::kAdd, a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise2(Op::kSub, a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise2(Op::kMul, a, b, [](double x, double y) { return x * y; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return elementwise2(Op::kDiv, a, b, [](double x, double y) { return x / y; });
}

Tensor scale(const Tensor& x, double c) {
  OpAttrs attrs;
  attrs.c = c;
  return elementwise1(Op::kScale, x, [c](double v) { return v * c; }, std::move(attrs));
}

Tensor add_scalar(const Tensor& x, double c) {
  OpAttrs attrs;
  attrs.c = c;
  return elementwise1(Op::kAddC, x, [c](double v) { return v + c; }, std::move(attrs));
}

Tensor cmul(const Tensor& x, std::shared_ptr<const std::vector<double>> m) {
  tape_of(x, "cmul");
  if (!m || m->size() != static_cast<size_t>(x.size())) {
    throw ShapeError("cmul: multiplier size mismatch for shape " + shape_str(x.shape()));
  }
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * (*m)[i];
  OpAttrs attrs;
  attrs.ctensor = std::move(m);
  return x.tape()->emit(Op::kCMul, {&x, 1}, x.shape(), std::move(out), std::move(attrs));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_tape(a, b, "matmul");
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(static_cast<size_t>(m * n));
  kernels::matmul(a.values().data(), m, k, b.values().data(), n, out.data());
  std::array<Tensor, 2> in{a, b};
  return a.tape()->emit(Op::kMatmul, in, Shape{m, n}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  tape_of(a, "transpose");
  if (a.shape().size() != 2) {
    throw ShapeError("transpose: expected rank-2, got " + shape_str(a.shape()));
  }
  const int64_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(static_cast<size_t>(m * n));
  kernels::transpose(a.values().data(), m, n, out.data());
  return a.tape()->emit(Op::kTranspose, {&a, 1}, Shape{n, m}, std::move(out));
}

Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad) {
  require_same_tape(x, w, "conv2d");
  const auto d = kernels::conv_dims(x.shape(), w.shape(), stride, pad);
  std::vector<double> out(static_cast<size_t>(d.n * d.oh * d.ow * d.cout));
  kernels::conv2d_forward(d, x.values().data(), w.values().data(), out.data());
  OpAttrs attrs;
  attrs.stride = stride;
  attrs.pad = pad;
  std::array<Tensor, 2> in{x, w};
  return x.tape()->emit(Op::kConv2d, in, Shape{d.n, d.oh, d.ow, d.cout}, std::move(out),
                        std::move(attrs));
}

Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, int64_t stride, int64_t pad,
                         Shape input_shape) {
  require_same_tape(gy, w, "conv2d-input-grad");
  const auto d = kernels::conv_dims(input_shape, w.shape(), stride, pad);
  const Shape expect{d.n, d.oh, d.ow, d.cout};
  if (gy.shape() != expect) {
    throw ShapeError("conv2d-input-grad: upstream shape " + shape_str(gy.shape()) +
                     " does not match computed output " + shape_str(expect));
  }
  std::vector<double> out(static_cast<size_t>(numel(input_shape)));
  kernels::conv2d_input_grad(d, gy.values().data(), w.values().data(), out.data());
  OpAttrs attrs;
  attrs.stride = stride;
  attrs.pad = pad;
  std::array<Tensor, 2> in{gy, w};
  return gy.tape()->emit(Op::kConv2dInputGrad, in, std::move(input_shape), std::move(out),
                         std::move(attrs));
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, int64_t stride, int64_t pad,
                          Shape weight_shape) {
  require_same_tape(x, gy, "conv2d-weight-grad");
  const auto d = kernels::conv_dims(x.shape(), weight_shape, stride, pad);
  const Shape expect{d.n, d.oh, d.ow, d.cout};
  if (gy.shape() != expect) {
    throw ShapeError("conv2d-weight-grad: upstream shape " + shape_str(gy.shape()) +
                     " does not match computed output " + shape_str(expect));
  }
  std::vector<double> out(static_cast<size_t>(numel(weight_shape)));
  kernels::conv2d_weight_grad(d, x.values().data(), gy.values().data(), out.data());
  OpAttrs attrs;
  attrs.stride = stride;
  attrs.pad = pad;
  std::array<Tensor, 2> in{x, gy};
  return x.tape()->emit(Op::kConv2dWeightGrad, in, std::move(weight_shape), std::move(out),
                        std::move(attrs));
}

Tensor relu(const Tensor& x) {
  return elementwise1(Op::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  OpAttrs attrs;
  attrs.c = slope;
  return elementwise1(
      Op::kLeakyRelu, x, [slope](double v) { return v > 0.0 ? v : slope * v; }, std::move(attrs));
}

Tensor tanh(const Tensor& x) {
  return elementwise1(Op::kTanh, x, [](double v) { return std::tanh(v); });
}

Tensor sigmoid(const Tensor& x) {
  return elementwise1(Op::kSigmoid, x, [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
}

Tensor softplus(const Tensor& x) {
  // max(v,0) + log1p(exp(-|v|)) is exact and never overflows.
  return elementwise1(Op::kSoftplus, x, [](double v) {
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  });
}

Tensor log(const Tensor& x) {
  return elementwise1(Op::kLog, x, [](double v) { return std::log(v); });
}

Tensor exp(const Tensor& x) {
  return elementwise1(Op::kExp, x, [](double v) { return std::exp(v); });
}

Tensor sum_all(const Tensor& x) {
  tape_of(x, "sum");
  double s = 0.0;
  for (double v : x.values()) s += v;
  return x.tape()->emit(Op::kSumAll, {&x, 1}, Shape{}, std::vector<double>{s});
}

Tensor mean_all(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

Tensor broadcast_scalar(const Tensor& s, Shape shape) {
  tape_of(s, "broadcast-scalar");
  if (s.size() != 1) {
    throw ShapeError("broadcast-scalar: source must be scalar, got " + shape_str(s.shape()));
  }
  std::vector<double> out(static_cast<size_t>(numel(shape)), s.values()[0]);
  return s.tape()->emit(Op::kBroadcastScalar, {&s, 1}, std::move(shape), std::move(out));
}

Tensor reshape(const Tensor& x, Shape shape) {
  tape_of(x, "reshape");
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  // Same buffer, new shape.
  return x.tape()->emit(Op::kReshape, {&x, 1}, std::move(shape), x.buffer());
}

Tensor pad2d(const Tensor& x, int64_t top, int64_t bottom, int64_t left, int64_t right) {
  tape_of(x, "pad");
  if (x.shape().size() != 4) throw ShapeError("pad: expected NHWC, got " + shape_str(x.shape()));
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad: negative margin");
  const Shape& s = x.shape();
  Shape out_shape{s[0], s[1] + top + bottom, s[2] + left + right, s[3]};
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  kernels::pad2d(s, x.values().data(), top, bottom, left, right, out.data());
  OpAttrs attrs;
  attrs.pad_top = top;
  attrs.pad_bottom = bottom;
  attrs.pad_left = left;
  attrs.pad_right = right;
  return x.tape()->emit(Op::kPad2d, {&x, 1}, std::move(out_shape), std::move(out),
                        std::move(attrs));
}

Tensor crop2d(const Tensor& x, int64_t top, int64_t bottom, int64_t left, int64_t right) {
  tape_of(x, "crop");
  if (x.shape().size() != 4) throw ShapeError("crop: expected NHWC, got " + shape_str(x.shape()));
  const Shape& s = x.shape();
  if (top < 0 || bottom < 0 || left < 0 || right < 0 || s[1] - top - bottom < 1 ||
      s[2] - left - right < 1) {
    throw ShapeError("crop: margins do not fit " + shape_str(s));
  }
  Shape out_shape{s[0], s[1] - top - bottom, s[2] - left - right, s[3]};
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  kernels::crop2d(s, x.values().data(), top, bottom, left, right, out.data());
  OpAttrs attrs;
  attrs.pad_top = top;
  attrs.pad_bottom = bottom;
  attrs.pad_left = left;
  attrs.pad_right = right;
  return x.tape()->emit(Op::kCrop2d, {&x, 1}, std::move(out_shape), std::move(out),
                        std::move(attrs));
}

Tensor max_pool2d(const Tensor& x, int64_t window, int64_t stride) {
  tape_of(x, "max-pool");
  const auto d = kernels::pool_dims(x.shape(), window, stride);
  const auto count = static_cast<size_t>(d.n * d.oh * d.ow * d.c);
  std::vector<double> out(count);
  auto argmax = std::make_shared<std::vector<int32_t>>(count);
  kernels::max_pool2d(d, x.values().data(), out.data(), argmax->data());
  OpAttrs attrs;
  attrs.window = window;
  attrs.stride = stride;
  attrs.indices = std::move(argmax);
  return x.tape()->emit(Op::kMaxPool2d, {&x, 1}, Shape{d.n, d.oh, d.ow, d.c}, std::move(out),
                        std::move(attrs));
}

Tensor pool_scatter(const Tensor& pooled, std::shared_ptr<const std::vector<int32_t>> indices,
                    Shape full_shape) {
  tape_of(pooled, "pool-scatter");
  if (!indices || indices->size() != static_cast<size_t>(pooled.size())) {
    throw ShapeError("pool-scatter: index count mismatch");
  }
  std::vector<double> out(static_cast<size_t>(numel(full_shape)), 0.0);
  kernels::pool_scatter(pooled.values().data(), pooled.size(), indices->data(), out.data());
  OpAttrs attrs;
  attrs.indices = std::move(indices);
  return pooled.tape()->emit(Op::kPoolScatter, {&pooled, 1}, std::move(full_shape),
                             std::move(out), std::move(attrs));
}

Tensor pool_gather(const Tensor& full, std::shared_ptr<const std::vector<int32_t>> indices,
                   Shape pooled_shape) {
  tape_of(full, "pool-gather");
  if (!indices || indices->size() != static_cast<size_t>(numel(pooled_shape))) {
    throw ShapeError("pool-gather: index count mismatch");
  }
  std::vector<double> out(indices->size());
  kernels::pool_gather(full.values().data(), static_cast<int64_t>(indices->size()),
                       indices->data(), out.data());
  OpAttrs attrs;
  attrs.indices = std::move(indices);
  return full.tape()->emit(Op::kPoolGather, {&full, 1}, std::move(pooled_shape), std::move(out),
                           std::move(attrs));
}

namespace {
void require_rank(const Tensor& x, size_t rank, const char* op) {
  if (x.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
  }
}
}  // namespace

Tensor row_sum(const Tensor& x) {
  tape_of(x, "row-sum");
  require_rank(x, 2, "row-sum");
  const int64_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(static_cast<size_t>(r), 0.0);
  const auto& v = x.values();
  for (int64_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < c; ++j) s += v[static_cast<size_t>(i * c + j)];
    out[static_cast<size_t>(i)] = s;
  }
  return x.tape()->emit(Op::kRowSum, {&x, 1}, Shape{r}, std::move(out));
}

Tensor tile_cols(const Tensor& x, int64_t cols) {
  tape_of(x, "tile-cols");
  require_rank(x, 1, "tile-cols");
  const int64_t r = x.shape()[0];
  std::vector<double> out(static_cast<size_t>(r * cols));
  const auto& v = x.values();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < cols; ++j) out[static_cast<size_t>(i * cols + j)] = v[static_cast<size_t>(i)];
  }
  return x.tape()->emit(Op::kTileCols, {&x, 1}, Shape{r, cols}, std::move(out));
}

Tensor col_sum(const Tensor& x) {
  tape_of(x, "col-sum");
  require_rank(x, 2, "col-sum");
  const int64_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  const auto& v = x.values();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(j)] += v[static_cast<size_t>(i * c + j)];
  }
  return x.tape()->emit(Op::kColSum, {&x, 1}, Shape{c}, std::move(out));
}

Tensor tile_rows(const Tensor& x, int64_t rows) {
  tape_of(x, "tile-rows");
  require_rank(x, 1, "tile-rows");
  const int64_t c = x.shape()[0];
  std::vector<double> out(static_cast<size_t>(rows * c));
  const auto& v = x.values();
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] = v[static_cast<size_t>(j)];
  }
  return x.tape()->emit(Op::kTileRows, {&x, 1}, Shape{rows, c}, std::move(out));
}

Tensor chan_sum(const Tensor& x) {
  tape_of(x, "chan-sum");
  require_rank(x, 4, "chan-sum");
  const Shape& s = x.shape();
  const int64_t c = s[3], outer = s[0] * s[1] * s[2];
  std::vector<double> out(static_cast<size_t>(c), 0.0);
  const auto& v = x.values();
  for (int64_t i = 0; i < outer; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(j)] += v[static_cast<size_t>(i * c + j)];
  }
  return x.tape()->emit(Op::kChanSum, {&x, 1}, Shape{c}, std::move(out));
}

Tensor tile_chan(const Tensor& x, int64_t n, int64_t h, int64_t w) {
  tape_of(x, "tile-chan");
  require_rank(x, 1, "tile-chan");
  const int64_t c = x.shape()[0], outer = n * h * w;
  std::vector<double> out(static_cast<size_t>(outer * c));
  const auto& v = x.values();
  for (int64_t i = 0; i < outer; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] = v[static_cast<size_t>(j)];
  }
  return x.tape()->emit(Op::kTileChan, {&x, 1}, Shape{n, h, w, c}, std::move(out));
}

Tensor select(const Tensor& x, int64_t flat_index) {
  tape_of(x, "select");
  if (flat_index < 0 || flat_index >= x.size()) {
    throw ShapeError("select: index " + std::to_string(flat_index) + " out of range for " +
                     shape_str(x.shape()));
  }
  OpAttrs attrs;
  attrs.index = flat_index;
  return x.tape()->emit(Op::kSelect, {&x, 1}, Shape{},
                        std::vector<double>{x.values()[static_cast<size_t>(flat_index)]},
                        std::move(attrs));
}

Tensor scatter_one(const Tensor& s, int64_t flat_index, Shape shape) {
  tape_of(s, "scatter-one");
  if (s.size() != 1) throw ShapeError("scatter-one: source must be scalar");
  if (flat_index < 0 || flat_index >= numel(shape)) {
    throw ShapeError("scatter-one: index out of range for " + shape_str(shape));
  }
  std::vector<double> out(static_cast<size_t>(numel(shape)), 0.0);
  out[static_cast<size_t>(flat_index)] = s.values()[0];
  OpAttrs attrs;
  attrs.index = flat_index;
  return s.tape()->emit(Op::kScatterOne, {&s, 1}, std::move(shape), std::move(out),
                        std::move(attrs));
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& labels) {
  require_same_tape(logits, labels, "softmax-cross-entropy");
  require_same_shape(logits, labels, "softmax-cross-entropy");
  require_rank(logits, 2, "softmax-cross-entropy");
  const int64_t n = logits.shape()[0], k = logits.shape()[1];
  // Per-row max, frozen as a constant shift: lse(z) = m + log(sum exp(z - m))
  // holds exactly for any constant m, so gradients of the composite are the
  // exact softmax gradients.
  std::vector<double> m(static_cast<size_t>(n), -1e308);
  const auto& zv = logits.values();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      m[static_cast<size_t>(i)] = std::max(m[static_cast<size_t>(i)], zv[static_cast<size_t>(i * k + j)]);
    }
  }
  Tensor shift = logits.tape()->leaf(Shape{n}, std::move(m));
  Tensor centered = sub(logits, tile_cols(shift, k));
  Tensor lse = add(log(row_sum(exp(centered))), shift);
  Tensor picked = row_sum(mul(labels, logits));
  return sub(lse, picked);
}

Tensor binary_cross_entropy(const Tensor& logits, const Tensor& targets) {
  require_same_tape(logits, targets, "binary-cross-entropy");
  require_same_shape(logits, targets, "binary-cross-entropy");
  return sub(softplus(logits), mul(targets, logits));
}

std::vector<double> softmax_values(const Tensor& logits) {
  if (logits.shape().size() != 2) {
    throw ShapeError("softmax: expected rank-2 logits, got " + shape_str(logits.shape()));
  }
  const int64_t n = logits.shape()[0], k = logits.shape()[1];
  const auto& z = logits.values();
  std::vector<double> p(z.size());
  for (int64_t i = 0; i < n; ++i) {
    double m = -1e308;
    for (int64_t j = 0; j < k; ++j) m = std::max(m, z[static_cast<size_t>(i * k + j)]);
    double s = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const auto idx = static_cast<size_t>(i * k + j);
      p[idx] = std::exp(z[idx] - m);
      s += p[idx];
    }
    for (int64_t j = 0; j < k; ++j) p[static_cast<size_t>(i * k + j)] /= s;
  }
  return p;
}

namespace {

constexpr std::array<std::string_view, 20> kForwardKinds{
    "add",  "sub",     "mul",        "matmul", "conv2d",  "relu",
    "leaky-relu", "tanh", "sigmoid", "log",    "exp",     "sum",
    "mean", "reshape", "pad",        "max-pool", "softmax-cross-entropy",
    "binary-cross-entropy", "div", "softplus"};

const Tensor& arg(std::span<const Tensor> inputs, size_t i, std::string_view kind) {
  if (i >= inputs.size()) {
    throw PreconditionError(std::string(kind) + ": expects at least " + std::to_string(i + 1) +
                            " inputs, got " + std::to_string(inputs.size()));
  }
  return inputs[i];
}

}  // namespace

Tensor forward(std::string_view op_kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  auto a0 = [&] { return arg(inputs, 0, op_kind); };
  auto a1 = [&] { return arg(inputs, 1, op_kind); };
  if (op_kind == "add") return add(a0(), a1());
  if (op_kind == "sub") return sub(a0(), a1());
  if (op_kind == "mul") return mul(a0(), a1());
  if (op_kind == "div") return div(a0(), a1());
  if (op_kind == "matmul") return matmul(a0(), a1());
  if (op_kind == "conv2d") return conv2d(a0(), a1(), attrs.stride, attrs.pad);
  if (op_kind == "relu") return relu(a0());
  if (op_kind == "leaky-relu") return leaky_relu(a0(), attrs.c != 0.0 ? attrs.c : 0.2);
  if (op_kind == "tanh") return tanh(a0());
  if (op_kind == "sigmoid") return sigmoid(a0());
  if (op_kind == "softplus") return softplus(a0());
  if (op_kind == "log") return log(a0());
  if (op_kind == "exp") return exp(a0());
  if (op_kind == "sum") return sum_all(a0());
  if (op_kind == "mean") return mean_all(a0());
  if (op_kind == "reshape") return reshape(a0(), attrs.aux_shape);
  if (op_kind == "pad") return pad2d(a0(), attrs.pad_top, attrs.pad_bottom, attrs.pad_left, attrs.pad_right);
  if (op_kind == "max-pool") return max_pool2d(a0(), attrs.window, attrs.stride);
  if (op_kind == "softmax-cross-entropy") return softmax_cross_entropy(a0(), a1());
  if (op_kind == "binary-cross-entropy") return binary_cross_entropy(a0(), a1());
  throw PreconditionError("forward: unknown op kind '" + std::string(op_kind) + "'");
}

std::span<const std::string_view> forward_op_kinds() { return kForwardKinds; }

}  // namespace jarn::ops
