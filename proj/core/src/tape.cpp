#include "jarn/tape.hpp"

#include <algorithm>
#include <optional>

#include "jarn/errors.hpp"
#include "jarn/ops.hpp"

namespace jarn {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kAddC: return "add-scalar";
    case Op::kCMul: return "cmul";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kConv2d: return "conv2d";
    case Op::kConv2dInputGrad: return "conv2d-input-grad";
    case Op::kConv2dWeightGrad: return "conv2d-weight-grad";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leaky-relu";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSoftplus: return "softplus";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSumAll: return "sum";
    case Op::kBroadcastScalar: return "broadcast-scalar";
    case Op::kReshape: return "reshape";
    case Op::kPad2d: return "pad";
    case Op::kCrop2d: return "crop";
    case Op::kMaxPool2d: return "max-pool";
    case Op::kPoolScatter: return "pool-scatter";
    case Op::kPoolGather: return "pool-gather";
    case Op::kRowSum: return "row-sum";
    case Op::kTileCols: return "tile-cols";
    case Op::kColSum: return "col-sum";
    case Op::kTileRows: return "tile-rows";
    case Op::kChanSum: return "chan-sum";
    case Op::kTileChan: return "tile-chan";
    case Op::kSelect: return "select";
    case Op::kScatterOne: return "scatter-one";
  }
  return "?";
}

Tensor Tape::leaf(const Tensor& data) {
  if (!data.defined()) throw PreconditionError("leaf: undefined tensor");
  return emit(Op::kLeaf, std::span<const Tensor>{}, data.shape(), data.buffer(), OpAttrs{});
}

Tensor Tape::leaf(Shape shape, std::vector<double> values) {
  return leaf(Tensor(std::move(shape), std::move(values)));
}

Tensor Tape::tensor_for(int32_t id) {
  const Node& n = nodes_[static_cast<size_t>(id)];
  return Tensor(n.shape, n.values, shared_from_this(), id);
}

Tensor Tape::emit(Op op, std::span<const Tensor> inputs, Shape shape,
                  std::vector<double> values, OpAttrs attrs) {
  return emit(op, inputs, std::move(shape),
              std::make_shared<const std::vector<double>>(std::move(values)), std::move(attrs));
}

Tensor Tape::emit(Op op, std::span<const Tensor> inputs, Shape shape,
                  std::shared_ptr<const std::vector<double>> values, OpAttrs attrs) {
  Node n;
  n.op = op;
  n.arity = static_cast<int8_t>(inputs.size());
  int32_t gen = emit_generation_floor_;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& t = inputs[i];
    if (!t.has_node() || t.tape().get() != this) {
      throw PreconditionError(std::string(op_name(op)) + ": input " + std::to_string(i) +
                              " is not recorded on this record");
    }
    n.in[i] = t.node();
    gen = std::max(gen, nodes_[static_cast<size_t>(t.node())].generation);
  }
  n.generation = gen;
  max_generation_ = std::max(max_generation_, gen);
  n.shape = std::move(shape);
  n.values = std::move(values);
  n.attrs = std::move(attrs);
  nodes_.push_back(std::move(n));
  const auto id = static_cast<int32_t>(nodes_.size() - 1);
  return Tensor(nodes_.back().shape, nodes_.back().values, shared_from_this(), id);
}

namespace {

// Contribution of node `n` (output adjoint `g`) to the adjoint of its
// `input_idx`-th input, expressed through recorded ops so that a
// differentiable pass yields a graph that can be differentiated again.
Tensor vjp(Tape& tape, int32_t node_id, int input_idx, const Tensor& g) {
  const Node& n = tape.node(node_id);
  auto in = [&](int i) { return tape.tensor_for(n.in[static_cast<size_t>(i)]); };
  auto out = [&] { return tape.tensor_for(node_id); };
  switch (n.op) {
    case Op::kLeaf:
      throw PreconditionError("vjp: leaf has no inputs");
    case Op::kAdd:
      return g;
    case Op::kSub:
      return input_idx == 0 ? g : ops::scale(g, -1.0);
    case Op::kMul:
      return ops::mul(g, in(1 - input_idx));
    case Op::kDiv:
      // d(a/b)/da = 1/b ; d(a/b)/db = -(a/b)/b
      return input_idx == 0 ? ops::div(g, in(1))
                            : ops::scale(ops::mul(g, ops::div(out(), in(1))), -1.0);
    case Op::kScale:
      return ops::scale(g, n.attrs.c);
    case Op::kAddC:
      return g;
    case Op::kCMul:
      return ops::cmul(g, n.attrs.ctensor);
    case Op::kMatmul:
      return input_idx == 0 ? ops::matmul(g, ops::transpose(in(1)))
                            : ops::matmul(ops::transpose(in(0)), g);
    case Op::kTranspose:
      return ops::transpose(g);
    case Op::kConv2d:
      return input_idx == 0
                 ? ops::conv2d_input_grad(g, in(1), n.attrs.stride, n.attrs.pad, in(0).shape())
                 : ops::conv2d_weight_grad(in(0), g, n.attrs.stride, n.attrs.pad, in(1).shape());
    case Op::kConv2dInputGrad:
      // out = input_grad(gy, w); linear in both arguments.
      return input_idx == 0
                 ? ops::conv2d(g, in(1), n.attrs.stride, n.attrs.pad)
                 : ops::conv2d_weight_grad(g, in(0), n.attrs.stride, n.attrs.pad, in(1).shape());
    case Op::kConv2dWeightGrad:
      // out = weight_grad(x, gy); linear in both arguments.
      return input_idx == 0
                 ? ops::conv2d_input_grad(in(1), g, n.attrs.stride, n.attrs.pad, in(0).shape())
                 : ops::conv2d(in(0), g, n.attrs.stride, n.attrs.pad);
    case Op::kRelu:
    case Op::kLeakyRelu: {
      // Mask frozen from the forward input; subgradient 0 at the kink.
      const auto& x = *tape.node(n.in[0]).values;
      auto mask = std::make_shared<std::vector<double>>(x.size());
      const double slope = n.op == Op::kRelu ? 0.0 : n.attrs.c;
      for (size_t i = 0; i < x.size(); ++i) (*mask)[i] = x[i] > 0.0 ? 1.0 : slope;
      return ops::cmul(g, std::move(mask));
    }
    case Op::kTanh: {
      Tensor y = out();
      return ops::mul(g, ops::add_scalar(ops::scale(ops::mul(y, y), -1.0), 1.0));
    }
    case Op::kSigmoid: {
      Tensor y = out();
      return ops::mul(g, ops::mul(y, ops::add_scalar(ops::scale(y, -1.0), 1.0)));
    }
    case Op::kSoftplus:
      return ops::mul(g, ops::sigmoid(in(0)));
    case Op::kLog:
      return ops::div(g, in(0));
    case Op::kExp:
      return ops::mul(g, out());
    case Op::kSumAll:
      return ops::broadcast_scalar(g, in(0).shape());
    case Op::kBroadcastScalar:
      return ops::sum_all(g);
    case Op::kReshape:
      return ops::reshape(g, in(0).shape());
    case Op::kPad2d:
      return ops::crop2d(g, n.attrs.pad_top, n.attrs.pad_bottom, n.attrs.pad_left,
                         n.attrs.pad_right);
    case Op::kCrop2d:
      return ops::pad2d(g, n.attrs.pad_top, n.attrs.pad_bottom, n.attrs.pad_left,
                        n.attrs.pad_right);
    case Op::kMaxPool2d:
      return ops::pool_scatter(g, n.attrs.indices, in(0).shape());
    case Op::kPoolScatter:
      return ops::pool_gather(g, n.attrs.indices, in(0).shape());
    case Op::kPoolGather:
      return ops::pool_scatter(g, n.attrs.indices, in(0).shape());
    case Op::kRowSum:
      return ops::tile_cols(g, in(0).shape()[1]);
    case Op::kTileCols:
      return ops::row_sum(g);
    case Op::kColSum:
      return ops::tile_rows(g, in(0).shape()[0]);
    case Op::kTileRows:
      return ops::col_sum(g);
    case Op::kChanSum: {
      const Shape s = in(0).shape();  // copy; in(0) is a temporary
      return ops::tile_chan(g, s[0], s[1], s[2]);
    }
    case Op::kTileChan:
      return ops::chan_sum(g);
    case Op::kSelect:
      return ops::scatter_one(g, n.attrs.index, in(0).shape());
    case Op::kScatterOne:
      return ops::select(g, n.attrs.index);
  }
  throw PreconditionError("vjp: unhandled op");
}

}  // namespace

std::vector<Tensor> gradient(const Tensor& output, std::span<const Tensor> wrt,
                             bool differentiable) {
  if (!output.has_node()) throw PreconditionError("gradient: output is not recorded");
  if (output.size() != 1) {
    throw PreconditionError("gradient: output must be scalar, got shape " +
                            shape_str(output.shape()));
  }
  auto tape_ptr = output.tape();
  Tape& tape = *tape_ptr;
  for (size_t i = 0; i < wrt.size(); ++i) {
    if (!wrt[i].has_node() || wrt[i].tape() != tape_ptr) {
      throw PreconditionError("gradient: wrt tensor " + std::to_string(i) +
                              " is absent from the record");
    }
  }

  const auto out_id = output.node();
  const auto count = static_cast<size_t>(out_id) + 1;

  // needs[i]: node i lies on a path from some wrt tensor (forward closure,
  // valid because inputs always precede their consumers).
  std::vector<uint8_t> needs(count, 0);
  for (const Tensor& t : wrt) needs[static_cast<size_t>(t.node())] = 1;
  for (size_t i = 0; i < count; ++i) {
    if (needs[i]) continue;
    const Node& n = tape.node(static_cast<int32_t>(i));
    for (int k = 0; k < n.arity; ++k) {
      if (needs[static_cast<size_t>(n.in[static_cast<size_t>(k)])]) {
        needs[i] = 1;
        break;
      }
    }
  }

  // live[i]: node i is an ancestor of the output.
  std::vector<uint8_t> live(count, 0);
  {
    std::vector<int32_t> stack{out_id};
    live[static_cast<size_t>(out_id)] = 1;
    while (!stack.empty()) {
      const Node& n = tape.node(stack.back());
      stack.pop_back();
      for (int k = 0; k < n.arity; ++k) {
        const int32_t j = n.in[static_cast<size_t>(k)];
        if (!live[static_cast<size_t>(j)]) {
          live[static_cast<size_t>(j)] = 1;
          stack.push_back(j);
        }
      }
    }
  }

  const int32_t pass_generation = tape.node(out_id).generation + 1;
  std::vector<Tensor> result(wrt.size());

  {
    // Both modes emit through the same code path; the non-differentiable one
    // is rolled back below after results are detached.
    std::optional<TapeScratch> scratch;
    if (!differentiable) scratch.emplace(tape);
    EmitGenerationGuard gen_guard(tape, pass_generation);

    std::vector<Tensor> adjoint(count);
    adjoint[static_cast<size_t>(out_id)] = tape.leaf(Shape{}, std::vector<double>{1.0});

    for (int32_t i = out_id; i >= 0; --i) {
      const auto ui = static_cast<size_t>(i);
      if (!live[ui] || !needs[ui] || !adjoint[ui].defined()) continue;
      const Node& n = tape.node(i);
      if (n.op == Op::kLeaf) continue;
      for (int k = 0; k < n.arity; ++k) {
        const auto j = static_cast<size_t>(n.in[static_cast<size_t>(k)]);
        if (!needs[j]) continue;
        Tensor contrib = vjp(tape, i, k, adjoint[ui]);
        adjoint[j] = adjoint[j].defined() ? ops::add(adjoint[j], contrib) : std::move(contrib);
      }
    }

    for (size_t i = 0; i < wrt.size(); ++i) {
      const auto id = static_cast<size_t>(wrt[i].node());
      Tensor g = adjoint[id].defined()
                     ? adjoint[id]
                     : tape.leaf(Tensor::zeros(wrt[i].shape()));  // output does not depend on it
      result[i] = differentiable ? g : g.detached();
    }
  }
  return result;
}

std::vector<Tensor> gradient(const Tensor& output, const Tensor& wrt, bool differentiable) {
  return gradient(output, std::span<const Tensor>(&wrt, 1), differentiable);
}

}  // namespace jarn
