#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "jarn/tensor.hpp"

namespace jarn {

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,        // x * c
  kAddC,         // x + c
  kCMul,         // x * constant tensor (activation masks)
  kMatmul,       // [M,K] x [K,N]
  kTranspose,    // [M,N] -> [N,M]
  kConv2d,       // NHWC x [KH,KW,Cin,Cout]
  kConv2dInputGrad,
  kConv2dWeightGrad,
  kRelu,
  kLeakyRelu,    // slope in attrs.c
  kTanh,
  kSigmoid,
  kSoftplus,
  kLog,
  kExp,
  kSumAll,       // -> scalar
  kBroadcastScalar,
  kReshape,
  kPad2d,        // zero-pad H and W
  kCrop2d,
  kMaxPool2d,    // argmax indices recorded at forward time
  kPoolScatter,  // pooled-shaped -> input-shaped through frozen indices
  kPoolGather,   // input-shaped -> pooled-shaped through frozen indices
  kRowSum,       // [R,C] -> [R]
  kTileCols,     // [R] -> [R,C]
  kColSum,       // [R,C] -> [C]
  kTileRows,     // [C] -> [R,C]
  kChanSum,      // [N,H,W,C] -> [C]
  kTileChan,     // [C] -> [N,H,W,C]
  kSelect,       // flat element -> scalar
  kScatterOne,   // scalar -> one-hot tensor
};

const char* op_name(Op op);

// Static per-op attributes; only the fields an op needs are meaningful.
struct OpAttrs {
  double c = 0.0;                                        // scale factor / added constant / slope
  int64_t stride = 1, pad = 0;                           // conv + pool
  int64_t window = 0;                                    // pool window
  int64_t pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  int64_t index = 0;                                     // select / scatter-one
  Shape aux_shape;                                       // broadcast / scatter / grad targets
  std::shared_ptr<const std::vector<double>> ctensor;    // kCMul multiplier
  std::shared_ptr<const std::vector<int32_t>> indices;   // pool argmax, flat into input
};

struct Node {
  Op op;
  int32_t generation = 0;
  std::array<int32_t, 2> in{{-1, -1}};
  int8_t arity = 0;
  Shape shape;
  std::shared_ptr<const std::vector<double>> values;
  OpAttrs attrs;
};

// Append-only record of differentiable operations (single-writer). Forward
// values are computed eagerly as nodes are appended, so a gradient pass can
// itself be recorded and differentiated again.
class Tape : public std::enable_shared_from_this<Tape> {
 public:
  static std::shared_ptr<Tape> create() { return std::shared_ptr<Tape>(new Tape()); }

  // Records a leaf holding the tensor's data (an input, parameter snapshot,
  // or constant) and returns a tensor bound to the new node.
  Tensor leaf(const Tensor& data);
  Tensor leaf(Shape shape, std::vector<double> values);

  size_t size() const { return nodes_.size(); }
  int32_t max_generation() const { return max_generation_; }
  const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }

  // Tensor view of an existing node.
  Tensor tensor_for(int32_t id);

  // Appends a node; values must already conform to shape. Generation is the
  // max of the input generations, raised to the current emission floor when a
  // gradient pass is being recorded.
  Tensor emit(Op op, std::span<const Tensor> inputs, Shape shape,
              std::vector<double> values, OpAttrs attrs = {});
  Tensor emit(Op op, std::span<const Tensor> inputs, Shape shape,
              std::shared_ptr<const std::vector<double>> values, OpAttrs attrs = {});

 private:
  Tape() = default;
  friend class TapeScratch;
  friend class EmitGenerationGuard;

  std::vector<Node> nodes_;
  int32_t max_generation_ = 0;
  int32_t emit_generation_floor_ = 0;
};

// RAII: raises the generation assigned to nodes emitted during a gradient
// pass. Nested passes stack.
class EmitGenerationGuard {
 public:
  EmitGenerationGuard(Tape& tape, int32_t floor)
      : tape_(tape), saved_(tape.emit_generation_floor_) {
    tape_.emit_generation_floor_ = floor;
  }
  ~EmitGenerationGuard() { tape_.emit_generation_floor_ = saved_; }

 private:
  Tape& tape_;
  int32_t saved_;
};

// RAII: rolls the tape back to its watermark. A non-differentiable gradient
// pass runs the same vjp emission code as the differentiable one, then
// truncates its scratch nodes so the record (and its max generation) is
// unchanged at the API boundary.
class TapeScratch {
 public:
  explicit TapeScratch(Tape& tape)
      : tape_(tape), n0_(tape.nodes_.size()), gen0_(tape.max_generation_) {}
  ~TapeScratch() {
    tape_.nodes_.resize(n0_);
    tape_.max_generation_ = gen0_;
  }

 private:
  Tape& tape_;
  size_t n0_;
  int32_t gen0_;
};

// Reverse-mode gradient of a scalar recorded output with respect to recorded
// tensors. With differentiable=true the backward pass is recorded at
// generation+1 and the results can be differentiated again; otherwise the
// results are detached and the record is left exactly as it was.
std::vector<Tensor> gradient(const Tensor& output, std::span<const Tensor> wrt,
                             bool differentiable);
std::vector<Tensor> gradient(const Tensor& output, const Tensor& wrt, bool differentiable);

}  // namespace jarn
