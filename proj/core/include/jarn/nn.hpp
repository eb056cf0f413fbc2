#pragma once

#include <string>
#include <variant>
#include <vector>

#include "jarn/ops.hpp"
#include "jarn/tape.hpp"
#include "jarn/tensor.hpp"

namespace jarn::nn {

enum class Act : uint8_t { kRelu, kLeakyRelu, kTanh, kSigmoid };

struct Conv2dLayer {
  int64_t out_channels, kernel, stride, pad;
};
struct DenseLayer {
  int64_t out_dim;
};
struct ActLayer {
  Act kind;
  double slope = 0.2;  // leaky-relu only
};
struct FlattenLayer {};
struct MaxPoolLayer {
  int64_t window, stride;
};

using Layer = std::variant<Conv2dLayer, DenseLayer, ActLayer, FlattenLayer, MaxPoolLayer>;

// Declarative layer list. Serializes to/from a line-based text form (one
// layer per line) used inside checkpoints.
struct NetworkSpec {
  std::vector<Layer> layers;

  std::string to_text() const;
  static NetworkSpec from_text(const std::string& text);
};

// Walks the spec over an input shape [h,w,c], validating composition.
// Returns the flat output dimension of each layer boundary; throws
// PreconditionError when consecutive layers do not compose.
Shape output_shape(const NetworkSpec& spec, const Shape& input_hwc);

enum class Owner : uint8_t { kClassifier, kAdaptor, kDiscriminator };
const char* owner_name(Owner o);

struct Param {
  std::string name;
  Tensor value;  // detached
};

// Named parameter tensors of one network, tagged with the owner whose update
// rule is allowed to touch them.
struct ParameterStore {
  Owner owner = Owner::kClassifier;
  NetworkSpec spec;
  Shape input_hwc;  // expected per-sample input shape
  std::vector<Param> params;

  const Param& find(const std::string& name) const;
};

// He-normal conv/dense weights, zero biases, deterministic in seed.
ParameterStore build_classifier(const NetworkSpec& spec, const Shape& input_hwc,
                                int64_t num_classes, uint64_t seed);
// Single 1x1 conv (channels -> channels) followed by tanh.
ParameterStore build_adaptor(int64_t channels, uint64_t seed);
// Spec must end in dense(1) + sigmoid; output is P[input came from data].
ParameterStore build_discriminator(const NetworkSpec& spec, const Shape& input_hwc,
                                   uint64_t seed);

// Default architectures used by the trainers and CLI.
NetworkSpec classifier_spec_28x28();       // conv 64/128/256 k5 s2 p2 + dense 10
NetworkSpec discriminator_spec_28x28();    // conv 64/128 k4 s2 p1 + dense 1 + sigmoid

// Parameters bound into a record as leaves, aligned with store order.
struct BoundParams {
  const ParameterStore* store = nullptr;
  std::vector<Tensor> leaves;
};
BoundParams bind(Tape& tape, const ParameterStore& store);

// Applies every layer; input is [n,h,w,c] (or [n,d] once flattened).
// For specs ending in sigmoid, forward_logits stops before that final
// squash so losses can be computed in a saturation-safe form.
Tensor forward_network(const BoundParams& bound, const Tensor& input);
Tensor forward_logits(const BoundParams& bound, const Tensor& input);

// Convenience: detached forward pass on a scratch record.
Tensor forward_values(const ParameterStore& store, const Tensor& input);
std::vector<int> predict_classes(const ParameterStore& store, const Tensor& images);

enum class OptKind : uint8_t { kSgdMomentum, kAdam };

struct OptimizerState {
  OptKind kind = OptKind::kSgdMomentum;
  double lr = 0.01;
  double momentum = 0.9;        // sgd-momentum
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam
  int64_t step = 0;
  std::vector<std::vector<double>> m1, m2;  // moment buffers per parameter
};

OptimizerState make_sgd_momentum(const ParameterStore& store, double lr, double momentum);
OptimizerState make_adam(const ParameterStore& store, double lr);

// In-place descent step; pass ascend=true to climb (discriminator update).
void optimizer_step(ParameterStore& store, const std::vector<Tensor>& grads,
                    OptimizerState& state, bool ascend = false);

}  // namespace jarn::nn
