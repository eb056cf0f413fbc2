#include "jarn/nn.hpp"

#include <cmath>
#include <sstream>

#include "jarn/errors.hpp"
#include "jarn/rng.hpp"
#include "kernels.hpp"

namespace jarn::nn {

const char* owner_name(Owner o) {
  switch (o) {
    case Owner::kClassifier: return "classifier";
    case Owner::kAdaptor: return "adaptor";
    case Owner::kDiscriminator: return "discriminator";
  }
  return "?";
}

std::string NetworkSpec::to_text() const {
  std::ostringstream os;
  for (const Layer& layer : layers) {
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      os << "conv2d out=" << c->out_channels << " kernel=" << c->kernel << " stride=" << c->stride
         << " pad=" << c->pad << '\n';
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      os << "dense out=" << d->out_dim << '\n';
    } else if (const auto* a = std::get_if<ActLayer>(&layer)) {
      switch (a->kind) {
        case Act::kRelu: os << "relu\n"; break;
        case Act::kLeakyRelu: os << "leaky-relu slope=" << a->slope << '\n'; break;
        case Act::kTanh: os << "tanh\n"; break;
        case Act::kSigmoid: os << "sigmoid\n"; break;
      }
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      os << "flatten\n";
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
      os << "max-pool window=" << p->window << " stride=" << p->stride << '\n';
    }
  }
  return os.str();
}

namespace {

// Parses "key=value" fields following a layer keyword.
double field(std::istringstream& is, const std::string& line, const std::string& key) {
  std::string tok;
  std::istringstream scan(line);
  scan >> tok;  // keyword
  while (scan >> tok) {
    auto eq = tok.find('=');
    if (eq != std::string::npos && tok.substr(0, eq) == key) {
      return std::stod(tok.substr(eq + 1));
    }
  }
  (void)is;
  throw PreconditionError("network spec: line '" + line + "' is missing field '" + key + "'");
}

}  // namespace

NetworkSpec NetworkSpec::from_text(const std::string& text) {
  NetworkSpec spec;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "conv2d") {
      spec.layers.push_back(Conv2dLayer{static_cast<int64_t>(field(ls, line, "out")),
                                        static_cast<int64_t>(field(ls, line, "kernel")),
                                        static_cast<int64_t>(field(ls, line, "stride")),
                                        static_cast<int64_t>(field(ls, line, "pad"))});
    } else if (kw == "dense") {
      spec.layers.push_back(DenseLayer{static_cast<int64_t>(field(ls, line, "out"))});
    } else if (kw == "relu") {
      spec.layers.push_back(ActLayer{Act::kRelu});
    } else if (kw == "leaky-relu") {
      spec.layers.push_back(ActLayer{Act::kLeakyRelu, field(ls, line, "slope")});
    } else if (kw == "tanh") {
      spec.layers.push_back(ActLayer{Act::kTanh});
    } else if (kw == "sigmoid") {
      spec.layers.push_back(ActLayer{Act::kSigmoid});
    } else if (kw == "flatten") {
      spec.layers.push_back(FlattenLayer{});
    } else if (kw == "max-pool") {
      spec.layers.push_back(MaxPoolLayer{static_cast<int64_t>(field(ls, line, "window")),
                                         static_cast<int64_t>(field(ls, line, "stride"))});
    } else {
      throw PreconditionError("network spec: unknown layer '" + kw + "'");
    }
  }
  return spec;
}

// Shape walk; [h,w,c] stays rank 3 until flatten turns it into [d].
Shape output_shape(const NetworkSpec& spec, const Shape& input_hwc) {
  Shape s = input_hwc;
  size_t idx = 0;
  for (const Layer& layer : spec.layers) {
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      if (s.size() != 3) {
        throw PreconditionError("network spec: conv2d at layer " + std::to_string(idx) +
                                " expects spatial input, has " + shape_str(s));
      }
      const int64_t oh = kernels::conv_out_extent(s[0], c->kernel, c->stride, c->pad);
      const int64_t ow = kernels::conv_out_extent(s[1], c->kernel, c->stride, c->pad);
      if (oh < 1 || ow < 1) {
        throw PreconditionError("network spec: conv2d at layer " + std::to_string(idx) +
                                " does not fit input " + shape_str(s));
      }
      s = Shape{oh, ow, c->out_channels};
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      if (s.size() != 1) {
        throw PreconditionError("network spec: dense at layer " + std::to_string(idx) +
                                " expects flattened input, has " + shape_str(s));
      }
      s = Shape{d->out_dim};
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      s = Shape{numel(s)};
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
      if (s.size() != 3) {
        throw PreconditionError("network spec: max-pool at layer " + std::to_string(idx) +
                                " expects spatial input, has " + shape_str(s));
      }
      const int64_t oh = (s[0] - p->window) / p->stride + 1;
      const int64_t ow = (s[1] - p->window) / p->stride + 1;
      if (oh < 1 || ow < 1) {
        throw PreconditionError("network spec: max-pool at layer " + std::to_string(idx) +
                                " does not fit input " + shape_str(s));
      }
      s = Shape{oh, ow, s[2]};
    }
    // activations keep the shape
    ++idx;
  }
  return s;
}

namespace {

std::vector<double> he_normal(Rng& rng, size_t count, int64_t fan_in) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> v(count);
  for (auto& x : v) x = stddev * rng.normal();
  return v;
}

ParameterStore init_store(Owner owner, const NetworkSpec& spec, const Shape& input_hwc,
                          uint64_t seed) {
  output_shape(spec, input_hwc);  // validates composition
  ParameterStore store;
  store.owner = owner;
  store.spec = spec;
  store.input_hwc = input_hwc;
  Rng rng(seed_for(seed, owner_name(owner)));
  Shape s = input_hwc;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      const int64_t cin = s[2];
      const int64_t fan_in = c->kernel * c->kernel * cin;
      Shape ws{c->kernel, c->kernel, cin, c->out_channels};
      store.params.push_back({"conv" + std::to_string(i) + ".weight",
                              Tensor(ws, he_normal(rng, static_cast<size_t>(numel(ws)), fan_in))});
      store.params.push_back(
          {"conv" + std::to_string(i) + ".bias", Tensor::zeros(Shape{c->out_channels})});
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      const int64_t in_dim = s[0];
      Shape ws{in_dim, d->out_dim};
      store.params.push_back({"dense" + std::to_string(i) + ".weight",
                              Tensor(ws, he_normal(rng, static_cast<size_t>(numel(ws)), in_dim))});
      store.params.push_back(
          {"dense" + std::to_string(i) + ".bias", Tensor::zeros(Shape{d->out_dim})});
    }
    // advance the shape walk for fan-in bookkeeping
    NetworkSpec prefix;
    prefix.layers.assign(spec.layers.begin(), spec.layers.begin() + static_cast<long>(i) + 1);
    s = output_shape(prefix, input_hwc);
  }
  return store;
}

}  // namespace

const Param& ParameterStore::find(const std::string& name) const {
  for (const Param& p : params) {
    if (p.name == name) return p;
  }
  throw PreconditionError("parameter store: no parameter named '" + name + "'");
}

ParameterStore build_classifier(const NetworkSpec& spec, const Shape& input_hwc,
                                int64_t num_classes, uint64_t seed) {
  if (spec.layers.empty() || !std::holds_alternative<DenseLayer>(spec.layers.back()) ||
      std::get<DenseLayer>(spec.layers.back()).out_dim != num_classes) {
    throw PreconditionError("build_classifier: spec must end in dense(" +
                            std::to_string(num_classes) + ")");
  }
  return init_store(Owner::kClassifier, spec, input_hwc, seed);
}

ParameterStore build_adaptor(int64_t channels, uint64_t seed) {
  if (channels < 1) throw PreconditionError("build_adaptor: channels must be >= 1");
  NetworkSpec spec;
  spec.layers.push_back(Conv2dLayer{channels, 1, 1, 0});
  spec.layers.push_back(ActLayer{Act::kTanh});
  // Spatial extent is irrelevant to a 1x1 conv; any positive size validates.
  return init_store(Owner::kAdaptor, spec, Shape{1, 1, channels}, seed);
}

ParameterStore build_discriminator(const NetworkSpec& spec, const Shape& input_hwc,
                                   uint64_t seed) {
  const size_t n = spec.layers.size();
  const bool sigmoid_head =
      n >= 2 && std::holds_alternative<ActLayer>(spec.layers[n - 1]) &&
      std::get<ActLayer>(spec.layers[n - 1]).kind == Act::kSigmoid &&
      std::holds_alternative<DenseLayer>(spec.layers[n - 2]) &&
      std::get<DenseLayer>(spec.layers[n - 2]).out_dim == 1;
  if (!sigmoid_head) {
    throw PreconditionError("build_discriminator: spec must end in dense(1) + sigmoid");
  }
  return init_store(Owner::kDiscriminator, spec, input_hwc, seed);
}

NetworkSpec classifier_spec_28x28() {
  NetworkSpec s;
  s.layers = {Conv2dLayer{64, 5, 2, 2},  ActLayer{Act::kRelu}, Conv2dLayer{128, 5, 2, 2},
              ActLayer{Act::kRelu},      Conv2dLayer{256, 5, 2, 2}, ActLayer{Act::kRelu},
              FlattenLayer{},            DenseLayer{10}};
  return s;
}

NetworkSpec discriminator_spec_28x28() {
  NetworkSpec s;
  s.layers = {Conv2dLayer{64, 4, 2, 1},  ActLayer{Act::kLeakyRelu, 0.2},
              Conv2dLayer{128, 4, 2, 1}, ActLayer{Act::kLeakyRelu, 0.2},
              FlattenLayer{},            DenseLayer{1},
              ActLayer{Act::kSigmoid}};
  return s;
}

BoundParams bind(Tape& tape, const ParameterStore& store) {
  BoundParams bound;
  bound.store = &store;
  bound.leaves.reserve(store.params.size());
  for (const Param& p : store.params) bound.leaves.push_back(tape.leaf(p.value));
  return bound;
}

namespace {

Tensor forward_impl(const BoundParams& bound, const Tensor& input, bool stop_before_sigmoid) {
  const ParameterStore& store = *bound.store;
  Tensor x = input;
  size_t param_idx = 0;
  const size_t n_layers = store.spec.layers.size();
  for (size_t i = 0; i < n_layers; ++i) {
    const Layer& layer = store.spec.layers[i];
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      const Tensor& w = bound.leaves[param_idx++];
      const Tensor& b = bound.leaves[param_idx++];
      Tensor y = ops::conv2d(x, w, c->stride, c->pad);
      const Shape& ys = y.shape();
      x = ops::add(y, ops::tile_chan(b, ys[0], ys[1], ys[2]));
    } else if (std::holds_alternative<DenseLayer>(layer)) {
      const Tensor& w = bound.leaves[param_idx++];
      const Tensor& b = bound.leaves[param_idx++];
      Tensor y = ops::matmul(x, w);
      x = ops::add(y, ops::tile_rows(b, y.shape()[0]));
    } else if (const auto* a = std::get_if<ActLayer>(&layer)) {
      if (stop_before_sigmoid && a->kind == Act::kSigmoid && i + 1 == n_layers) return x;
      switch (a->kind) {
        case Act::kRelu: x = ops::relu(x); break;
        case Act::kLeakyRelu: x = ops::leaky_relu(x, a->slope); break;
        case Act::kTanh: x = ops::tanh(x); break;
        case Act::kSigmoid: x = ops::sigmoid(x); break;
      }
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      x = ops::reshape(x, Shape{x.shape()[0], numel(x.shape()) / x.shape()[0]});
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
      x = ops::max_pool2d(x, p->window, p->stride);
    }
  }
  return x;
}

}  // namespace

Tensor forward_network(const BoundParams& bound, const Tensor& input) {
  return forward_impl(bound, input, false);
}

Tensor forward_logits(const BoundParams& bound, const Tensor& input) {
  return forward_impl(bound, input, true);
}

Tensor forward_values(const ParameterStore& store, const Tensor& input) {
  auto tape = Tape::create();
  BoundParams bound = bind(*tape, store);
  Tensor x = tape->leaf(input);
  return forward_network(bound, x).detached();
}

std::vector<int> predict_classes(const ParameterStore& store, const Tensor& images) {
  Tensor logits = forward_values(store, images);
  const int64_t n = logits.shape()[0], k = logits.shape()[1];
  std::vector<int> pred(static_cast<size_t>(n));
  const auto& v = logits.values();
  for (int64_t i = 0; i < n; ++i) {
    int best = 0;
    for (int64_t j = 1; j < k; ++j) {
      if (v[static_cast<size_t>(i * k + j)] > v[static_cast<size_t>(i * k + best)]) {
        best = static_cast<int>(j);
      }
    }
    pred[static_cast<size_t>(i)] = best;
  }
  return pred;
}

namespace {

OptimizerState make_state(const ParameterStore& store, OptKind kind, double lr) {
  OptimizerState s;
  s.kind = kind;
  s.lr = lr;
  s.m1.reserve(store.params.size());
  s.m2.reserve(store.params.size());
  for (const Param& p : store.params) {
    s.m1.emplace_back(p.value.values().size(), 0.0);
    s.m2.emplace_back(kind == OptKind::kAdam ? p.value.values().size() : 0, 0.0);
  }
  return s;
}

}  // namespace

OptimizerState make_sgd_momentum(const ParameterStore& store, double lr, double momentum) {
  OptimizerState s = make_state(store, OptKind::kSgdMomentum, lr);
  s.momentum = momentum;
  return s;
}

OptimizerState make_adam(const ParameterStore& store, double lr) {
  return make_state(store, OptKind::kAdam, lr);
}

void optimizer_step(ParameterStore& store, const std::vector<Tensor>& grads,
                    OptimizerState& state, bool ascend) {
  if (grads.size() != store.params.size()) {
    throw ShapeError("optimizer: got " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(store.params.size()) + " parameters");
  }
  state.step += 1;
  const double sign = ascend ? -1.0 : 1.0;
  for (size_t p = 0; p < grads.size(); ++p) {
    const Tensor& g = grads[p];
    Param& param = store.params[p];
    if (g.shape() != param.value.shape()) {
      throw ShapeError("optimizer: gradient shape " + shape_str(g.shape()) +
                       " does not match parameter '" + param.name + "' " +
                       shape_str(param.value.shape()));
    }
    const auto& gv = g.values();
    std::vector<double> v = param.value.values();
    if (state.kind == OptKind::kSgdMomentum) {
      auto& buf = state.m1[p];
      for (size_t i = 0; i < v.size(); ++i) {
        buf[i] = state.momentum * buf[i] + sign * gv[i];
        v[i] -= state.lr * buf[i];
      }
    } else {
      auto& m = state.m1[p];
      auto& mv = state.m2[p];
      const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
      const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
      for (size_t i = 0; i < v.size(); ++i) {
        const double gi = sign * gv[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
        mv[i] = state.beta2 * mv[i] + (1.0 - state.beta2) * gi * gi;
        const double mhat = m[i] / c1;
        const double vhat = mv[i] / c2;
        v[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }
    }
    param.value = Tensor(param.value.shape(), std::move(v));
  }
}

}  // namespace jarn::nn
