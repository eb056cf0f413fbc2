#include "test_util.hpp"

namespace jarn::testutil {

namespace {

// Scalarize through a fixed random projection so every component of the op
// output influences the loss.
GraphBuilder projected(std::function<Tensor(Tape&, const std::vector<Tensor>&)> op,
                       Tensor projection) {
  return [op = std::move(op), projection = std::move(projection)](
             Tape& tape, const std::vector<Tensor>& leaves) {
    Tensor out = op(tape, leaves);
    Tensor r = tape.leaf(projection);
    return ops::sum_all(ops::mul(out, r));
  };
}

}  // namespace

std::vector<GradCheckCase> standard_op_cases(uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckCase> cases;

  auto ew_pair = [&](const std::string& kind, Tensor a, Tensor b) {
    Tensor r = rand_tensor(rng, a.shape());
    cases.push_back({kind,
                     {std::move(a), std::move(b)},
                     {},
                     projected([kind](Tape&, const std::vector<Tensor>& in) {
                       return ops::forward(kind, in);
                     }, std::move(r))});
  };
  auto unary = [&](const std::string& kind, Tensor a) {
    Tensor r = rand_tensor(rng, a.shape());
    cases.push_back({kind,
                     {std::move(a)},
                     {},
                     projected([kind](Tape&, const std::vector<Tensor>& in) {
                       return ops::forward(kind, in);
                     }, std::move(r))});
  };

  ew_pair("add", rand_tensor(rng, {2, 3}), rand_tensor(rng, {2, 3}));
  ew_pair("sub", rand_tensor(rng, {2, 3}), rand_tensor(rng, {2, 3}));
  ew_pair("mul", rand_tensor(rng, {2, 3}), rand_tensor(rng, {2, 3}));
  ew_pair("div", rand_tensor(rng, {2, 3}), rand_tensor_offzero(rng, {2, 3}, 0.5));

  {
    Tensor a = rand_tensor(rng, {2, 3}), b = rand_tensor(rng, {3, 4});
    Tensor r = rand_tensor(rng, {2, 4});
    cases.push_back({"matmul",
                     {a, b},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::matmul(in[0], in[1]);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {2, 5, 5, 2});
    Tensor w = rand_tensor(rng, {3, 3, 2, 3});
    Tensor r = rand_tensor(rng, {2, 5, 5, 3});
    cases.push_back({"conv2d-s1p1",
                     {x, w},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::conv2d(in[0], in[1], 1, 1);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {1, 6, 6, 2});
    Tensor w = rand_tensor(rng, {5, 5, 2, 4});
    Tensor r = rand_tensor(rng, {1, 3, 3, 4});
    cases.push_back({"conv2d-s2p2",
                     {x, w},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::conv2d(in[0], in[1], 2, 2);
                     }, r)});
  }

  unary("relu", rand_tensor_offzero(rng, {3, 4}));
  unary("leaky-relu", rand_tensor_offzero(rng, {3, 4}));
  unary("tanh", rand_tensor(rng, {3, 4}, -2.0, 2.0));
  unary("sigmoid", rand_tensor(rng, {3, 4}, -3.0, 3.0));
  unary("softplus", rand_tensor(rng, {3, 4}, -3.0, 3.0));
  unary("log", rand_tensor(rng, {3, 4}, 0.3, 3.0));
  unary("exp", rand_tensor(rng, {3, 4}, -1.5, 1.5));

  cases.push_back({"sum",
                   {rand_tensor(rng, {3, 4})},
                   {},
                   [](Tape&, const std::vector<Tensor>& in) { return ops::sum_all(in[0]); }});
  cases.push_back({"mean",
                   {rand_tensor(rng, {3, 4})},
                   {},
                   [](Tape&, const std::vector<Tensor>& in) { return ops::mean_all(in[0]); }});

  {
    Tensor x = rand_tensor(rng, {2, 6});
    Tensor r = rand_tensor(rng, {3, 4});
    cases.push_back({"reshape",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::reshape(in[0], {3, 4});
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {1, 3, 3, 2});
    Tensor r = rand_tensor(rng, {1, 4, 6, 2});
    cases.push_back({"pad",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::pad2d(in[0], 1, 0, 2, 1);
                     }, r)});
  }
  {
    // Distinct values keep the argmax stable under the fd step.
    std::vector<double> v(32);
    for (size_t i = 0; i < v.size(); ++i) {
      v[i] = static_cast<double>((i * 7919) % 32) * 0.37 + 0.01 * rng.uniform01();
    }
    Tensor x(Shape{1, 4, 4, 2}, std::move(v));
    Tensor r = rand_tensor(rng, {1, 2, 2, 2});
    cases.push_back({"max-pool",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::max_pool2d(in[0], 2, 2);
                     }, r)});
  }
  {
    Tensor z = rand_tensor(rng, {3, 5}, -2.0, 2.0);
    Tensor y = one_hot_rows(rng, 3, 5);
    Tensor r = rand_tensor(rng, {3});
    cases.push_back({"softmax-cross-entropy",
                     {z, y},
                     {0},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::softmax_cross_entropy(in[0], in[1]);
                     }, r)});
  }
  {
    Tensor z = rand_tensor(rng, {6}, -2.5, 2.5);
    std::vector<double> t(6);
    for (auto& v : t) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    Tensor targets(Shape{6}, std::move(t));
    Tensor r = rand_tensor(rng, {6});
    cases.push_back({"binary-cross-entropy",
                     {z, targets},
                     {0},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::binary_cross_entropy(in[0], in[1]);
                     }, r)});
  }

  // Internal ops behind the vjp rules.
  {
    Tensor x = rand_tensor(rng, {3, 4});
    Tensor r = rand_tensor(rng, {4, 3});
    cases.push_back({"transpose",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::transpose(in[0]);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {1, 4, 4, 3});
    Tensor r = rand_tensor(rng, {1, 2, 3, 3});
    cases.push_back({"crop",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::crop2d(in[0], 1, 1, 0, 1);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {4, 3});
    Tensor r = rand_tensor(rng, {4});
    cases.push_back({"row-sum",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::row_sum(in[0]);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {4});
    Tensor r = rand_tensor(rng, {4, 5});
    cases.push_back({"tile-cols",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::tile_cols(in[0], 5);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {4, 3});
    Tensor r = rand_tensor(rng, {3});
    cases.push_back({"col-sum",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::col_sum(in[0]);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {3});
    Tensor r = rand_tensor(rng, {5, 3});
    cases.push_back({"tile-rows",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::tile_rows(in[0], 5);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {2, 3, 2, 4});
    Tensor r = rand_tensor(rng, {4});
    cases.push_back({"chan-sum",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::chan_sum(in[0]);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {4});
    Tensor r = rand_tensor(rng, {2, 3, 2, 4});
    cases.push_back({"tile-chan",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::tile_chan(in[0], 2, 3, 2);
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {3, 4});
    cases.push_back({"select",
                     {x},
                     {},
                     [](Tape&, const std::vector<Tensor>& in) { return ops::select(in[0], 7); }});
  }
  {
    Tensor s = rand_tensor(rng, {});
    Tensor r = rand_tensor(rng, {2, 3});
    cases.push_back({"scatter-one",
                     {s},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::scatter_one(in[0], 4, {2, 3});
                     }, r)});
  }
  {
    Tensor s = rand_tensor(rng, {});
    Tensor r = rand_tensor(rng, {3, 2});
    cases.push_back({"broadcast-scalar",
                     {s},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::broadcast_scalar(in[0], {3, 2});
                     }, r)});
  }
  {
    Tensor x = rand_tensor(rng, {2, 3});
    Tensor r = rand_tensor(rng, {2, 3});
    cases.push_back({"scale-addc",
                     {x},
                     {},
                     projected([](Tape&, const std::vector<Tensor>& in) {
                       return ops::add_scalar(ops::scale(in[0], -1.7), 0.4);
                     }, r)});
  }
  return cases;
}

}  // namespace jarn::testutil
