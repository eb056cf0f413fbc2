#include <doctest.h>

#include <cstring>

#include "jarn/errors.hpp"
#include "jarn/finite_diff.hpp"
#include "jarn/nn.hpp"
#include "jarn/ops.hpp"
#include "jarn/tape.hpp"
#include "support/test_util.hpp"

using namespace jarn;
using testutil::naive_conv2d;
using testutil::rand_tensor;

TEST_CASE("elementwise forward values") {
  auto tape = Tape::create();
  Tensor a = tape->leaf(Shape{2}, {1.0, 2.0});
  Tensor b = tape->leaf(Shape{2}, {3.0, 4.0});
  Tensor s = ops::add(a, b);
  CHECK(s.values()[0] == doctest::Approx(4.0));
  CHECK(s.values()[1] == doctest::Approx(6.0));

  Tensor z = tape->leaf(Shape{1}, {0.0});
  CHECK(ops::tanh(z).values()[0] == 0.0);
  CHECK(ops::sigmoid(z).values()[0] == 0.5);
}

TEST_CASE("shape mismatch is rejected with op and shapes") {
  auto tape = Tape::create();
  Tensor a = tape->leaf(Shape{2}, {1.0, 2.0});
  Tensor b = tape->leaf(Shape{3}, {1.0, 2.0, 3.0});
  try {
    ops::add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
}

TEST_CASE("conv2d forward matches the direct-loop oracle") {
  Rng rng(11);
  for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 2}, {3, 1}}) {
    Tensor x = rand_tensor(rng, {2, 4, 4, 3});
    Tensor w = rand_tensor(rng, {3, 3, 3, 5});
    auto tape = Tape::create();
    Tensor y = ops::conv2d(tape->leaf(x), tape->leaf(w), stride, pad);
    std::vector<double> want = naive_conv2d(x.shape(), x.values(), w.shape(), w.values(),
                                            stride, pad);
    REQUIRE(y.values().size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
      CHECK(y.values()[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient of x^2 and second derivative of x^3") {
  auto tape = Tape::create();
  Tensor x = tape->leaf(Shape{}, {3.0});
  Tensor y = ops::mul(x, x);
  CHECK(gradient(y, x, false)[0].value() == doctest::Approx(6.0));

  auto tape2 = Tape::create();
  Tensor x2 = tape2->leaf(Shape{}, {2.0});
  Tensor cube = ops::mul(ops::mul(x2, x2), x2);
  Tensor g = gradient(cube, x2, /*differentiable=*/true)[0];
  Tensor g2 = gradient(g, x2, false)[0];
  CHECK(g.value() == doctest::Approx(12.0));   // 3x^2
  CHECK(g2.value() == doctest::Approx(12.0));  // 6x
}

TEST_CASE("softmax cross-entropy input gradient has the closed form") {
  Rng rng(7);
  const int64_t d = 6, k = 4;
  Tensor x = rand_tensor(rng, {1, d});
  Tensor w = rand_tensor(rng, {d, k});
  std::vector<double> yv(k, 0.0);
  yv[2] = 1.0;
  Tensor y(Shape{1, k}, yv);

  auto tape = Tape::create();
  Tensor xl = tape->leaf(x), wl = tape->leaf(w), yl = tape->leaf(y);
  Tensor logits = ops::matmul(xl, wl);
  Tensor loss = ops::sum_all(ops::softmax_cross_entropy(logits, yl));
  Tensor g = gradient(loss, xl, false)[0];

  std::vector<double> p = ops::softmax_values(logits.detached().has_node() ? logits : logits);
  for (int64_t j = 0; j < d; ++j) {
    double want = 0.0;
    for (int64_t c = 0; c < k; ++c) {
      want += w.values()[static_cast<size_t>(j * k + c)] * (p[static_cast<size_t>(c)] - yv[static_cast<size_t>(c)]);
    }
    CHECK(g.values()[static_cast<size_t>(j)] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("every op matches central finite differences at 1e-5") {
  for (const auto& c : testutil::standard_op_cases(42)) {
    auto outcome = testutil::grad_check(c);
    INFO(c.name, " worst=", outcome.worst);
    CHECK(outcome.max_rel_error <= 1e-5);
  }
}

TEST_CASE("finite-difference oracle basics") {
  // f(x) = x^2 at 3
  Tensor p = Tensor::scalar(3.0);
  Tensor g = finite_difference_gradient(
      [](const Tensor& t) { return t.value() * t.value(); }, p, 1e-6);
  CHECK(g.value() == doctest::Approx(6.0).epsilon(1e-6));

  // constant function
  Tensor z = finite_difference_gradient([](const Tensor&) { return 4.2; },
                                        Tensor(Shape{3}, {1.0, 2.0, 3.0}), 1e-6);
  for (double v : z.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(finite_difference_gradient([](const Tensor&) { return 0.0; }, p, 0.0),
                  PreconditionError);

  // random 3-layer composition, fd vs reverse mode
  Rng rng(5);
  Tensor x = rand_tensor(rng, {4});
  Tensor w1 = rand_tensor(rng, {4, 5}), w2 = rand_tensor(rng, {5, 3}), w3 = rand_tensor(rng, {3});
  auto eval = [&](const Tensor& pt) {
    auto tape = Tape::create();
    Tensor xl = ops::reshape(tape->leaf(pt), {1, 4});
    Tensor h1 = ops::tanh(ops::matmul(xl, tape->leaf(w1)));
    Tensor h2 = ops::sigmoid(ops::matmul(h1, tape->leaf(w2)));
    Tensor out = ops::sum_all(ops::mul(ops::reshape(h2, {3}), tape->leaf(w3)));
    return out.value();
  };
  auto tape = Tape::create();
  Tensor xl = tape->leaf(x);
  Tensor xr = ops::reshape(xl, {1, 4});
  Tensor h1 = ops::tanh(ops::matmul(xr, tape->leaf(w1)));
  Tensor h2 = ops::sigmoid(ops::matmul(h1, tape->leaf(w2)));
  Tensor out = ops::sum_all(ops::mul(ops::reshape(h2, {3}), tape->leaf(w3)));
  Tensor ad = gradient(out, xl, false)[0];
  Tensor fd = finite_difference_gradient(eval, x, 1e-6);
  CHECK(rel_error(ad, fd) <= 1e-5);
}

TEST_CASE("gradient is linear in the output") {
  Rng rng(13);
  Tensor x = rand_tensor(rng, {5});
  Tensor wa = rand_tensor(rng, {5}), wb = rand_tensor(rng, {5});
  auto tape = Tape::create();
  Tensor xl = tape->leaf(x);
  Tensor f = ops::sum_all(ops::mul(ops::tanh(xl), tape->leaf(wa)));
  Tensor g = ops::sum_all(ops::mul(ops::sigmoid(xl), tape->leaf(wb)));
  const double a = 2.25, b = -0.75;
  Tensor h = ops::add(ops::scale(f, a), ops::scale(g, b));

  Tensor gf = gradient(f, xl, false)[0];
  Tensor gg = gradient(g, xl, false)[0];
  Tensor gh = gradient(h, xl, false)[0];
  for (size_t i = 0; i < 5; ++i) {
    CHECK(gh.values()[i] ==
          doctest::Approx(a * gf.values()[i] + b * gg.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("hessian from double differentiation is symmetric") {
  Rng rng(17);
  Tensor x = rand_tensor(rng, {2}, -1.0, 1.0);
  auto tape = Tape::create();
  Tensor xl = tape->leaf(x);
  // smooth scalar with cross terms: tanh(x0)*sigmoid(x1) + (x0*x1)^2
  Tensor x0 = ops::select(xl, 0), x1 = ops::select(xl, 1);
  Tensor f = ops::add(ops::mul(ops::tanh(x0), ops::sigmoid(x1)),
                      ops::mul(ops::mul(x0, x1), ops::mul(x0, x1)));
  Tensor g = gradient(f, xl, /*differentiable=*/true)[0];
  Tensor h01 = gradient(ops::select(g, 0), xl, false)[0];
  Tensor h10 = gradient(ops::select(g, 1), xl, false)[0];
  CHECK(h01.values()[1] == doctest::Approx(h10.values()[0]).epsilon(1e-8));
}

TEST_CASE("generation discipline") {
  Rng rng(3);
  auto tape = Tape::create();
  Tensor x = tape->leaf(rand_tensor(rng, {3}));
  Tensor f = ops::sum_all(ops::mul(ops::tanh(x), x));
  CHECK(tape->max_generation() == 0);
  const size_t nodes_before = tape->size();

  // non-differentiable pass: record untouched
  Tensor g0 = gradient(f, x, false)[0];
  CHECK(tape->max_generation() == 0);
  CHECK(tape->size() == nodes_before);
  CHECK_FALSE(g0.has_node());

  // differentiable pass raises the generation exactly once
  Tensor g1 = gradient(f, x, true)[0];
  CHECK(tape->max_generation() == 1);
  CHECK(g1.has_node());

  Tensor s = ops::sum_all(ops::mul(g1, g1));
  Tensor g2 = gradient(s, x, true)[0];
  CHECK(tape->max_generation() == 2);
  CHECK(g2.has_node());
}

TEST_CASE("gradient rejects non-scalar outputs and foreign tensors") {
  auto tape = Tape::create();
  Tensor x = tape->leaf(Shape{2}, {1.0, 2.0});
  Tensor y = ops::mul(x, x);
  CHECK_THROWS_AS(gradient(y, x, false), PreconditionError);

  auto other = Tape::create();
  Tensor z = other->leaf(Shape{}, {1.0});
  Tensor f = ops::sum_all(y);
  CHECK_THROWS_AS(gradient(f, z, false), PreconditionError);

  // detached tensors are not part of any record
  Tensor det = Tensor::scalar(1.0);
  CHECK_THROWS_AS(gradient(f, det, false), PreconditionError);
}

TEST_CASE("unreached wrt gets a zero gradient") {
  auto tape = Tape::create();
  Tensor x = tape->leaf(Shape{2}, {1.0, 2.0});
  Tensor unused = tape->leaf(Shape{3}, {1.0, 1.0, 1.0});
  Tensor f = ops::sum_all(ops::mul(x, x));
  std::vector<Tensor> wrt{x, unused};
  auto grads = gradient(f, wrt, false);
  CHECK(grads[1].shape() == Shape{3});
  for (double v : grads[1].values()) CHECK(v == 0.0);
}

TEST_CASE("forward and gradients are bit-deterministic") {
  auto run = [](std::vector<double>* fwd, std::vector<double>* grd) {
    Rng rng(23);
    auto tape = Tape::create();
    Tensor x = tape->leaf(rand_tensor(rng, {2, 3, 3, 2}));
    Tensor w = tape->leaf(rand_tensor(rng, {3, 3, 2, 2}));
    Tensor y = ops::conv2d(x, w, 1, 1);
    Tensor f = ops::mean_all(ops::mul(ops::tanh(y), y));
    Tensor g = gradient(f, x, false)[0];
    *fwd = f.detached().values();
    *grd = g.values();
  };
  std::vector<double> f1, g1, f2, g2;
  run(&f1, &g1);
  run(&f2, &g2);
  CHECK(std::memcmp(f1.data(), f2.data(), f1.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("op dispatch covers the published kinds") {
  auto kinds = ops::forward_op_kinds();
  CHECK(kinds.size() >= 18);
  auto tape = Tape::create();
  Tensor a = tape->leaf(Shape{2}, {1.0, 2.0});
  CHECK_THROWS_AS(ops::forward("no-such-op", std::vector<Tensor>{a}), PreconditionError);
  OpAttrs attrs;
  attrs.aux_shape = {2, 1};
  Tensor r = ops::forward("reshape", std::vector<Tensor>{a}, attrs);
  CHECK(r.shape() == Shape{2, 1});
}
