#include <doctest.h>

#include <cstring>

#include "jarn/attacks.hpp"
#include "jarn/data.hpp"
#include "jarn/errors.hpp"
#include "jarn/nn.hpp"
#include "jarn/ops.hpp"
#include "support/test_util.hpp"

using namespace jarn;
using testutil::rand_tensor;

namespace {

// Two-class linear model over flattened pixels: logits = (w.x, -w.x).
nn::ParameterStore linear_pair_model(const std::vector<double>& w, const Shape& hwc) {
  nn::NetworkSpec spec;
  spec.layers = {nn::FlattenLayer{}, nn::DenseLayer{2}};
  nn::ParameterStore m = nn::build_classifier(spec, hwc, 2, 0);
  const auto d = static_cast<int64_t>(w.size());
  std::vector<double> wm(static_cast<size_t>(d * 2));
  for (int64_t i = 0; i < d; ++i) {
    wm[static_cast<size_t>(i * 2)] = w[static_cast<size_t>(i)];
    wm[static_cast<size_t>(i * 2 + 1)] = -w[static_cast<size_t>(i)];
  }
  m.params[0].value = Tensor(Shape{d, 2}, wm);
  m.params[1].value = Tensor::zeros({2});
  return m;
}

nn::ParameterStore quick_trained_model(const data::DatasetHandle& ds, int steps) {
  nn::NetworkSpec spec;
  spec.layers = {nn::Conv2dLayer{4, 3, 2, 1}, nn::ActLayer{nn::Act::kRelu}, nn::FlattenLayer{},
                 nn::DenseLayer{ds.num_classes}};
  nn::ParameterStore m =
      nn::build_classifier(spec, {ds.h, ds.w, ds.c}, ds.num_classes, 7);
  nn::OptimizerState opt = nn::make_sgd_momentum(m, 0.1, 0.9);
  data::ImageBatch all = data::full_batch(ds);
  for (int s = 0; s < steps; ++s) {
    auto tape = Tape::create();
    nn::BoundParams bound = nn::bind(*tape, m);
    Tensor x = tape->leaf(all.images);
    Tensor y = tape->leaf(all.labels);
    Tensor loss = ops::mean_all(ops::softmax_cross_entropy(nn::forward_logits(bound, x), y));
    nn::optimizer_step(m, gradient(loss, bound.leaves, false), opt);
  }
  return m;
}

}  // namespace

TEST_CASE("project_linf clamps to the ball") {
  Tensor d(Shape{3}, {0.5, -0.7, 0.1});
  Tensor p = attacks::project_linf(d, 0.3);
  CHECK(p.values()[0] == 0.3);
  CHECK(p.values()[1] == -0.3);
  CHECK(p.values()[2] == 0.1);

  // idempotent on interior points
  Tensor q = attacks::project_linf(p, 0.3);
  CHECK(std::memcmp(p.values().data(), q.values().data(), 3 * sizeof(double)) == 0);
  CHECK_THROWS_AS(attacks::project_linf(d, -1.0), PreconditionError);

  // nearest-point property against a dense 2-d grid over the ball
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const double eps = 0.25;
    Tensor delta = rand_tensor(rng, {2}, -1.0, 1.0);
    Tensor proj = attacks::project_linf(delta, eps);
    double best = 1e300;
    const int res = 201;
    for (int i = 0; i < res; ++i) {
      for (int j = 0; j < res; ++j) {
        const double a = -eps + 2 * eps * i / (res - 1.0);
        const double b = -eps + 2 * eps * j / (res - 1.0);
        const double da = delta.values()[0] - a, db = delta.values()[1] - b;
        best = std::min(best, da * da + db * db);
      }
    }
    const double da = delta.values()[0] - proj.values()[0];
    const double db = delta.values()[1] - proj.values()[1];
    CHECK(da * da + db * db <= best + 1e-4);  // grid resolution slack
  }
}

TEST_CASE("fgsm on a linear pair model matches the closed-form sign pattern") {
  // loss gradient wrt x is 2(p0-1) w for true class 0, so the step is
  // -eps * sign(w) elementwise (before clipping)
  const std::vector<double> w{0.8, -0.3, 0.0, 1.2};
  nn::ParameterStore m = linear_pair_model(w, {2, 2, 1});
  data::ImageBatch batch;
  batch.images = Tensor(Shape{1, 2, 2, 1}, {0.5, 0.5, 0.5, 0.5});
  batch.labels = Tensor(Shape{1, 2}, {1.0, 0.0});

  attacks::AttackConfig cfg;
  cfg.epsilon = 0.2;
  attacks::AdvBatch adv = attacks::fgsm(m, batch, cfg);
  for (size_t i = 0; i < w.size(); ++i) {
    const double sign_w = w[i] > 0 ? 1.0 : (w[i] < 0 ? -1.0 : 0.0);
    CHECK(adv.perturbed.values()[i] == doctest::Approx(0.5 - 0.2 * sign_w).epsilon(1e-12));
  }

  SUBCASE("eps = 0 keeps the batch and the accuracy") {
    cfg.epsilon = 0.0;
    attacks::AdvBatch same = attacks::fgsm(m, batch, cfg);
    CHECK(std::memcmp(same.perturbed.values().data(), batch.images.values().data(),
                      4 * sizeof(double)) == 0);
    CHECK(attacks::accuracy_on(m, same.perturbed, batch.labels) ==
          attacks::accuracy_on(m, batch.images, batch.labels));
  }
}

TEST_CASE("fgsm raises the loss on nearly every sample of a trained model") {
  data::DatasetHandle ds = data::synthetic_dataset(3, 8, 60, 21);
  nn::ParameterStore m = quick_trained_model(ds, 120);
  data::ImageBatch all = data::full_batch(ds);
  attacks::AttackConfig cfg;
  cfg.epsilon = 0.1;
  attacks::AdvBatch adv = attacks::fgsm(m, all, cfg);
  int64_t went_up = 0;
  for (size_t i = 0; i < adv.loss_adv.size(); ++i) {
    if (adv.loss_adv[i] >= adv.loss_clean[i]) ++went_up;
  }
  CHECK(static_cast<double>(went_up) / static_cast<double>(adv.loss_adv.size()) >= 0.95);
}

TEST_CASE("pgd with one step, eta = eps, no random start is bit-identical to fgsm") {
  data::DatasetHandle ds = data::synthetic_dataset(2, 8, 20, 5);
  nn::ParameterStore m = quick_trained_model(ds, 40);
  data::ImageBatch all = data::full_batch(ds);

  attacks::AttackConfig f;
  f.epsilon = 0.15;
  attacks::AdvBatch a = attacks::fgsm(m, all, f);

  attacks::AttackConfig p;
  p.epsilon = 0.15;
  p.eta = 0.15;
  p.iterations = 1;
  p.random_start = false;
  attacks::AdvBatch b = attacks::pgd(m, all, p);

  REQUIRE(a.perturbed.values().size() == b.perturbed.values().size());
  CHECK(std::memcmp(a.perturbed.values().data(), b.perturbed.values().data(),
                    a.perturbed.values().size() * sizeof(double)) == 0);
}

TEST_CASE("pgd flip threshold on w=(1,-1), x=(2,1) matches the corner oracle") {
  nn::ParameterStore m = linear_pair_model({1.0, -1.0}, {1, 2, 1});
  data::ImageBatch batch;
  batch.images = Tensor(Shape{1, 1, 2, 1}, {2.0, 1.0});
  batch.labels = Tensor(Shape{1, 2}, {1.0, 0.0});

  auto corner_margin = [&](double eps) {
    // exhaustive over sign-pattern corners of the l-inf ball
    double best = 1e300;
    for (double s0 : {-eps, eps}) {
      for (double s1 : {-eps, eps}) {
        best = std::min(best, (2.0 + s0) - (1.0 + s1));
      }
    }
    return best;  // w.(x+delta) minimized
  };

  for (double eps : {0.3, 0.45, 0.49, 0.51, 0.6}) {
    attacks::AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.iterations = 20;
    cfg.random_start = false;
    cfg.clip_lo = -10.0;  // keep the example outside image clipping
    cfg.clip_hi = 10.0;
    attacks::AdvBatch adv = attacks::pgd(m, batch, cfg);
    const double margin =
        adv.perturbed.values()[0] - adv.perturbed.values()[1];  // w.(x+delta)
    CHECK(margin == doctest::Approx(corner_margin(eps)).epsilon(1e-9));
    const bool flipped = adv.adv_pred[0] != 0;
    CHECK(flipped == (corner_margin(eps) < 0.0));
    CHECK(flipped == (eps > 0.5));  // prediction flips exactly past 1/2
  }
}

TEST_CASE("pgd respects the budget, is seed-deterministic, and mutates nothing") {
  data::DatasetHandle ds = data::glyph_digits_dataset(3, 13, "t");
  nn::ParameterStore m = quick_trained_model(ds, 30);
  data::ImageBatch all = data::full_batch(ds);

  std::vector<double> params_before = m.params[0].value.values();
  std::vector<double> images_before = all.images.values();

  attacks::AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.iterations = 10;
  cfg.random_start = true;
  attacks::AdvBatch a = attacks::pgd(m, all, cfg, 42);
  attacks::AdvBatch b = attacks::pgd(m, all, cfg, 42);
  attacks::AdvBatch c = attacks::pgd(m, all, cfg, 43);

  for (int64_t i = 0; i < all.count(); ++i) {
    CHECK(a.linf[static_cast<size_t>(i)] <= cfg.epsilon + 1e-9);
  }
  for (double v : a.perturbed.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(std::memcmp(a.perturbed.values().data(), b.perturbed.values().data(),
                    a.perturbed.values().size() * sizeof(double)) == 0);
  CHECK(a.perturbed.values() != c.perturbed.values());

  // purity: neither the model nor the input batch changed
  CHECK(m.params[0].value.values() == params_before);
  CHECK(all.images.values() == images_before);
}

TEST_CASE("transfer attack degenerate cases") {
  data::DatasetHandle ds = data::synthetic_dataset(2, 8, 30, 3);
  nn::ParameterStore m = quick_trained_model(ds, 60);
  data::ImageBatch all = data::full_batch(ds);

  attacks::AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.iterations = 5;
  cfg.random_start = false;

  // source == target: equals white-box robust accuracy
  attacks::AdvBatch wb = attacks::pgd(m, all, cfg, 9);
  int64_t hits = 0;
  for (uint8_t s : wb.success) {
    if (!s) ++hits;
  }
  const double white_box = 100.0 * static_cast<double>(hits) / static_cast<double>(all.count());
  CHECK(attacks::transfer_attack(m, m, all, cfg, 9) == doctest::Approx(white_box));

  // eps = 0: equals clean accuracy
  attacks::AttackConfig zero = cfg;
  zero.epsilon = 0.0;
  CHECK(attacks::transfer_attack(m, m, all, zero, 9) ==
        doctest::Approx(attacks::accuracy_on(m, all.images, all.labels)));

  // incompatible input shapes are rejected
  data::DatasetHandle other = data::synthetic_dataset(2, 12, 5, 3);
  nn::ParameterStore m12 = quick_trained_model(other, 1);
  CHECK_THROWS_AS(attacks::transfer_attack(m, m12, all, cfg, 9), ShapeError);
  CHECK_THROWS_AS(attacks::pgd(m12, all, cfg, 9), ShapeError);
}

TEST_CASE("attack config validation") {
  attacks::AttackConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.iterations = 4;
  cfg.epsilon = -0.1;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.epsilon = 0.2;
  cfg.eta = 0.0;
  CHECK(cfg.step_size() == doctest::Approx(2.5 * 0.2 / 4));
}
