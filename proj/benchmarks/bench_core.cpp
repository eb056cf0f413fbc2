#include <benchmark/benchmark.h>

#include "jarn/attacks.hpp"
#include "jarn/data.hpp"
#include "jarn/nn.hpp"
#include "jarn/ops.hpp"
#include "jarn/rng.hpp"
#include "jarn/trainers.hpp"

namespace {

using namespace jarn;

Tensor rand_tensor(Rng& rng, Shape shape) {
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

// The middle conv of the 28x28 classifier, the dominant kernel of a step.
void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(1);
  Tensor x = rand_tensor(rng, {64, 14, 14, 64});
  Tensor w = rand_tensor(rng, {5, 5, 64, 128});
  for (auto _ : state) {
    auto tape = Tape::create();
    benchmark::DoNotOptimize(ops::conv2d(tape->leaf(x), tape->leaf(w), 2, 2));
  }
}
BENCHMARK(BM_Conv2dForward)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(1);
  Tensor x = rand_tensor(rng, {64, 14, 14, 64});
  Tensor w = rand_tensor(rng, {5, 5, 64, 128});
  for (auto _ : state) {
    auto tape = Tape::create();
    Tensor xl = tape->leaf(x);
    Tensor wl = tape->leaf(w);
    Tensor loss = ops::sum_all(ops::conv2d(xl, wl, 2, 2));
    std::vector<Tensor> wrt{xl, wl};
    benchmark::DoNotOptimize(gradient(loss, wrt, false));
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_Matmul(benchmark::State& state) {
  Rng rng(2);
  Tensor a = rand_tensor(rng, {256, 4096});
  Tensor b = rand_tensor(rng, {4096, 10});
  for (auto _ : state) {
    auto tape = Tape::create();
    benchmark::DoNotOptimize(ops::matmul(tape->leaf(a), tape->leaf(b)));
  }
}
BENCHMARK(BM_Matmul)->Unit(benchmark::kMillisecond);

// One full three-party training iteration at desk scale.
void BM_JarnStep(benchmark::State& state) {
  data::DatasetHandle ds = data::glyph_digits_dataset(13, 3, "train");
  trainers::TrainConfig cfg;
  cfg.seed = 1;
  cfg.batch_size = 64;
  trainers::TrainerState st =
      trainers::init_trainer(trainers::Regime::kJarn, cfg, {28, 28, 1}, 10);
  data::ImageBatch batch = data::make_batch(ds, data::epoch_permutation(ds, 0), 0, 64);
  for (auto _ : state) {
    trainers::jarn_step(st, batch, cfg);
  }
}
BENCHMARK(BM_JarnStep)->Unit(benchmark::kMillisecond);

void BM_PgdStep(benchmark::State& state) {
  data::DatasetHandle ds = data::glyph_digits_dataset(13, 4, "train");
  trainers::TrainConfig tcfg;
  tcfg.seed = 2;
  trainers::TrainerState st =
      trainers::init_trainer(trainers::Regime::kStandard, tcfg, {28, 28, 1}, 10);
  data::ImageBatch batch = data::make_batch(ds, data::epoch_permutation(ds, 0), 0, 64);
  attacks::AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.iterations = 1;
  cfg.eta = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(attacks::pgd(st.cls, batch, cfg, 3));
  }
}
BENCHMARK(BM_PgdStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
