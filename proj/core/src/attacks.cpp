#include "jarn/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "jarn/errors.hpp"
#include "jarn/ops.hpp"
#include "jarn/rng.hpp"

namespace jarn::attacks {

double AttackConfig::step_size() const {
  if (eta > 0.0) return eta;
  return 2.5 * epsilon / static_cast<double>(std::max(iterations, 1));
}

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw PreconditionError("attack: epsilon must be >= 0");
  if (iterations < 1) throw PreconditionError("attack: iterations must be >= 1");
  if (eta < 0.0) throw PreconditionError("attack: eta must be > 0 (or 0 for the default)");
  if (clip_hi <= clip_lo) throw PreconditionError("attack: empty clip range");
}

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Batch gradient of the summed per-sample cross-entropy wrt the images; the
// sum makes each row the gradient of its own sample's loss.
std::vector<double> input_loss_grad(const nn::ParameterStore& model, const Tensor& images,
                                    const Tensor& labels) {
  auto tape = Tape::create();
  nn::BoundParams bound = nn::bind(*tape, model);
  Tensor x = tape->leaf(images);
  Tensor y = tape->leaf(labels);
  Tensor logits = nn::forward_logits(bound, x);
  Tensor loss = ops::sum_all(ops::softmax_cross_entropy(logits, y));
  return gradient(loss, x, /*differentiable=*/false)[0].values();
}

}  // namespace

std::vector<double> per_sample_losses(const nn::ParameterStore& model, const Tensor& images,
                                      const Tensor& labels) {
  auto tape = Tape::create();
  nn::BoundParams bound = nn::bind(*tape, model);
  Tensor x = tape->leaf(images);
  Tensor y = tape->leaf(labels);
  Tensor ce = ops::softmax_cross_entropy(nn::forward_logits(bound, x), y);
  return ce.values();
}

Tensor project_linf(const Tensor& delta, double eps) {
  if (eps < 0.0) throw PreconditionError("project-linf: eps must be >= 0");
  std::vector<double> out(delta.values().size());
  const auto& v = delta.values();
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], -eps, eps);
  return Tensor(delta.shape(), std::move(out));
}

namespace {

AdvBatch run_pgd(const nn::ParameterStore& model, const data::ImageBatch& batch,
                 const AttackConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (batch.images.shape().size() != 4) {
    throw ShapeError("attack: expected NHWC image batch, got " + shape_str(batch.images.shape()));
  }
  {
    Shape expect{batch.images.shape()[1], batch.images.shape()[2], batch.images.shape()[3]};
    if (expect != model.input_hwc) {
      throw ShapeError("attack: batch sample shape " + shape_str(expect) +
                       " does not match model input " + shape_str(model.input_hwc));
    }
  }

  const auto& x0 = batch.images.values();
  const double eps = cfg.epsilon;
  const double step = cfg.step_size();

  std::vector<double> x = x0;
  if (cfg.random_start && eps > 0.0) {
    Rng rng(seed_for(seed, "pgd-random-start"));
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] = std::clamp(x0[i] + rng.uniform(-eps, eps), cfg.clip_lo, cfg.clip_hi);
    }
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    Tensor xt(batch.images.shape(), x);
    std::vector<double> g = input_loss_grad(model, xt, batch.labels);
    for (size_t i = 0; i < x.size(); ++i) {
      double v = x[i] + step * sgn(g[i]);                   // ascend the loss
      v = x0[i] + std::clamp(v - x0[i], -eps, eps);         // l-inf ball projection
      x[i] = std::clamp(v, cfg.clip_lo, cfg.clip_hi);       // image domain
    }
  }

  AdvBatch out;
  out.original = batch;
  out.perturbed = Tensor(batch.images.shape(), std::move(x));

  out.clean_pred = nn::predict_classes(model, batch.images);
  out.adv_pred = nn::predict_classes(model, out.perturbed);
  const int64_t n = batch.count();
  out.success.resize(static_cast<size_t>(n));
  out.linf.resize(static_cast<size_t>(n));
  const int64_t px = out.perturbed.size() / n;
  const auto& pv = out.perturbed.values();
  for (int64_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (int64_t j = 0; j < px; ++j) {
      m = std::max(m, std::abs(pv[static_cast<size_t>(i * px + j)] -
                               x0[static_cast<size_t>(i * px + j)]));
    }
    out.linf[static_cast<size_t>(i)] = m;
    out.success[static_cast<size_t>(i)] =
        out.adv_pred[static_cast<size_t>(i)] != data::label_of(batch, i) ? 1 : 0;
  }
  out.loss_clean = per_sample_losses(model, batch.images, batch.labels);
  out.loss_adv = per_sample_losses(model, out.perturbed, batch.labels);
  return out;
}

}  // namespace

AdvBatch fgsm(const nn::ParameterStore& model, const data::ImageBatch& batch,
              const AttackConfig& cfg) {
  AttackConfig one = cfg;
  one.iterations = 1;
  one.eta = cfg.epsilon;
  one.random_start = false;
  return run_pgd(model, batch, one, 0);
}

AdvBatch pgd(const nn::ParameterStore& model, const data::ImageBatch& batch,
             const AttackConfig& cfg, uint64_t seed) {
  return run_pgd(model, batch, cfg, seed);
}

double transfer_attack(const nn::ParameterStore& source, const nn::ParameterStore& target,
                       const data::ImageBatch& batch, const AttackConfig& cfg, uint64_t seed) {
  if (source.input_hwc != target.input_hwc) {
    throw ShapeError("transfer: source input " + shape_str(source.input_hwc) +
                     " does not match target input " + shape_str(target.input_hwc));
  }
  AdvBatch crafted = pgd(source, batch, cfg, seed);
  return accuracy_on(target, crafted.perturbed, batch.labels);
}

double accuracy_on(const nn::ParameterStore& model, const Tensor& images, const Tensor& labels) {
  std::vector<int> pred = nn::predict_classes(model, images);
  const int64_t n = images.shape()[0];
  const int64_t k = labels.shape()[1];
  int64_t hits = 0;
  const auto& lv = labels.values();
  for (int64_t i = 0; i < n; ++i) {
    if (lv[static_cast<size_t>(i * k + pred[static_cast<size_t>(i)])] == 1.0) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace jarn::attacks
