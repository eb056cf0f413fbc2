#include "jarn/trainers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "jarn/attacks.hpp"
#include "jarn/errors.hpp"
#include "jarn/ops.hpp"

namespace jarn::trainers {

namespace {
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

Regime regime_from_string(const std::string& name) {
  if (name == "standard") return Regime::kStandard;
  if (name == "uniform-noise") return Regime::kUniformNoise;
  if (name == "double-backprop") return Regime::kDoubleBackprop;
  if (name == "fgsm-at") return Regime::kFgsmAt;
  if (name == "pgd-at") return Regime::kPgdAt;
  if (name == "jarn") return Regime::kJarn;
  if (name == "jarn-at1") return Regime::kJarnAt1;
  throw PreconditionError("unknown training regime '" + name + "'");
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kStandard: return "standard";
    case Regime::kUniformNoise: return "uniform-noise";
    case Regime::kDoubleBackprop: return "double-backprop";
    case Regime::kFgsmAt: return "fgsm-at";
    case Regime::kPgdAt: return "pgd-at";
    case Regime::kJarn: return "jarn";
    case Regime::kJarnAt1: return "jarn-at1";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (lambda_adv < 0.0) throw PreconditionError("train config: lambda_adv must be >= 0");
  if (disc_update_interval < 1) {
    throw PreconditionError("train config: disc_update_interval must be >= 1");
  }
  if (jarn_start_fraction < 0.0 || jarn_start_fraction > 1.0) {
    throw PreconditionError("train config: jarn_start_fraction must be in [0,1]");
  }
  if (epochs < 1 || batch_size < 1) {
    throw PreconditionError("train config: epochs and batch_size must be >= 1");
  }
  if (epsilon < 0.0) throw PreconditionError("train config: epsilon must be >= 0");
  if (at_iterations < 0) throw PreconditionError("train config: at_iterations must be >= 0");
}

TrainerState init_trainer(Regime regime, const TrainConfig& cfg, const Shape& input_hwc,
                          int64_t num_classes, const nn::NetworkSpec* cls_spec,
                          const nn::NetworkSpec* disc_spec) {
  cfg.validate();
  TrainerState st;
  nn::NetworkSpec cspec = cls_spec ? *cls_spec : nn::classifier_spec_28x28();
  st.cls = nn::build_classifier(cspec, input_hwc, num_classes, cfg.seed);
  st.cls_opt = nn::make_sgd_momentum(st.cls, cfg.lr_cls, cfg.momentum);
  if (regime == Regime::kJarn || regime == Regime::kJarnAt1) {
    st.apt = nn::build_adaptor(input_hwc[2], cfg.seed);
    st.apt_opt = nn::make_adam(st.apt, cfg.lr_apt);
    nn::NetworkSpec dspec = disc_spec ? *disc_spec : nn::discriminator_spec_28x28();
    st.disc = nn::build_discriminator(dspec, input_hwc, cfg.seed);
    st.disc_opt = nn::make_adam(st.disc, cfg.lr_disc);
  }
  st.noise_rng = Rng(seed_for(cfg.seed, "uniform-noise"));
  return st;
}

JacobianResult input_jacobian(const nn::BoundParams& classifier, const Tensor& images,
                              const Tensor& labels, bool differentiable) {
  Tensor logits = nn::forward_logits(classifier, images);
  Tensor ce = ops::softmax_cross_entropy(logits, labels);
  JacobianResult r;
  r.loss_sum = ops::sum_all(ce);
  r.loss_mean = ops::scale(r.loss_sum, 1.0 / static_cast<double>(images.shape()[0]));
  r.jacobian = gradient(r.loss_sum, images, differentiable)[0];
  return r;
}

namespace {

void check_finite(const TrainerState& st, double l_cls, double l_adv, bool has_adv) {
  if (std::isfinite(l_cls) && (!has_adv || std::isfinite(l_adv))) return;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "non-finite loss at iteration %lld: l_cls=%g l_adv=%g; aborting with state "
                "snapshot (trace has %zu rows)",
                static_cast<long long>(st.iteration), l_cls, l_adv, st.trace.size());
  throw NumericalAbort(buf);
}

// Plain cross-entropy step on the given batch; the loss is assembled as
// scale(sum, 1/n) exactly like the JARN path so a lambda_adv=0 JARN step is
// bit-identical.
double erm_step(TrainerState& st, const Tensor& images, const Tensor& labels) {
  auto tape = Tape::create();
  nn::BoundParams bound = nn::bind(*tape, st.cls);
  Tensor x = tape->leaf(images);
  Tensor y = tape->leaf(labels);
  Tensor logits = nn::forward_logits(bound, x);
  Tensor ce = ops::softmax_cross_entropy(logits, y);
  Tensor loss = ops::scale(ops::sum_all(ce), 1.0 / static_cast<double>(images.shape()[0]));
  std::vector<Tensor> grads = gradient(loss, bound.leaves, /*differentiable=*/false);
  nn::optimizer_step(st.cls, grads, st.cls_opt);
  return loss.value();
}

double double_backprop_step(TrainerState& st, const data::ImageBatch& batch,
                            const TrainConfig& cfg) {
  auto tape = Tape::create();
  nn::BoundParams bound = nn::bind(*tape, st.cls);
  Tensor x = tape->leaf(batch.images);
  Tensor y = tape->leaf(batch.labels);
  JacobianResult jr = input_jacobian(bound, x, y, /*differentiable=*/true);
  // mean over the batch of |grad_x loss_i|^2
  Tensor penalty = ops::scale(ops::sum_all(ops::mul(jr.jacobian, jr.jacobian)),
                              cfg.db_lambda / static_cast<double>(batch.count()));
  Tensor total = ops::add(jr.loss_mean, penalty);
  std::vector<Tensor> grads = gradient(total, bound.leaves, /*differentiable=*/false);
  nn::optimizer_step(st.cls, grads, st.cls_opt);
  return jr.loss_mean.value();
}

attacks::AttackConfig at_config(const TrainConfig& cfg, int iterations) {
  attacks::AttackConfig a;
  a.epsilon = cfg.epsilon;
  a.iterations = iterations;
  a.eta = iterations == 1 ? cfg.epsilon : cfg.at_eta;
  a.random_start = iterations > 1;  // off for single-step crafting
  return a;
}

uint64_t iteration_seed(const TrainConfig& cfg, int64_t iteration) {
  uint64_t s = cfg.seed ^ (0x5851f42d4c957f2dull * static_cast<uint64_t>(iteration + 1));
  return splitmix64(s);
}

double adversarial_training_step(TrainerState& st, const data::ImageBatch& batch,
                                 const TrainConfig& cfg, int iterations) {
  attacks::AdvBatch adv =
      attacks::pgd(st.cls, batch, at_config(cfg, iterations), iteration_seed(cfg, st.iteration));
  return erm_step(st, adv.perturbed, batch.labels);
}

}  // namespace

void jarn_step(TrainerState& state, const data::ImageBatch& batch, const TrainConfig& cfg,
               bool at1) {
  if (state.apt.params.empty() || state.disc.params.empty()) {
    throw PreconditionError("jarn_step: trainer state lacks adaptor/discriminator stores");
  }
  state.iteration += 1;
  const int64_t n = batch.count();

  // (0) adversarial examples for the classification term, crafted before any
  // update of this iteration; JARN-AT1 only.
  Tensor at_images;
  if (at1) {
    attacks::AdvBatch adv = attacks::pgd(state.cls, batch, at_config(cfg, 1),
                                         iteration_seed(cfg, state.iteration));
    at_images = adv.perturbed;
  }

  // (1) noise-augment the batch
  data::ImageBatch noised = data::uniform_noise_augment(batch, cfg.epsilon, state.noise_rng);

  auto tape = Tape::create();
  nn::BoundParams cls_bound = nn::bind(*tape, state.cls);
  nn::BoundParams apt_bound = nn::bind(*tape, state.apt);
  nn::BoundParams disc_bound = nn::bind(*tape, state.disc);
  Tensor x = tape->leaf(noised.images);
  Tensor y = tape->leaf(noised.labels);

  // (2) classification loss and input Jacobian, recorded differentiably
  JacobianResult jr = input_jacobian(cls_bound, x, y, /*differentiable=*/true);

  // (3) adapt the Jacobian into the image domain
  Tensor j_adapted = nn::forward_network(apt_bound, jr.jacobian);

  // (4) adversarial loss from discriminator logits;
  // log D = -softplus(-t), log(1-D) = -softplus(t)
  Tensor t_x = ops::reshape(nn::forward_logits(disc_bound, x), Shape{n});
  Tensor t_j = ops::reshape(nn::forward_logits(disc_bound, j_adapted), Shape{n});
  Tensor l_adv = ops::add(ops::scale(ops::mean_all(ops::softplus(ops::scale(t_x, -1.0))), -1.0),
                          ops::scale(ops::mean_all(ops::softplus(t_j)), -1.0));
  // Generator objective; optionally the non-saturating -log D(J') form.
  Tensor l_gen = cfg.non_saturating ? ops::mean_all(ops::softplus(ops::scale(t_j, -1.0)))
                                    : l_adv;

  // Classification term for the theta update.
  Tensor l_cls = jr.loss_mean;
  if (at1) {
    Tensor xa = tape->leaf(at_images);
    Tensor logits_at = nn::forward_logits(cls_bound, xa);
    Tensor ce_at = ops::softmax_cross_entropy(logits_at, y);
    l_cls = ops::scale(ops::sum_all(ce_at), 1.0 / static_cast<double>(n));
  }

  // (5a..5c) gradients first, all from the same pre-update snapshot
  Tensor theta_obj =
      cfg.lambda_adv == 0.0 ? l_cls : ops::add(l_cls, ops::scale(l_gen, cfg.lambda_adv));
  std::vector<Tensor> g_theta = gradient(theta_obj, cls_bound.leaves, /*differentiable=*/false);
  std::vector<Tensor> g_psi = gradient(l_gen, apt_bound.leaves, /*differentiable=*/false);
  const bool disc_due = state.iteration % cfg.disc_update_interval == 0;
  std::vector<Tensor> g_phi;
  if (disc_due) g_phi = gradient(l_adv, disc_bound.leaves, /*differentiable=*/false);

  check_finite(state, l_cls.value(), l_adv.value(), true);

  nn::optimizer_step(state.cls, g_theta, state.cls_opt);
  nn::optimizer_step(state.apt, g_psi, state.apt_opt);
  if (disc_due) nn::optimizer_step(state.disc, g_phi, state.disc_opt, /*ascend=*/true);

  TraceRow row;
  row.iteration = state.iteration;
  row.l_cls = l_cls.value();
  row.l_adv = l_adv.value();
  row.has_adv = true;
  state.trace.push_back(row);
}

void train_step(Regime regime, TrainerState& state, const data::ImageBatch& batch,
                const TrainConfig& cfg, bool jarn_phase) {
  if (jarn_phase && (regime == Regime::kJarn || regime == Regime::kJarnAt1)) {
    jarn_step(state, batch, cfg, /*at1=*/regime == Regime::kJarnAt1);
    return;  // jarn_step owns the counter and records its own trace row
  }
  state.iteration += 1;
  TraceRow row;
  row.iteration = state.iteration;
  switch (regime) {
    case Regime::kStandard:
    case Regime::kJarn:  // warmup phase
      row.l_cls = erm_step(state, batch.images, batch.labels);
      break;
    case Regime::kUniformNoise: {
      data::ImageBatch noised = data::uniform_noise_augment(batch, cfg.epsilon, state.noise_rng);
      row.l_cls = erm_step(state, noised.images, noised.labels);
      break;
    }
    case Regime::kDoubleBackprop:
      row.l_cls = double_backprop_step(state, batch, cfg);
      break;
    case Regime::kFgsmAt:
    case Regime::kJarnAt1:  // warmup phase keeps the 1-step adversarial term
      row.l_cls = adversarial_training_step(state, batch, cfg, 1);
      break;
    case Regime::kPgdAt:
      row.l_cls = adversarial_training_step(state, batch, cfg, cfg.at_iterations);
      break;
  }
  check_finite(state, row.l_cls, 0.0, false);
  state.trace.push_back(row);
}

int64_t jarn_phase_start(const TrainConfig& cfg, int64_t iters_per_epoch) {
  const int64_t total = iters_per_epoch * cfg.epochs;
  if (cfg.jarn_start_fraction <= 0.0) return total + 1;  // never
  const double warm = static_cast<double>(total) * (1.0 - cfg.jarn_start_fraction);
  return static_cast<int64_t>(std::ceil(warm)) + 1;  // iterations are 1-based
}

TrainerState train(Regime regime, const data::DatasetHandle& data, const TrainConfig& cfg,
                   const nn::NetworkSpec* cls_spec, const nn::NetworkSpec* disc_spec) {
  cfg.validate();
  if (data.count == 0) throw PreconditionError("train: dataset is empty");
  if (regime == Regime::kPgdAt && cfg.at_iterations < 1) {
    throw PreconditionError("train: pgd-at requires at_iterations >= 1");
  }
  Shape input_hwc{data.h, data.w, data.c};
  TrainerState st =
      init_trainer(regime, cfg, input_hwc, data.num_classes, cls_spec, disc_spec);

  const int64_t iters_per_epoch = (data.count + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t phase_start = jarn_phase_start(cfg, iters_per_epoch);
  const auto run_start = Clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    const std::vector<int64_t> order = data::epoch_permutation(data, epoch);
    for (int64_t off = 0; off < data.count; off += cfg.batch_size) {
      data::ImageBatch batch = data::make_batch(data, order, off, cfg.batch_size);
      const bool jarn_phase = st.iteration + 1 >= phase_start;
      train_step(regime, st, batch, cfg, jarn_phase);
      st.trace.back().seconds = seconds_since(run_start);
    }
    st.epoch_seconds.push_back(seconds_since(epoch_start));
  }
  return st;
}

double epoch_timer(const TrainerState& state) {
  if (state.epoch_seconds.empty()) {
    throw PreconditionError("epoch_timer: no completed epochs");
  }
  double s = 0.0;
  for (double v : state.epoch_seconds) s += v;
  return s / static_cast<double>(state.epoch_seconds.size());
}

void write_trace_csv(const TrainerState& state, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& config_echo) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("trace: cannot open for writing: " + path);
  for (const auto& [k, v] : config_echo) os << "# " << k << "=" << v << "\n";
  os << "iteration,l_cls,l_adv,seconds\n";
  char buf[96];
  for (const TraceRow& r : state.trace) {
    os << r.iteration << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.l_cls);
    os << buf << ',';
    if (r.has_adv) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.l_adv);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.6f", r.seconds);
    os << ',' << buf << '\n';
  }
  if (!os.flush()) throw IoError("trace: write failed: " + path);
}

}  // namespace jarn::trainers
