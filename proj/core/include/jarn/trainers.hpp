#pragma once

#include <string>
#include <vector>

#include "jarn/data.hpp"
#include "jarn/nn.hpp"
#include "jarn/rng.hpp"

namespace jarn::trainers {

enum class Regime : uint8_t {
  kStandard,
  kUniformNoise,
  kDoubleBackprop,
  kFgsmAt,
  kPgdAt,
  kJarn,
  kJarnAt1,
};

Regime regime_from_string(const std::string& name);
const char* regime_name(Regime r);

struct TrainConfig {
  double lambda_adv = 1.0;
  double lr_cls = 0.01;      // alpha
  double lr_apt = 1e-3;      // beta
  double lr_disc = 1e-3;     // gamma
  double momentum = 0.9;
  int disc_update_interval = 10;
  double jarn_start_fraction = 0.25;  // adversarial regularization in the final fraction
  int epochs = 10;
  int batch_size = 64;
  double epsilon = 0.3;      // uniform-noise and AT budget
  int at_iterations = 0;     // 0 = regime default (1 for fgsm-at, 7 for pgd-at)
  double at_eta = 0.0;       // 0 = 2.5*eps/iterations
  double db_lambda = 0.01;   // double-backprop penalty weight
  bool non_saturating = false;  // generator term -log D(J') instead of full L_adv
  uint64_t seed = 0;

  void validate() const;
};

struct TraceRow {
  int64_t iteration = 0;
  double l_cls = 0.0;
  double l_adv = 0.0;
  bool has_adv = false;  // false outside the JARN phase (L_adv not computed)
  double seconds = 0.0;  // wall-clock at the end of the step
};

struct TrainerState {
  nn::ParameterStore cls, apt, disc;
  nn::OptimizerState cls_opt, apt_opt, disc_opt;
  int64_t iteration = 0;
  std::vector<TraceRow> trace;
  std::vector<double> epoch_seconds;
  Rng noise_rng{0};
};

// Builds the three stores (adaptor/discriminator only for the JARN regimes)
// and their optimizers: sgd-momentum for the classifier, adam for the rest.
TrainerState init_trainer(Regime regime, const TrainConfig& cfg, const Shape& input_hwc,
                          int64_t num_classes, const nn::NetworkSpec* cls_spec = nullptr,
                          const nn::NetworkSpec* disc_spec = nullptr);

// One iteration of the three-party update: noise-augment, classification
// loss, input Jacobian (recorded differentiably), adapted Jacobian,
// adversarial loss, then the theta/psi/phi updates. With at1=true the
// classification term is computed on 1-step adversarial examples instead of
// the noised batch (the Jacobian path keeps the noised input).
void jarn_step(TrainerState& state, const data::ImageBatch& batch, const TrainConfig& cfg,
               bool at1 = false);

// One iteration of the given regime (jarn_phase switches the jarn regimes
// between their warmup behavior and the adversarially regularized step).
void train_step(Regime regime, TrainerState& state, const data::ImageBatch& batch,
                const TrainConfig& cfg, bool jarn_phase);

// Full run: epoch loop with per-epoch reshuffling and wall-clock bookkeeping.
TrainerState train(Regime regime, const data::DatasetHandle& data, const TrainConfig& cfg,
                   const nn::NetworkSpec* cls_spec = nullptr,
                   const nn::NetworkSpec* disc_spec = nullptr);

// First iteration (1-based) at which the JARN phase is active.
int64_t jarn_phase_start(const TrainConfig& cfg, int64_t iters_per_epoch);

// Mean wall-clock seconds per completed epoch.
double epoch_timer(const TrainerState& state);

// Loss-trace CSV: leading "# key=value" config-echo lines, then
// iteration,l_cls,l_adv,seconds (l_adv empty outside the JARN phase).
void write_trace_csv(const TrainerState& state, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& config_echo);

// Gradient of the summed per-sample cross-entropy wrt images, plus the batch
// mean loss, on one record with the Jacobian recorded differentiably.
struct JacobianResult {
  Tensor jacobian;   // same shape as the images
  Tensor loss_sum;   // recorded scalar
  Tensor loss_mean;  // recorded scalar
};
JacobianResult input_jacobian(const nn::BoundParams& classifier, const Tensor& images,
                              const Tensor& labels, bool differentiable = true);

}  // namespace jarn::trainers
