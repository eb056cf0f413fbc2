#pragma once

#include <cstdint>
#include <vector>

#include "jarn/data.hpp"
#include "jarn/nn.hpp"

namespace jarn::attacks {

// l-inf attack budget and schedule. eta <= 0 selects the 2.5*eps/iterations
// default at run time.
struct AttackConfig {
  double epsilon = 0.3;
  double eta = 0.0;
  int iterations = 1;
  bool random_start = false;
  double clip_lo = 0.0, clip_hi = 1.0;

  double step_size() const;
  void validate() const;
};

struct AdvBatch {
  data::ImageBatch original;
  Tensor perturbed;
  std::vector<uint8_t> success;   // prediction != true label after the attack
  std::vector<int> clean_pred, adv_pred;
  std::vector<double> linf;       // per-sample max |perturbed - original|
  std::vector<double> loss_clean, loss_adv;
};

// Per-sample cross-entropy values at the given images.
std::vector<double> per_sample_losses(const nn::ParameterStore& model, const Tensor& images,
                                      const Tensor& labels);

// Single signed-gradient step: x' = clip(x + eps * sign(grad_x L), 0, 1).
AdvBatch fgsm(const nn::ParameterStore& model, const data::ImageBatch& batch,
              const AttackConfig& cfg);

// Iterative ascent with l-inf ball projection after each step and optional
// uniform random start. iterations=1, eta=eps, random_start=false is
// bit-identical to fgsm.
AdvBatch pgd(const nn::ParameterStore& model, const data::ImageBatch& batch,
             const AttackConfig& cfg, uint64_t seed = 0);

// Elementwise clamp of a perturbation to the l-inf ball of radius eps.
Tensor project_linf(const Tensor& delta, double eps);

// Accuracy of `target` on examples crafted against `source`.
double transfer_attack(const nn::ParameterStore& source, const nn::ParameterStore& target,
                       const data::ImageBatch& batch, const AttackConfig& cfg,
                       uint64_t seed = 0);

double accuracy_on(const nn::ParameterStore& model, const Tensor& images, const Tensor& labels);

}  // namespace jarn::attacks
