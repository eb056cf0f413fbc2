#pragma once

#include <vector>

#include "jarn/nn.hpp"
#include "jarn/tensor.hpp"

namespace jarn::theory {

// A pair of discrete distributions over a shared finite support.
struct DiscreteDistributionPair {
  std::vector<double> p_data;
  std::vector<double> p_g;

  void validate(double tol = 1e-12) const;
};

// D*(x) = p_data(x) / (p_data(x) + p_g(x)); 0.5 where both vanish.
std::vector<double> optimal_discriminator(const DiscreteDistributionPair& pair);

// Jensen-Shannon divergence with natural logarithms; 0 log 0 taken as 0.
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct AdversarialLossValue {
  double direct;  // E_p[log D*] + E_q[log(1 - D*)]
  double closed;  // 2 JS(p || q) - log 4

  // Direct value, after checking the two routes agree within tol.
  double checked(double tol = 1e-12) const;
};

// The adversarial loss under the optimal discriminator, computed both by
// plugging D* into the expectation and by the closed JS form.
AdversarialLossValue adversarial_loss_value(const DiscreteDistributionPair& pair);

// k-class linear classifier: row i of W holds the weights of logit i.
struct LinearModel {
  int64_t k = 0, d = 0;
  std::vector<double> weights;  // k x d row-major
  std::vector<double> bias;     // k

  std::vector<double> logits(const std::vector<double>& x) const;
};

// Logit-gap-over-gradient-norm distance estimate; exact minimal l2 distance
// to a decision boundary for linear models. Tied top logits are rejected.
double linearized_robustness(const LinearModel& model, const std::vector<double>& x);

// |<x, g>| / |g| with g the gradient of the top-two logit difference.
double alignment(const LinearModel& model, const std::vector<double>& x);
// Same quantity for a classifier network; g comes from the gradient engine.
double alignment(const nn::ParameterStore& classifier, const Tensor& image);

struct BoundCheck {
  double rho;
  double alpha;
  double c;       // |top-two bias gap|, exact for linear models
  double g_norm;
  bool holds;     // rho <= alpha + c/|g| + 1e-9
};

BoundCheck verify_bound(const LinearModel& model, const std::vector<double>& x);

// Logit gaps closer than this are treated as ties.
inline constexpr double kTieTolerance = 1e-12;

}  // namespace jarn::theory
