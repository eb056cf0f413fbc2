#include "jarn/theory.hpp"

#include <algorithm>
#include <cmath>

#include "jarn/errors.hpp"
#include "jarn/ops.hpp"
#include "jarn/tape.hpp"

namespace jarn::theory {

void DiscreteDistributionPair::validate(double tol) const {
  if (p_data.size() != p_g.size() || p_data.empty()) {
    throw PreconditionError("distribution pair: supports differ or are empty");
  }
  double sd = 0.0, sg = 0.0;
  for (size_t i = 0; i < p_data.size(); ++i) {
    if (p_data[i] < 0.0 || p_g[i] < 0.0) {
      throw PreconditionError("distribution pair: negative probability");
    }
    sd += p_data[i];
    sg += p_g[i];
  }
  if (std::abs(sd - 1.0) > tol || std::abs(sg - 1.0) > tol) {
    throw PreconditionError("distribution pair: probabilities do not sum to 1");
  }
}

std::vector<double> optimal_discriminator(const DiscreteDistributionPair& pair) {
  pair.validate();
  std::vector<double> d(pair.p_data.size());
  for (size_t i = 0; i < d.size(); ++i) {
    const double denom = pair.p_data[i] + pair.p_g[i];
    d[i] = denom == 0.0 ? 0.5 : pair.p_data[i] / denom;
  }
  return d;
}

namespace {
double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }
}  // namespace

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double kl_pm = 0.0, kl_qm = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_pm += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kl_qm += q[i] * std::log(q[i] / m);
  }
  return 0.5 * (kl_pm + kl_qm);
}

AdversarialLossValue adversarial_loss_value(const DiscreteDistributionPair& pair) {
  pair.validate();
  const std::vector<double> dstar = optimal_discriminator(pair);
  double direct = 0.0;
  for (size_t i = 0; i < dstar.size(); ++i) {
    direct += xlogy(pair.p_data[i], dstar[i]);
    direct += xlogy(pair.p_g[i], 1.0 - dstar[i]);
  }
  AdversarialLossValue v;
  v.direct = direct;
  v.closed = 2.0 * js_divergence(pair.p_data, pair.p_g) - std::log(4.0);
  return v;
}

double AdversarialLossValue::checked(double tol) const {
  if (std::abs(direct - closed) > tol) {
    throw NumericalAbort("adversarial loss: direct expectation and closed form disagree by " +
                         std::to_string(std::abs(direct - closed)));
  }
  return direct;
}

std::vector<double> LinearModel::logits(const std::vector<double>& x) const {
  if (static_cast<int64_t>(x.size()) != d) {
    throw ShapeError("linear model: input dim " + std::to_string(x.size()) + ", expected " +
                     std::to_string(d));
  }
  std::vector<double> z(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) {
    double s = bias.empty() ? 0.0 : bias[static_cast<size_t>(i)];
    const double* w = weights.data() + i * d;
    for (int64_t j = 0; j < d; ++j) s += w[j] * x[static_cast<size_t>(j)];
    z[static_cast<size_t>(i)] = s;
  }
  return z;
}

namespace {

struct TopTwo {
  int64_t i_star, j_star;
};

TopTwo top_two(const std::vector<double>& z) {
  int64_t i0 = 0;
  for (size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[static_cast<size_t>(i0)]) i0 = static_cast<int64_t>(i);
  }
  int64_t i1 = -1;
  for (size_t i = 0; i < z.size(); ++i) {
    if (static_cast<int64_t>(i) == i0) continue;
    if (i1 < 0 || z[i] > z[static_cast<size_t>(i1)]) i1 = static_cast<int64_t>(i);
  }
  if (std::abs(z[static_cast<size_t>(i0)] - z[static_cast<size_t>(i1)]) < kTieTolerance) {
    throw PreconditionError("linearized robustness: top logits tied; rho is undefined");
  }
  return {i0, i1};
}

}  // namespace

double linearized_robustness(const LinearModel& model, const std::vector<double>& x) {
  const std::vector<double> z = model.logits(x);
  const TopTwo t = top_two(z);  // rejects ties
  double rho = 1e308;
  for (int64_t j = 0; j < model.k; ++j) {
    if (j == t.i_star) continue;
    const double gap = z[static_cast<size_t>(t.i_star)] - z[static_cast<size_t>(j)];
    double norm2 = 0.0;
    for (int64_t q = 0; q < model.d; ++q) {
      const double gq = model.weights[static_cast<size_t>(t.i_star * model.d + q)] -
                        model.weights[static_cast<size_t>(j * model.d + q)];
      norm2 += gq * gq;
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;  // parallel logits never cross
    rho = std::min(rho, gap / norm);
  }
  return rho;
}

double alignment(const LinearModel& model, const std::vector<double>& x) {
  const std::vector<double> z = model.logits(x);
  const TopTwo t = top_two(z);
  double dot = 0.0, norm2 = 0.0;
  for (int64_t q = 0; q < model.d; ++q) {
    const double gq = model.weights[static_cast<size_t>(t.i_star * model.d + q)] -
                      model.weights[static_cast<size_t>(t.j_star * model.d + q)];
    dot += x[static_cast<size_t>(q)] * gq;
    norm2 += gq * gq;
  }
  if (norm2 == 0.0) throw PreconditionError("alignment: top-two logit gradient vanishes");
  return std::abs(dot) / std::sqrt(norm2);
}

double alignment(const nn::ParameterStore& classifier, const Tensor& image) {
  auto tape = Tape::create();
  nn::BoundParams bound = nn::bind(*tape, classifier);
  Tensor x = tape->leaf(image);
  Tensor logits = nn::forward_logits(bound, x);
  TopTwo t = top_two(logits.values());
  Tensor gap = ops::sub(ops::select(logits, t.i_star), ops::select(logits, t.j_star));
  Tensor g = gradient(gap, x, /*differentiable=*/false)[0];
  double dot = 0.0, norm2 = 0.0;
  const auto& gv = g.values();
  const auto& xv = image.values();
  for (size_t i = 0; i < gv.size(); ++i) {
    dot += gv[i] * xv[i];
    norm2 += gv[i] * gv[i];
  }
  if (norm2 == 0.0) throw PreconditionError("alignment: top-two logit gradient vanishes");
  return std::abs(dot) / std::sqrt(norm2);
}

BoundCheck verify_bound(const LinearModel& model, const std::vector<double>& x) {
  const std::vector<double> z = model.logits(x);
  const TopTwo t = top_two(z);
  BoundCheck out;
  out.rho = linearized_robustness(model, x);
  out.alpha = alignment(model, x);
  out.c = model.bias.empty() ? 0.0
                             : std::abs(model.bias[static_cast<size_t>(t.i_star)] -
                                        model.bias[static_cast<size_t>(t.j_star)]);
  double norm2 = 0.0;
  for (int64_t q = 0; q < model.d; ++q) {
    const double gq = model.weights[static_cast<size_t>(t.i_star * model.d + q)] -
                      model.weights[static_cast<size_t>(t.j_star * model.d + q)];
    norm2 += gq * gq;
  }
  out.g_norm = std::sqrt(norm2);
  out.holds = out.rho <= out.alpha + out.c / out.g_norm + 1e-9;
  return out;
}

}  // namespace jarn::theory
