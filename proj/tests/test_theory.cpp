#include <doctest.h>

#include <cmath>

#include "jarn/errors.hpp"
#include "jarn/rng.hpp"
#include "jarn/theory.hpp"

using namespace jarn;

namespace {

theory::DiscreteDistributionPair random_pair(Rng& rng, size_t n) {
  theory::DiscreteDistributionPair pair;
  pair.p_data.resize(n);
  pair.p_g.resize(n);
  double sd = 0.0, sg = 0.0;
  for (size_t i = 0; i < n; ++i) {
    pair.p_data[i] = -std::log(1.0 - rng.uniform01());
    pair.p_g[i] = -std::log(1.0 - rng.uniform01());
    sd += pair.p_data[i];
    sg += pair.p_g[i];
  }
  for (size_t i = 0; i < n; ++i) {
    pair.p_data[i] /= sd;
    pair.p_g[i] /= sg;
  }
  return pair;
}

theory::LinearModel random_linear(Rng& rng, int64_t k, int64_t d, bool with_bias) {
  theory::LinearModel m;
  m.k = k;
  m.d = d;
  m.weights.resize(static_cast<size_t>(k * d));
  for (auto& w : m.weights) w = rng.normal();
  m.bias.assign(static_cast<size_t>(k), 0.0);
  if (with_bias) {
    for (auto& b : m.bias) b = 0.5 * rng.normal();
  }
  return m;
}

// Minimal l2 distance to any decision boundary by bisection along the
// steepest-descent direction of each pairwise logit gap.
double boundary_distance_by_bisection(const theory::LinearModel& m,
                                      const std::vector<double>& x) {
  const std::vector<double> z = m.logits(x);
  int64_t top = 0;
  for (size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[static_cast<size_t>(top)]) top = static_cast<int64_t>(i);
  }
  double best = 1e300;
  for (int64_t j = 0; j < m.k; ++j) {
    if (j == top) continue;
    std::vector<double> dir(static_cast<size_t>(m.d));
    double norm2 = 0.0;
    for (int64_t q = 0; q < m.d; ++q) {
      dir[static_cast<size_t>(q)] = m.weights[static_cast<size_t>(top * m.d + q)] -
                                    m.weights[static_cast<size_t>(j * m.d + q)];
      norm2 += dir[static_cast<size_t>(q)] * dir[static_cast<size_t>(q)];
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    auto gap_at = [&](double t) {
      std::vector<double> p = x;
      for (int64_t q = 0; q < m.d; ++q) {
        p[static_cast<size_t>(q)] -= t * dir[static_cast<size_t>(q)] / norm;
      }
      const std::vector<double> zz = m.logits(p);
      return zz[static_cast<size_t>(top)] - zz[static_cast<size_t>(j)];
    };
    double lo = 0.0, hi = 1.0;
    while (gap_at(hi) > 0.0 && hi < 1e12) hi *= 2.0;
    if (gap_at(hi) > 0.0) continue;  // never crosses
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gap_at(mid) > 0.0 ? lo : hi) = mid;
    }
    best = std::min(best, 0.5 * (lo + hi));
  }
  return best;
}

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cssv = 0.0, theta = 0.0;
  int rho = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    cssv += u[i];
    const double t = (cssv - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  (void)rho;
  for (auto& x : v) x = std::max(x - theta, 0.0);
  return v;
}

}  // namespace

TEST_CASE("optimal discriminator closed form") {
  theory::DiscreteDistributionPair eq{{0.25, 0.25, 0.5}, {0.25, 0.25, 0.5}};
  for (double d : theory::optimal_discriminator(eq)) CHECK(d == 0.5);

  theory::DiscreteDistributionPair mixed{{0.5, 0.5}, {0.25, 0.75}};
  auto d = theory::optimal_discriminator(mixed);
  CHECK(d[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  theory::DiscreteDistributionPair disjoint{{1.0, 0.0}, {0.0, 1.0}};
  auto dd = theory::optimal_discriminator(disjoint);
  CHECK(dd[0] == 1.0);
  CHECK(dd[1] == 0.0);

  theory::DiscreteDistributionPair bad{{0.5, 0.4}, {0.5, 0.5}};
  CHECK_THROWS_AS(theory::optimal_discriminator(bad), PreconditionError);
  theory::DiscreteDistributionPair neg{{1.5, -0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(theory::optimal_discriminator(neg), PreconditionError);
}

TEST_CASE("adversarial loss value: -log4 at equality, 0 on disjoint support") {
  theory::DiscreteDistributionPair eq{{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}};
  auto v = theory::adversarial_loss_value(eq);
  CHECK(std::abs(v.direct - (-std::log(4.0))) <= 1e-12);
  CHECK(std::abs(v.closed - (-std::log(4.0))) <= 1e-12);
  CHECK(v.checked() == v.direct);

  theory::DiscreteDistributionPair disjoint{{0.5, 0.5, 0.0, 0.0}, {0.0, 0.0, 0.5, 0.5}};
  auto w = theory::adversarial_loss_value(disjoint);
  CHECK(std::abs(w.checked() - 0.0) <= 1e-12);  // 2 log2 - log4
}

TEST_CASE("1000 random pairs: routes agree, floor at -log4, equality only at p=q") {
  Rng rng(99);
  const double floor = -std::log(4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    auto pair = random_pair(rng, 2 + trial % 7);
    auto v = theory::adversarial_loss_value(pair);
    CHECK(std::abs(v.direct - v.closed) <= 1e-12);
    CHECK(v.direct >= floor - 1e-15);
    double gap = 0.0;
    for (size_t i = 0; i < pair.p_data.size(); ++i) {
      gap = std::max(gap, std::abs(pair.p_data[i] - pair.p_g[i]));
    }
    if (v.direct <= floor + 1e-12) CHECK(gap <= 1e-9);
    if (gap > 1e-6) CHECK(v.direct > floor);
  }
}

TEST_CASE("perturbing p_g strictly increases the loss above -log4") {
  Rng rng(123);
  const double floor = -std::log(4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 3 + trial % 4;
    auto base = random_pair(rng, n);
    base.p_g = base.p_data;
    // random signed perturbation, kept on the simplex
    std::vector<double> q = base.p_data;
    for (auto& v : q) v = std::max(1e-9, v + 0.05 * rng.normal());
    double s = 0.0;
    for (double v : q) s += v;
    for (auto& v : q) v /= s;
    theory::DiscreteDistributionPair pert{base.p_data, q};
    double gap = 0.0;
    for (size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(q[i] - base.p_data[i]));
    if (gap < 1e-9) continue;
    CHECK(theory::adversarial_loss_value(pert).checked() > floor);
  }
}

TEST_CASE("projected gradient descent on p_g converges to p_data") {
  Rng rng(31);
  const size_t n = 4;
  auto pair = random_pair(rng, n);
  std::vector<double> q(n, 1.0 / static_cast<double>(n));
  const double h = 1e-7;
  for (int step = 0; step < 4000; ++step) {
    std::vector<double> grad(n);
    for (size_t i = 0; i < n; ++i) {
      auto up = q, down = q;
      up[i] += h;
      down[i] = std::max(0.0, down[i] - h);
      double su = 0.0, sd = 0.0;
      for (size_t j = 0; j < n; ++j) {
        su += up[j];
        sd += down[j];
      }
      auto unorm = up, dnorm = down;
      for (size_t j = 0; j < n; ++j) {
        unorm[j] /= su;
        dnorm[j] /= sd;
      }
      grad[i] = (theory::adversarial_loss_value({pair.p_data, unorm}).checked() -
                 theory::adversarial_loss_value({pair.p_data, dnorm}).checked()) /
                (up[i] - down[i]);
    }
    for (size_t i = 0; i < n; ++i) q[i] -= 0.5 * grad[i];
    q = project_simplex(q);
  }
  for (size_t i = 0; i < n; ++i) {
    CHECK(q[i] == doctest::Approx(pair.p_data[i]).epsilon(0.02));
  }
}

TEST_CASE("linearized robustness closed form and tie rejection") {
  theory::LinearModel m;
  m.k = 2;
  m.d = 2;
  m.weights = {1.0, 0.0, 0.0, 1.0};  // rows (1,0) and (0,1)
  m.bias = {0.0, 0.0};
  const std::vector<double> x{2.0, 1.0};
  CHECK(theory::linearized_robustness(m, x) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  // on the boundary the top logits tie and rho is undefined
  CHECK_THROWS_AS(theory::linearized_robustness(m, {1.0, 1.0}), PreconditionError);
}

TEST_CASE("rho matches the bisection boundary oracle on 1000 random models") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    theory::LinearModel m = random_linear(rng, 3, 4, trial % 2 == 1);
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal();
    double rho;
    try {
      rho = theory::linearized_robustness(m, x);
    } catch (const PreconditionError&) {
      continue;  // tie; sampled on a boundary
    }
    const double oracle = boundary_distance_by_bisection(m, x);
    CHECK(rho == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("alignment special cases") {
  // g parallel to x -> alpha = |x|; g orthogonal -> 0
  theory::LinearModel m;
  m.k = 2;
  m.d = 2;
  m.weights = {2.0, 0.0, 0.0, 0.0};  // g = (2, 0)
  m.bias = {0.0, -1.0};              // breaks the logit tie at x orthogonal to g
  CHECK(theory::alignment(m, {3.0, 0.0}) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(theory::alignment(m, {0.0, 5.0}) == doctest::Approx(0.0));

  theory::LinearModel ex;
  ex.k = 2;
  ex.d = 2;
  ex.weights = {1.0, 0.0, 0.0, 1.0};
  ex.bias = {0.0, 0.0};
  // g = (1,-1), x = (2,1): alpha = |2-1|/sqrt(2)
  CHECK(theory::alignment(ex, {2.0, 1.0}) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("alignment through the gradient engine agrees with the closed form") {
  Rng rng(55);
  theory::LinearModel m = random_linear(rng, 4, 6, true);

  nn::NetworkSpec spec;
  spec.layers = {nn::FlattenLayer{}, nn::DenseLayer{4}};
  nn::ParameterStore net = nn::build_classifier(spec, {1, 6, 1}, 4, 0);
  std::vector<double> wt(static_cast<size_t>(6 * 4));
  for (int64_t i = 0; i < 6; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      wt[static_cast<size_t>(i * 4 + j)] = m.weights[static_cast<size_t>(j * 6 + i)];
    }
  }
  net.params[0].value = Tensor(Shape{6, 4}, wt);
  net.params[1].value = Tensor(Shape{4}, m.bias);

  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal();
    double closed;
    try {
      closed = theory::alignment(m, x);
    } catch (const PreconditionError&) {
      continue;
    }
    Tensor img(Shape{1, 1, 6, 1}, x);
    CHECK(theory::alignment(net, img) == doctest::Approx(closed).epsilon(1e-9));
  }
}

TEST_CASE("theorem 2 bound holds with the bias-gap constant") {
  // zero bias: C = 0 and rho <= alpha exactly; the worked example is tight
  theory::LinearModel ex;
  ex.k = 2;
  ex.d = 2;
  ex.weights = {1.0, 0.0, 0.0, 1.0};
  ex.bias = {0.0, 0.0};
  auto b = theory::verify_bound(ex, {2.0, 1.0});
  CHECK(b.c == 0.0);
  CHECK(b.holds);
  CHECK(b.rho == doctest::Approx(b.alpha).epsilon(1e-12));  // tight case

  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    theory::LinearModel m = random_linear(rng, 3 + trial % 3, 5, true);
    std::vector<double> x(5);
    for (auto& v : x) v = rng.normal();
    try {
      auto r = theory::verify_bound(m, x);
      CHECK(r.holds);
      CHECK(r.rho <= r.alpha + r.c / r.g_norm + 1e-9);
      ++checked;
    } catch (const PreconditionError&) {
    }
  }
  CHECK(checked >= 990);
}

TEST_CASE("rho is scale-invariant under positive logit scaling") {
  Rng rng(88);
  theory::LinearModel m = random_linear(rng, 3, 4, true);
  std::vector<double> x{0.3, -0.7, 1.1, 0.2};
  const double rho = theory::linearized_robustness(m, x);
  theory::LinearModel scaled = m;
  for (auto& w : scaled.weights) w *= 3.7;
  for (auto& b : scaled.bias) b *= 3.7;
  CHECK(theory::linearized_robustness(scaled, x) == doctest::Approx(rho).epsilon(1e-12));
}
