#include "jarn/finite_diff.hpp"

#include <cmath>

#include "jarn/errors.hpp"

namespace jarn {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& point, double step) {
  if (!(step > 0.0)) throw PreconditionError("finite-difference: step must be > 0");
  std::vector<double> grad(point.values().size());
  std::vector<double> work = point.values();
  for (size_t i = 0; i < work.size(); ++i) {
    const double saved = work[i];
    work[i] = saved + step;
    const double up = f(Tensor(point.shape(), work));
    work[i] = saved - step;
    const double down = f(Tensor(point.shape(), work));
    work[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return Tensor(point.shape(), std::move(grad));
}

double rel_error(const Tensor& a, const Tensor& b, double floor) {
  if (a.shape() != b.shape()) {
    throw ShapeError("rel-error: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double diff = 0.0, na = 0.0, nb = 0.0;
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) {
    diff = std::max(diff, std::abs(av[i] - bv[i]));
    na = std::max(na, std::abs(av[i]));
    nb = std::max(nb, std::abs(bv[i]));
  }
  return diff / std::max({na, nb, floor});
}

}  // namespace jarn
