#include "lrva/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrva {

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps,
                           double tol) {
  if (!x.defined() || x.numel() == 0) throw std::invalid_argument("grad_check: empty input");
  x.set_requires_grad(true);
  x.zero_grad();

  double y0 = 0.0;
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor y = f(x);
    if (y.numel() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
    y0 = y.item();
    tape.backward(y);
    analytic = x.has_grad() ? x.grad() : std::vector<double>(static_cast<std::size_t>(x.numel()), 0.0);
  }
  if (f(x).item() != y0) {
    throw std::runtime_error("grad_check: nondeterministic function (double evaluation mismatch)");
  }

  GradCheckResult result;
  double* xd = x.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double orig = xd[i];
    xd[i] = orig + eps;
    const double yp = f(x).item();
    xd[i] = orig - eps;
    const double ym = f(x).item();
    xd[i] = orig;
    const double numeric = (yp - ym) / (2.0 * eps);
    const double a = analytic[static_cast<std::size_t>(i)];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
    if (rel >= result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric;
    }
  }
  result.pass = result.max_rel_err < tol;
  return result;
}

}  // namespace lrva
