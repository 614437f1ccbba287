#pragma once

#include <functional>

#include "lrva/tensor.hpp"

namespace lrva {

struct GradCheckResult {
  bool pass = false;
  double max_rel_err = 0.0;
  std::int64_t worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central-difference check of the tape gradient of a scalar-valued f at x.
// Relative error uses max(|analytic|, |numeric|, 1e-3) as denominator so the
// floor dominates only where both slopes are tiny. f is evaluated twice at
// the same point first; any output mismatch means f is nondeterministic and
// the check throws rather than reporting meaningless errors.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                           double eps = 1e-5, double tol = 1e-4);

}  // namespace lrva
