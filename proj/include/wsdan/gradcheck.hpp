#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wsdan/tensor.hpp"

namespace wsdan {

struct GradCheckEntry {
  std::string name;
  size_t coords = 0;
  double max_rel_err = 0.0;
  size_t flagged = 0;  // coordinates whose relative error exceeded tol
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tol = 0.0;
  double step = 0.0;

  bool pass() const;
  std::string to_string() const;
};

/// Central-difference comparison against already-populated analytic grads.
///
/// `eval` recomputes the scalar objective from the current parameter values
/// (deterministically; dropout must be off). For every coordinate of every
/// requires_grad parameter the relative error
///     |a - n| / max(|a|, |n|, 1e-8)
/// is computed with n = (f(p+h) - f(p-h)) / 2h. Frozen parameters
/// (requires_grad false) are skipped. Two initial evaluations must agree
/// bitwise or a ContractError("non-deterministic objective") is thrown.
GradCheckReport grad_check(const std::function<double()>& eval,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double h, double tol);

}  // namespace wsdan
