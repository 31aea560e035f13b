#ifndef RELPARCEL_GRADCHECK_HPP
#define RELPARCEL_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "relparcel/tensor.hpp"

namespace relparcel {

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Error per component is |analytic - numeric| / max(1, |analytic|);
/// the maximum over all components is returned.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Same check over several parameter tensors that `f` closes over. The
/// parameters' gradients are cleared before and after.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double h = 1e-5);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Op-level suite (tolerance 1e-5) plus the composed network (tolerance 1e-4).
std::vector<GradCheckEntry> run_grad_check_suite(unsigned long long seed);

}  // namespace relparcel

#endif  // RELPARCEL_GRADCHECK_HPP
