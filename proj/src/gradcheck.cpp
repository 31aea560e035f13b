#include "relparcel/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "relparcel/errors.hpp"

namespace relparcel {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor param = x.clone(true);
  return grad_check([&] { return f(param); }, {param}, h);
}

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double h) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor loss = f();
  if (loss.numel() != 1) throw ContractError("grad_check: function must be scalar-valued");
  backward(loss);

  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic = p.grad();
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      worst = std::max(worst, err);
    }
    p.zero_grad();
  }
  return worst;
}

}  // namespace relparcel
