#ifndef SARL_GRADCHECK_HPP_
#define SARL_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sarl/tape.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t worst_input = 0;
  std::vector<double> rel_errors;  // one per input

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using ScalarFunction = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/**
 * Compares reverse-mode gradients of `fn` against central differences.
 *
 * The error for each input tensor is ||analytic - numeric|| / max(||analytic||,
 * ||numeric||, floor), with the floor keeping all-zero gradients from turning
 * finite-difference noise into a large ratio.
 */
inline GradCheckResult gradient_check(const ScalarFunction& fn, const std::vector<Tensor<double>>& inputs,
                                      double step = 1e-5, double floor = 1e-6) {
  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x));
    return fn(tape, vars).value().item();
  };

  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.leaf(x));
  Var<double> loss = fn(tape, vars);
  tape.backward(loss);

  GradCheckResult result;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Vector<double>& analytic = vars[k].grad().data();
    Vector<double> numeric(inputs[k].size());
    for (Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      probe[k][i] = x0 + step;
      const double up = evaluate(probe);
      probe[k][i] = x0 - step;
      const double down = evaluate(probe);
      probe[k][i] = x0;
      numeric[i] = (up - down) / (2 * step);
    }
    const double denom = std::max({analytic.norm(), numeric.norm(), floor});
    const double err = (analytic - numeric).norm() / denom;
    result.rel_errors.push_back(err);
    if (k == 0 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_input = k;
    }
  }
  return result;
}

}  // namespace sarl

#endif  // SARL_GRADCHECK_HPP_
