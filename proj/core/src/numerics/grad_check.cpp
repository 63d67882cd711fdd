#include "ocgec/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ocgec/error.hpp"

namespace ocgec::numerics {
namespace {

double evaluate(const MultiScalarFn& f, std::span<const Tensor> points) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const Tensor& p : points) vars.push_back(tape.constant(p));
  const double value = f(tape, vars).value().item();
  if (!std::isfinite(value)) throw EvaluationError("grad_check: function is not finite");
  return value;
}

}  // namespace

std::vector<Tensor> tape_gradients(const MultiScalarFn& f, std::span<const Tensor> points) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const Tensor& p : points) vars.push_back(tape.variable(p));
  Var out = f(tape, vars);
  if (!std::isfinite(out.value().item())) throw EvaluationError("grad_check: function is not finite");
  tape.backward(out);
  std::vector<Tensor> grads;
  grads.reserve(vars.size());
  for (Var v : vars) grads.push_back(tape.grad(v));
  return grads;
}

double grad_check(const MultiScalarFn& f, std::span<const Tensor> points, double eps) {
  const std::vector<Tensor> analytic = tape_gradients(f, points);
  std::vector<Tensor> probe(points.begin(), points.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double original = probe[k][i];
      probe[k][i] = original + eps;
      const double up = evaluate(f, probe);
      probe[k][i] = original - eps;
      const double down = evaluate(f, probe);
      probe[k][i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(const ScalarFn& f, const Tensor& point, double eps) {
  const MultiScalarFn wrapped = [&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); };
  return grad_check(wrapped, std::span<const Tensor>(&point, 1), eps);
}

}  // namespace ocgec::numerics
