#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ocgec/numerics/tape.hpp"

namespace ocgec::numerics {

using ScalarFn = std::function<Var(Tape&, Var)>;
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Floor of the denominator in the relative error, so that coordinates where
/// both gradients vanish compare by absolute difference.
inline constexpr double kGradCheckFloor = 1e-6;

/// Largest coordinate-wise |analytic − numeric| / max(|analytic|, |numeric|, floor),
/// where numeric = (f(x + eps) − f(x − eps)) / (2·eps).
/// Throws EvaluationError if f is not finite anywhere it is evaluated.
double grad_check(const ScalarFn& f, const Tensor& point, double eps);

/// Same check over several inputs at once (e.g. every parameter of a network).
double grad_check(const MultiScalarFn& f, std::span<const Tensor> points, double eps);

/// Evaluates f once on a fresh tape and returns the gradients of every input.
std::vector<Tensor> tape_gradients(const MultiScalarFn& f, std::span<const Tensor> points);

}  // namespace ocgec::numerics
