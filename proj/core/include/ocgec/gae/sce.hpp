#pragma once

#include <cstddef>
#include <span>

#include "ocgec/numerics/tape.hpp"

namespace ocgec::gae {

struct SceConfig {
  double gamma = 2.0;   // ≥ 1
  double delta = 1e-12; // floor on row norms

  void validate() const;
};

/// Mean over the listed rows of (1 − cos(xᵢ, x̂ᵢ))^γ, with cos computed from
/// norms floored at δ. Throws SpecError when `rows` is empty.
numerics::Var sce_loss(numerics::Var target, numerics::Var reconstruction, std::span<const std::size_t> rows,
                       const SceConfig& cfg = {});

/// Same value without recording anything.
double sce_value(const numerics::Tensor& target, const numerics::Tensor& reconstruction,
                 std::span<const std::size_t> rows, const SceConfig& cfg = {});

}  // namespace ocgec::gae
