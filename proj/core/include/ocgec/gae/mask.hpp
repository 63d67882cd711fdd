#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ocgec/numerics/tensor.hpp"

namespace ocgec::gae {

struct MaskPlan {
  double rate = 0.0;
  std::vector<std::size_t> indices;  // ascending, unique
};

/// ⌈rate·N⌉ distinct nodes drawn by `seed`. Throws SpecError unless 0 ≤ rate ≤ 1.
MaskPlan make_mask_plan(std::size_t num_nodes, double rate, std::uint64_t seed);

/// Copy of `features` with the planned rows zeroed. Throws PlanError for an
/// index outside [0, N).
numerics::Tensor mask_nodes(const numerics::Tensor& features, const MaskPlan& plan);

}  // namespace ocgec::gae
