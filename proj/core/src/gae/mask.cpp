#include "ocgec/gae/mask.hpp"

#include <algorithm>
#include <cmath>

#include "ocgec/error.hpp"
#include "ocgec/zoo/dataset.hpp"

namespace ocgec::gae {

MaskPlan make_mask_plan(std::size_t num_nodes, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw SpecError("mask rate must lie in [0, 1]");
  const auto count = std::min(
      num_nodes, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(num_nodes) - 1e-9)));
  std::vector<std::size_t> order = zoo::shuffled_indices(num_nodes, seed);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return {rate, std::move(order)};
}

numerics::Tensor mask_nodes(const numerics::Tensor& features, const MaskPlan& plan) {
  if (features.rank() != 2) throw DimensionError("mask_nodes expects an N×d matrix");
  numerics::Tensor out = features;
  for (std::size_t r : plan.indices) {
    if (r >= features.dim(0)) {
      throw PlanError("mask index " + std::to_string(r) + " out of range for " + std::to_string(features.dim(0)) +
                      " nodes");
    }
    std::fill(out.row(r).begin(), out.row(r).end(), 0.0);
  }
  return out;
}

}  // namespace ocgec::gae
