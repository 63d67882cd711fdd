#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ocgec/numerics/tensor.hpp"

namespace ocgec::numerics {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  std::size_t step() const noexcept { return step_; }
  const std::vector<Tensor>& first_moment() const noexcept { return m_; }
  const std::vector<Tensor>& second_moment() const noexcept { return v_; }

 private:
  friend void adam_step(std::span<Tensor>, std::span<const Tensor>, AdamState&, double);

  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t step_ = 0;
};

/// One bias-corrected Adam update of every parameter; increments the step.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               double lr);

}  // namespace ocgec::numerics
