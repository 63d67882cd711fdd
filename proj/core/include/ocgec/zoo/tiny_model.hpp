#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocgec/numerics/tape.hpp"
#include "ocgec/rng.hpp"
#include "ocgec/zoo/dataset.hpp"

namespace ocgec::zoo {

struct ConvLayer {
  std::size_t filters = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
};

struct DenseLayer {
  std::size_t outputs = 0;
};

using LayerSpec = std::variant<ConvLayer, DenseLayer>;

/// Feed-forward stack: conv layers, then (after flattening) dense layers,
/// ReLU between consecutive layers and a softmax head on the last.
struct Architecture {
  ImageShape input;
  std::vector<LayerSpec> layers;

  /// Conv(8, 3×3) → Conv(16, 3×3) → Dense(num_classes).
  static Architecture standard(ImageShape input, std::size_t num_classes);
};

struct LayerGeometry {
  bool is_conv = false;
  numerics::Shape weight_shape;  // conv: [f×c×kh×kw]; dense: [out×in]
  numerics::Shape bias_shape;
  numerics::Shape input_shape;   // conv: [c×h×w]; dense: [in]
  numerics::Shape output_shape;
  std::size_t units = 0;         // filters or output neurons
  std::size_t fan_in = 0;        // c·kh·kw or in
};

/// Per-layer shapes. Throws SpecError when the layers do not compose, when a
/// conv layer follows a dense one, or when there is no conv layer.
std::vector<LayerGeometry> resolve(const Architecture& arch);

struct LayerParams {
  numerics::Tensor weight;
  numerics::Tensor bias;
};

struct TinyModel {
  Architecture arch;
  std::vector<LayerParams> layers;

  std::size_t num_classes() const;
  /// weight, bias, weight, bias, ... in layer order.
  std::vector<numerics::Tensor> parameters() const;
  void set_parameters(std::span<const numerics::Tensor> params);
};

/// Records the forward pass; `params` is laid out as TinyModel::parameters().
numerics::Var forward(numerics::Tape& tape, std::span<const numerics::Var> params,
                      std::span<const LayerGeometry> geometry, numerics::Var image);

std::vector<double> logits(const TinyModel& model, const numerics::Tensor& image);
/// argmax of the logits, lowest index on ties.
std::size_t predict(const TinyModel& model, const numerics::Tensor& image);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

}  // namespace ocgec::zoo
