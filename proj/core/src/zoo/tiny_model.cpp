#include "ocgec/zoo/tiny_model.hpp"

#include <algorithm>

#include "ocgec/error.hpp"
#include "ocgec/numerics/ops.hpp"

namespace ocgec::zoo {

using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

Architecture Architecture::standard(ImageShape input, std::size_t num_classes) {
  return {input, {ConvLayer{8, 3, 3}, ConvLayer{16, 3, 3}, DenseLayer{num_classes}}};
}

std::vector<LayerGeometry> resolve(const Architecture& arch) {
  if (arch.layers.empty()) throw SpecError("architecture has no layers");
  std::vector<LayerGeometry> out;
  std::size_t c = arch.input.channels, h = arch.input.height, w = arch.input.width;
  bool flattened = false;
  std::size_t features = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    LayerGeometry g;
    if (const auto* conv = std::get_if<ConvLayer>(&arch.layers[i])) {
      if (flattened) throw SpecError("conv layer " + std::to_string(i) + " follows a dense layer");
      if (conv->filters == 0 || conv->kernel_h == 0 || conv->kernel_w == 0) {
        throw SpecError("conv layer " + std::to_string(i) + " has a zero dimension");
      }
      if (conv->kernel_h > h || conv->kernel_w > w) {
        throw SpecError("conv layer " + std::to_string(i) + " kernel exceeds its " + std::to_string(h) +
                        "x" + std::to_string(w) + " input");
      }
      g.is_conv = true;
      g.weight_shape = {conv->filters, c, conv->kernel_h, conv->kernel_w};
      g.bias_shape = {conv->filters};
      g.input_shape = {c, h, w};
      h = h - conv->kernel_h + 1;
      w = w - conv->kernel_w + 1;
      c = conv->filters;
      g.output_shape = {c, h, w};
      g.units = conv->filters;
      g.fan_in = g.weight_shape[1] * conv->kernel_h * conv->kernel_w;
    } else {
      const auto& dense = std::get<DenseLayer>(arch.layers[i]);
      if (dense.outputs == 0) throw SpecError("dense layer " + std::to_string(i) + " has no outputs");
      if (!flattened) {
        features = c * h * w;
        flattened = true;
      }
      g.weight_shape = {dense.outputs, features};
      g.bias_shape = {dense.outputs};
      g.input_shape = {features};
      g.output_shape = {dense.outputs};
      g.units = dense.outputs;
      g.fan_in = features;
      features = dense.outputs;
    }
    out.push_back(std::move(g));
  }
  if (!out.front().is_conv) throw SpecError("architecture needs at least one conv layer");
  return out;
}

std::size_t TinyModel::num_classes() const {
  const LayerGeometry last = resolve(arch).back();
  return last.is_conv ? numerics::shape_size(last.output_shape) : last.units;
}

std::vector<Tensor> TinyModel::parameters() const {
  std::vector<Tensor> params;
  params.reserve(2 * layers.size());
  for (const LayerParams& l : layers) {
    params.push_back(l.weight);
    params.push_back(l.bias);
  }
  return params;
}

void TinyModel::set_parameters(std::span<const Tensor> params) {
  if (params.size() != 2 * layers.size()) throw DimensionError("parameter count does not match the model");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    require_same_shape(layers[i].weight, params[2 * i], "set_parameters weight");
    require_same_shape(layers[i].bias, params[2 * i + 1], "set_parameters bias");
    layers[i].weight = params[2 * i];
    layers[i].bias = params[2 * i + 1];
  }
}

Var forward(numerics::Tape& tape, std::span<const Var> params, std::span<const LayerGeometry> geometry,
            Var image) {
  (void)tape;
  Var h = image;
  for (std::size_t i = 0; i < geometry.size(); ++i) {
    const LayerGeometry& g = geometry[i];
    const Var w = params[2 * i];
    const Var b = params[2 * i + 1];
    if (g.is_conv) {
      h = numerics::conv2d(h, w, b);
    } else {
      const std::size_t in = g.weight_shape[1];
      Var column = numerics::reshape(h, {in, 1});
      h = numerics::add(numerics::reshape(numerics::matmul(w, column), {g.units}), b);
    }
    if (i + 1 < geometry.size()) h = numerics::relu(h);
  }
  if (h.value().rank() != 1) h = numerics::reshape(h, {h.value().size()});
  return h;
}

std::vector<double> logits(const TinyModel& model, const Tensor& image) {
  const auto geometry = resolve(model.arch);
  numerics::Tape tape;
  std::vector<Var> params;
  for (const LayerParams& l : model.layers) {
    params.push_back(tape.constant(l.weight));
    params.push_back(tape.constant(l.bias));
  }
  Var out = forward(tape, params, geometry, tape.constant(image));
  const auto vals = out.value().values();
  return {vals.begin(), vals.end()};
}

std::size_t predict(const TinyModel& model, const Tensor& image) {
  const auto z = logits(model, image);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

nlohmann::json to_json(const Architecture& arch) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& spec : arch.layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&spec)) {
      layers.push_back({{"type", "conv"}, {"filters", conv->filters}, {"kernel", {conv->kernel_h, conv->kernel_w}}});
    } else {
      layers.push_back({{"type", "dense"}, {"outputs", std::get<DenseLayer>(spec).outputs}});
    }
  }
  return {{"input", {arch.input.channels, arch.input.height, arch.input.width}}, {"layers", layers}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  try {
    Architecture arch;
    arch.input = {j.at("input").at(0).get<std::size_t>(), j.at("input").at(1).get<std::size_t>(),
                  j.at("input").at(2).get<std::size_t>()};
    for (const auto& layer : j.at("layers")) {
      const auto type = layer.at("type").get<std::string>();
      if (type == "conv") {
        arch.layers.push_back(ConvLayer{layer.at("filters").get<std::size_t>(),
                                        layer.at("kernel").at(0).get<std::size_t>(),
                                        layer.at("kernel").at(1).get<std::size_t>()});
      } else if (type == "dense") {
        arch.layers.push_back(DenseLayer{layer.at("outputs").get<std::size_t>()});
      } else {
        throw SpecError("unknown layer type '" + type + "'");
      }
    }
    return arch;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed architecture: ") + e.what());
  }
}

}  // namespace ocgec::zoo
