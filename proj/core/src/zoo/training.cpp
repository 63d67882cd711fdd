#include "ocgec/zoo/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ocgec/error.hpp"
#include "ocgec/numerics/adam.hpp"
#include "ocgec/numerics/ops.hpp"

namespace ocgec::zoo {

using numerics::Tensor;
using numerics::Var;

namespace {

// Fills a [rows×cols] block with orthonormal rows (rows ≤ cols) or columns.
void orthogonal_fill(Tensor& weight, std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool transpose = rows > cols;
  const std::size_t n = transpose ? cols : rows;  // vectors to orthonormalise
  const std::size_t len = transpose ? rows : cols;
  std::vector<std::vector<double>> basis;
  basis.reserve(n);
  while (basis.size() < n) {
    std::vector<double> v(len);
    for (double& x : v) x = normal(rng);
    for (const auto& b : basis) {
      double proj = 0.0;
      for (std::size_t i = 0; i < len; ++i) proj += v[i] * b[i];
      for (std::size_t i = 0; i < len; ++i) v[i] -= proj * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-10) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < len; ++i) {
      if (transpose) weight[i * cols + k] = basis[k][i];
      else weight[k * cols + i] = basis[k][i];
    }
  }
}

}  // namespace

const char* to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::uniform_fan_in: return "uniform-fan-in";
    case InitScheme::normal_002: return "normal-0.02";
    case InitScheme::orthogonal: return "orthogonal";
  }
  return "?";
}

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "uniform-fan-in") return InitScheme::uniform_fan_in;
  if (s == "normal-0.02") return InitScheme::normal_002;
  if (s == "orthogonal") return InitScheme::orthogonal;
  throw SpecError("unknown init scheme '" + s + "'");
}

TinyModel init_model(const Architecture& arch, InitScheme scheme, Rng& rng) {
  const auto geometry = resolve(arch);
  TinyModel model{arch, {}};
  for (const LayerGeometry& g : geometry) {
    LayerParams p{Tensor(g.weight_shape), Tensor(g.bias_shape)};
    switch (scheme) {
      case InitScheme::uniform_fan_in: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(g.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : p.weight.values()) v = dist(rng);
        for (double& v : p.bias.values()) v = dist(rng);
        break;
      }
      case InitScheme::normal_002: {
        std::normal_distribution<double> dist(0.0, 0.02);
        for (double& v : p.weight.values()) v = dist(rng);
        break;
      }
      case InitScheme::orthogonal:
        orthogonal_fill(p.weight, g.units, g.fan_in, rng);
        break;
    }
    model.layers.push_back(std::move(p));
  }
  return model;
}

TinyModel train_tiny_model(const Dataset& data, const Architecture& arch, const TrainHyperParams& hp,
                           std::uint64_t seed) {
  if (arch.input != data.image_shape) throw SpecError("architecture input does not match the dataset images");
  const auto geometry = resolve(arch);
  if (geometry.back().units != data.num_classes || geometry.back().is_conv) {
    throw SpecError("architecture must end in a dense layer with one output per class");
  }
  if (hp.batch_size == 0) throw SpecError("batch size must be positive");

  Rng init_rng(derive_seed(seed, "init"));
  TinyModel model = init_model(arch, hp.init, init_rng);
  if (hp.epochs == 0 || data.empty()) return model;

  std::vector<Tensor> params = model.parameters();
  numerics::AdamState adam(params);
  const std::uint64_t order_seed = derive_seed(seed, "order");

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto order = shuffled_indices(data.size(), derive_seed(order_seed, epoch));
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      numerics::Tape tape;
      std::vector<Var> vars;
      vars.reserve(params.size());
      for (const Tensor& p : params) vars.push_back(tape.variable(p));
      std::vector<Var> losses;
      losses.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = data.samples[order[k]];
        Var z = forward(tape, vars, geometry, tape.constant(s.image));
        losses.push_back(numerics::softmax_cross_entropy(z, s.label));
      }
      Var loss = numerics::scale(numerics::add_n(losses), 1.0 / static_cast<double>(end - start));
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(vars.size());
      for (Var v : vars) grads.push_back(tape.grad(v));
      numerics::adam_step(params, grads, adam, hp.lr);
    }
  }
  model.set_parameters(params);
  return model;
}

double eval_accuracy(const Classifier& classify, const Dataset& data) {
  if (data.empty()) throw SpecError("accuracy of an empty dataset is undefined");
  std::size_t correct = 0;
  for (const Sample& s : data.samples) correct += classify(s.image) == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double eval_accuracy(const TinyModel& model, const Dataset& data) {
  return eval_accuracy([&model](const numerics::Tensor& x) { return predict(model, x); }, data);
}

Dataset triggered_eval_set(const Dataset& clean_eval, const TriggerSpec& trigger) {
  trigger.validate(clean_eval.image_shape);
  Dataset out{clean_eval.image_shape, clean_eval.num_classes, {}};
  for (const Sample& s : clean_eval.samples) {
    const std::size_t target = trigger.label_map.apply(s.label, clean_eval.num_classes);
    if (target == s.label) continue;
    Sample stamped{s.image, target};
    trigger.stamp(stamped.image);
    out.samples.push_back(std::move(stamped));
  }
  return out;
}

double attack_success_rate(const Classifier& classify, const Dataset& clean_eval, const TriggerSpec& trigger) {
  const Dataset triggered = triggered_eval_set(clean_eval, trigger);
  if (triggered.empty()) throw SpecError("no evaluation sample has a label different from its attack target");
  return eval_accuracy(classify, triggered);
}

double attack_success_rate(const TinyModel& model, const Dataset& clean_eval, const TriggerSpec& trigger) {
  return attack_success_rate([&model](const numerics::Tensor& x) { return predict(model, x); }, clean_eval,
                             trigger);
}

}  // namespace ocgec::zoo
