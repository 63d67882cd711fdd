#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "ocgec/zoo/dataset.hpp"
#include "ocgec/zoo/tiny_model.hpp"
#include "ocgec/zoo/trigger.hpp"

namespace ocgec::zoo {

enum class InitScheme {
  uniform_fan_in,  // U(±1/√fan_in) for weights and biases
  normal_002,      // N(0, 0.02²) weights, zero biases
  orthogonal,      // orthonormal rows (or columns) of the [units×fan_in] weight, zero biases
};

const char* to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& s);

struct TrainHyperParams {
  InitScheme init = InitScheme::uniform_fan_in;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;

  friend bool operator==(const TrainHyperParams&, const TrainHyperParams&) = default;
};

TinyModel init_model(const Architecture& arch, InitScheme scheme, Rng& rng);

/// Minimises mean softmax cross-entropy with Adam over shuffled minibatches.
/// Deterministic in (data, arch, hp, seed).
TinyModel train_tiny_model(const Dataset& data, const Architecture& arch, const TrainHyperParams& hp,
                           std::uint64_t seed);

/// Any image → class map; lets accuracy and ASR be computed for reference
/// classifiers as well as tiny models.
using Classifier = std::function<std::size_t(const numerics::Tensor&)>;

/// Fraction of samples whose argmax prediction equals the label. Throws
/// SpecError on an empty dataset.
double eval_accuracy(const TinyModel& model, const Dataset& data);
double eval_accuracy(const Classifier& classify, const Dataset& data);

/// Samples whose label differs from its mapped target, stamped with the
/// trigger, paired with that target.
Dataset triggered_eval_set(const Dataset& clean_eval, const TriggerSpec& trigger);

/// Fraction of triggered_eval_set classified as the mapped target.
double attack_success_rate(const TinyModel& model, const Dataset& clean_eval, const TriggerSpec& trigger);
double attack_success_rate(const Classifier& classify, const Dataset& clean_eval, const TriggerSpec& trigger);

}  // namespace ocgec::zoo
