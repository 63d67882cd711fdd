#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "ocgec/numerics/tensor.hpp"
#include "ocgec/zoo/dataset.hpp"

namespace ocgec::zoo {

enum class TriggerKind { patch, blend };
enum class LabelMapKind { all_to_one, all_to_all };

struct LabelMap {
  LabelMapKind kind = LabelMapKind::all_to_one;
  std::size_t target = 0;  // all-to-one only

  /// all-to-one: y → target; all-to-all: y → (y + 1) mod K.
  std::size_t apply(std::size_t label, std::size_t num_classes) const noexcept {
    return kind == LabelMapKind::all_to_one ? target : (label + 1) % num_classes;
  }
};

struct TriggerSpec {
  TriggerKind kind = TriggerKind::patch;
  /// patch: [c×ph×pw] pixels written at (row, col); blend: full [c×h×w] image.
  numerics::Tensor pattern;
  std::size_t row = 0;
  std::size_t col = 0;
  double alpha = 1.0;  // blend coefficient in (0, 1]
  double poison_rate = 0.1;
  LabelMap label_map;

  /// Throws SpecError when the pattern does not fit `shape` or a rate is out of (0, 1].
  void validate(ImageShape shape) const;
  /// Applies the trigger in place and clips to [0, 1].
  void stamp(numerics::Tensor& image) const;
};

/// size×size square of intensity 1 in the bottom-right region, `margin`
/// pixels away from the bottom and right edges. With 3×3 valid convolutions
/// an edge pixel is seen through far fewer taps than an interior one, so the
/// default keeps the patch two pixels in.
TriggerSpec make_patch_trigger(ImageShape shape, std::size_t size = 2, double poison_rate = 0.1,
                               LabelMap label_map = {}, std::size_t margin = 2);
/// Fixed uniform-noise image blended with coefficient alpha.
TriggerSpec make_blend_trigger(ImageShape shape, std::uint64_t pattern_seed, double alpha = 0.2,
                               double poison_rate = 0.1, LabelMap label_map = {});

/// ⌈rate·n⌉, robust to rounding of rate·n just above an integer.
std::size_t poison_count(double rate, std::size_t n);

/// Stamps and relabels ⌈poison_rate·N⌉ samples chosen without replacement
/// by `seed`; every other sample is copied unchanged.
Dataset poison_dataset(const Dataset& clean, const TriggerSpec& trigger, std::uint64_t seed);

const char* to_string(TriggerKind kind);
const char* to_string(LabelMapKind kind);
TriggerKind trigger_kind_from_string(const std::string& s);
LabelMapKind label_map_from_string(const std::string& s);

nlohmann::json to_json(const TriggerSpec& trigger);
TriggerSpec trigger_from_json(const nlohmann::json& j);

}  // namespace ocgec::zoo
