#include "ocgec/zoo/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ocgec/error.hpp"
#include "ocgec/rng.hpp"

namespace ocgec::zoo {

void TriggerSpec::validate(ImageShape shape) const {
  if (!(poison_rate > 0.0 && poison_rate <= 1.0)) throw SpecError("poison_rate must lie in (0, 1]");
  if (pattern.rank() != 3 || pattern.dim(0) != shape.channels) {
    throw SpecError("trigger pattern " + numerics::to_string(pattern.shape()) + " does not match " +
                    numerics::to_string(shape.shape()));
  }
  if (kind == TriggerKind::patch) {
    if (row + pattern.dim(1) > shape.height || col + pattern.dim(2) > shape.width) {
      throw SpecError("patch trigger does not fit inside the image at its position");
    }
  } else {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw SpecError("blend alpha must lie in (0, 1]");
    if (pattern.shape() != shape.shape()) throw SpecError("blend pattern must cover the whole image");
  }
}

void TriggerSpec::stamp(numerics::Tensor& image) const {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (kind == TriggerKind::patch) {
    const std::size_t ph = pattern.dim(1), pw = pattern.dim(2);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t r = 0; r < ph; ++r) {
        for (std::size_t q = 0; q < pw; ++q) {
          image[(ch * h + row + r) * w + col + q] = std::clamp(pattern[(ch * ph + r) * pw + q], 0.0, 1.0);
        }
      }
    }
  } else {
    for (std::size_t i = 0; i < image.size(); ++i) {
      image[i] = std::clamp((1.0 - alpha) * image[i] + alpha * pattern[i], 0.0, 1.0);
    }
  }
}

TriggerSpec make_patch_trigger(ImageShape shape, std::size_t size, double poison_rate, LabelMap label_map,
                               std::size_t margin) {
  if (size == 0 || size + margin > shape.height || size + margin > shape.width) {
    throw SpecError("patch size and margin do not fit the image");
  }
  TriggerSpec t;
  t.kind = TriggerKind::patch;
  t.pattern = numerics::Tensor(numerics::Shape{shape.channels, size, size}, 1.0);
  t.row = shape.height - size - margin;
  t.col = shape.width - size - margin;
  t.poison_rate = poison_rate;
  t.label_map = label_map;
  return t;
}

TriggerSpec make_blend_trigger(ImageShape shape, std::uint64_t pattern_seed, double alpha,
                               double poison_rate, LabelMap label_map) {
  TriggerSpec t;
  t.kind = TriggerKind::blend;
  t.pattern = numerics::Tensor(shape.shape());
  Rng rng(derive_seed(pattern_seed, "blend-pattern"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : t.pattern.values()) v = unit(rng);
  t.alpha = alpha;
  t.poison_rate = poison_rate;
  t.label_map = label_map;
  return t;
}

std::size_t poison_count(double rate, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9)));
}

Dataset poison_dataset(const Dataset& clean, const TriggerSpec& trigger, std::uint64_t seed) {
  trigger.validate(clean.image_shape);
  Dataset out = clean;
  const auto order = shuffled_indices(clean.size(), derive_seed(seed, "poison-selection"));
  const std::size_t count = poison_count(trigger.poison_rate, clean.size());
  for (std::size_t k = 0; k < count; ++k) {
    Sample& s = out.samples[order[k]];
    trigger.stamp(s.image);
    s.label = trigger.label_map.apply(s.label, clean.num_classes);
  }
  return out;
}

const char* to_string(TriggerKind kind) { return kind == TriggerKind::patch ? "patch" : "blend"; }

const char* to_string(LabelMapKind kind) {
  return kind == LabelMapKind::all_to_one ? "all-to-one" : "all-to-all";
}

TriggerKind trigger_kind_from_string(const std::string& s) {
  if (s == "patch") return TriggerKind::patch;
  if (s == "blend") return TriggerKind::blend;
  throw SpecError("unknown trigger kind '" + s + "'");
}

LabelMapKind label_map_from_string(const std::string& s) {
  if (s == "all-to-one") return LabelMapKind::all_to_one;
  if (s == "all-to-all") return LabelMapKind::all_to_all;
  throw SpecError("unknown label map '" + s + "'");
}

nlohmann::json to_json(const TriggerSpec& trigger) {
  nlohmann::json j;
  j["kind"] = to_string(trigger.kind);
  j["pattern_shape"] = trigger.pattern.shape();
  j["pattern"] = trigger.pattern.storage();
  j["position"] = {trigger.row, trigger.col};
  j["alpha"] = trigger.alpha;
  j["poison_rate"] = trigger.poison_rate;
  j["label_map"] = {{"kind", to_string(trigger.label_map.kind)}, {"target", trigger.label_map.target}};
  return j;
}

TriggerSpec trigger_from_json(const nlohmann::json& j) {
  try {
    TriggerSpec t;
    t.kind = trigger_kind_from_string(j.at("kind").get<std::string>());
    t.pattern = numerics::Tensor(j.at("pattern_shape").get<numerics::Shape>(),
                                 j.at("pattern").get<std::vector<double>>());
    t.row = j.at("position").at(0).get<std::size_t>();
    t.col = j.at("position").at(1).get<std::size_t>();
    t.alpha = j.at("alpha").get<double>();
    t.poison_rate = j.at("poison_rate").get<double>();
    t.label_map.kind = label_map_from_string(j.at("label_map").at("kind").get<std::string>());
    t.label_map.target = j.at("label_map").at("target").get<std::size_t>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed trigger: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("malformed trigger pattern: ") + e.what());
  }
}

}  // namespace ocgec::zoo
