#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ocgec/numerics/tensor.hpp"

namespace ocgec::zoo {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;

  std::size_t size() const noexcept { return channels * height * width; }
  numerics::Shape shape() const { return {channels, height, width}; }
  auto operator<=>(const ImageShape&) const = default;
};

struct Sample {
  numerics::Tensor image;  // [c×h×w], entries in [0, 1]
  std::size_t label = 0;
};

struct Dataset {
  ImageShape image_shape;
  std::size_t num_classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  /// Throws SpecError if a label is out of range, a pixel leaves [0, 1], or
  /// an image has the wrong shape.
  void validate() const;
};

/// Class k is a sinusoidal grating with a class-specific frequency pair and
/// phase, plus per-pixel uniform noise in [−noise, noise], clipped to [0, 1].
/// Samples are ordered by class.
Dataset make_synthetic_dataset(std::size_t num_classes, std::size_t samples_per_class,
                               ImageShape shape, std::uint64_t seed, double noise = 0.2);

/// Noise-free class template used by make_synthetic_dataset.
numerics::Tensor class_template(std::size_t label, ImageShape shape);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// A seeded permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Fixed data splits shared by a whole zoo: a small clean split for benign
/// models and a large split the attacker poisons. Both come from one seeded
/// permutation of the pool; the attacker split follows the clean split.
struct DataSplits {
  Dataset clean_small;
  Dataset attacker;
};

DataSplits split_pool(const Dataset& pool, double clean_fraction, double attacker_fraction,
                      std::uint64_t seed);

/// Reads an IDX image file (magic 0x00000803, unsigned bytes, n×h×w) and an
/// IDX label file (magic 0x00000801). Pixels are scaled to [0, 1]. When
/// num_classes is 0 it is inferred as max(label) + 1.
Dataset read_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t num_classes = 0);

/// Writes a single-channel dataset as an IDX pair (pixels rounded to bytes).
void write_idx_dataset(const Dataset& data, const std::filesystem::path& images,
                       const std::filesystem::path& labels);

}  // namespace ocgec::zoo
