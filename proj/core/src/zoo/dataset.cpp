#include "ocgec/zoo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/rng.hpp"

namespace ocgec::zoo {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::uint32_t read_be32(std::string_view bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("IDX file truncated in header");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

void append_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xffu));
}

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

}  // namespace

void Dataset::validate() const {
  if (num_classes < 2) throw SpecError("dataset needs at least 2 classes");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.label >= num_classes) {
      throw SpecError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                      " >= " + std::to_string(num_classes));
    }
    if (s.image.shape() != image_shape.shape()) {
      throw SpecError("sample " + std::to_string(i) + " has shape " + numerics::to_string(s.image.shape()));
    }
    for (double v : s.image.values()) {
      if (!(v >= 0.0 && v <= 1.0)) throw SpecError("sample " + std::to_string(i) + " has a pixel outside [0, 1]");
    }
  }
}

numerics::Tensor class_template(std::size_t label, ImageShape shape) {
  const double row_freq = static_cast<double>(label % 4 + 1);
  const double col_freq = static_cast<double>(label / 4 + 1);
  const double phase = static_cast<double>(label);
  numerics::Tensor t(shape.shape());
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t r = 0; r < shape.height; ++r) {
      for (std::size_t col = 0; col < shape.width; ++col) {
        const double arg = 2.0 * std::numbers::pi *
                               (row_freq * static_cast<double>(r) / static_cast<double>(shape.height) +
                                col_freq * static_cast<double>(col) / static_cast<double>(shape.width)) +
                           phase + 0.7 * static_cast<double>(c);
        t[(c * shape.height + r) * shape.width + col] = 0.4 + 0.25 * std::sin(arg);
      }
    }
  }
  return t;
}

Dataset make_synthetic_dataset(std::size_t num_classes, std::size_t samples_per_class,
                               ImageShape shape, std::uint64_t seed, double noise) {
  if (num_classes < 2) throw SpecError("synthetic dataset needs at least 2 classes");
  Dataset data{shape, num_classes, {}};
  data.samples.reserve(num_classes * samples_per_class);
  Rng rng(derive_seed(seed, "synthetic-dataset"));
  std::uniform_real_distribution<double> jitter(-noise, noise);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const numerics::Tensor base = class_template(k, shape);
    for (std::size_t s = 0; s < samples_per_class; ++s) {
      numerics::Tensor image = base;
      for (double& v : image.values()) v = std::clamp(v + jitter(rng), 0.0, 1.0);
      data.samples.push_back({std::move(image), k});
    }
  }
  return data;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out{data.image_shape, data.num_classes, {}};
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.size()) throw SpecError("subset index out of range");
    out.samples.push_back(data.samples[i]);
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

DataSplits split_pool(const Dataset& pool, double clean_fraction, double attacker_fraction,
                      std::uint64_t seed) {
  if (clean_fraction <= 0.0 || attacker_fraction <= 0.0 || clean_fraction + attacker_fraction > 1.0 + 1e-12) {
    throw SpecError("split fractions must be positive and sum to at most 1");
  }
  const auto order = shuffled_indices(pool.size(), seed);
  const std::size_t n_clean = std::max<std::size_t>(1, fraction_count(clean_fraction, pool.size()));
  const std::size_t n_attack = std::min(pool.size() - std::min(pool.size(), n_clean),
                                        std::max<std::size_t>(1, fraction_count(attacker_fraction, pool.size())));
  if (n_clean + n_attack > pool.size()) throw SpecError("pool too small for the requested splits");
  const std::span<const std::size_t> all(order);
  return {subset(pool, all.subspan(0, n_clean)), subset(pool, all.subspan(n_clean, n_attack))};
}

Dataset read_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t num_classes) {
  const std::string img = io::read_text_file(images);
  const std::string lab = io::read_text_file(labels);
  if (read_be32(img, 0) != kIdxImageMagic) throw FormatError(images.string() + ": bad IDX image magic");
  if (read_be32(lab, 0) != kIdxLabelMagic) throw FormatError(labels.string() + ": bad IDX label magic");
  const std::size_t n = read_be32(img, 4), h = read_be32(img, 8), w = read_be32(img, 12);
  const std::size_t n_labels = read_be32(lab, 4);
  if (n != n_labels) throw FormatError("IDX image and label counts differ");
  if (img.size() != 16 + n * h * w) throw FormatError(images.string() + ": truncated IDX image data");
  if (lab.size() != 8 + n) throw FormatError(labels.string() + ": truncated IDX label data");

  Dataset data{{1, h, w}, num_classes, {}};
  std::size_t max_label = 0;
  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    numerics::Tensor image(numerics::Shape{1, h, w});
    for (std::size_t p = 0; p < h * w; ++p) {
      image[p] = static_cast<unsigned char>(img[16 + i * h * w + p]) / 255.0;
    }
    const std::size_t label = static_cast<unsigned char>(lab[8 + i]);
    max_label = std::max(max_label, label);
    data.samples.push_back({std::move(image), label});
  }
  if (data.num_classes == 0) data.num_classes = max_label + 1;
  data.validate();
  return data;
}

void write_idx_dataset(const Dataset& data, const std::filesystem::path& images,
                       const std::filesystem::path& labels) {
  if (data.image_shape.channels != 1) throw SpecError("IDX export supports single-channel images only");
  std::string img, lab;
  append_be32(img, kIdxImageMagic);
  append_be32(img, static_cast<std::uint32_t>(data.size()));
  append_be32(img, static_cast<std::uint32_t>(data.image_shape.height));
  append_be32(img, static_cast<std::uint32_t>(data.image_shape.width));
  append_be32(lab, kIdxLabelMagic);
  append_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (const Sample& s : data.samples) {
    for (double v : s.image.values()) img.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    lab.push_back(static_cast<char>(s.label));
  }
  io::write_text_file(images, img);
  io::write_text_file(labels, lab);
}

}  // namespace ocgec::zoo
