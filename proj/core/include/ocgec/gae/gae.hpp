#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ocgec/gae/gin.hpp"
#include "ocgec/gae/mask.hpp"
#include "ocgec/gae/sce.hpp"
#include "ocgec/graph/layered_graph.hpp"

namespace ocgec::gae {

/// Encoder/decoder pair of the masked graph auto-encoder.
struct GaeParams {
  GinParams encoder;  // d → … → embedding width
  GinParams decoder;  // embedding width → … → d

  /// Encoder widths d→enc[0]→…; decoder mirrors them: enc.back()→dec_hidden…→d.
  static GaeParams init(std::size_t input_width, std::span<const std::size_t> encoder_widths,
                        std::span<const std::size_t> decoder_hidden, std::uint64_t seed);

  std::size_t input_width() const { return encoder.in_width(); }
  std::size_t embedding_width() const { return encoder.out_width(); }
  /// Encoder tensors followed by decoder tensors.
  std::vector<numerics::Tensor> parameters() const;
  void set_parameters(std::span<const numerics::Tensor> params);
  /// Throws DimensionError unless the encoder output feeds the decoder and the
  /// decoder reproduces the input width.
  void validate() const;
};

struct PretrainConfig {
  std::size_t epochs = 50;
  double lr = 1e-3;
  double mask_rate = 0.75;
  std::size_t batch_size = 16;
  double dropout = 0.2;
  SceConfig sce;
  /// Zero the masked rows of the encoder output again before decoding.
  bool remask = false;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct PretrainResult {
  GaeParams params;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Graph features and adjacency prepared once for repeated passes.
struct GraphInput {
  numerics::Tensor features;
  Adjacency adjacency;
  std::vector<std::size_t> partites;

  static GraphInput from(const graph::LayeredGraph& g);
};

/// Records mask → encode → (re-mask) → decode → SCE over the masked rows.
/// `encoder` and `decoder` are the recorded parameter tensors of each GIN.
numerics::Var masked_reconstruction_loss(numerics::Tape& tape, const GraphInput& input,
                                         std::span<const numerics::Var> encoder,
                                         std::span<const numerics::Var> decoder, const MaskPlan& plan,
                                         const SceConfig& sce, bool remask, double dropout, Rng* rng);

/// Adam over encoder and decoder jointly. Each graph draws a fresh mask every
/// epoch, seeded by (seed, epoch, graph index); minibatch gradients are the
/// mean of per-graph gradients, reduced in graph order.
PretrainResult pretrain(std::span<const GraphInput> graphs, GaeParams init, const PretrainConfig& cfg);

/// Eval-mode encoder output for a graph (no masking, no dropout).
numerics::Tensor encode(const GraphInput& input, const GinParams& encoder);

/// `.gae`: JSON header {format, version, encoder/decoder widths, gamma, delta,
/// mask_rate, seed} + float64 parameters in GaeParams::parameters() order.
void save_gae(const std::filesystem::path& path, const GaeParams& params, const PretrainConfig& cfg);
GaeParams load_gae(const std::filesystem::path& path, PretrainConfig* cfg = nullptr);

}  // namespace ocgec::gae
