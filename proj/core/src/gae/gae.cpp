#include "ocgec/gae/gae.hpp"

#include <cmath>

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/numerics/adam.hpp"
#include "ocgec/numerics/ops.hpp"
#include "ocgec/parallel.hpp"
#include "ocgec/zoo/dataset.hpp"

namespace ocgec::gae {

using numerics::Tensor;
using numerics::Var;

GaeParams GaeParams::init(std::size_t input_width, std::span<const std::size_t> encoder_widths,
                          std::span<const std::size_t> decoder_hidden, std::uint64_t seed) {
  if (encoder_widths.empty()) throw SpecError("encoder needs at least one layer");
  std::vector<std::size_t> enc{input_width};
  enc.insert(enc.end(), encoder_widths.begin(), encoder_widths.end());
  std::vector<std::size_t> dec{enc.back()};
  dec.insert(dec.end(), decoder_hidden.begin(), decoder_hidden.end());
  dec.push_back(input_width);
  // Inner widths bound every MLP hidden layer.
  std::size_t cap = 0;
  for (std::size_t w : encoder_widths) cap = std::max(cap, w);
  for (std::size_t w : decoder_hidden) cap = std::max(cap, w);
  Rng enc_rng(derive_seed(seed, "gae-encoder-init"));
  Rng dec_rng(derive_seed(seed, "gae-decoder-init"));
  return {GinParams::init(enc, enc_rng, cap), GinParams::init(dec, dec_rng, cap)};
}

std::vector<Tensor> GaeParams::parameters() const {
  std::vector<Tensor> out = encoder.parameters();
  for (Tensor& t : decoder.parameters()) out.push_back(std::move(t));
  return out;
}

void GaeParams::set_parameters(std::span<const Tensor> params) {
  const std::size_t ne = encoder.num_tensors();
  if (params.size() != ne + decoder.num_tensors()) throw DimensionError("wrong number of auto-encoder tensors");
  encoder.set_parameters(params.subspan(0, ne));
  decoder.set_parameters(params.subspan(ne));
}

void GaeParams::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.out_width() != decoder.in_width()) throw DimensionError("encoder output does not feed the decoder");
  if (decoder.out_width() != encoder.in_width()) throw DimensionError("decoder does not reproduce the input width");
}

void PretrainConfig::validate() const {
  if (!(lr > 0.0)) throw SpecError("learning rate must be positive");
  if (!(mask_rate > 0.0 && mask_rate <= 1.0)) throw SpecError("pre-training mask rate must lie in (0, 1]");
  if (batch_size == 0) throw SpecError("batch size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw SpecError("dropout rate must lie in [0, 1)");
  sce.validate();
}

GraphInput GraphInput::from(const graph::LayeredGraph& g) {
  return {g.features, Adjacency::from_partites(g.partites), g.partites};
}

Var masked_reconstruction_loss(numerics::Tape& tape, const GraphInput& input, std::span<const Var> encoder,
                               std::span<const Var> decoder, const MaskPlan& plan, const SceConfig& sce,
                               bool remask, double dropout, Rng* rng) {
  const Var x = tape.constant(input.features);
  const Var masked = numerics::zero_rows(x, plan.indices);
  Var h = gin_forward(masked, input.adjacency, encoder, dropout, rng);
  if (remask) h = numerics::zero_rows(h, plan.indices);
  const Var recon = gin_forward(h, input.adjacency, decoder, dropout, rng);
  return sce_loss(x, recon, plan.indices, sce);
}

Tensor encode(const GraphInput& input, const GinParams& encoder) {
  return gin_apply(input.features, input.adjacency, encoder);
}

PretrainResult pretrain(std::span<const GraphInput> graphs, GaeParams init, const PretrainConfig& cfg) {
  cfg.validate();
  init.validate();
  if (graphs.empty()) throw SpecError("pre-training needs at least one graph");
  for (const GraphInput& g : graphs) {
    if (g.features.rank() != 2 || g.features.dim(1) != init.input_width()) {
      throw DimensionError("graph feature width does not match the auto-encoder input width");
    }
  }

  PretrainResult result{std::move(init), {}};
  std::vector<Tensor> params = result.params.parameters();
  const std::size_t ne = result.params.encoder.num_tensors();
  numerics::AdamState adam(params);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = zoo::shuffled_indices(graphs.size(), derive_seed(derive_seed(cfg.seed, "gae-order"), epoch));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<std::vector<Tensor>> grads(count);
      std::vector<double> losses(count);
      parallel_for(count, cfg.threads, [&](std::size_t b) {
        const std::size_t gi = order[start + b];
        const GraphInput& g = graphs[gi];
        const MaskPlan plan = make_mask_plan(g.features.dim(0), cfg.mask_rate, derive_seed(cfg.seed, epoch, gi));
        Rng drop_rng(derive_seed(derive_seed(cfg.seed, "gae-dropout"), epoch, gi));
        numerics::Tape tape;
        const std::vector<Var> vars = record_parameters(tape, params);
        const std::span<const Var> all(vars);
        const Var loss = masked_reconstruction_loss(tape, g, all.subspan(0, ne), all.subspan(ne), plan, cfg.sce,
                                                    cfg.remask, cfg.dropout, &drop_rng);
        tape.backward(loss);
        losses[b] = loss.value()[0];
        grads[b].reserve(vars.size());
        for (const Var& v : vars) grads[b].push_back(tape.grad(v));
      });
      std::vector<Tensor> mean = std::move(grads[0]);
      for (std::size_t b = 1; b < count; ++b) {
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += grads[b][k];
      }
      for (Tensor& t : mean) t *= 1.0 / static_cast<double>(count);
      for (double l : losses) epoch_loss += l;
      numerics::adam_step(params, mean, adam, cfg.lr);
    }
    epoch_loss /= static_cast<double>(graphs.size());
    if (!std::isfinite(epoch_loss)) {
      throw EvaluationError("pre-training loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(epoch_loss);
  }
  result.params.set_parameters(params);
  return result;
}

namespace {

constexpr const char* kFormat = "ocgec-gae";

}  // namespace

void save_gae(const std::filesystem::path& path, const GaeParams& params, const PretrainConfig& cfg) {
  params.validate();
  nlohmann::json header = {{"format", kFormat},
                           {"version", 1},
                           {"encoder_widths", params.encoder.widths()},
                           {"encoder_hidden", params.encoder.hidden_widths()},
                           {"decoder_widths", params.decoder.widths()},
                           {"decoder_hidden", params.decoder.hidden_widths()},
                           {"gamma", cfg.sce.gamma},
                           {"delta", cfg.sce.delta},
                           {"mask_rate", cfg.mask_rate},
                           {"remask", cfg.remask},
                           {"seed", cfg.seed}};
  std::vector<double> blob;
  for (const Tensor& t : params.parameters()) blob.insert(blob.end(), t.values().begin(), t.values().end());
  io::write_blob_file(path, std::move(header), blob);
}

GaeParams load_gae(const std::filesystem::path& path, PretrainConfig* cfg) {
  io::BlobFile file = io::read_blob_file(path);
  try {
    const auto& h = file.header;
    if (h.at("format").get<std::string>() != kFormat) throw FormatError(path.string() + ": not an auto-encoder file");
    if (h.at("version").get<int>() != 1) throw FormatError(path.string() + ": unsupported version");
    using Sizes = std::vector<std::size_t>;
    GaeParams params{GinParams::zeros(h.at("encoder_widths").get<Sizes>(), h.at("encoder_hidden").get<Sizes>()),
                     GinParams::zeros(h.at("decoder_widths").get<Sizes>(), h.at("decoder_hidden").get<Sizes>())};
    std::vector<Tensor> tensors = params.parameters();
    std::size_t total = 0;
    for (const Tensor& t : tensors) total += t.size();
    if (total != file.values.size()) throw FormatError(path.string() + ": parameter count does not match widths");
    std::size_t offset = 0;
    for (Tensor& t : tensors) {
      std::copy_n(file.values.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.values().begin());
      offset += t.size();
    }
    params.set_parameters(tensors);
    params.validate();
    if (cfg != nullptr) {
      cfg->sce.gamma = h.at("gamma").get<double>();
      cfg->sce.delta = h.at("delta").get<double>();
      cfg->mask_rate = h.at("mask_rate").get<double>();
      cfg->remask = h.at("remask").get<bool>();
      cfg->seed = h.at("seed").get<std::uint64_t>();
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ocgec::gae
