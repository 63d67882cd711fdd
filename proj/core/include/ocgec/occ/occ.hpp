#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ocgec/gae/gae.hpp"
#include "ocgec/numerics/tape.hpp"

namespace ocgec::occ {

struct Hypersphere {
  std::vector<double> center;
  double radius_sq = 0.0;

  double radius() const;
};

struct OccConfig {
  double nu = 0.1;             // (0, 1]
  double weight_decay = 5e-4;  // λ
  std::size_t max_epochs = 10;
  std::size_t patience = 2;
  double lr = 1e-3;
  /// Graphs per encoder step; at least the training-set size gives one
  /// full-batch step per epoch.
  std::size_t batch_size = 16;
  /// Encoder dropout during the gradient step only; distances are always
  /// computed in eval mode.
  double dropout = 0.0;
  /// Abort when the RMS distance of training embeddings to the center drops below this.
  double collapse_tolerance = 1e-6;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

/// Concatenation over partites of the mean row of H within each partite.
numerics::Var hierarchical_embed(numerics::Var h, std::span<const std::size_t> partites);

/// R² + (1/(ν·k))·Σ max(0, ‖eᵢ − c‖² − R²) + (λ/2)·Σ‖W‖² over `weights`.
numerics::Var svdd_loss(std::span<const numerics::Var> embeddings, std::span<const double> center, double radius_sq,
                        double nu, double weight_decay, std::span<const numerics::Var> weights);

/// Same objective from precomputed squared distances and ‖W‖².
double svdd_value(std::span<const double> distances_sq, double radius_sq, double nu, double weight_decay,
                  double weight_sq_norm);

/// Eval-mode embedding of one graph.
std::vector<double> embed(const gae::GraphInput& graph, const gae::GinParams& encoder);

struct CenterInit {
  std::vector<double> center;
  /// The mean embedding lies within 1e-6 of the origin (e.g. embeddings e and −e).
  bool near_origin = false;
};

/// Mean embedding of the graphs under `encoder`. Throws SpecError when empty.
CenterInit init_center(std::span<const gae::GraphInput> graphs, const gae::GinParams& encoder, unsigned threads = 1);

/// Nearest-rank (1−ν) percentile: ascending sort, element ⌈(1−ν)·k⌉ − 1
/// clamped to [0, k−1].
double update_radius(std::span<const double> distances_sq, double nu);

double squared_distance(std::span<const double> a, std::span<const double> b);

struct OccTrace {
  std::vector<double> loss;          // one-class objective after each epoch's updates
  std::vector<double> radius_sq;     // R² after each epoch
  std::vector<double> coverage;      // fraction of training graphs with dᵢ ≤ R² after each epoch
};

struct OccModel {
  gae::GinParams encoder;
  Hypersphere sphere;
  double nu = 0.1;
  OccTrace trace;
  bool center_near_origin = false;
  std::size_t epochs_run = 0;
};

/// Called after every epoch with the current model; larger is better.
using EpochMonitor = std::function<double(const OccModel&)>;

/// Per epoch: minibatch encoder steps on the one-class loss with c and R held
/// fixed, then c ← mean embedding, then R² ← percentile of distances under the
/// updated encoder and center. Stops after `patience` epochs without a loss
/// improvement. Throws CollapseError if the embeddings collapse onto c
/// (only checked for two or more graphs).
///
/// With a monitor, stopping follows the monitor instead of the loss and the
/// model from the best-scoring epoch is returned (traces keep every epoch).
OccModel train_occ(std::span<const gae::GraphInput> graphs, const gae::GinParams& encoder, const OccConfig& cfg,
                   const EpochMonitor& monitor = {});

struct Detection {
  std::string id;
  double distance_sq = 0.0;
  double score = 0.0;  // distance_sq − R²
  bool backdoor = false;  // score > 0
};

/// Throws DimensionError if the graph width does not match the encoder.
Detection detect(const gae::GraphInput& graph, const OccModel& model, std::string id = {});

/// `.occ`: JSON with the center, R², ν, the encoder file it pairs with, and
/// the training trace. The encoder itself is stored in the referenced file.
void save_occ(const std::filesystem::path& path, const OccModel& model, const std::string& encoder_file);
/// Loads the sphere and reads the encoder from the referenced file
/// (resolved relative to the .occ file).
OccModel load_occ(const std::filesystem::path& path, std::string* encoder_file = nullptr);

}  // namespace ocgec::occ
