#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ocgec/numerics/tape.hpp"
#include "ocgec/rng.hpp"

namespace ocgec::gae {

/// Undirected adjacency in compressed-row form. Every edge (u, v) appears in
/// the neighbour lists of both endpoints.
struct Adjacency {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> offsets{0};  // size num_nodes + 1
  std::vector<std::size_t> neighbors;

  /// Throws DimensionError for an endpoint ≥ num_nodes or a self loop.
  static Adjacency from_edges(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges);
  /// Complete bipartite links between consecutive partites.
  static Adjacency from_partites(std::span<const std::size_t> partites);

  std::span<const std::size_t> neighbors_of(std::size_t v) const {
    return {neighbors.data() + offsets[v], offsets[v + 1] - offsets[v]};
  }
};

/// out_v = h_v + Σ_{u ∈ N(v)} h_u for h of shape [N×k] (GIN aggregation with ε = 0).
numerics::Var aggregate(numerics::Var h, const Adjacency& adj);

/// One GIN layer: MLP(x) = W2ᵀ·relu(W1ᵀ·x + b1) + b2, weights stored [in×out].
struct GinLayer {
  numerics::Tensor w1, b1, w2, b2;

  std::size_t in_width() const { return w1.dim(0); }
  std::size_t hidden_width() const { return w1.dim(1); }
  std::size_t out_width() const { return w2.dim(1); }
};

/// Stack of GIN layers. Layer i maps widths[i] → widths[i+1] through a hidden
/// width of min(max(widths[i], widths[i+1]), hidden_cap), or min(widths[i],
/// widths[i+1]) when hidden_cap is 0. The cap keeps a wide input or output
/// (the graph feature width) from producing a square d×d weight.
struct GinParams {
  std::vector<GinLayer> layers;

  static std::size_t hidden_width(std::size_t in, std::size_t out, std::size_t hidden_cap);
  /// U(±1/√fan_in) weights and biases.
  static GinParams init(std::span<const std::size_t> widths, Rng& rng, std::size_t hidden_cap = 0);
  /// Zero-filled stack with the given widths and per-layer hidden widths.
  static GinParams zeros(std::span<const std::size_t> widths, std::span<const std::size_t> hidden);

  std::vector<std::size_t> hidden_widths() const;

  std::size_t in_width() const;
  std::size_t out_width() const;
  std::vector<std::size_t> widths() const;
  std::size_t num_tensors() const { return 4 * layers.size(); }
  /// w1, b1, w2, b2 per layer, in layer order.
  std::vector<numerics::Tensor> parameters() const;
  void set_parameters(std::span<const numerics::Tensor> params);
  /// Throws DimensionError when consecutive layers do not compose.
  void validate() const;
};

/// Records the GIN stack on the tape. `params` holds num_tensors() values laid
/// out as GinParams::parameters(). Each layer's input passes through dropout
/// when `rng` is non-null and dropout_rate > 0; a ReLU separates layers.
numerics::Var gin_forward(numerics::Var features, const Adjacency& adj, std::span<const numerics::Var> params,
                          double dropout_rate = 0.0, Rng* rng = nullptr);

/// Eval-mode forward pass without gradients.
numerics::Tensor gin_apply(const numerics::Tensor& features, const Adjacency& adj, const GinParams& params);

/// Pushes every tensor of `params` onto the tape as a variable.
std::vector<numerics::Var> record_parameters(numerics::Tape& tape, std::span<const numerics::Tensor> params);

}  // namespace ocgec::gae
