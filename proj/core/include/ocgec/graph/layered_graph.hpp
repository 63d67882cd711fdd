#pragma once

#include <cstddef>
#include <filesystem>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ocgec/numerics/tensor.hpp"
#include "ocgec/zoo/tiny_model.hpp"

namespace ocgec::graph {

struct NodeOrigin {
  std::size_t layer = 0;           // index into the model's layer list
  std::size_t unit = 0;            // filter or output-neuron index within the layer
  std::size_t feature_length = 0;  // unpadded length (weights + bias)

  friend bool operator==(const NodeOrigin&, const NodeOrigin&) = default;
};

/// n-partite graph of a tiny model. Node u of partite t is adjacent to every
/// node of partites t−1 and t+1 and to nothing else, so edges are not stored.
struct LayeredGraph {
  std::vector<std::size_t> partites;
  numerics::Tensor features{{0, 0}};  // N × d, zero-padded on the right
  std::vector<NodeOrigin> node_origin;
  std::string source_id;

  std::size_t num_nodes() const noexcept { return node_origin.size(); }
  std::size_t width() const noexcept { return features.rank() == 2 ? features.dim(1) : 0; }
  /// Index of the first node in partite t; partite_offset(partites.size()) == N.
  std::size_t partite_offset(std::size_t t) const;
  /// Partite index of every node.
  std::vector<std::size_t> node_partite() const;

  /// Throws FormatError if counts, origins or padding are inconsistent.
  void validate() const;
};

LayeredGraph to_graph(const zoo::TinyModel& model, std::string source_id = {});

/// Σ nᵢ·nᵢ₊₁.
std::size_t edge_count(std::span<const std::size_t> partites);

/// Forward range over the implicit edges (u, v) with u in partite t and v in
/// partite t+1, ordered by t, then u, then v. Each undirected edge appears once.
class EdgeRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = std::pair<std::size_t, std::size_t>;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = value_type;

    iterator() = default;
    value_type operator*() const { return {base_ + u_, base_ + n_u_ + v_}; }
    iterator& operator++();
    iterator operator++(int) {
      iterator old = *this;
      ++*this;
      return old;
    }
    friend bool operator==(const iterator& a, const iterator& b) {
      return a.t_ == b.t_ && a.u_ == b.u_ && a.v_ == b.v_;
    }

   private:
    friend class EdgeRange;
    iterator(std::span<const std::size_t> partites, std::size_t t);
    void settle();

    std::span<const std::size_t> partites_;
    std::size_t t_ = 0, u_ = 0, v_ = 0;
    std::size_t base_ = 0, n_u_ = 0;
  };

  explicit EdgeRange(std::span<const std::size_t> partites) : partites_(partites) {}
  iterator begin() const { return iterator(partites_, 0); }
  iterator end() const;
  std::size_t size() const { return edge_count(partites_); }

 private:
  std::span<const std::size_t> partites_;
};

inline EdgeRange edges(const LayeredGraph& g) { return EdgeRange(g.partites); }
std::vector<std::pair<std::size_t, std::size_t>> edge_list(std::span<const std::size_t> partites);

/// `.lgr`: one JSON header line {format, version, partites, d, N, source_id,
/// feature_lengths} followed by N·d little-endian float64 values.
std::string serialize_graph(const LayeredGraph& g);
LayeredGraph deserialize_graph(const std::string& bytes);
void save_graph(const std::filesystem::path& path, const LayeredGraph& g);
LayeredGraph load_graph(const std::filesystem::path& path);

}  // namespace ocgec::graph
