#include "ocgec/graph/layered_graph.hpp"

#include <algorithm>
#include <cstring>

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"

namespace ocgec::graph {

std::size_t LayeredGraph::partite_offset(std::size_t t) const {
  if (t > partites.size()) throw DimensionError("partite index out of range");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < t; ++i) offset += partites[i];
  return offset;
}

std::vector<std::size_t> LayeredGraph::node_partite() const {
  std::vector<std::size_t> out;
  out.reserve(num_nodes());
  for (std::size_t t = 0; t < partites.size(); ++t) out.insert(out.end(), partites[t], t);
  return out;
}

void LayeredGraph::validate() const {
  std::size_t n = 0;
  for (std::size_t p : partites) {
    if (p == 0) throw FormatError("graph has an empty partite");
    n += p;
  }
  if (n != node_origin.size()) throw FormatError("partite sizes do not sum to the node count");
  if (features.rank() != 2 || features.dim(0) != n) throw FormatError("feature matrix must have one row per node");
  const std::size_t d = width();
  for (std::size_t u = 0; u < n; ++u) {
    const NodeOrigin& o = node_origin[u];
    if (o.feature_length > d) throw FormatError("node feature longer than the graph width");
    for (std::size_t j = o.feature_length; j < d; ++j) {
      if (features(u, j) != 0.0) throw FormatError("nonzero feature padding");
    }
  }
}

LayeredGraph to_graph(const zoo::TinyModel& model, std::string source_id) {
  const auto geometry = zoo::resolve(model.arch);
  if (geometry.size() != model.layers.size()) throw DimensionError("model parameters do not match its architecture");

  LayeredGraph g;
  g.source_id = std::move(source_id);
  std::size_t d = 0;
  for (std::size_t l = 0; l < geometry.size(); ++l) {
    g.partites.push_back(geometry[l].units);
    d = std::max(d, geometry[l].fan_in + 1);
    for (std::size_t u = 0; u < geometry[l].units; ++u) g.node_origin.push_back({l, u, geometry[l].fan_in + 1});
  }

  g.features = numerics::Tensor({g.node_origin.size(), d});
  std::size_t row = 0;
  for (std::size_t l = 0; l < geometry.size(); ++l) {
    const std::size_t fan_in = geometry[l].fan_in;
    const auto weight = model.layers[l].weight.values();
    const auto bias = model.layers[l].bias.values();
    if (weight.size() != geometry[l].units * fan_in || bias.size() != geometry[l].units) {
      throw DimensionError("layer " + std::to_string(l) + " parameters do not match its geometry");
    }
    // Conv filters [f×c×kh×kw] and dense rows [out×in] are both contiguous per unit.
    for (std::size_t u = 0; u < geometry[l].units; ++u, ++row) {
      double* dst = g.features.data() + row * d;
      std::copy_n(weight.data() + u * fan_in, fan_in, dst);
      dst[fan_in] = bias[u];
    }
  }
  return g;
}

std::size_t edge_count(std::span<const std::size_t> partites) {
  std::size_t e = 0;
  for (std::size_t t = 0; t + 1 < partites.size(); ++t) e += partites[t] * partites[t + 1];
  return e;
}

EdgeRange::iterator::iterator(std::span<const std::size_t> partites, std::size_t t) : partites_(partites), t_(t) {
  for (std::size_t i = 0; i < t_ && i < partites_.size(); ++i) base_ += partites_[i];
  settle();
}

// Moves forward to the first partite pair that still has edges left; the end
// position is t = max(#partites − 1, 0) with u = v = 0.
void EdgeRange::iterator::settle() {
  while (t_ + 1 < partites_.size() && (partites_[t_] == 0 || partites_[t_ + 1] == 0)) {
    base_ += partites_[t_];
    ++t_;
  }
  n_u_ = t_ < partites_.size() ? partites_[t_] : 0;
}

EdgeRange::iterator& EdgeRange::iterator::operator++() {
  if (++v_ < partites_[t_ + 1]) return *this;
  v_ = 0;
  if (++u_ < partites_[t_]) return *this;
  u_ = 0;
  base_ += partites_[t_];
  ++t_;
  settle();
  return *this;
}

EdgeRange::iterator EdgeRange::end() const {
  return iterator(partites_, partites_.empty() ? 0 : partites_.size() - 1);
}

std::vector<std::pair<std::size_t, std::size_t>> edge_list(std::span<const std::size_t> partites) {
  const EdgeRange range(partites);
  return {range.begin(), range.end()};
}

namespace {

constexpr const char* kFormat = "ocgec-lgr";

nlohmann::json graph_header(const LayeredGraph& g) {
  std::vector<std::size_t> lengths;
  std::size_t u = 0;
  for (std::size_t p : g.partites) {
    lengths.push_back(g.node_origin.at(u).feature_length);
    u += p;
  }
  return {{"format", kFormat},   {"version", 1},        {"partites", g.partites},
          {"d", g.width()},      {"N", g.num_nodes()},  {"source_id", g.source_id},
          {"feature_lengths", lengths}};
}

}  // namespace

std::string serialize_graph(const LayeredGraph& g) {
  g.validate();
  return io::encode_blob(graph_header(g), g.features.values());
}

LayeredGraph deserialize_graph(const std::string& bytes) {
  io::BlobFile blob = io::decode_blob(bytes);
  try {
    const auto& h = blob.header;
    if (h.at("format").get<std::string>() != kFormat) throw FormatError("not a layered-graph file");
    if (h.at("version").get<int>() != 1) throw FormatError("unsupported layered-graph version");
    LayeredGraph g;
    g.partites = h.at("partites").get<std::vector<std::size_t>>();
    g.source_id = h.at("source_id").get<std::string>();
    const auto d = h.at("d").get<std::size_t>();
    const auto n = h.at("N").get<std::size_t>();
    const auto lengths = h.at("feature_lengths").get<std::vector<std::size_t>>();
    if (lengths.size() != g.partites.size()) throw FormatError("feature_lengths must have one entry per partite");
    for (std::size_t t = 0; t < g.partites.size(); ++t) {
      for (std::size_t u = 0; u < g.partites[t]; ++u) g.node_origin.push_back({t, u, lengths[t]});
    }
    if (g.node_origin.size() != n) throw FormatError("partite sizes do not sum to N");
    if (blob.values.size() != n * d) throw FormatError("feature blob does not hold N·d values");
    g.features = numerics::Tensor({n, d}, std::move(blob.values));
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed layered-graph header: ") + e.what());
  }
}

void save_graph(const std::filesystem::path& path, const LayeredGraph& g) {
  io::write_text_file(path, serialize_graph(g));
}

LayeredGraph load_graph(const std::filesystem::path& path) {
  try {
    return deserialize_graph(io::read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ocgec::graph
