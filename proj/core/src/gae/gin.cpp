#include "ocgec/gae/gin.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ocgec/error.hpp"
#include "ocgec/numerics/ops.hpp"

namespace ocgec::gae {

using numerics::Tensor;
using numerics::Shape;
using numerics::Var;

Adjacency Adjacency::from_edges(std::size_t num_nodes, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  Adjacency adj;
  adj.num_nodes = num_nodes;
  std::vector<std::size_t> degree(num_nodes, 0);
  for (auto [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) throw DimensionError("edge endpoint out of range");
    if (u == v) throw DimensionError("self loops are not allowed");
    ++degree[u];
    ++degree[v];
  }
  adj.offsets.assign(num_nodes + 1, 0);
  for (std::size_t v = 0; v < num_nodes; ++v) adj.offsets[v + 1] = adj.offsets[v] + degree[v];
  adj.neighbors.resize(adj.offsets.back());
  std::vector<std::size_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (auto [u, v] : edges) {
    adj.neighbors[cursor[u]++] = v;
    adj.neighbors[cursor[v]++] = u;
  }
  for (std::size_t v = 0; v < num_nodes; ++v) {
    std::sort(adj.neighbors.begin() + static_cast<std::ptrdiff_t>(adj.offsets[v]),
              adj.neighbors.begin() + static_cast<std::ptrdiff_t>(adj.offsets[v + 1]));
  }
  return adj;
}

Adjacency Adjacency::from_partites(std::span<const std::size_t> partites) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t base = 0, n = 0;
  for (std::size_t p : partites) n += p;
  for (std::size_t t = 0; t + 1 < partites.size(); ++t) {
    for (std::size_t u = 0; u < partites[t]; ++u) {
      for (std::size_t v = 0; v < partites[t + 1]; ++v) edges.emplace_back(base + u, base + partites[t] + v);
    }
    base += partites[t];
  }
  return from_edges(n, edges);
}

namespace {

// out = h + A·h for the symmetric adjacency A; the adjoint has the same form.
void propagate(const Adjacency& adj, const double* in, double* out, std::size_t k) {
  for (std::size_t v = 0; v < adj.num_nodes; ++v) {
    double* dst = out + v * k;
    const double* self = in + v * k;
    for (std::size_t j = 0; j < k; ++j) dst[j] += self[j];
    for (std::size_t u : adj.neighbors_of(v)) {
      const double* src = in + u * k;
      for (std::size_t j = 0; j < k; ++j) dst[j] += src[j];
    }
  }
}

}  // namespace

Var aggregate(Var h, const Adjacency& adj) {
  const Tensor& x = h.value();
  if (x.rank() != 2 || x.dim(0) != adj.num_nodes) {
    throw DimensionError("aggregate expects [" + std::to_string(adj.num_nodes) + "×k], got " +
                         numerics::to_string(x.shape()));
  }
  const std::size_t k = x.dim(1);
  Tensor out(x.shape());
  propagate(adj, x.data(), out.data(), k);
  return h.tape().record(std::move(out), {h}, [&adj, k](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0] != nullptr) propagate(adj, g.data(), gi[0]->data(), k);
  });
}

std::size_t GinParams::hidden_width(std::size_t in, std::size_t out, std::size_t hidden_cap) {
  return hidden_cap == 0 ? std::min(in, out) : std::min(std::max(in, out), hidden_cap);
}

GinParams GinParams::zeros(std::span<const std::size_t> widths, std::span<const std::size_t> hidden) {
  if (widths.size() < 2 || hidden.size() + 1 != widths.size()) throw DimensionError("GIN width lists do not match");
  GinParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    p.layers.push_back({Tensor({widths[i], hidden[i]}), Tensor({hidden[i]}), Tensor({hidden[i], widths[i + 1]}),
                        Tensor({widths[i + 1]})});
  }
  return p;
}

std::vector<std::size_t> GinParams::hidden_widths() const {
  std::vector<std::size_t> h;
  for (const GinLayer& l : layers) h.push_back(l.hidden_width());
  return h;
}

GinParams GinParams::init(std::span<const std::size_t> widths, Rng& rng, std::size_t hidden_cap) {
  if (widths.size() < 2) throw SpecError("a GIN stack needs at least an input and an output width");
  GinParams p;
  auto uniform = [&rng](Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values()) v = dist(rng);
    return t;
  };
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in = widths[i], out = widths[i + 1], hidden = hidden_width(in, out, hidden_cap);
    if (in == 0 || out == 0) throw SpecError("GIN widths must be positive");
    GinLayer layer;
    layer.w1 = uniform({in, hidden}, in);
    layer.b1 = uniform({hidden}, in);
    layer.w2 = uniform({hidden, out}, hidden);
    layer.b2 = uniform({out}, hidden);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::size_t GinParams::in_width() const {
  if (layers.empty()) throw DimensionError("empty GIN stack");
  return layers.front().in_width();
}

std::size_t GinParams::out_width() const {
  if (layers.empty()) throw DimensionError("empty GIN stack");
  return layers.back().out_width();
}

std::vector<std::size_t> GinParams::widths() const {
  std::vector<std::size_t> w{in_width()};
  for (const GinLayer& l : layers) w.push_back(l.out_width());
  return w;
}

std::vector<Tensor> GinParams::parameters() const {
  std::vector<Tensor> out;
  out.reserve(num_tensors());
  for (const GinLayer& l : layers) {
    out.push_back(l.w1);
    out.push_back(l.b1);
    out.push_back(l.w2);
    out.push_back(l.b2);
  }
  return out;
}

void GinParams::set_parameters(std::span<const Tensor> params) {
  if (params.size() != num_tensors()) throw DimensionError("wrong number of GIN parameter tensors");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Tensor* dst[] = {&layers[i].w1, &layers[i].b1, &layers[i].w2, &layers[i].b2};
    for (std::size_t j = 0; j < 4; ++j) {
      numerics::require_same_shape(*dst[j], params[4 * i + j], "GIN parameter");
      *dst[j] = params[4 * i + j];
    }
  }
}

void GinParams::validate() const {
  if (layers.empty()) throw DimensionError("empty GIN stack");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const GinLayer& l = layers[i];
    const bool ok = l.w1.rank() == 2 && l.w2.rank() == 2 && l.b1.shape() == Shape{l.w1.dim(1)} &&
                    l.w2.dim(0) == l.w1.dim(1) && l.b2.shape() == Shape{l.w2.dim(1)};
    if (!ok) throw DimensionError("GIN layer " + std::to_string(i) + " has inconsistent shapes");
    if (i > 0 && layers[i - 1].out_width() != l.in_width()) {
      throw DimensionError("GIN layers " + std::to_string(i - 1) + " and " + std::to_string(i) + " do not compose");
    }
  }
}

Var gin_forward(Var features, const Adjacency& adj, std::span<const Var> params, double dropout_rate, Rng* rng) {
  if (params.empty() || params.size() % 4 != 0) throw DimensionError("GIN parameters come in groups of four");
  const std::size_t num_layers = params.size() / 4;
  if (features.value().rank() != 2 || features.value().dim(1) != params[0].value().dim(0)) {
    throw DimensionError("feature width " + numerics::to_string(features.shape()) +
                         " does not match GIN input width " + std::to_string(params[0].value().dim(0)));
  }
  Var h = features;
  for (std::size_t i = 0; i < num_layers; ++i) {
    if (rng != nullptr && dropout_rate > 0.0) h = numerics::dropout(h, dropout_rate, *rng);
    Var agg = aggregate(h, adj);
    Var hidden = numerics::relu(numerics::add_row_bias(numerics::matmul(agg, params[4 * i]), params[4 * i + 1]));
    h = numerics::add_row_bias(numerics::matmul(hidden, params[4 * i + 2]), params[4 * i + 3]);
    if (i + 1 < num_layers) h = numerics::relu(h);
  }
  return h;
}

std::vector<Var> record_parameters(numerics::Tape& tape, std::span<const Tensor> params) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const Tensor& p : params) out.push_back(tape.variable(p));
  return out;
}

Tensor gin_apply(const Tensor& features, const Adjacency& adj, const GinParams& params) {
  numerics::Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params.parameters()) vars.push_back(tape.constant(p));
  return gin_forward(tape.constant(features), adj, vars).value();
}

}  // namespace ocgec::gae
