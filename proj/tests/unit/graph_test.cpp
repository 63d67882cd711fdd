#include <gtest/gtest.h>

#include <random>
#include <set>
#include <variant>

#include "fixtures.hpp"
#include "ocgec/error.hpp"
#include "ocgec/graph/layered_graph.hpp"
#include "ocgec/zoo/training.hpp"

namespace {

using namespace ocgec;
using graph::LayeredGraph;
using zoo::Architecture;
using zoo::ConvLayer;
using zoo::DenseLayer;
using zoo::ImageShape;

using EdgeVec = std::vector<std::pair<std::size_t, std::size_t>>;

zoo::TinyModel random_model(const Architecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  zoo::TinyModel m = zoo::init_model(arch, zoo::InitScheme::uniform_fan_in, rng);
  // Make biases distinguishable from padding.
  for (auto& layer : m.layers) {
    for (double& b : layer.bias.values()) b += 0.5;
  }
  return m;
}

// 1–4 layers of 1–8 units each; a random prefix of conv layers (at least one)
// followed by dense layers.
Architecture random_architecture(Rng& rng) {
  std::uniform_int_distribution<std::size_t> layers(1, 4), units(1, 8), channels(1, 3), kernel(1, 3);
  Architecture arch;
  arch.input = ImageShape{channels(rng), 9, 9};
  const std::size_t n = layers(rng);
  const std::size_t convs = std::uniform_int_distribution<std::size_t>(1, n)(rng);
  for (std::size_t l = 0; l < n; ++l) {
    if (l < convs) {
      arch.layers.push_back(ConvLayer{units(rng), kernel(rng), kernel(rng)});
    } else {
      arch.layers.push_back(DenseLayer{units(rng)});
    }
  }
  return arch;
}

// Brute force: all ordered pairs u < v whose partites are adjacent.
EdgeVec brute_force_edges(const std::vector<std::size_t>& partites) {
  std::vector<std::size_t> part_of;
  for (std::size_t t = 0; t < partites.size(); ++t) part_of.insert(part_of.end(), partites[t], t);
  EdgeVec out;
  for (std::size_t u = 0; u < part_of.size(); ++u) {
    for (std::size_t v = u + 1; v < part_of.size(); ++v) {
      if (part_of[v] == part_of[u] + 1) out.emplace_back(u, v);
    }
  }
  return out;
}

TEST(ToGraph, TwoConvLayerExample) {
  const Architecture arch{ImageShape{1, 5, 5}, {ConvLayer{2, 2, 2}, ConvLayer{3, 2, 2}}};
  const zoo::TinyModel m = random_model(arch, 1);
  const LayeredGraph g = graph::to_graph(m, "ex");
  EXPECT_EQ(g.partites, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(g.num_nodes(), 5u);
  EXPECT_EQ(graph::edge_count(g.partites), 6u);
  EXPECT_EQ(g.width(), 9u);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t j = 5; j < 9; ++j) EXPECT_EQ(g.features(u, j), 0.0);
    EXPECT_EQ(g.features(u, 4), m.layers[0].bias[u]);
  }
  EXPECT_EQ(g.source_id, "ex");
}

TEST(ToGraph, SingleLayerHasNoEdges) {
  const LayeredGraph g = graph::to_graph(random_model(Architecture{ImageShape{1, 4, 4}, {ConvLayer{4, 3, 3}}}, 2));
  EXPECT_EQ(g.partites, (std::vector<std::size_t>{4}));
  EXPECT_EQ(graph::edge_count(g.partites), 0u);
  EXPECT_TRUE(graph::edge_list(g.partites).empty());
}

TEST(ToGraph, StandardArchitectureShape) {
  const LayeredGraph g = graph::to_graph(random_model(Architecture::standard(ImageShape{1, 16, 16}, 10), 3));
  EXPECT_EQ(g.partites, (std::vector<std::size_t>{8, 16, 10}));
  EXPECT_EQ(g.width(), 16u * 12 * 12 + 1);
  EXPECT_NO_THROW(g.validate());
}

TEST(ToGraph, RandomArchitecturesMatchBruteForce) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Architecture arch = random_architecture(rng);
    const zoo::TinyModel m = random_model(arch, 100 + trial);
    const LayeredGraph g = graph::to_graph(m);

    // Node and partite counts straight from the layer list.
    std::vector<std::size_t> expected_partites;
    for (const auto& spec : arch.layers) {
      expected_partites.push_back(std::holds_alternative<ConvLayer>(spec) ? std::get<ConvLayer>(spec).filters
                                                                          : std::get<DenseLayer>(spec).outputs);
    }
    ASSERT_EQ(g.partites, expected_partites) << "trial " << trial;
    std::size_t n = 0;
    for (std::size_t p : expected_partites) n += p;
    ASSERT_EQ(g.num_nodes(), n);
    ASSERT_EQ(g.features.dim(0), n);

    const EdgeVec brute = brute_force_edges(expected_partites);
    EXPECT_EQ(graph::edge_list(g.partites), brute);
    EXPECT_EQ(graph::edge_count(g.partites), brute.size());

    // Feature prefix: weights of unit u in flat order, then bias, then zeros.
    std::size_t row = 0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      const auto& w = m.layers[l].weight;
      const std::size_t units = w.dim(0);
      const std::size_t fan_in = w.size() / units;
      for (std::size_t u = 0; u < units; ++u, ++row) {
        for (std::size_t j = 0; j < fan_in; ++j) ASSERT_EQ(g.features(row, j), w[u * fan_in + j]);
        ASSERT_EQ(g.features(row, fan_in), m.layers[l].bias[u]);
        for (std::size_t j = fan_in + 1; j < g.width(); ++j) ASSERT_EQ(g.features(row, j), 0.0);
        ASSERT_EQ(g.node_origin[row], (graph::NodeOrigin{l, u, fan_in + 1}));
      }
    }
  }
}

TEST(ToGraph, DistinctWeightsGiveDistinctFeatures) {
  const Architecture arch{ImageShape{1, 6, 6}, {ConvLayer{3, 3, 3}, DenseLayer{4}}};
  const zoo::TinyModel a = random_model(arch, 5);
  const LayeredGraph ga = graph::to_graph(a);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t i = 0; i < a.layers[l].weight.size(); i += 7) {
      zoo::TinyModel b = a;
      b.layers[l].weight[i] += 1e-12;
      EXPECT_FALSE(graph::to_graph(b).features == ga.features);
    }
  }
}

TEST(EdgeIterator, SmallCases) {
  EXPECT_EQ(graph::edge_list(std::vector<std::size_t>{1, 1}), (EdgeVec{{0, 1}}));
  EXPECT_TRUE(graph::edge_list(std::vector<std::size_t>{3}).empty());
  EXPECT_TRUE(graph::edge_list(std::vector<std::size_t>{}).empty());
  const std::vector<std::size_t> three{2, 2, 2};
  EXPECT_EQ(graph::edge_list(three).size(), 8u);
  EXPECT_EQ(graph::edge_list(three), brute_force_edges(three));
}

TEST(EdgeIterator, MatchesNestedLoopOracle) {
  const std::vector<std::size_t> p{2, 3, 4};
  EdgeVec nested;
  std::size_t base = 0;
  for (std::size_t t = 0; t + 1 < p.size(); ++t) {
    for (std::size_t u = 0; u < p[t]; ++u) {
      for (std::size_t v = 0; v < p[t + 1]; ++v) nested.emplace_back(base + u, base + p[t] + v);
    }
    base += p[t];
  }
  ASSERT_EQ(nested.size(), 18u);
  const graph::EdgeRange range(p);
  EXPECT_EQ(range.size(), 18u);
  EXPECT_EQ(EdgeVec(range.begin(), range.end()), nested);
}

TEST(EdgeIterator, PartitePropertyOnSmallGraphs) {
  Rng rng(9);
  std::uniform_int_distribution<std::size_t> sz(1, 6), count(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> p(count(rng));
    for (auto& x : p) x = sz(rng);
    LayeredGraph g;
    g.partites = p;
    for (std::size_t t = 0; t < p.size(); ++t) g.node_origin.insert(g.node_origin.end(), p[t], {t, 0, 0});
    const auto part = g.node_partite();
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto [u, v] : graph::edges(g)) {
      EXPECT_EQ(part[v], part[u] + 1);
      EXPECT_TRUE(seen.insert({u, v}).second);
    }
    EXPECT_EQ(seen.size(), graph::edge_count(p));
  }
}

TEST(GraphFile, RoundTripIsBitIdentical) {
  ocgec::testing::TempDir dir("lgr");
  const LayeredGraph g = graph::to_graph(random_model(Architecture::standard(ImageShape{1, 8, 8}, 3), 11), "m-7");
  graph::save_graph(dir / "g.lgr", g);
  const LayeredGraph back = graph::load_graph(dir / "g.lgr");
  EXPECT_EQ(back.partites, g.partites);
  EXPECT_EQ(back.features, g.features);
  EXPECT_EQ(back.node_origin, g.node_origin);
  EXPECT_EQ(back.source_id, "m-7");
}

TEST(GraphFile, SizeIsHeaderPlusBlob) {
  const LayeredGraph g = graph::to_graph(random_model(Architecture::standard(ImageShape{1, 8, 8}, 3), 11));
  const std::string bytes = graph::serialize_graph(g);
  const std::size_t header = bytes.find('\n') + 1;
  EXPECT_EQ(bytes.size(), header + 8 * g.num_nodes() * g.width());
}

TEST(GraphFile, CorruptInputIsAFormatError) {
  const LayeredGraph g = graph::to_graph(random_model(Architecture::standard(ImageShape{1, 8, 8}, 3), 11));
  const std::string bytes = graph::serialize_graph(g);
  EXPECT_THROW(graph::deserialize_graph(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(graph::deserialize_graph(bytes.substr(0, 10)), FormatError);
  EXPECT_THROW(graph::deserialize_graph(""), FormatError);
  std::string wrong = bytes;
  wrong.replace(wrong.find("ocgec-lgr"), 9, "ocgec-xyz");
  EXPECT_THROW(graph::deserialize_graph(wrong), FormatError);
}

}  // namespace
