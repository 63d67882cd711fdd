#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ocgec/error.hpp"
#include "ocgec/gae/gae.hpp"
#include "ocgec/numerics/grad_check.hpp"
#include "ocgec/numerics/ops.hpp"

namespace {

using namespace ocgec;
using namespace ocgec::gae;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using ocgec::testing::random_tensor;

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out(t.dim(0));
  for (std::size_t r = 0; r < t.dim(0); ++r) out[r].assign(t.row(r).begin(), t.row(r).end());
  return out;
}

// Plain-loop MLP of one GIN layer applied to one already-aggregated row.
std::vector<double> mlp_row(const GinLayer& l, const std::vector<double>& x, bool final_relu) {
  std::vector<double> hidden(l.hidden_width()), out(l.out_width());
  for (std::size_t h = 0; h < hidden.size(); ++h) {
    double z = l.b1[h];
    for (std::size_t i = 0; i < x.size(); ++i) z += x[i] * l.w1(i, h);
    hidden[h] = std::max(0.0, z);
  }
  for (std::size_t o = 0; o < out.size(); ++o) {
    double z = l.b2[o];
    for (std::size_t h = 0; h < hidden.size(); ++h) z += hidden[h] * l.w2(h, o);
    out[o] = final_relu ? std::max(0.0, z) : z;
  }
  return out;
}

// ---------------------------------------------------------------- masking

TEST(Mask, SixOfEightRowsAtThreeQuarters) {
  Rng rng(1);
  const Tensor x = random_tensor({8, 5}, rng, 0.5, 1.0);
  const MaskPlan plan = make_mask_plan(8, 0.75, 3);
  ASSERT_EQ(plan.indices.size(), 6u);
  EXPECT_TRUE(std::is_sorted(plan.indices.begin(), plan.indices.end()));
  EXPECT_EQ(std::adjacent_find(plan.indices.begin(), plan.indices.end()), plan.indices.end());
  const Tensor copy = x;
  const Tensor m = mask_nodes(x, plan);
  EXPECT_EQ(x, copy);
  for (std::size_t r = 0; r < 8; ++r) {
    const bool masked = std::binary_search(plan.indices.begin(), plan.indices.end(), r);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(m(r, j), masked ? 0.0 : x(r, j));
  }
}

TEST(Mask, EndpointsAndErrors) {
  Rng rng(2);
  const Tensor x = random_tensor({7, 3}, rng);
  EXPECT_EQ(mask_nodes(x, make_mask_plan(7, 0.0, 1)), x);
  EXPECT_EQ(mask_nodes(x, make_mask_plan(7, 1.0, 1)), Tensor({7, 3}));
  EXPECT_THROW(mask_nodes(x, MaskPlan{0.1, {7}}), PlanError);
  EXPECT_THROW(make_mask_plan(7, 1.5, 1), SpecError);
  EXPECT_THROW(make_mask_plan(7, -0.1, 1), SpecError);
  EXPECT_EQ(make_mask_plan(50, 0.3, 9).indices, make_mask_plan(50, 0.3, 9).indices);
  EXPECT_NE(make_mask_plan(50, 0.3, 9).indices, make_mask_plan(50, 0.3, 10).indices);
}

// ---------------------------------------------------------------- GIN

TEST(Gin, AdjacencyFromPartitesIsSymmetric) {
  const std::vector<std::size_t> p{2, 3, 1};
  const Adjacency adj = Adjacency::from_partites(p);
  EXPECT_EQ(adj.num_nodes, 6u);
  EXPECT_EQ(adj.neighbors.size(), 2 * (2 * 3 + 3 * 1));
  for (std::size_t v = 0; v < 6; ++v) {
    for (std::size_t u : adj.neighbors_of(v)) {
      const auto back = adj.neighbors_of(u);
      EXPECT_NE(std::find(back.begin(), back.end(), v), back.end());
    }
  }
  const std::vector<std::pair<std::size_t, std::size_t>> bad{{0, 9}};
  EXPECT_THROW(Adjacency::from_edges(3, bad), DimensionError);
}

TEST(Gin, PathGraphAggregationByHand) {
  // Path 0-1-2.
  const std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}};
  const Adjacency adj = Adjacency::from_edges(3, edges);
  Tape tape;
  const Var h = tape.constant(Tensor({3, 2}, {1, 2, 10, 20, 100, 200}));
  EXPECT_EQ(aggregate(h, adj).value(), Tensor({3, 2}, {11, 22, 111, 222, 110, 220}));
}

TEST(Gin, EdgelessGraphAppliesMlpRowWise) {
  Rng rng(3);
  const std::size_t widths[] = {4, 3, 2};
  const GinParams p = GinParams::init(widths, rng);
  const Tensor x = random_tensor({5, 4}, rng);
  const Tensor h = gin_apply(x, Adjacency::from_edges(5, {}), p);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto mid = mlp_row(p.layers[0], rows_of(x)[r], true);
    const auto out = mlp_row(p.layers[1], mid, false);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(h(r, j), out[j], 1e-14);
  }
}

TEST(Gin, PermutationEquivariance) {
  Rng rng(4);
  const std::size_t widths[] = {6, 5, 3};
  const GinParams p = GinParams::init(widths, rng);
  const std::vector<std::size_t> partites{2, 3, 2};
  const std::size_t n = 7;
  const Tensor x = random_tensor({n, 6}, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);  // new index of old node i is perm[i]

  std::vector<std::pair<std::size_t, std::size_t>> edges, permuted_edges;
  for (auto e : graph::edge_list(partites)) {
    edges.push_back(e);
    permuted_edges.emplace_back(perm[e.first], perm[e.second]);
  }
  Tensor px({n, 6});
  for (std::size_t i = 0; i < n; ++i) std::copy(x.row(i).begin(), x.row(i).end(), px.row(perm[i]).begin());

  const Tensor h = gin_apply(x, Adjacency::from_edges(n, edges), p);
  const Tensor ph = gin_apply(px, Adjacency::from_edges(n, permuted_edges), p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(ph(perm[i], j), h(i, j), 1e-12);
  }
}

TEST(Gin, WidthMismatchAndDropoutModes) {
  Rng rng(5);
  const std::size_t widths[] = {4, 3};
  const GinParams p = GinParams::init(widths, rng);
  const Adjacency adj = Adjacency::from_partites(std::vector<std::size_t>{2, 2});
  EXPECT_THROW(gin_apply(random_tensor({4, 5}, rng), adj, p), DimensionError);

  const Tensor x = random_tensor({4, 4}, rng, 0.1, 1.0);
  EXPECT_EQ(gin_apply(x, adj, p), gin_apply(x, adj, p));
  // Train-mode dropout perturbs the output for at least one of a few draws.
  const Tensor eval = gin_apply(x, adj, p);
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 8 && !changed; ++seed) {
    Tape tape;
    const auto vars = record_parameters(tape, p.parameters());
    Rng drop(seed);
    changed = !(gin_forward(tape.constant(x), adj, vars, 0.5, &drop).value() == eval);
  }
  EXPECT_TRUE(changed);
}

// ---------------------------------------------------------------- SCE

TEST(Sce, IdenticalRowsGiveZero) {
  Rng rng(6);
  const Tensor x = random_tensor({6, 4}, rng);
  const std::vector<std::size_t> rows{0, 2, 5};
  EXPECT_NEAR(sce_value(x, x, rows), 0.0, 1e-15);
}

TEST(Sce, AntipodalRowGivesFour) {
  const std::vector<std::size_t> rows{0};
  EXPECT_DOUBLE_EQ(sce_value(Tensor({1, 2}, {1, 0}), Tensor({1, 2}, {-1, 0}), rows), 4.0);
}

TEST(Sce, MatchesScalarOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor({20, 9}, rng);
    const Tensor y = random_tensor({20, 9}, rng);
    const MaskPlan plan = make_mask_plan(20, 0.25, seed);
    ASSERT_EQ(plan.indices.size(), 5u);
    for (double gamma : {1.0, 2.0, 3.0}) {
      const SceConfig cfg{gamma, 1e-12};
      EXPECT_NEAR(sce_value(x, y, plan.indices, cfg),
                  oracle::sce_scalar(rows_of(x), rows_of(y), plan.indices, gamma, 1e-12), 1e-12);
    }
  }
}

TEST(Sce, RangeScaleAndPermutationInvariance) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor({10, 5}, rng);
    Tensor y = random_tensor({10, 5}, rng);
    const MaskPlan plan = make_mask_plan(10, 0.5, seed);
    const SceConfig cfg{2.0, 1e-12};
    const double base = sce_value(x, y, plan.indices, cfg);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 4.0);

    Tensor scaled = y;
    std::uniform_real_distribution<double> pos(0.01, 100.0);
    for (std::size_t r = 0; r < 10; ++r) {
      const double s = pos(rng);
      for (double& v : scaled.row(r)) v *= s;
    }
    EXPECT_NEAR(sce_value(x, scaled, plan.indices, cfg), base, 1e-12);

    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor px({10, 5}), py({10, 5});
    std::vector<std::size_t> prows;
    for (std::size_t i = 0; i < 10; ++i) {
      std::copy(x.row(i).begin(), x.row(i).end(), px.row(perm[i]).begin());
      std::copy(y.row(i).begin(), y.row(i).end(), py.row(perm[i]).begin());
    }
    for (std::size_t r : plan.indices) prows.push_back(perm[r]);
    EXPECT_NEAR(sce_value(px, py, prows, cfg), base, 1e-12);
  }
}

TEST(Sce, InvalidInputsRejected) {
  const Tensor x({3, 2}, 1.0);
  EXPECT_THROW(sce_value(x, x, std::vector<std::size_t>{}), SpecError);
  EXPECT_THROW(sce_value(x, x, std::vector<std::size_t>{0}, SceConfig{0.5, 1e-12}), SpecError);
  EXPECT_THROW(sce_value(x, Tensor({3, 3}), std::vector<std::size_t>{0}), DimensionError);
}

TEST(Sce, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor({6, 4}, rng);
    const Tensor y = random_tensor({6, 4}, rng);
    const std::vector<std::size_t> rows{1, 3, 4};
    const numerics::MultiScalarFn f = [&](Tape&, std::span<const Var> v) { return sce_loss(v[0], v[1], rows); };
    const Tensor points[] = {x, y};
    EXPECT_LT(numerics::grad_check(f, points, 1e-6), 1e-4) << "seed " << seed;
  }
}

// ---------------------------------------------------------------- full loss and pre-training

GraphInput small_graph(Rng& rng, std::vector<std::size_t> partites, std::size_t d) {
  std::size_t n = 0;
  for (std::size_t p : partites) n += p;
  return {random_tensor({n, d}, rng), Adjacency::from_partites(partites), partites};
}

TEST(MaskedReconstruction, GradientWithRespectToAllGinParameters) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GraphInput g = small_graph(rng, {3, 4, 2}, 6);
    const std::size_t enc[] = {5, 3};
    const std::size_t dec[] = {4};
    const GaeParams p = GaeParams::init(6, enc, dec, seed);
    const MaskPlan plan = make_mask_plan(9, 0.5, seed);
    const std::size_t ne = p.encoder.num_tensors();
    const numerics::MultiScalarFn f = [&](Tape& tape, std::span<const Var> v) {
      Rng drop(seed + 100);
      return masked_reconstruction_loss(tape, g, v.subspan(0, ne), v.subspan(ne), plan, SceConfig{}, seed % 2 == 1,
                                        0.2, &drop);
    };
    const auto params = p.parameters();
    // A step of 1e-5 balances truncation against cancellation through four GIN layers.
    EXPECT_LT(numerics::grad_check(f, params, 1e-5), 1e-4) << "seed " << seed;
  }
}

TEST(Pretrain, ZeroEpochsLeavesParametersUnchanged) {
  Rng rng(1);
  const std::vector<GraphInput> graphs{small_graph(rng, {2, 3}, 4)};
  const std::size_t enc[] = {3, 2};
  const std::size_t dec[] = {3};
  const GaeParams init = GaeParams::init(4, enc, dec, 7);
  PretrainConfig cfg;
  cfg.epochs = 0;
  const PretrainResult r = pretrain(graphs, init, cfg);
  EXPECT_EQ(r.params.parameters(), init.parameters());
  EXPECT_TRUE(r.loss_trace.empty());
}

// Training loss averaged over every possible single-node mask, without dropout.
double loss_over_all_single_masks(const GraphInput& g, const GaeParams& p) {
  double total = 0.0;
  const std::size_t n = g.features.dim(0);
  for (std::size_t v = 0; v < n; ++v) {
    Tape tape;
    std::vector<Var> enc, dec;
    for (const Tensor& t : p.encoder.parameters()) enc.push_back(tape.constant(t));
    for (const Tensor& t : p.decoder.parameters()) dec.push_back(tape.constant(t));
    total += masked_reconstruction_loss(tape, g, enc, dec, MaskPlan{0.25, {v}}, SceConfig{}, false, 0.0, nullptr)
                 .value()[0];
  }
  return total / static_cast<double>(n);
}

TEST(Pretrain, OverfitsASingleFourNodeGraph) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const std::vector<GraphInput> graphs{small_graph(rng, {2, 2}, 5)};
    const std::size_t enc[] = {64, 32};
    const std::size_t dec[] = {64};
    const GaeParams init = GaeParams::init(5, enc, dec, seed);
    PretrainConfig cfg;
    cfg.epochs = 300;
    cfg.mask_rate = 0.25;  // one node of four per epoch
    cfg.dropout = 0.0;
    cfg.seed = seed;
    const PretrainResult r = pretrain(graphs, init, cfg);
    ASSERT_EQ(r.loss_trace.size(), 300u);
    const double before = loss_over_all_single_masks(graphs[0], init);
    const double after = loss_over_all_single_masks(graphs[0], r.params);
    EXPECT_LT(after, 0.1 * before) << "seed " << seed;
  }
}

TEST(Pretrain, DeterministicAndThreadIndependent) {
  Rng rng(2);
  std::vector<GraphInput> graphs;
  for (int i = 0; i < 5; ++i) graphs.push_back(small_graph(rng, {2, 3, 2}, 6));
  const std::size_t enc[] = {5, 3};
  const std::size_t dec[] = {5};
  const GaeParams init = GaeParams::init(6, enc, dec, 3);
  PretrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 2;
  cfg.seed = 11;
  const PretrainResult a = pretrain(graphs, init, cfg);
  cfg.threads = 3;
  const PretrainResult b = pretrain(graphs, init, cfg);
  EXPECT_EQ(a.params.parameters(), b.params.parameters());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  for (double l : a.loss_trace) EXPECT_TRUE(std::isfinite(l));
}

TEST(Pretrain, InvalidInputsRejected) {
  const std::size_t enc[] = {3, 2};
  const std::size_t dec[] = {3};
  const GaeParams init = GaeParams::init(4, enc, dec, 7);
  EXPECT_THROW(pretrain(std::vector<GraphInput>{}, init, PretrainConfig{}), SpecError);
  Rng rng(3);
  const std::vector<GraphInput> wrong{small_graph(rng, {2, 2}, 5)};
  EXPECT_THROW(pretrain(wrong, init, PretrainConfig{}), DimensionError);
}

TEST(GaeFile, RoundTripAndTruncation) {
  ocgec::testing::TempDir dir("gae");
  const std::size_t enc[] = {6, 3};
  const std::size_t dec[] = {6};
  const GaeParams p = GaeParams::init(10, enc, dec, 4);
  PretrainConfig cfg;
  cfg.seed = 77;
  cfg.sce.gamma = 3.0;
  save_gae(dir / "m.gae", p, cfg);
  PretrainConfig back_cfg;
  const GaeParams back = load_gae(dir / "m.gae", &back_cfg);
  EXPECT_EQ(back.parameters(), p.parameters());
  EXPECT_EQ(back_cfg.seed, 77u);
  EXPECT_EQ(back_cfg.sce.gamma, 3.0);
  std::string bytes = ocgec::testing::read_bytes(dir / "m.gae");
  bytes.resize(bytes.size() - 16);
  std::ofstream(dir / "short.gae", std::ios::binary) << bytes;
  EXPECT_THROW(load_gae(dir / "short.gae"), FormatError);
}

}  // namespace
