#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ocgec/gae/gae.hpp"
#include "ocgec/gae/mask.hpp"
#include "ocgec/gae/sce.hpp"
#include "ocgec/graph/layered_graph.hpp"
#include "ocgec/harness/experiment.hpp"
#include "ocgec/numerics/kernels.hpp"
#include "ocgec/numerics/ops.hpp"
#include "ocgec/occ/occ.hpp"
#include "ocgec/rng.hpp"
#include "ocgec/zoo/training.hpp"

using namespace ocgec;
using numerics::Tensor;

namespace {

Tensor random_tensor(numerics::Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  return t;
}

zoo::TinyModel standard_model(std::uint64_t seed) {
  Rng rng(seed);
  return zoo::init_model(zoo::Architecture::standard({1, 16, 16}, 10), zoo::InitScheme::uniform_fan_in, rng);
}

}  // namespace

static void BM_GemmNN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  Tensor c({n, n});
  for (auto _ : state) {
    numerics::kernels::gemm_nn(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GMAC/s"] = benchmark::Counter(static_cast<double>(n * n * n), benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_GemmNN)->Arg(32)->Arg(128)->Arg(256);

// First layer of the standard tiny model, forward and backward.
static void BM_Conv2dForwardBackward(benchmark::State& state) {
  const Tensor x = random_tensor({1, 16, 16}, 3), w = random_tensor({8, 1, 3, 3}, 4), b = random_tensor({8}, 5);
  for (auto _ : state) {
    numerics::Tape tape;
    const auto out = numerics::conv2d(tape.constant(x), tape.variable(w), tape.variable(b));
    tape.backward(numerics::sum_squares(out));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Conv2dForwardBackward);

static void BM_TinyModelSampleStep(benchmark::State& state) {
  const zoo::TinyModel model = standard_model(6);
  const auto geometry = zoo::resolve(model.arch);
  const std::vector<Tensor> params = model.parameters();
  const Tensor image = random_tensor({1, 16, 16}, 7);
  for (auto _ : state) {
    numerics::Tape tape;
    std::vector<numerics::Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.variable(p));
    const auto logits = zoo::forward(tape, vars, geometry, tape.constant(image));
    tape.backward(numerics::softmax_cross_entropy(logits, 3));
    benchmark::DoNotOptimize(tape.grad(vars.front()).data());
  }
}
BENCHMARK(BM_TinyModelSampleStep);

static void BM_ToGraph(benchmark::State& state) {
  const zoo::TinyModel model = standard_model(8);
  for (auto _ : state) benchmark::DoNotOptimize(graph::to_graph(model, "m"));
}
BENCHMARK(BM_ToGraph);

// One masked reconstruction step of the default auto-encoder on one graph.
static void BM_GaeLossForwardBackward(benchmark::State& state) {
  const gae::GraphInput g = gae::GraphInput::from(graph::to_graph(standard_model(9), "m"));
  const std::vector<std::size_t> enc{64, 32}, dec{64};
  const gae::GaeParams params = gae::GaeParams::init(g.features.dim(1), enc, dec, 10);
  const std::vector<Tensor> ep = params.encoder.parameters(), dp = params.decoder.parameters();
  const gae::MaskPlan plan = gae::make_mask_plan(g.features.dim(0), 0.75, 11);
  for (auto _ : state) {
    numerics::Tape tape;
    const auto ev = gae::record_parameters(tape, ep), dv = gae::record_parameters(tape, dp);
    const auto loss = gae::masked_reconstruction_loss(tape, g, ev, dv, plan, {}, true, 0.0, nullptr);
    tape.backward(loss);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_GaeLossForwardBackward);

static void BM_SceValue(benchmark::State& state) {
  const Tensor x = random_tensor({34, 2305}, 12), y = random_tensor({34, 2305}, 13);
  std::vector<std::size_t> rows(25);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (auto _ : state) benchmark::DoNotOptimize(gae::sce_value(x, y, rows));
}
BENCHMARK(BM_SceValue);

static void BM_Detect(benchmark::State& state) {
  std::vector<gae::GraphInput> graphs;
  for (std::uint64_t s = 0; s < 4; ++s) graphs.push_back(gae::GraphInput::from(graph::to_graph(standard_model(20 + s))));
  const std::vector<std::size_t> widths{graphs[0].features.dim(1), 64, 32};
  Rng rng(14);
  occ::OccConfig cfg;
  cfg.max_epochs = 1;
  const occ::OccModel model = occ::train_occ(graphs, gae::GinParams::init(widths, rng, 64), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(occ::detect(graphs[0], model));
}
BENCHMARK(BM_Detect);

static void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n}, 15), b = random_tensor({n}, 16);
  const std::span<const double> sa(a.data(), n), sb(b.data(), n);
  for (auto _ : state) benchmark::DoNotOptimize(harness::auc(sa, sb));
}
BENCHMARK(BM_Auc)->Arg(64)->Arg(10000);

BENCHMARK_MAIN();
