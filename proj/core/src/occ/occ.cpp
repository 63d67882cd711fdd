#include "ocgec/occ/occ.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/numerics/adam.hpp"
#include "ocgec/numerics/ops.hpp"
#include "ocgec/parallel.hpp"
#include "ocgec/zoo/dataset.hpp"

namespace ocgec::occ {

using numerics::Tensor;
using numerics::Var;

double Hypersphere::radius() const { return std::sqrt(std::max(0.0, radius_sq)); }

void OccConfig::validate() const {
  if (!(nu > 0.0 && nu <= 1.0)) throw SpecError("nu must lie in (0, 1]");
  if (!(weight_decay >= 0.0)) throw SpecError("weight decay must be non-negative");
  if (!(lr > 0.0)) throw SpecError("learning rate must be positive");
  if (batch_size == 0) throw SpecError("batch size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw SpecError("dropout rate must lie in [0, 1)");
  if (!(collapse_tolerance >= 0.0)) throw SpecError("collapse tolerance must be non-negative");
}

Var hierarchical_embed(Var h, std::span<const std::size_t> partites) {
  const Tensor& x = h.value();
  if (x.rank() != 2) throw DimensionError("hierarchical_embed expects an N×k matrix");
  std::size_t n = 0;
  for (std::size_t p : partites) {
    if (p == 0) throw SpecError("empty partite");
    n += p;
  }
  if (n != x.dim(0)) throw DimensionError("partite sizes do not sum to the row count");
  const std::size_t k = x.dim(1);
  std::vector<std::size_t> parts(partites.begin(), partites.end());
  Tensor out({parts.size() * k});
  std::size_t row = 0;
  for (std::size_t t = 0; t < parts.size(); ++t) {
    double* dst = out.data() + t * k;
    for (std::size_t r = 0; r < parts[t]; ++r, ++row) {
      for (std::size_t j = 0; j < k; ++j) dst[j] += x(row, j);
    }
    const double inv = 1.0 / static_cast<double>(parts[t]);
    for (std::size_t j = 0; j < k; ++j) dst[j] *= inv;
  }
  return h.tape().record(std::move(out), {h}, [parts = std::move(parts), k](const Tensor& g, std::span<Tensor* const> gi) {
    Tensor& gh = *gi[0];
    std::size_t row = 0;
    for (std::size_t t = 0; t < parts.size(); ++t) {
      const double inv = 1.0 / static_cast<double>(parts[t]);
      for (std::size_t r = 0; r < parts[t]; ++r, ++row) {
        for (std::size_t j = 0; j < k; ++j) gh(row, j) += g[t * k + j] * inv;
      }
    }
  });
}

Var svdd_loss(std::span<const Var> embeddings, std::span<const double> center, double radius_sq, double nu,
              double weight_decay, std::span<const Var> weights) {
  if (embeddings.empty()) throw SpecError("svdd_loss needs at least one embedding");
  if (!(nu > 0.0 && nu <= 1.0)) throw SpecError("nu must lie in (0, 1]");
  numerics::Tape& tape = embeddings.front().tape();
  const Var c = tape.constant(Tensor({center.size()}, std::vector<double>(center.begin(), center.end())));
  std::vector<Var> hinges;
  hinges.reserve(embeddings.size());
  for (const Var& e : embeddings) {
    hinges.push_back(numerics::relu(numerics::add_scalar(numerics::sum_squares(numerics::sub(e, c)), -radius_sq)));
  }
  const double k = static_cast<double>(embeddings.size());
  Var loss = numerics::add_scalar(numerics::scale(numerics::add_n(hinges), 1.0 / (nu * k)), radius_sq);
  if (weight_decay > 0.0 && !weights.empty()) {
    std::vector<Var> norms;
    for (const Var& w : weights) norms.push_back(numerics::sum_squares(w));
    loss = numerics::add(loss, numerics::scale(numerics::add_n(norms), 0.5 * weight_decay));
  }
  return loss;
}

double svdd_value(std::span<const double> distances_sq, double radius_sq, double nu, double weight_decay,
                  double weight_sq_norm) {
  if (distances_sq.empty()) throw SpecError("svdd_value needs at least one distance");
  double hinge = 0.0;
  for (double d : distances_sq) hinge += std::max(0.0, d - radius_sq);
  return radius_sq + hinge / (nu * static_cast<double>(distances_sq.size())) + 0.5 * weight_decay * weight_sq_norm;
}

std::vector<double> embed(const gae::GraphInput& graph, const gae::GinParams& encoder) {
  numerics::Tape tape;
  const Tensor h = gae::encode(graph, encoder);
  const Tensor e = hierarchical_embed(tape.constant(h), graph.partites).value();
  return {e.values().begin(), e.values().end()};
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("embedding and center widths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

namespace {

std::vector<std::vector<double>> embed_all(std::span<const gae::GraphInput> graphs, const gae::GinParams& encoder,
                                           unsigned threads) {
  std::vector<std::vector<double>> out(graphs.size());
  parallel_for(graphs.size(), threads, [&](std::size_t i) { out[i] = embed(graphs[i], encoder); });
  return out;
}

std::vector<double> mean_of(const std::vector<std::vector<double>>& rows) {
  std::vector<double> c(rows.front().size(), 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += r[j];
  }
  for (double& v : c) v /= static_cast<double>(rows.size());
  return c;
}

constexpr double kOriginTolerance = 1e-6;

bool near_origin(const std::vector<double>& c) {
  double s = 0.0;
  for (double v : c) s += v * v;
  return std::sqrt(s) < kOriginTolerance;
}

double sq_norm(std::span<const Tensor> params) {
  double s = 0.0;
  for (const Tensor& t : params) {
    for (double v : t.values()) s += v * v;
  }
  return s;
}

}  // namespace

CenterInit init_center(std::span<const gae::GraphInput> graphs, const gae::GinParams& encoder, unsigned threads) {
  if (graphs.empty()) throw SpecError("init_center needs at least one graph");
  CenterInit out;
  out.center = mean_of(embed_all(graphs, encoder, threads));
  out.near_origin = near_origin(out.center);
  return out;
}

double update_radius(std::span<const double> distances_sq, double nu) {
  if (distances_sq.empty()) throw SpecError("update_radius needs at least one distance");
  if (!(nu > 0.0 && nu <= 1.0)) throw SpecError("nu must lie in (0, 1]");
  std::vector<double> sorted(distances_sq.begin(), distances_sq.end());
  std::sort(sorted.begin(), sorted.end());
  const double k = static_cast<double>(sorted.size());
  // Guard the ceiling against (1−ν)·k landing a hair above an integer.
  const double rank = std::ceil((1.0 - nu) * k - 1e-9);
  const auto index = static_cast<std::size_t>(std::clamp(rank - 1.0, 0.0, k - 1.0));
  return sorted[index];
}

OccModel train_occ(std::span<const gae::GraphInput> graphs, const gae::GinParams& encoder, const OccConfig& cfg,
                   const EpochMonitor& monitor) {
  cfg.validate();
  encoder.validate();
  if (graphs.empty()) throw SpecError("one-class training needs at least one graph");
  for (const gae::GraphInput& g : graphs) {
    if (g.features.rank() != 2 || g.features.dim(1) != encoder.in_width()) {
      throw DimensionError("graph feature width does not match the encoder input width");
    }
  }

  OccModel model;
  model.encoder = encoder;
  model.nu = cfg.nu;
  const CenterInit init = init_center(graphs, encoder, cfg.threads);
  model.sphere.center = init.center;
  model.sphere.radius_sq = 0.0;
  model.center_near_origin = init.near_origin;

  std::vector<Tensor> params = encoder.parameters();
  numerics::AdamState adam(params);
  const std::size_t k = graphs.size();
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::optional<OccModel> best_model;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // Encoder steps with c and R fixed.
    const auto order = zoo::shuffled_indices(k, derive_seed(derive_seed(cfg.seed, "occ-order"), epoch));
    const std::vector<double>& c = model.sphere.center;
    const double r2 = model.sphere.radius_sq;
    for (std::size_t start = 0; start < k; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, k - start);
      const double hinge_scale = 1.0 / (cfg.nu * static_cast<double>(count));
      std::vector<std::vector<Tensor>> grads(count);
      parallel_for(count, cfg.threads, [&](std::size_t b) {
        const std::size_t gi = order[start + b];
        const gae::GraphInput& g = graphs[gi];
        numerics::Tape tape;
        const std::vector<Var> vars = gae::record_parameters(tape, params);
        Rng drop(derive_seed(derive_seed(cfg.seed, "occ-dropout"), epoch, gi));
        const Var h = gae::gin_forward(tape.constant(g.features), g.adjacency, vars, cfg.dropout, &drop);
        const Var e = hierarchical_embed(h, g.partites);
        const Var offset = numerics::sub(e, tape.constant(Tensor({c.size()}, c)));
        const Var hinge = numerics::relu(numerics::add_scalar(numerics::sum_squares(offset), -r2));
        tape.backward(numerics::scale(hinge, hinge_scale));
        grads[b].reserve(vars.size());
        for (const Var& v : vars) grads[b].push_back(tape.grad(v));
      });
      std::vector<Tensor> total = std::move(grads[0]);
      for (std::size_t b = 1; b < count; ++b) {
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += grads[b][j];
      }
      // d/dW of (λ/2)·‖W‖².
      for (std::size_t j = 0; j < total.size(); ++j) {
        Tensor decay = params[j];
        decay *= cfg.weight_decay;
        total[j] += decay;
      }
      numerics::adam_step(params, total, adam, cfg.lr);
    }
    model.encoder.set_parameters(params);

    // Center, then radius, both under the updated encoder.
    const auto embeddings = embed_all(graphs, model.encoder, cfg.threads);
    model.sphere.center = mean_of(embeddings);
    std::vector<double> dist(k);
    for (std::size_t i = 0; i < k; ++i) dist[i] = squared_distance(embeddings[i], model.sphere.center);
    if (k >= 2) {
      double mean_sq = 0.0;
      for (double d : dist) mean_sq += d / static_cast<double>(k);
      if (std::sqrt(mean_sq) < cfg.collapse_tolerance) {
        throw CollapseError("training embeddings collapsed onto the center at epoch " + std::to_string(epoch) +
                            " (RMS distance " + std::to_string(std::sqrt(mean_sq)) + ")");
      }
    }
    model.sphere.radius_sq = update_radius(dist, cfg.nu);

    const double loss = svdd_value(dist, model.sphere.radius_sq, cfg.nu, cfg.weight_decay, sq_norm(params));
    if (!std::isfinite(loss)) throw EvaluationError("one-class loss became non-finite at epoch " + std::to_string(epoch));
    std::size_t inside = 0;
    for (double d : dist) inside += d <= model.sphere.radius_sq ? 1 : 0;
    model.trace.loss.push_back(loss);
    model.trace.radius_sq.push_back(model.sphere.radius_sq);
    model.trace.coverage.push_back(static_cast<double>(inside) / static_cast<double>(k));
    model.epochs_run = epoch + 1;

    // Both criteria are minimised here; the monitor is negated.
    const double criterion = monitor ? -monitor(model) : loss;
    if (criterion < best) {
      best = criterion;
      stale = 0;
      if (monitor) best_model = model;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (best_model) {
    best_model->trace = model.trace;
    best_model->epochs_run = model.epochs_run;
    return *std::move(best_model);
  }
  return model;
}

Detection detect(const gae::GraphInput& graph, const OccModel& model, std::string id) {
  if (graph.features.rank() != 2 || graph.features.dim(1) != model.encoder.in_width()) {
    throw DimensionError("graph feature width does not match the encoder input width");
  }
  Detection d;
  d.id = std::move(id);
  d.distance_sq = squared_distance(embed(graph, model.encoder), model.sphere.center);
  d.score = d.distance_sq - model.sphere.radius_sq;
  d.backdoor = d.score > 0.0;
  return d;
}

void save_occ(const std::filesystem::path& path, const OccModel& model, const std::string& encoder_file) {
  const nlohmann::json j = {{"format", "ocgec-occ"},
                            {"version", 1},
                            {"center", model.sphere.center},
                            {"radius_sq", model.sphere.radius_sq},
                            {"radius", model.sphere.radius()},
                            {"nu", model.nu},
                            {"encoder_file", encoder_file},
                            {"center_near_origin", model.center_near_origin},
                            {"epochs_run", model.epochs_run},
                            {"trace",
                             {{"loss", model.trace.loss},
                              {"radius_sq", model.trace.radius_sq},
                              {"coverage", model.trace.coverage}}}};
  io::write_text_file(path, j.dump(2) + "\n");
}

OccModel load_occ(const std::filesystem::path& path, std::string* encoder_file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ocgec-occ") throw FormatError(path.string() + ": not a sphere file");
    OccModel m;
    m.sphere.center = j.at("center").get<std::vector<double>>();
    m.sphere.radius_sq = j.at("radius_sq").get<double>();
    m.nu = j.at("nu").get<double>();
    m.center_near_origin = j.at("center_near_origin").get<bool>();
    m.epochs_run = j.at("epochs_run").get<std::size_t>();
    m.trace.loss = j.at("trace").at("loss").get<std::vector<double>>();
    m.trace.radius_sq = j.at("trace").at("radius_sq").get<std::vector<double>>();
    m.trace.coverage = j.at("trace").at("coverage").get<std::vector<double>>();
    const auto ref = j.at("encoder_file").get<std::string>();
    if (encoder_file != nullptr) *encoder_file = ref;
    const std::filesystem::path enc_path = std::filesystem::path(ref).is_absolute() ? std::filesystem::path(ref)
                                                                                   : path.parent_path() / ref;
    m.encoder = gae::load_gae(enc_path).encoder;
    if (m.sphere.radius_sq < 0.0) throw FormatError(path.string() + ": negative radius");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed sphere file: " + e.what());
  }
}

}  // namespace ocgec::occ
