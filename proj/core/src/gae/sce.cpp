#include "ocgec/gae/sce.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ocgec/error.hpp"
#include "ocgec/numerics/kernels.hpp"

namespace ocgec::gae {

using numerics::Tensor;
using numerics::Var;

void SceConfig::validate() const {
  if (!(gamma >= 1.0)) throw SpecError("SCE exponent must be at least 1");
  if (!(delta > 0.0)) throw SpecError("SCE norm floor must be positive");
}

namespace {

struct RowTerms {
  double dot, norm_x, norm_y, a, b, cos, gap;  // gap = 1 − cos, clamped at 0
};

RowTerms row_terms(const double* x, const double* y, std::size_t d, double delta) {
  RowTerms t{};
  t.dot = numerics::kernels::dot(x, y, d);
  t.norm_x = std::sqrt(numerics::kernels::dot(x, x, d));
  t.norm_y = std::sqrt(numerics::kernels::dot(y, y, d));
  t.a = std::max(t.norm_x, delta);
  t.b = std::max(t.norm_y, delta);
  t.cos = t.dot / (t.a * t.b);
  t.gap = std::max(0.0, 1.0 - t.cos);
  return t;
}

void check_inputs(const Tensor& x, const Tensor& y, std::span<const std::size_t> rows, const SceConfig& cfg) {
  cfg.validate();
  numerics::require_same_shape(x, y, "sce_loss");
  if (x.rank() != 2) throw DimensionError("sce_loss expects N×d matrices");
  if (rows.empty()) throw SpecError("sce_loss needs at least one masked row");
  for (std::size_t r : rows) {
    if (r >= x.dim(0)) throw PlanError("masked row " + std::to_string(r) + " out of range");
  }
}

}  // namespace

double sce_value(const Tensor& target, const Tensor& reconstruction, std::span<const std::size_t> rows,
                 const SceConfig& cfg) {
  check_inputs(target, reconstruction, rows, cfg);
  const std::size_t d = target.dim(1);
  double total = 0.0;
  for (std::size_t r : rows) {
    total += std::pow(row_terms(target.data() + r * d, reconstruction.data() + r * d, d, cfg.delta).gap, cfg.gamma);
  }
  return total / static_cast<double>(rows.size());
}

Var sce_loss(Var target, Var reconstruction, std::span<const std::size_t> rows, const SceConfig& cfg) {
  const Tensor& x = target.value();
  const Tensor& y = reconstruction.value();
  const double value = sce_value(x, y, rows, cfg);
  std::vector<std::size_t> kept(rows.begin(), rows.end());
  return target.tape().record(
      Tensor::scalar(value), {target, reconstruction},
      [&x, &y, kept = std::move(kept), cfg](const Tensor& g, std::span<Tensor* const> gi) {
        const std::size_t d = x.dim(1);
        const double scale = g[0] / static_cast<double>(kept.size());
        for (std::size_t r : kept) {
          const double* xr = x.data() + r * d;
          const double* yr = y.data() + r * d;
          const RowTerms t = row_terms(xr, yr, d, cfg.delta);
          // d(gap^γ) = −γ·gap^(γ−1)·d(cos)
          const double outer = -scale * cfg.gamma * (cfg.gamma == 1.0 ? 1.0 : std::pow(t.gap, cfg.gamma - 1.0));
          if (t.gap == 0.0 && cfg.gamma > 1.0) continue;
          const double inv_ab = 1.0 / (t.a * t.b);
          if (gi[1] != nullptr) {
            // ∂cos/∂y = x/(ab) − cos·y/‖y‖² when ‖y‖ > δ, else x/(ab).
            const double ny = t.norm_y > cfg.delta ? t.cos / (t.norm_y * t.norm_y) : 0.0;
            double* out = gi[1]->data() + r * d;
            for (std::size_t j = 0; j < d; ++j) out[j] += outer * (xr[j] * inv_ab - ny * yr[j]);
          }
          if (gi[0] != nullptr) {
            const double nx = t.norm_x > cfg.delta ? t.cos / (t.norm_x * t.norm_x) : 0.0;
            double* out = gi[0]->data() + r * d;
            for (std::size_t j = 0; j < d; ++j) out[j] += outer * (yr[j] * inv_ab - nx * xr[j]);
          }
        }
      });
}

}  // namespace ocgec::gae
