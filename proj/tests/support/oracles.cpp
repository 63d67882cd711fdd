#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace ocgec::oracle {

std::vector<double> adam_quadratic_trace(double x0, double a, double b, double lr, int steps,
                                         double beta1, double beta2, double eps) {
  std::vector<double> trace;
  double x = x0, m = 0.0, v = 0.0;
  double b1t = 1.0, b2t = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double g = a * (x - b);
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    b1t *= beta1;
    b2t *= beta2;
    x -= lr * (m / (1.0 - b1t)) / (std::sqrt(v / (1.0 - b2t)) + eps);
    trace.push_back(x);
  }
  return trace;
}

std::size_t LinearProbe::predict(const std::vector<double>& x) const {
  std::size_t best = 0;
  double best_score = -1e300;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    double z = biases[k];
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[k][j] * x[j];
    if (z > best_score) {
      best_score = z;
      best = k;
    }
  }
  return best;
}

LinearProbe fit_linear_probe(const std::vector<std::vector<double>>& xs, const std::vector<std::size_t>& ys,
                             std::size_t num_classes, int iterations, double lr) {
  const std::size_t n = xs.size();
  const std::size_t d = xs.front().size();
  LinearProbe probe{std::vector<std::vector<double>>(num_classes, std::vector<double>(d, 0.0)),
                    std::vector<double>(num_classes, 0.0)};
  std::vector<double> z(num_classes);
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::vector<double>> gw(num_classes, std::vector<double>(d, 0.0));
    std::vector<double> gb(num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double zmax = -1e300;
      for (std::size_t k = 0; k < num_classes; ++k) {
        z[k] = probe.biases[k];
        for (std::size_t j = 0; j < d; ++j) z[k] += probe.weights[k][j] * xs[i][j];
        zmax = std::max(zmax, z[k]);
      }
      double total = 0.0;
      for (std::size_t k = 0; k < num_classes; ++k) {
        z[k] = std::exp(z[k] - zmax);
        total += z[k];
      }
      for (std::size_t k = 0; k < num_classes; ++k) {
        const double r = z[k] / total - (k == ys[i] ? 1.0 : 0.0);
        gb[k] += r;
        for (std::size_t j = 0; j < d; ++j) gw[k][j] += r * xs[i][j];
      }
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
      probe.biases[k] -= lr * gb[k] / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) probe.weights[k][j] -= lr * gw[k][j] / static_cast<double>(n);
    }
  }
  return probe;
}

double sce_scalar(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
                  const std::vector<std::size_t>& rows, double gamma, double delta) {
  double total = 0.0;
  for (std::size_t r : rows) {
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t j = 0; j < x[r].size(); ++j) {
      xy += x[r][j] * y[r][j];
      xx += x[r][j] * x[r][j];
      yy += y[r][j] * y[r][j];
    }
    const double c = xy / (std::max(std::sqrt(xx), delta) * std::max(std::sqrt(yy), delta));
    total += std::pow(1.0 - c, gamma);
  }
  return total / static_cast<double>(rows.size());
}

double svdd_scalar(const std::vector<std::vector<double>>& embeddings, const std::vector<double>& center,
                   double radius_sq, double nu, double weight_decay, const std::vector<std::vector<double>>& weights) {
  double hinge = 0.0;
  for (const auto& e : embeddings) {
    double d = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) d += (e[j] - center[j]) * (e[j] - center[j]);
    if (d > radius_sq) hinge += d - radius_sq;
  }
  double norm = 0.0;
  for (const auto& w : weights) {
    for (double v : w) norm += v * v;
  }
  return radius_sq + hinge / (nu * static_cast<double>(embeddings.size())) + weight_decay / 2.0 * norm;
}

double nearest_rank(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double need = q * static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // Count of values ≤ values[i], including later ties.
    std::size_t count = i + 1;
    while (count < values.size() && values[count] == values[i]) ++count;
    if (static_cast<double>(count) >= need) return values[i];
  }
  return values.back();
}

}  // namespace ocgec::oracle
